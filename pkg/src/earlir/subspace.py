"""Linear subspace learning: PCA, Fisherfaces LDA, discriminative common vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .features import FeatureVector

_RANK_TOL = 1e-10      # eigenvalues below tol * largest count as rank-deficient
_GS_DROP_TOL = 1e-10   # Gram-Schmidt residual drop tolerance, relative
_MODEL_VERSION = 1

KindOrMax = Union[int, str]


@dataclass(frozen=True)
class LabeledTrainingSet:
    """Equal-length training vectors with class labels."""

    vectors: np.ndarray  # (N, D)
    labels: tuple

    def __post_init__(self) -> None:
        vecs = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if vecs.ndim != 2 or vecs.shape[0] < 2:
            raise ValueError("training set needs at least 2 vectors of equal length")
        labels = tuple(self.labels)
        if len(labels) != vecs.shape[0]:
            raise ValueError(f"{len(labels)} labels for {vecs.shape[0]} vectors")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def classes(self) -> List:
        """Distinct labels in first-appearance order."""
        out, seen = [], set()
        for lab in self.labels:
            if lab not in seen:
                seen.add(lab)
                out.append(lab)
        return out

    def class_indices(self, label) -> np.ndarray:
        return np.array([i for i, lab in enumerate(self.labels) if lab == label])


@dataclass(frozen=True)
class SubspaceModel:
    """Learned projection: y = basis^T (x - mean), basis columns orthonormal."""

    kind: str
    mean: np.ndarray          # (D,)
    basis: np.ndarray         # (D, k)
    eigenvalues: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("pca", "lda", "dcva"):
            raise ValueError(f"unknown subspace kind {self.kind!r}")
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64))
        basis = np.ascontiguousarray(np.asarray(self.basis, dtype=np.float64))
        if basis.ndim != 2 or basis.shape[1] < 1 or basis.shape[1] > basis.shape[0]:
            raise ValueError(f"basis must be D x k with 1 <= k <= D, got {basis.shape}")
        if mean.shape != (basis.shape[0],):
            raise ValueError("mean length must match basis rows")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-8:
            raise ValueError("basis columns are not orthonormal")
        mean.flags.writeable = False
        basis.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def _orthonormalize(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Modified Gram-Schmidt with reorthogonalization; near-dependent inputs
    (residual below _GS_DROP_TOL relative to the largest input norm) drop out.

    Returns a (D, r) matrix, r possibly 0.
    """
    cols: List[np.ndarray] = []
    scale = max((float(np.linalg.norm(v)) for v in vectors), default=0.0)
    if scale == 0.0:
        return np.zeros((len(vectors[0]) if vectors else 0, 0))
    for v in vectors:
        w = np.array(v, dtype=np.float64)
        for _ in range(2):
            for q in cols:
                w -= (q @ w) * q
        norm = float(np.linalg.norm(w))
        if norm > _GS_DROP_TOL * scale:
            cols.append(w / norm)
    if not cols:
        return np.zeros((len(vectors[0]), 0))
    return np.column_stack(cols)


def _pca_eigen(centered: np.ndarray, data_scale: float):
    """Descending eigenpairs of the sample covariance of centered data.

    Uses the N x N Gram (snapshot) form when N < D. Directions whose
    eigenvalue falls below the relative rank tolerance, or below the
    cancellation-noise floor set by the raw data magnitude, are excluded.
    Returns (eigenvalues, components) with unit-norm columns.
    """
    n, d = centered.shape
    floor = (1e-12 * max(1.0, data_scale)) ** 2
    if n < d:
        gram = centered @ centered.T
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        keep = evals > max(_RANK_TOL * float(evals[0]), floor * (n - 1))
        evals, evecs = evals[keep], evecs[:, keep]
        if evals.size == 0:
            return np.empty(0), np.zeros((d, 0))
        components = (centered.T @ evecs) / np.sqrt(evals)
        return evals / (n - 1), components
    cov = (centered.T @ centered) / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    keep = evals > max(_RANK_TOL * float(evals[0]), floor)
    return evals[keep], evecs[:, keep]


def _resolve_k(k: KindOrMax, effective_rank: int) -> int:
    if isinstance(k, str):
        if k != "max":
            raise ValueError(f"k must be a positive integer or 'max', got {k!r}")
        return effective_rank
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > effective_rank:
        raise ValueError(f"k={k} exceeds effective rank {effective_rank}")
    return k


def fit_pca(train: LabeledTrainingSet, k: KindOrMax = "max") -> SubspaceModel:
    """Principal components of the training data, descending variance."""
    mean = train.vectors.mean(axis=0)
    scale = float(np.abs(train.vectors).max())
    evals, components = _pca_eigen(train.vectors - mean, scale)
    if components.shape[1] == 0:
        raise ValueError("training data has effective rank 0 (constant set)")
    kk = _resolve_k(k, components.shape[1])
    return SubspaceModel(
        kind="pca",
        mean=mean,
        basis=_fix_signs(components[:, :kk]),
        eigenvalues=evals[:kk].copy(),
    )


def _require_class_sizes(train: LabeledTrainingSet, minimum: int) -> List:
    classes = train.classes()
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    for lab in classes:
        if len(train.class_indices(lab)) < minimum:
            raise ValueError(f"class {lab!r} has fewer than {minimum} samples")
    return classes


def fit_lda(train: LabeledTrainingSet, k: KindOrMax = "max") -> SubspaceModel:
    """Fisher discriminant directions via the PCA-then-LDA composition.

    The within-class scatter is ridge-regularized before solving the
    symmetric generalized eigenproblem; the composed map is re-orthonormalized
    so the returned basis is orthonormal in the original feature space.
    """
    classes = _require_class_sizes(train, minimum=2)
    n, c = train.n_samples, len(classes)
    if n <= c:
        raise ValueError(f"need more samples ({n}) than classes ({c})")

    mean = train.vectors.mean(axis=0)
    centered = train.vectors - mean
    _, components = _pca_eigen(centered, float(np.abs(train.vectors).max()))
    p = min(n - c, components.shape[1])
    if p < 1:
        raise ValueError("training data has effective rank 0 (constant set)")
    w_pca = components[:, :p]
    y = centered @ w_pca

    s_w = np.zeros((p, p))
    s_b = np.zeros((p, p))
    for lab in classes:
        rows = y[train.class_indices(lab)]
        m = rows.mean(axis=0)
        dev = rows - m
        s_w += dev.T @ dev
        s_b += rows.shape[0] * np.outer(m, m)

    eps = 1e-6 * float(np.trace(s_w)) / p
    if eps <= 0.0:
        eps = 1e-12 * max(float(np.trace(s_b)) / p, 1.0)
    evals, evecs = scipy.linalg.eigh(s_b, s_w + eps * np.eye(p))
    order = np.argsort(evals)[::-1]

    if isinstance(k, str):
        if k != "max":
            raise ValueError(f"k must be a positive integer or 'max', got {k!r}")
        m_out = c - 1
    else:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        m_out = min(k, c - 1)
    m_out = min(m_out, p)
    composed = w_pca @ evecs[:, order[:m_out]]
    basis = _orthonormalize(list(composed.T))
    if basis.shape[1] == 0:
        raise ValueError("discriminant directions are degenerate")
    return SubspaceModel(kind="lda", mean=mean, basis=_fix_signs(basis),
                         eigenvalues=np.sort(evals)[::-1][: basis.shape[1]].copy())


def fit_dcva(train: LabeledTrainingSet) -> SubspaceModel:
    """Discriminative common vectors projection.

    Orthonormalizes the within-class difference set to span the within-class
    scatter range, projects each class's first sample onto its orthogonal
    complement to get the class common vector, and returns an orthonormal
    basis of the common-vector difference set. Same-class training samples
    project to a single point.
    """
    classes = _require_class_sizes(train, minimum=2)
    n, c = train.n_samples, len(classes)
    if n - c < 1:
        raise ValueError("need at least one within-class difference vector")

    firsts = {}
    diffs: List[np.ndarray] = []
    for lab in classes:
        idx = train.class_indices(lab)
        first = train.vectors[idx[0]]
        firsts[lab] = first
        for j in idx[1:]:
            diffs.append(train.vectors[j] - first)

    u = _orthonormalize(diffs)  # spans range(S_w); may be empty if all duplicates

    commons = []
    for lab in classes:
        x = firsts[lab]
        commons.append(x - u @ (u.T @ x) if u.shape[1] else x.copy())

    basis = _orthonormalize([commons[i] - commons[0] for i in range(1, c)])
    if basis.shape[1] == 0:
        raise ValueError("all common vectors identical: no discriminative subspace")
    return SubspaceModel(kind="dcva", mean=np.zeros(train.dim), basis=_fix_signs(basis))


def project(model: SubspaceModel, vec: FeatureVector) -> FeatureVector:
    """Project a feature vector into the learned subspace."""
    if len(vec) != model.dim:
        raise ValueError(f"vector length {len(vec)} != model dimension {model.dim}")
    return FeatureVector(
        method=f"{vec.method}+{model.kind}",
        values=model.basis.T @ (vec.values - model.mean),
    )


def project_rows(model: SubspaceModel, rows: np.ndarray) -> np.ndarray:
    """Project an (N, D) stack of vectors; rows map independently."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.dim:
        raise ValueError(f"expected (N, {model.dim}) array, got {rows.shape}")
    return (rows - model.mean) @ model.basis


def save_model(model: SubspaceModel, path) -> None:
    """Persist a model to a flat .npz container."""
    np.savez(
        Path(path),
        version=np.array([_MODEL_VERSION]),
        kind=np.array(model.kind),
        mean=model.mean,
        basis=model.basis,
    )


def load_model(path) -> SubspaceModel:
    with np.load(Path(path)) as data:
        version = int(data["version"][0])
        if version != _MODEL_VERSION:
            raise ValueError(f"unsupported model version {version}")
        return SubspaceModel(
            kind=str(data["kind"]),
            mean=data["mean"],
            basis=data["basis"],
        )
