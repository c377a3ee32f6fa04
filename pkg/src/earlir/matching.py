"""Distance metrics and probe-by-gallery score matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .features import FeatureVector

METRICS = ("euclidean", "chi_square")


def euclidean(a: FeatureVector, b: FeatureVector) -> float:
    """Euclidean distance between two equal-length feature vectors."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return float(np.sqrt(np.sum((a.values - b.values) ** 2)))


def chi_square(a: FeatureVector, b: FeatureVector) -> float:
    """Chi-square histogram distance; bins with zero total are skipped."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if float(a.values.min()) < 0.0 or float(b.values.min()) < 0.0:
        raise ValueError("chi-square requires non-negative entries")
    total = a.values + b.values
    mask = total > 0.0
    diff = a.values[mask] - b.values[mask]
    return float(np.sum(diff * diff / total[mask]))


_METRIC_FN = {"euclidean": euclidean, "chi_square": chi_square}


@dataclass(frozen=True)
class ScoreMatrix:
    """Probes x gallery distance table; lower scores are better matches."""

    method: str
    probe_ids: Tuple[str, ...]
    gallery_ids: Tuple[str, ...]
    probe_labels: Tuple[str, ...]
    gallery_labels: Tuple[str, ...]
    scores: np.ndarray
    direction: str = field(default="lower-is-better")

    def __post_init__(self) -> None:
        if self.direction != "lower-is-better":
            raise ValueError("score direction is fixed to lower-is-better")
        scores = np.ascontiguousarray(np.asarray(self.scores, dtype=np.float64))
        if scores.ndim != 2:
            raise ValueError("scores must be a 2-D matrix")
        if scores.shape != (len(self.probe_ids), len(self.gallery_ids)):
            raise ValueError(
                f"scores shape {scores.shape} does not match "
                f"{len(self.probe_ids)} probes x {len(self.gallery_ids)} gallery"
            )
        if len(self.probe_labels) != len(self.probe_ids):
            raise ValueError("probe label count must match probe ids")
        if len(self.gallery_labels) != len(self.gallery_ids):
            raise ValueError("gallery label count must match gallery ids")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if scores.size and float(scores.min()) < 0.0:
            raise ValueError("scores must be >= 0")
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)

    @property
    def n_probes(self) -> int:
        return self.scores.shape[0]

    @property
    def n_gallery(self) -> int:
        return self.scores.shape[1]

    def with_scores(self, scores: np.ndarray, method: Optional[str] = None) -> "ScoreMatrix":
        """Same axes and labels, new score values."""
        return ScoreMatrix(
            method=self.method if method is None else method,
            probe_ids=self.probe_ids,
            gallery_ids=self.gallery_ids,
            probe_labels=self.probe_labels,
            gallery_labels=self.gallery_labels,
            scores=scores,
        )


Entry = Tuple[str, str, FeatureVector]  # (id, subject label, features)


def score_matrix(gallery: Sequence[Entry], probes: Sequence[Entry], metric: str,
                 method: Optional[str] = None) -> ScoreMatrix:
    """All pairwise probe-to-gallery distances under the chosen metric.

    Entries are evaluated pair by pair so the matrix agrees exactly with
    the scalar metric functions regardless of batching.
    """
    if metric not in _METRIC_FN:
        raise ValueError(f"unknown metric {metric!r} (expected one of {METRICS})")
    if not gallery:
        raise ValueError("gallery must be non-empty")
    dims = {len(vec) for _, _, vec in list(gallery) + list(probes)}
    if len(dims) > 1:
        raise ValueError(f"mixed feature dimensions: {sorted(dims)}")
    fn = _METRIC_FN[metric]

    scores = np.empty((len(probes), len(gallery)))
    for r, (_, _, pvec) in enumerate(probes):
        for c, (_, _, gvec) in enumerate(gallery):
            scores[r, c] = fn(pvec, gvec)

    tags = {vec.method for _, _, vec in list(gallery) + list(probes)}
    tag = method if method is not None else (tags.pop() if len(tags) == 1 else "mixed")
    return ScoreMatrix(
        method=tag,
        probe_ids=tuple(pid for pid, _, _ in probes),
        gallery_ids=tuple(gid for gid, _, _ in gallery),
        probe_labels=tuple(lab for _, lab, _ in probes),
        gallery_labels=tuple(lab for _, lab, _ in gallery),
        scores=scores,
    )


# ---------------------------------------------------------------------------
# CSV persistence: matrix file plus a label sidecar


def labels_sidecar_path(scores_path) -> Path:
    path = Path(scores_path)
    return path.with_name(path.stem + ".labels.csv")


def format_score_csv(matrix: ScoreMatrix) -> str:
    """Score CSV text: gallery ids across, probe ids down, 17 significant digits."""
    lines = ["probe_id," + ",".join(matrix.gallery_ids)]
    for r, pid in enumerate(matrix.probe_ids):
        row = ",".join(f"{v:.17g}" for v in matrix.scores[r])
        lines.append(f"{pid},{row}")
    return "\n".join(lines) + "\n"


def format_labels_csv(matrix: ScoreMatrix) -> str:
    """Sidecar CSV text mapping probe/gallery ids to subject labels."""
    side = ["axis,id,label"]
    side += [f"gallery,{i},{l}" for i, l in zip(matrix.gallery_ids, matrix.gallery_labels)]
    side += [f"probe,{i},{l}" for i, l in zip(matrix.probe_ids, matrix.probe_labels)]
    return "\n".join(side) + "\n"


def write_score_matrix(matrix: ScoreMatrix, path) -> None:
    """Write the score CSV and its id-to-label sidecar."""
    path = Path(path)
    path.write_text(format_score_csv(matrix), encoding="utf-8")
    labels_sidecar_path(path).write_text(format_labels_csv(matrix), encoding="utf-8")


def read_score_matrix(path, method: Optional[str] = None) -> ScoreMatrix:
    """Load a score CSV and its label sidecar."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2 or rows[0][0] != "probe_id":
        raise ValueError(f"{path}: malformed score matrix header")
    gallery_ids = tuple(rows[0][1:])
    probe_ids = []
    scores: List[List[float]] = []
    for row in rows[1:]:
        if len(row) != 1 + len(gallery_ids):
            raise ValueError(f"{path}: row {row[0]!r} has {len(row) - 1} scores, "
                             f"expected {len(gallery_ids)}")
        probe_ids.append(row[0])
        try:
            scores.append([float(v) for v in row[1:]])
        except ValueError:
            raise ValueError(f"{path}: non-numeric score in row {row[0]!r}") from None

    sidecar = labels_sidecar_path(path)
    if not sidecar.exists():
        raise ValueError(f"labels required: sidecar {sidecar} not found")
    labels = {}
    with sidecar.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or {"axis", "id", "label"} - set(reader.fieldnames):
            raise ValueError(f"{sidecar}: malformed label sidecar")
        for row in reader:
            labels[(row["axis"], row["id"])] = row["label"]
    try:
        gallery_labels = tuple(labels[("gallery", i)] for i in gallery_ids)
        probe_labels = tuple(labels[("probe", i)] for i in probe_ids)
    except KeyError as exc:
        raise ValueError(f"{sidecar}: missing label for {exc.args[0]}") from None

    return ScoreMatrix(
        method=method if method is not None else path.stem,
        probe_ids=tuple(probe_ids),
        gallery_ids=gallery_ids,
        probe_labels=probe_labels,
        gallery_labels=gallery_labels,
        scores=np.array(scores, dtype=np.float64).reshape(len(probe_ids), len(gallery_ids)),
    )
