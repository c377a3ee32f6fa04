"""Score normalization and weighted score-level fusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .matching import ScoreMatrix

WEIGHT_SUM_TOL = 1e-9
NORMALIZATION_SCOPES = ("global", "per_row")


@dataclass(frozen=True)
class FusionSpec:
    """Weighted combination of named score matrices."""

    components: Tuple[Tuple[str, float], ...]
    name: str = ""

    def __post_init__(self) -> None:
        comps = tuple((str(m), float(w)) for m, w in self.components)
        if not comps:
            raise ValueError("fusion needs at least one component")
        if any(w <= 0.0 for _, w in comps):
            raise ValueError("fusion weights must be positive")
        total = sum(w for _, w in comps)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"fusion weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", comps)
        if not self.name:
            object.__setattr__(self, "name", "+".join(m for m, _ in comps))

    @property
    def methods(self) -> List[str]:
        return [m for m, _ in self.components]


def min_max_normalize(matrix: ScoreMatrix, scope: str = "global") -> ScoreMatrix:
    """Rescale scores to [0, 1] by min-max; a constant range maps to all zeros.

    ``scope`` is "global" (one min/max over the whole matrix) or "per_row"
    (each probe row rescaled independently).
    """
    if scope not in NORMALIZATION_SCOPES:
        raise ValueError(f"unknown normalization scope {scope!r}")
    s = matrix.scores
    if scope == "global":
        lo, hi = float(s.min()), float(s.max())
        out = (s - lo) / (hi - lo) if hi > lo else np.zeros_like(s)
    else:
        lo = s.min(axis=1, keepdims=True)
        hi = s.max(axis=1, keepdims=True)
        span = hi - lo
        flat = span[:, 0] <= 0.0
        span[flat] = 1.0
        out = (s - lo) / span
        out[flat] = 0.0
    return matrix.with_scores(out)


def weighted_fuse(components: Sequence[Tuple[ScoreMatrix, float]]) -> ScoreMatrix:
    """Element-wise weighted sum of normalized score matrices.

    All inputs must share probe/gallery ids and labels, hold values already
    in [0, 1], and the weights must be positive and sum to 1.
    """
    spec = FusionSpec(components=tuple((m.method, w) for m, w in components))
    first = components[0][0]
    for matrix, _ in components[1:]:
        if (matrix.probe_ids != first.probe_ids
                or matrix.gallery_ids != first.gallery_ids
                or matrix.probe_labels != first.probe_labels
                or matrix.gallery_labels != first.gallery_labels):
            raise ValueError(f"component {matrix.method!r} axes do not match "
                             f"{first.method!r}")
    for matrix, _ in components:
        if float(matrix.scores.min()) < 0.0 or float(matrix.scores.max()) > 1.0:
            raise ValueError(f"component {matrix.method!r} is not min-max normalized")

    fused = np.zeros_like(first.scores)
    for matrix, weight in components:
        fused += weight * matrix.scores
    return first.with_scores(fused, method=spec.name)
