"""Identification and verification metrics: CMC, rank-k, perfect rank, EER."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .matching import ScoreMatrix

N_REPORT_RANKS = 5
_JSON_DECIMALS = 4


@dataclass(frozen=True)
class CmcCurve:
    """Cumulative match rates; rates[k-1] = fraction of probes ranked <= k."""

    rates: np.ndarray

    def __post_init__(self) -> None:
        rates = np.ascontiguousarray(np.asarray(self.rates, dtype=np.float64))
        if rates.ndim != 1 or rates.size == 0:
            raise ValueError("rates must be a non-empty vector")
        if float(rates.min()) < 0.0 or float(rates.max()) > 1.0:
            raise ValueError("rates must lie in [0, 1]")
        if np.any(np.diff(rates) < 0.0):
            raise ValueError("rates must be non-decreasing")
        rates.flags.writeable = False
        object.__setattr__(self, "rates", rates)


@dataclass(frozen=True)
class EvalReport:
    """One summary row: rank-1..5 rates (%), perfect rank, EER (%), config."""

    method: str
    rank_rates: Tuple[float, ...]
    perfect_rank: int
    eer: float
    parameters: Dict

    def to_json_dict(self) -> Dict:
        return {
            "method": self.method,
            "rank_rates_pct": [round(r, _JSON_DECIMALS) for r in self.rank_rates],
            "perfect_rank": self.perfect_rank,
            "eer_pct": round(self.eer, _JSON_DECIMALS),
            "config": self.parameters,
        }


def probe_ranks(matrix: ScoreMatrix) -> np.ndarray:
    """1-based rank of each probe's true gallery entry.

    Gallery columns are ordered per probe by ascending score, ties broken by
    ascending column index; the rank is the best position of a column whose
    label matches the probe's.
    """
    gallery_labels = np.array(matrix.gallery_labels, dtype=object)
    ranks = np.empty(matrix.n_probes, dtype=np.int64)
    for r in range(matrix.n_probes):
        order = np.argsort(matrix.scores[r], kind="stable")
        hits = np.nonzero(gallery_labels[order] == matrix.probe_labels[r])[0]
        if hits.size == 0:
            raise ValueError(f"probe label {matrix.probe_labels[r]!r} absent from gallery")
        ranks[r] = int(hits[0]) + 1
    return ranks


def cmc(matrix: ScoreMatrix) -> CmcCurve:
    """Cumulative match characteristic over ranks 1..|gallery|."""
    if matrix.n_probes == 0:
        raise ValueError("matrix has no probes")
    ranks = probe_ranks(matrix)
    counts = np.bincount(ranks, minlength=matrix.n_gallery + 1)[1:]
    return CmcCurve(rates=np.cumsum(counts) / matrix.n_probes)


def perfect_rank(curve: CmcCurve) -> int:
    """Smallest rank at which the CMC reaches 1.0."""
    hits = np.nonzero(curve.rates >= 1.0)[0]
    if hits.size == 0:
        raise ValueError("CMC curve never reaches 1.0")
    return int(hits[0]) + 1


def split_scores(matrix: ScoreMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Genuine scores (probe label == gallery label) and all impostor scores."""
    probe_labels = np.array(matrix.probe_labels, dtype=object)[:, None]
    gallery_labels = np.array(matrix.gallery_labels, dtype=object)[None, :]
    genuine_mask = probe_labels == gallery_labels
    return matrix.scores[genuine_mask], matrix.scores[~genuine_mask]


def eer(genuine: Sequence[float], impostor: Sequence[float]) -> float:
    """Equal error rate in percent for accept-if-score-<=-threshold.

    Sweeps thresholds over the sorted union of all scores plus -inf; at the
    threshold minimizing |FAR - FRR| (ties to the smaller threshold) returns
    100 * (FAR + FRR) / 2.
    """
    genuine = np.asarray(genuine, dtype=np.float64)
    impostor = np.asarray(impostor, dtype=np.float64)
    if genuine.size == 0:
        raise ValueError("genuine score list is empty")
    if impostor.size == 0:
        raise ValueError("impostor score list is empty")

    thresholds = np.concatenate(([-np.inf], np.unique(np.concatenate([genuine, impostor]))))
    gen_sorted = np.sort(genuine)
    imp_sorted = np.sort(impostor)
    far = np.searchsorted(imp_sorted, thresholds, side="right") / impostor.size
    # counted directly as (#genuine > t) / n so fractions are exact quotients
    frr = (genuine.size - np.searchsorted(gen_sorted, thresholds, side="right")) / genuine.size
    best = int(np.argmin(np.abs(far - frr)))  # argmin takes the first, smallest t
    return float(100.0 * (far[best] + frr[best]) / 2.0)


def report(matrix: ScoreMatrix, config: Dict) -> EvalReport:
    """Rank-1..5 rates, perfect rank and EER for one score matrix.

    When the gallery has fewer than 5 entries the trailing rank rates repeat
    the terminal CMC value.
    """
    curve = cmc(matrix)
    rates = curve.rates
    padded = [float(rates[min(i, rates.size - 1)]) for i in range(N_REPORT_RANKS)]
    genuine, impostor = split_scores(matrix)
    return EvalReport(
        method=matrix.method,
        rank_rates=tuple(100.0 * r for r in padded),
        perfect_rank=perfect_rank(curve),
        eer=eer(genuine, impostor),
        parameters=dict(config),
    )


def write_report_json(rep: EvalReport, path) -> None:
    Path(path).write_text(
        json.dumps(rep.to_json_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_report_json(path) -> EvalReport:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return EvalReport(
        method=data["method"],
        rank_rates=tuple(data["rank_rates_pct"]),
        perfect_rank=int(data["perfect_rank"]),
        eer=float(data["eer_pct"]),
        parameters=data["config"],
    )


def write_cmc_csv(curve: CmcCurve, path) -> None:
    lines = ["rank,rate"]
    lines += [f"{k + 1},{rate:.17g}" for k, rate in enumerate(curve.rates)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def summary_lines(reports: Sequence[EvalReport]) -> List[str]:
    """summary.csv rows mirroring the evaluation column layout."""
    lines = ["method,rank1,rank2,rank3,rank4,rank5,perfect_rank,eer"]
    for rep in reports:
        rr = ",".join(f"{r:.4f}" for r in rep.rank_rates)
        lines.append(f"{rep.method},{rr},{rep.perfect_rank},{rep.eer:.4f}")
    return lines
