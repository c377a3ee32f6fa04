import json

import numpy as np
import pytest

from earlir.evaluation import (
    CmcCurve,
    cmc,
    eer,
    perfect_rank,
    read_report_json,
    report,
    split_scores,
    write_report_json,
)
from earlir.matching import ScoreMatrix


def _matrix(scores, probe_labels, gallery_labels, method="m"):
    scores = np.asarray(scores, dtype=float)
    return ScoreMatrix(
        method=method,
        probe_ids=tuple(f"p{i}" for i in range(scores.shape[0])),
        gallery_ids=tuple(f"g{i}" for i in range(scores.shape[1])),
        probe_labels=tuple(probe_labels),
        gallery_labels=tuple(gallery_labels),
        scores=scores,
    )


def _random_matrix(rng, n_probes=20, n_gallery=8):
    gallery_labels = [f"s{i}" for i in range(n_gallery)]
    probe_labels = [gallery_labels[int(rng.integers(n_gallery))] for _ in range(n_probes)]
    scores = rng.uniform(0.0, 4.0, size=(n_probes, n_gallery))
    return _matrix(scores, probe_labels, gallery_labels)


def _eer_bruteforce(genuine, impostor):
    """Independent oracle: direct counting at every candidate threshold."""
    candidates = [-np.inf] + sorted(set(list(genuine) + list(impostor)))
    best = None
    for t in candidates:
        far = sum(1 for s in impostor if s <= t) / len(impostor)
        frr = sum(1 for s in genuine if s > t) / len(genuine)
        key = abs(far - frr)
        if best is None or key < best[0]:
            best = (key, 100.0 * (far + frr) / 2.0)
    return best[1]


class TestCmc:
    def test_strict_minimum_rank_one(self):
        m = _matrix([[0.1, 0.9], [0.8, 0.2]], ["s0", "s1"], ["s0", "s1"])
        assert cmc(m).rates[0] == 1.0

    def test_hand_ranked_single_probe(self):
        m = _matrix([[0.1, 0.2, 0.3]], ["s1"], ["s0", "s1", "s2"])
        assert cmc(m).rates.tolist() == [0.0, 1.0, 1.0]

    def test_tie_broken_by_column_index(self):
        m = _matrix([[0.5, 0.5]], ["s1"], ["s0", "s1"])
        assert cmc(m).rates.tolist() == [0.0, 1.0]
        m2 = _matrix([[0.5, 0.5]], ["s0"], ["s0", "s1"])
        assert cmc(m2).rates.tolist() == [1.0, 1.0]

    def test_monotone_terminal_one(self, rng):
        for _ in range(20):
            curve = cmc(_random_matrix(rng))
            assert np.all(np.diff(curve.rates) >= 0.0)
            assert curve.rates[-1] == 1.0

    def test_unknown_probe_label_rejected(self):
        m = _matrix([[0.5]], ["sX"], ["s0"])
        with pytest.raises(ValueError, match="absent"):
            cmc(m)


class TestPerfectRank:
    def test_hand_values(self):
        assert perfect_rank(CmcCurve(rates=np.array([1.0, 1.0, 1.0]))) == 1
        assert perfect_rank(CmcCurve(rates=np.array([0.0, 1.0, 1.0]))) == 2
        assert perfect_rank(CmcCurve(rates=np.array([0.5, 0.9, 1.0]))) == 3

    def test_never_reaching_one(self):
        with pytest.raises(ValueError, match="never"):
            perfect_rank(CmcCurve(rates=np.array([0.4, 0.9, 0.9])))

    def test_iff_rank_one_rate(self, rng):
        for _ in range(20):
            curve = cmc(_random_matrix(rng))
            assert (perfect_rank(curve) == 1) == (curve.rates[0] == 1.0)


class TestSplitScores:
    def test_one_gallery_entry_per_subject_counts(self, rng):
        gallery_labels = [f"s{i}" for i in range(81)]
        probe_labels = [f"s{i % 81}" for i in range(567)]
        m = _matrix(rng.uniform(size=(567, 81)), probe_labels, gallery_labels)
        genuine, impostor = split_scores(m)
        assert genuine.size == 567
        assert impostor.size == 567 * 80

    def test_one_by_one(self):
        genuine, impostor = split_scores(_matrix([[0.4]], ["s0"], ["s0"]))
        assert genuine.tolist() == [0.4]
        assert impostor.size == 0

    def test_column_permutation_invariant_multisets(self, rng):
        m = _random_matrix(rng, 10, 5)
        perm = rng.permutation(5)
        m2 = _matrix(m.scores[:, perm], m.probe_labels,
                     [m.gallery_labels[i] for i in perm])
        for a, b in zip(split_scores(m), split_scores(m2)):
            assert sorted(a.tolist()) == sorted(b.tolist())


class TestEer:
    def test_hand_examples(self):
        assert eer([0.1], [0.9]) == 0.0
        assert eer([0.9], [0.1]) == 100.0
        assert eer([0.1, 0.5], [0.3, 0.7]) == 50.0

    def test_matches_bruteforce_oracle(self, rng):
        for _ in range(50):
            genuine = rng.uniform(size=int(rng.integers(1, 30))).tolist()
            impostor = rng.uniform(0.2, 1.2, size=int(rng.integers(1, 30))).tolist()
            assert abs(eer(genuine, impostor) - _eer_bruteforce(genuine, impostor)) <= 1e-12

    def test_empty_lists_rejected(self):
        with pytest.raises(ValueError, match="genuine"):
            eer([], [0.1])
        with pytest.raises(ValueError, match="impostor"):
            eer([0.1], [])


class TestReport:
    def test_perfectly_separable(self):
        scores = np.full((4, 4), 0.9)
        np.fill_diagonal(scores, 0.1)
        labels = [f"s{i}" for i in range(4)]
        rep = report(_matrix(scores, labels, labels), config={"seed": 1})
        assert rep.rank_rates == (100.0,) * 5
        assert rep.perfect_rank == 1
        assert rep.eer == 0.0

    def test_small_gallery_pads_rank_rates(self):
        m = _matrix([[0.1, 0.9]], ["s0"], ["s0", "s1"])
        rep = report(m, config={})
        assert len(rep.rank_rates) == 5
        assert rep.rank_rates[1:] == (100.0,) * 4

    def test_json_roundtrip_bit_exact_at_4_decimals(self, rng, tmp_path):
        rep = report(_random_matrix(rng), config={"seed": 3, "note": "x"})
        path = tmp_path / "r.json"
        write_report_json(rep, path)
        data = json.loads(path.read_text())
        assert data["rank_rates_pct"] == [round(r, 4) for r in rep.rank_rates]
        assert data["eer_pct"] == round(rep.eer, 4)
        back = read_report_json(path)
        assert back.method == rep.method
        assert back.perfect_rank == rep.perfect_rank
        assert back.parameters == rep.parameters
        # writing the parsed report again reproduces the bytes
        path2 = tmp_path / "r2.json"
        write_report_json(back, path2)
        assert path.read_bytes() == path2.read_bytes()


class TestMonotoneTransformInvariance:
    def test_cmc_perfect_rank_eer_invariant(self, rng):
        for _ in range(10):
            m = _random_matrix(rng)
            transformed = m.with_scores(np.exp(m.scores) - 0.5)
            assert np.array_equal(cmc(m).rates, cmc(transformed).rates)
            assert perfect_rank(cmc(m)) == perfect_rank(cmc(transformed))
            g1, i1 = split_scores(m)
            g2, i2 = split_scores(transformed)
            assert eer(g1, i1) == eer(g2, i2)
