import numpy as np
import pytest

from transfermetrics.errors import ValidationError
from transfermetrics.ranking import (
    ScenarioTable,
    evaluate_scenarios,
    kendall_tau,
    pearson_r,
    report_to_json,
    report_to_text,
    scatter_to_csv,
    top_k_hit,
    weighted_kendall_tau,
)


def brute_force_weighted_tau(scores, accuracies):
    """Independent pair-enumeration oracle; defines the tie semantics."""
    s = list(map(float, scores))
    a = list(map(float, accuracies))
    n = len(s)
    # average accuracy ranks, 0 = best
    order = sorted(range(n), key=lambda i: -a[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j < n and a[order[j]] == a[order[i]]:
            j += 1
        for t in range(i, j):
            ranks[order[t]] = (i + j - 1) / 2.0
        i = j
    if len(set(a)) == 1:
        return None
    num = den = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            w = 1.0 / (ranks[i] + 1) + 1.0 / (ranks[j] + 1)
            den += w
            ds = (s[i] > s[j]) - (s[i] < s[j])
            da = (a[i] > a[j]) - (a[i] < a[j])
            num += w * ds * da
    return num / den


def brute_force_tau_b(scores, accuracies):
    s = [float(v) for v in scores]
    a = [float(v) for v in accuracies]
    n = len(s)
    cmd = 0
    ties_s = ties_a = 0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            pairs += 1
            ds = (s[i] > s[j]) - (s[i] < s[j])
            da = (a[i] > a[j]) - (a[i] < a[j])
            cmd += ds * da
            ties_s += ds == 0
            ties_a += da == 0
    denom = ((pairs - ties_s) * (pairs - ties_a)) ** 0.5
    return None if denom == 0 else cmd / denom


def brute_force_pearson(scores, accuracies):
    s = np.asarray(scores, float)
    a = np.asarray(accuracies, float)
    if len(set(s)) == 1 or len(set(a)) == 1:
        return None
    return float(np.mean((s - s.mean()) * (a - a.mean())) / (s.std() * a.std()))


class TestWeightedTau:
    def test_perfect_ranking(self):
        assert weighted_kendall_tau([1, 2, 3, 4], [0.1, 0.2, 0.3, 0.4]) == pytest.approx(1.0)

    def test_reversed_ranking(self):
        assert weighted_kendall_tau([4, 3, 2, 1], [0.1, 0.2, 0.3, 0.4]) == pytest.approx(-1.0)

    def test_degenerate_accuracies(self):
        assert weighted_kendall_tau([1, 2, 3], [0.5, 0.5, 0.5]) is None

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = rng.integers(2, 9)
            s = rng.integers(0, 5, n).astype(float)  # integer grid forces ties
            a = rng.integers(0, 5, n) / 10.0
            expected = brute_force_weighted_tau(s, a)
            got = weighted_kendall_tau(s, a)
            if expected is None:
                assert got is None
            else:
                assert got == pytest.approx(expected, abs=1e-12)

    def test_reversal_negates_without_ties(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = 6
            s = rng.permutation(n).astype(float)
            a = (rng.permutation(n) + 1) / 10.0
            fwd = weighted_kendall_tau(s, a)
            rev = weighted_kendall_tau(-s, a)
            assert rev == pytest.approx(-fwd, abs=1e-12)

    def test_invariant_to_monotone_transforms(self):
        rng = np.random.default_rng(2)
        s = rng.standard_normal(7)
        a = rng.uniform(0, 1, 7)
        base = weighted_kendall_tau(s, a)
        for f in (np.exp, lambda x: 3 * x + 11, lambda x: x**3):
            assert weighted_kendall_tau(f(s), a) == pytest.approx(base, abs=1e-12)


class TestTauAndPearson:
    def test_tau_reversal(self):
        a = np.array([0.1, 0.4, 0.2, 0.9])
        assert kendall_tau(-a, a) == pytest.approx(-1.0)

    def test_pearson_affine(self):
        s = np.array([0.0, 1.0, 2.0, 5.0])
        assert pearson_r(s, (2 * s + 1) / 12) == pytest.approx(1.0)

    def test_match_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = rng.integers(2, 7)
            s = rng.integers(0, 4, n).astype(float)
            a = rng.integers(0, 4, n) / 4.0
            for impl, oracle in ((kendall_tau, brute_force_tau_b),
                                 (pearson_r, brute_force_pearson)):
                expected = oracle(s, a)
                got = impl(s, a)
                if expected is None:
                    assert got is None
                else:
                    assert got == pytest.approx(expected, abs=1e-12)

    def test_degenerate(self):
        assert kendall_tau([1, 1, 1], [0.1, 0.2, 0.3]) is None
        assert pearson_r([1.0, 2.0], [0.5, 0.5]) is None

    def test_pearson_affine_invariance(self):
        rng = np.random.default_rng(4)
        s = rng.standard_normal(8)
        a = rng.uniform(0, 1, 8)
        base = pearson_r(s, a)
        assert pearson_r(5 * s + 2, a) == pytest.approx(base, abs=1e-12)


def table(rows, kind="fixed-target", sid="scn"):
    return ScenarioTable(sid, kind, tuple(rows))


class TestTopK:
    def test_argmax_agreement(self):
        t = table([("a", 3.0, 0.9), ("b", 2.0, 0.5), ("c", 1.0, 0.1)])
        assert top_k_hit(t, 1) is True

    def test_third_by_score(self):
        t = table([("a", 3.0, 0.2), ("b", 2.0, 0.5), ("c", 1.0, 0.9)])
        assert top_k_hit(t, 1) is False
        assert top_k_hit(t, 3) is True

    def test_score_tie_lexicographic(self):
        # 'a' and 'b' tie at the top score; lexicographic order keeps 'a'
        t = table([("a", 2.0, 0.9), ("b", 2.0, 0.5), ("c", 1.0, 0.1)])
        assert top_k_hit(t, 1) is True
        t2 = table([("a", 2.0, 0.5), ("b", 2.0, 0.9), ("c", 1.0, 0.1)])
        assert top_k_hit(t2, 1) is False

    def test_k_larger_than_rows(self):
        t = table([("a", 1.0, 0.5), ("b", 2.0, 0.6)])
        with pytest.raises(ValueError):
            top_k_hit(t, 3)


class TestEvaluate:
    def test_perfect_single_scenario(self):
        t = table([("a", 1.0, 0.1), ("b", 2.0, 0.5), ("c", 3.0, 0.9)])
        report = evaluate_scenarios([t])
        s = report.scenarios[0]
        assert s.tau_weighted == pytest.approx(1.0)
        assert s.top1_hit is True

    def test_average_of_two(self):
        t1 = table([("a", 1.0, 0.1), ("b", 2.0, 0.9)], sid="s1")
        # tau_w = 0: one concordant + one discordant pair, equal weights
        t2 = table([("a", 1.0, 0.1), ("b", 2.0, 0.9), ("c", 3.0, 0.5),
                    ("d", 0.5, 0.45)], sid="s2")
        r1 = evaluate_scenarios([t1])
        assert r1.aggregates["fixed-target"]["tau_weighted"] == pytest.approx(1.0)
        both = evaluate_scenarios([t1, t2])
        tw2 = both.scenarios[1].tau_weighted
        assert both.aggregates["fixed-target"]["tau_weighted"] == pytest.approx(
            (1.0 + tw2) / 2
        )

    def test_degenerate_flagged_and_excluded(self):
        good = table([("a", 1.0, 0.1), ("b", 2.0, 0.9)], sid="good")
        degen = table([("a", 1.0, 0.5), ("b", 2.0, 0.5)], sid="degen")
        report = evaluate_scenarios([good, degen])
        assert report.degenerate_ids == ("degen",)
        assert report.aggregates["fixed-target"]["scenarios"] == 1

    def test_hand_summed_averages(self):
        rng = np.random.default_rng(5)
        tables = []
        for i in range(17):
            rows = [(f"p{j}", float(rng.standard_normal()), float(rng.uniform(0, 1)))
                    for j in range(5)]
            tables.append(table(rows, kind="fixed-source", sid=f"s{i}"))
        report = evaluate_scenarios(tables)
        taus = [weighted_kendall_tau([r[1] for r in t.rows], [r[2] for r in t.rows])
                for t in tables]
        assert report.aggregates["fixed-source"]["tau_weighted"] == pytest.approx(
            np.mean(taus), abs=1e-12
        )

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValidationError):
            table([("a", 1.0, 0.2), ("a", 2.0, 0.5)])


class TestRenders:
    def _report(self):
        t = table([("a", 1.0, 0.1), ("b", 2.0, 0.5), ("c", 3.0, 0.9)])
        return evaluate_scenarios([t])

    def test_json_parses(self):
        import json
        doc = json.loads(report_to_json(self._report()))
        assert doc["scenarios"][0]["tau_weighted"] == pytest.approx(1.0)

    def test_text_contains_rows(self):
        text = report_to_text(self._report())
        assert "scn" in text and "average" in text

    def test_scatter_csv(self):
        csv_text = scatter_to_csv(self._report(), "scn")
        lines = csv_text.strip().splitlines()
        assert lines[0] == "pair_id,score,accuracy"
        assert len(lines) == 4
