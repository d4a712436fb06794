import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subact.data import SubActionTrack, stable_seed
from subact.errors import ConfigError, LabelLookupError, UndefinedMetricError
from subact.oracle import (
    ErrorInjectedOracle,
    FileOracle,
    GroundTruthOracle,
    inject_errors,
    make_oracle,
    segmentation_accuracy,
    write_predictions,
)

CLASSES = list(range(1, 13))


def track(classes, width=3):
    return SubActionTrack(tuple((c, i * width, (i + 1) * width) for i, c in enumerate(classes)))


class TestInject:
    def test_rate_zero_identity(self):
        t = track([1, 2, 3])
        assert inject_errors(t, 0.0, 5, CLASSES) == t

    def test_rate_one_two_classes_flips_all(self):
        t = track([1, 2, 1, 1, 2])
        assert inject_errors(t, 1.0, 7, [1, 2]).classes == [2, 1, 2, 2, 1]

    def test_rate_one_never_keeps_true_class(self):
        t = track(CLASSES * 10)
        out = inject_errors(t, 1.0, 0, CLASSES)
        assert all(a != b for a, b in zip(out.classes, t.classes))

    @given(st.lists(st.sampled_from(CLASSES), max_size=12), st.floats(0, 1), st.integers(0, 2**32))
    def test_boundaries_and_count_preserved(self, classes, rate, seed):
        t = track(classes)
        out = inject_errors(t, rate, seed, CLASSES)
        assert [(a, b) for _, a, b in out.segments] == [(a, b) for _, a, b in t.segments]
        assert set(out.classes) <= set(CLASSES)

    def test_deterministic(self):
        t = track(CLASSES)
        assert inject_errors(t, 0.5, 9, CLASSES) == inject_errors(t, 0.5, 9, CLASSES)

    def test_corrupted_fraction_monte_carlo(self):
        # 10,000 segments spread over 2,500 per-sample seeds
        flipped = total = 0
        for s in range(2500):
            t = track([1 + (s % 12), 2, 3, 4])
            out = inject_errors(t, 0.4, stable_seed("mc", s), CLASSES)
            flipped += sum(a != b for a, b in zip(out.classes, t.classes))
            total += 4
        assert abs(flipped / total - 0.4) <= 0.02

    def test_replacement_uniform_over_others(self):
        counts = np.zeros(13)
        for s in range(6000):
            out = inject_errors(track([5]), 1.0, s, CLASSES)
            counts[out.classes[0]] += 1
        others = [c for c in CLASSES if c != 5]
        assert counts[5] == 0
        expected = 6000 / len(others)
        # chi-square against uniform, 10 dof; 99.9% critical value is 29.6
        chi2 = float(np.sum((counts[others] - expected) ** 2 / expected))
        assert chi2 < 29.6

    @pytest.mark.parametrize("rate", [-0.1, 1.1])
    def test_bad_rate(self, rate):
        with pytest.raises(ConfigError):
            inject_errors(track([1]), rate, 0, CLASSES)

    def test_needs_two_classes(self):
        with pytest.raises(ConfigError):
            inject_errors(track([1]), 0.5, 0, [1])


class TestAccuracy:
    def test_perfect(self):
        assert segmentation_accuracy(track([1, 2]), track([1, 2])) == 1.0

    def test_three_of_four(self):
        assert segmentation_accuracy(track([1, 2, 3, 9]), track([1, 2, 3, 4])) == 0.75

    def test_empty_truth(self):
        with pytest.raises(UndefinedMetricError):
            segmentation_accuracy(track([]), track([]))


class TestOracles:
    def test_ground_truth(self):
        t = track([3, 1])
        assert GroundTruthOracle().segment(None, t, "x") == t

    def test_error_rate_zero(self):
        t = track([3, 1])
        assert ErrorInjectedOracle(0.0, 1, CLASSES).segment(None, t, "x") == t

    def test_per_sample_seed(self):
        o = ErrorInjectedOracle(0.5, 1, CLASSES)
        t = track(CLASSES * 3)
        assert o.segment(None, t, "a") == o.segment(None, t, "a")
        assert o.segment(None, t, "a") != o.segment(None, t, "b")

    @pytest.mark.parametrize("rate", [0.2, 0.4, 0.6, 0.8])
    def test_accuracy_concentrates(self, rate):
        o = ErrorInjectedOracle(rate, 3, CLASSES)
        hits = n = 0
        for i in range(3000):
            t = track([1 + (i % 12), 1 + ((i + 5) % 12), 7, 8])
            hits += segmentation_accuracy(o.segment(None, t, f"s{i}"), t) * 4
            n += 4
        sigma = np.sqrt(rate * (1 - rate) / n)
        assert abs(hits / n - (1 - rate)) <= 2.5 * sigma

    def test_file_round_trip(self, tmp_path):
        preds = {"a": track([1, 2]), "b": track([4])}
        write_predictions(tmp_path / "p.jsonl", preds)
        o = FileOracle(tmp_path / "p.jsonl")
        assert o.segment(None, track([9]), "a") == preds["a"]
        assert o.segment(None, track([9]), "b") == preds["b"]

    def test_file_missing_sample(self, tmp_path):
        write_predictions(tmp_path / "p.jsonl", {"a": track([1])})
        with pytest.raises(LabelLookupError, match="zz"):
            FileOracle(tmp_path / "p.jsonl").segment(None, track([1]), "zz")

    def test_factory(self, tmp_path):
        assert isinstance(make_oracle(None, CLASSES), GroundTruthOracle)
        o = make_oracle({"kind": "error_injected", "rate": 0.2, "seed": 4}, CLASSES)
        assert o.describe() == {"kind": "error_injected", "rate": 0.2, "seed": 4}
        with pytest.raises(ConfigError):
            make_oracle({"kind": "psychic"}, CLASSES)
