import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_records
from oracles import score_oracle
from sounddiff.anomaly import (
    AnomalyResult,
    ScoringConfig,
    anomaly_score,
    calibrate_threshold,
    classify,
    leave_one_out_scores,
    percentile_linear,
)
from sounddiff.errors import InsufficientReferences, InvalidInput
from sounddiff.store import EmbeddingStore, SampleRecord, knn_search


def rec(sample_id, values):
    return SampleRecord(sample_id=sample_id, machine_type="pump", machine_id="id_00",
                        label="normal", split="train",
                        source_path=f"/data/{sample_id}.wav",
                        embedding=np.asarray(values, np.float32))


def line_store(positions):
    """1-D store: one record per position on the number line."""
    return EmbeddingStore([rec(f"p{i:03d}", [float(x)]) for i, x in enumerate(positions)])


class TestScoringConfig:
    def test_defaults(self):
        cfg = ScoringConfig()
        assert cfg.k == 4
        assert cfg.threshold_percentile == 0.90
        assert cfg.normalize is False

    @pytest.mark.parametrize("kwargs", [
        {"k": 0}, {"threshold_percentile": 0.0}, {"threshold_percentile": 1.5},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(InvalidInput):
            ScoringConfig(**kwargs)


class TestAnomalyScore:
    def test_identity_query_scores_zero(self):
        store = EmbeddingStore([rec("a", [3.0, 4.0]), rec("b", [10.0, 10.0])])
        result = anomaly_score([3.0, 4.0], store, ScoringConfig(k=1))
        assert result.score == 0.0
        assert result.neighbor_ids == ("a",)
        assert result.decision == "unscored"
        assert result.threshold is None

    def test_hand_computed_mean_of_two(self):
        store = EmbeddingStore([rec("a", [1.0, 0.0]), rec("b", [0.0, 1.0]),
                                rec("c", [3.0, 4.0])])
        result = anomaly_score([0.0, 0.0], store, ScoringConfig(k=2))
        assert result.score == pytest.approx(1.0, abs=1e-12)
        assert result.neighbor_ids == ("a", "b")

    def test_mean_of_four_smallest(self):
        # distances from the origin: 1, 2, 3, 4 plus two farther points
        store = line_store([1, 2, 3, 4, 9, 12])
        result = anomaly_score([0.0], store, ScoringConfig(k=4))
        assert result.score == pytest.approx(2.5, abs=1e-12)

    def test_insufficient_references(self):
        store = EmbeddingStore([rec("a", [1.0])])
        with pytest.raises(InsufficientReferences):
            anomaly_score([0.0], store, ScoringConfig(k=2))

    def test_neighbors_match_knn_search(self):
        rng = np.random.default_rng(5)
        records = make_records(rng, 30, 6)
        store = EmbeddingStore(records)
        query = rng.standard_normal(6).astype(np.float32)
        result = anomaly_score(query, store, ScoringConfig(k=5))
        assert list(result.neighbor_ids) == [sid for sid, _ in knn_search(store, query, 5)]


class TestThresholdCalibration:
    def test_identical_embeddings_threshold_zero(self):
        store = EmbeddingStore([rec(f"s{i}", [2.0, 2.0]) for i in range(6)])
        for k in (1, 2, 4):
            assert calibrate_threshold(store, ScoringConfig(k=k)) == 0.0

    def test_collinear_unit_spacing_max_percentile(self):
        store = line_store(range(1, 11))
        got = calibrate_threshold(store, ScoringConfig(k=1, threshold_percentile=1.0))
        assert got == pytest.approx(1.0, abs=1e-12)

    def test_too_few_records(self):
        store = EmbeddingStore([rec("a", [1.0]), rec("b", [2.0])])
        with pytest.raises(InsufficientReferences):
            calibrate_threshold(store, ScoringConfig(k=2))

    def test_loo_scores_match_per_sample_scoring(self):
        rng = np.random.default_rng(9)
        records = make_records(rng, 25, 5)
        store = EmbeddingStore(records)
        cfg = ScoringConfig(k=3)
        got = leave_one_out_scores(store, cfg)
        for r, loo in zip(records, got):
            expected = anomaly_score(r.embedding, store.without(r.sample_id), cfg).score
            assert loo == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestPercentileLinear:
    def test_median_of_four_interpolates(self):
        assert percentile_linear([1.0, 2.0, 3.0, 4.0], 0.5) == pytest.approx(2.5)

    def test_full_percentile_is_max(self):
        assert percentile_linear([3.0, 1.0, 2.0], 1.0) == 3.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50),
           st.floats(min_value=1e-6, max_value=1.0))
    def test_matches_numpy_linear_quantile(self, values, fraction):
        got = percentile_linear(values, fraction)
        expected = float(np.quantile(np.asarray(values, dtype=np.float64), fraction,
                                     method="linear"))
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-9)


class TestClassify:
    def test_above_threshold_is_anomalous(self):
        result = AnomalyResult("x", 5.0, ("a",))
        assert classify(result, 2.0).decision == "anomalous"

    def test_equal_threshold_is_normal(self):
        result = AnomalyResult("x", 2.0, ("a",))
        assert classify(result, 2.0).decision == "normal"

    def test_decisions_match_sign_oracle(self):
        store = line_store([0, 1, 2, 3, 10])
        cfg = ScoringConfig(k=1, threshold_percentile=0.5)
        threshold = calibrate_threshold(store, cfg)
        for value in (0.5, 2.5, 11.0):
            result = classify(anomaly_score([value], store, cfg), threshold)
            expected = "anomalous" if result.score > threshold else "normal"
            assert result.decision == expected


@st.composite
def scoring_case(draw):
    dim = draw(st.integers(min_value=1, max_value=8))
    n = draw(st.integers(min_value=1, max_value=40))
    k = draw(st.integers(min_value=1, max_value=n))
    seed = draw(st.integers(min_value=0, max_value=2**31))
    rng = np.random.default_rng(seed)
    records = make_records(rng, n, dim)
    query = rng.standard_normal(dim).astype(np.float32)
    return records, query, k


class TestScoreProperties:
    @settings(max_examples=60, deadline=None)
    @given(scoring_case())
    def test_equals_brute_force_oracle(self, case):
        records, query, k = case
        got = anomaly_score(query, EmbeddingStore(records), ScoringConfig(k=k)).score
        expected = score_oracle([r.embedding for r in records], query, k)
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(scoring_case())
    def test_k1_equals_nearest_neighbor_distance(self, case):
        records, query, _ = case
        store = EmbeddingStore(records)
        got = anomaly_score(query, store, ScoringConfig(k=1)).score
        assert got == knn_search(store, query, 1)[0][1]

    @settings(max_examples=40, deadline=None)
    @given(scoring_case())
    def test_duplicate_of_query_forces_zero(self, case):
        records, query, _ = case
        dup = SampleRecord(sample_id="zz_dup", machine_type="pump", machine_id="id_00",
                           label="normal", split="train", source_path="/dup.wav",
                           embedding=query)
        store = EmbeddingStore(list(records) + [dup])
        assert anomaly_score(query, store, ScoringConfig(k=1)).score == 0.0

    @settings(max_examples=40, deadline=None)
    @given(scoring_case())
    def test_adding_duplicate_never_raises_score(self, case):
        # a zero distance enters the k-smallest set, so the mean cannot grow
        records, query, k = case
        cfg = ScoringConfig(k=k)
        base = anomaly_score(query, EmbeddingStore(records), cfg).score
        dup = SampleRecord(sample_id="zz_dup", machine_type="pump", machine_id="id_00",
                           label="normal", split="train", source_path="/dup.wav",
                           embedding=query)
        with_dup = anomaly_score(query, EmbeddingStore(list(records) + [dup]), cfg).score
        assert with_dup <= base + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(scoring_case(),
           st.floats(min_value=0.01, max_value=100.0, allow_nan=False))
    def test_scaling_embeddings_scales_score(self, case, scale):
        records, query, k = case
        cfg = ScoringConfig(k=k)
        base = anomaly_score(query, EmbeddingStore(records), cfg).score
        scaled_records = [
            SampleRecord(sample_id=r.sample_id, machine_type=r.machine_type,
                         machine_id=r.machine_id, label=r.label, split=r.split,
                         source_path=r.source_path,
                         embedding=(r.embedding * np.float32(scale)))
            for r in records
        ]
        scaled = anomaly_score(query * np.float32(scale),
                               EmbeddingStore(scaled_records), cfg).score
        assert scaled == pytest.approx(base * scale, rel=1e-4, abs=1e-6)
