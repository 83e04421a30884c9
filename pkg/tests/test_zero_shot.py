import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import cosine_oracle
from sounddiff.errors import DegenerateVector, DimensionMismatch, InvalidInput
from sounddiff.zero_shot import (
    DEFAULT_REFERENCE_TEXTS,
    ReferenceTextSet,
    cosine_similarity,
    load_reference_texts,
    similarity_matrix,
)


def unit_axes(dim):
    return [np.eye(dim, dtype=np.float32)[i] for i in range(dim)]


class TestCosineSimilarity:
    def test_identical_vectors(self):
        v = np.asarray([0.3, -1.2, 4.0], np.float32)
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal_vectors(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_forty_five_degrees(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.70711, abs=1e-5)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateVector):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])

    def test_opposite_vectors_clamped_to_range(self):
        v = np.asarray([0.1] * 7, np.float32)
        assert cosine_similarity(v, -v) == -1.0

    @settings(max_examples=80, deadline=None)
    @given(arrays(np.float32, 6, elements=st.floats(-10, 10, width=32)),
           arrays(np.float32, 6, elements=st.floats(-10, 10, width=32)))
    def test_matches_elementwise_oracle(self, a, b):
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        got = cosine_similarity(a, b)
        expected = max(-1.0, min(1.0, cosine_oracle(a, b)))
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)
        assert -1.0 <= got <= 1.0

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float32, 5, elements=st.floats(-5, 5, width=32)),
           arrays(np.float32, 5, elements=st.floats(-5, 5, width=32)),
           st.floats(min_value=0.01, max_value=50.0),
           st.floats(min_value=0.01, max_value=50.0))
    def test_scale_invariance(self, a, b, alpha, beta):
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        scaled = cosine_similarity(a * np.float32(alpha), b * np.float32(beta))
        assert scaled == pytest.approx(cosine_similarity(a, b), abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float32, 5, elements=st.floats(-5, 5, width=32)),
           arrays(np.float32, 5, elements=st.floats(-5, 5, width=32)))
    def test_symmetry_exact(self, a, b):
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        assert cosine_similarity(a, b) == cosine_similarity(b, a)


class TestReferenceTextSet:
    def test_default_texts_are_the_eight(self):
        assert len(DEFAULT_REFERENCE_TEXTS) == 8
        assert DEFAULT_REFERENCE_TEXTS[0] == "Vibration"
        assert DEFAULT_REFERENCE_TEXTS[-1] == "Unexpected Silence"

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInput):
            ReferenceTextSet(texts=("a", "b"), embeddings=(np.ones(3, np.float32),))

    def test_empty_rejected(self):
        with pytest.raises(InvalidInput):
            ReferenceTextSet(texts=(), embeddings=())

    def test_load_from_file_skips_blank_lines(self, tmp_path):
        path = tmp_path / "texts.txt"
        path.write_text("Vibration\n\n  \nGrinding Sounds\n", encoding="utf-8")
        assert load_reference_texts(path) == ("Vibration", "Grinding Sounds")

    def test_load_empty_file_rejected(self, tmp_path):
        path = tmp_path / "texts.txt"
        path.write_text("\n\n", encoding="utf-8")
        with pytest.raises(InvalidInput):
            load_reference_texts(path)


class TestSimilarityMatrix:
    def test_sound_equal_to_first_text_embedding(self):
        e1, e2 = unit_axes(2)
        texts = ReferenceTextSet(texts=("t1", "t2"), embeddings=(e1, e2))
        matrix = similarity_matrix([("snd", e1)], texts)
        assert matrix.values == ((1.0, 0.0),)
        assert matrix.row_ids == ("snd",)
        assert matrix.col_texts == ("t1", "t2")

    def test_paper_configuration_shape_4x8(self):
        rng = np.random.default_rng(1)
        embeddings = tuple(rng.standard_normal(12).astype(np.float32) for _ in range(8))
        texts = ReferenceTextSet(texts=DEFAULT_REFERENCE_TEXTS, embeddings=embeddings)
        sounds = [(f"n{i}", rng.standard_normal(12).astype(np.float32)) for i in range(4)]
        matrix = similarity_matrix(sounds, texts)
        assert len(matrix.values) == 4
        assert all(len(row) == 8 for row in matrix.values)

    def test_entries_match_per_pair_oracle(self):
        rng = np.random.default_rng(2)
        embeddings = tuple(rng.standard_normal(6).astype(np.float32) for _ in range(3))
        texts = ReferenceTextSet(texts=("a", "b", "c"), embeddings=embeddings)
        sounds = [(f"s{i}", rng.standard_normal(6).astype(np.float32)) for i in range(5)]
        matrix = similarity_matrix(sounds, texts)
        for i, (_, emb) in enumerate(sounds):
            for l, t_emb in enumerate(embeddings):
                assert matrix.values[i][l] == pytest.approx(
                    cosine_oracle(emb, t_emb), rel=1e-9, abs=1e-9)

    def test_row_order_follows_input_permutation(self):
        rng = np.random.default_rng(4)
        embeddings = tuple(rng.standard_normal(5).astype(np.float32) for _ in range(2))
        texts = ReferenceTextSet(texts=("a", "b"), embeddings=embeddings)
        sounds = [(f"s{i}", rng.standard_normal(5).astype(np.float32)) for i in range(6)]
        forward = similarity_matrix(sounds, texts)
        backward = similarity_matrix(sounds[::-1], texts)
        assert backward.values == forward.values[::-1]
        assert backward.row_ids == forward.row_ids[::-1]

    def test_values_within_bounds(self):
        rng = np.random.default_rng(8)
        embeddings = tuple(rng.standard_normal(4).astype(np.float32) for _ in range(3))
        texts = ReferenceTextSet(texts=("a", "b", "c"), embeddings=embeddings)
        sounds = [(f"s{i}", rng.standard_normal(4).astype(np.float32)) for i in range(10)]
        for row in similarity_matrix(sounds, texts).values:
            assert all(-1.0 <= v <= 1.0 for v in row)
