import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zsar.errors import (DegenerateEmbeddingError, MalformedInputError,
                         TruncationWarning)
from zsar.text_embed import (Description, HashedTokenEncoder, embed_class,
                             embed_concept_sequence, encode_tokens,
                             load_descriptions, pooled_feature, project_unit,
                             save_descriptions, sentence_pool, tokenize, unit)

# Pinned from the toy encoder once; the encoder is seeded from token hashes
# so these must never drift.
GOLDEN_X_H8 = np.array([
    0.32293194667705494, -0.9416338308079534, -0.7678621922391252,
    0.6938604108918262, 0.24074001796208924, 1.9503797449807578,
    -0.8282035490772656, 0.3542301308785711])

GOLDEN_EMBED_CLASS = np.array([
    -0.6453851677571775, 0.2251000132605512, -0.0194340960013959,
    -0.7296782065964065])

GOLDEN_CONCEPT_SEQ = np.array([
    -0.8280094467713935, -0.21149635006353712, -0.0352477465583507,
    -0.5180996490345181])


def seeded_projection(k=4, h=8, seed=7):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((k, h)) / np.sqrt(h), rng.standard_normal(k) * 0.1


class TestTokenizeAndDescription:
    def test_whitespace_normalization(self):
        d = Description("a", "x", "  a   b\t c \n")
        assert d.body == "a b c"
        assert d.token_count == 3

    def test_empty_body_rejected(self):
        with pytest.raises(MalformedInputError):
            Description("a", "x", "   ")

    def test_token_count_matches_tokenizer(self):
        body = "clean and jerk : a two - movement weightlifting exercise"
        d = Description("a", "clean and jerk", body)
        assert d.token_count == len(tokenize(body))


class TestEncodeTokens:
    def test_identical_tokens_identical_vectors(self, encoder8):
        h = encode_tokens(Description("t", "t", "a b a"), encoder8)
        assert h.shape == (3, 8)
        np.testing.assert_array_equal(h[0], h[2])
        assert not np.array_equal(h[0], h[1])

    def test_reference_width_encoder(self):
        enc = HashedTokenEncoder(hidden_dim=768)
        body = ("clean and jerk : a two - movement weightlifting exercise in "
                "which a weight is raised above the head following an initial "
                "lift to shoulder level .")
        d = Description("cj", "clean and jerk", body)
        h = encode_tokens(d, enc)
        assert h.shape == (d.token_count, 768)

    def test_golden_vector(self, encoder8):
        h = encode_tokens(Description("g", "x", "x"), encoder8)
        np.testing.assert_array_equal(h[0], GOLDEN_X_H8)

    def test_truncation_warns(self):
        enc = HashedTokenEncoder(hidden_dim=4, max_tokens=5)
        d = Description("long", "long", " ".join(f"w{i}" for i in range(9)))
        with pytest.warns(TruncationWarning):
            h = encode_tokens(d, enc)
        assert h.shape == (5, 4)

    def test_deterministic_across_instances(self):
        a = HashedTokenEncoder(16).encode(["alpha", "beta"])
        b = HashedTokenEncoder(16).encode(["alpha", "beta"])
        np.testing.assert_array_equal(a, b)


class TestSentencePool:
    def test_two_vector_mean(self):
        out = sentence_pool(np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(out, [0.5, 0.5])

    def test_single_vector_identity(self):
        v = np.array([[3.0, -1.0, 2.0]])
        np.testing.assert_array_equal(sentence_pool(v), v[0])

    def test_matches_scalar_loop_oracle(self, rng):
        h = rng.standard_normal((5, 7))
        expected = np.array([
            sum(float(h[i, j]) for i in range(5)) / 5.0 for j in range(7)])
        np.testing.assert_allclose(sentence_pool(h), expected, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(MalformedInputError):
            sentence_pool(np.zeros((0, 4)))

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -2.0])
    def test_pooling_linearity(self, alpha, rng):
        h = rng.standard_normal((6, 5))
        np.testing.assert_array_equal(sentence_pool(alpha * h),
                                      alpha * sentence_pool(h))


class TestEmbedClass:
    def test_known_normalization(self):
        # identity-padded projection, zero bias, pooled vector (3, 4, 0, ...)
        w = np.eye(4, 8)
        b = np.zeros(4)
        pooled = np.array([3.0, 4.0, 0.0, 0.0, 9.0, 9.0, 9.0, 9.0])
        z = project_unit(pooled, w, b)
        np.testing.assert_allclose(z, [0.6, 0.8, 0.0, 0.0], atol=1e-15)

    def test_unit_norm_postcondition(self, encoder8, rng):
        for seed in range(5):
            w, b = seeded_projection(seed=seed)
            d = Description(f"d{seed}", "name", f"some body text {seed}")
            z = embed_class(d, encoder8, w, b)
            assert abs(np.linalg.norm(z) - 1.0) <= 1e-6

    def test_duplicate_description_identical(self, encoder8):
        w, b = seeded_projection()
        d1 = Description("id1", "kite surfing", "kite surfing : riding a board")
        d2 = Description("id2", "kite surfing", "kite surfing : riding a board")
        np.testing.assert_array_equal(embed_class(d1, encoder8, w, b),
                                      embed_class(d2, encoder8, w, b))

    def test_golden(self, encoder8):
        w, b = seeded_projection()
        d = Description("g2", "clean and jerk",
                        "clean and jerk : a two - movement weightlifting exercise")
        np.testing.assert_allclose(embed_class(d, encoder8, w, b),
                                   GOLDEN_EMBED_CLASS, atol=1e-15)

    def test_degenerate_projection(self, encoder8):
        w = np.zeros((4, 8))
        b = np.zeros(4)
        d = Description("z", "z", "anything")
        with pytest.raises(DegenerateEmbeddingError):
            embed_class(d, encoder8, w, b)

    def test_bitwise_deterministic(self, encoder8):
        w, b = seeded_projection()
        d = Description("det", "det", "one two three")
        np.testing.assert_array_equal(embed_class(d, encoder8, w, b),
                                      embed_class(d, encoder8, w, b))


class TestEmbedConceptSequence:
    def test_single_equals_embed_class(self, encoder8):
        w, b = seeded_projection()
        c = Description("c1", "barbell", "barbell : a bar with weights")
        np.testing.assert_array_equal(
            embed_concept_sequence([c], encoder8, w, b),
            embed_class(c, encoder8, w, b))

    def test_order_changes_but_unit(self, encoder8):
        w, b = seeded_projection()
        c1 = Description("c1", "barbell", "barbell : a bar with weights")
        c2 = Description("c2", "platform", "platform : a raised level surface")
        z12 = embed_concept_sequence([c1, c2], encoder8, w, b)
        z21 = embed_concept_sequence([c2, c1], encoder8, w, b)
        assert abs(np.linalg.norm(z12) - 1.0) <= 1e-6
        assert abs(np.linalg.norm(z21) - 1.0) <= 1e-6

    def test_golden(self, encoder8):
        w, b = seeded_projection()
        c1 = Description("c1", "barbell", "barbell : a bar with weights at both ends")
        c2 = Description("c2", "platform", "platform : a raised level surface")
        np.testing.assert_allclose(
            embed_concept_sequence([c1, c2], encoder8, w, b),
            GOLDEN_CONCEPT_SEQ, atol=1e-15)

    def test_empty_rejected(self, encoder8):
        w, b = seeded_projection()
        with pytest.raises(MalformedInputError):
            embed_concept_sequence([], encoder8, w, b)

    def test_max_concepts(self, encoder8):
        w, b = seeded_projection()
        cs = [Description(f"c{i}", f"n{i}", f"body {i}") for i in range(4)]
        with pytest.raises(MalformedInputError):
            embed_concept_sequence(cs, encoder8, w, b, max_concepts=3)

    def test_shared_parameters(self, encoder8):
        # mutating the projection must move class and concept embeddings both
        w, b = seeded_projection()
        d = Description("a", "a", "alpha beta")
        c = Description("c", "c", "gamma delta")
        z_class = embed_class(d, encoder8, w, b)
        z_seq = embed_concept_sequence([c], encoder8, w, b)
        w2 = w + 0.05
        assert not np.allclose(embed_class(d, encoder8, w2, b), z_class)
        assert not np.allclose(embed_concept_sequence([c], encoder8, w2, b), z_seq)


class TestDescriptionStore:
    def test_round_trip(self, tmp_path):
        descs = [
            Description("a001", "clean and jerk",
                        "clean and jerk : a two - movement weightlifting exercise ."),
            Description("a002", "cleaning gutters",
                        "cleaning gutters : make clean ; remove dirt ."),
        ]
        path = tmp_path / "descriptions.jsonl"
        save_descriptions(descs, path)
        loaded = load_descriptions(path)
        assert [(d.subject_id, d.name, d.body) for d in loaded] == \
            [(d.subject_id, d.name, d.body) for d in descs]

    def test_bad_record(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"subject_id": "x"}\n', encoding="utf-8")
        with pytest.raises(MalformedInputError):
            load_descriptions(path)


class TestUnit:
    def test_zero_vector(self):
        with pytest.raises(DegenerateEmbeddingError):
            unit(np.zeros(4))

    def test_idempotent(self, rng):
        for _ in range(50):
            v = rng.standard_normal(512)
            z = unit(v)
            np.testing.assert_array_equal(unit(z), z)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_unit_norm_property(self, seed):
        v = np.random.default_rng(seed).standard_normal(16) * 10.0
        if np.linalg.norm(v) == 0.0:
            return
        assert abs(np.linalg.norm(unit(v)) - 1.0) <= 1e-6


def test_pooled_feature_matches_manual(encoder8):
    d = Description("m", "m", "one two three")
    manual = sentence_pool(encode_tokens(d, encoder8))
    np.testing.assert_array_equal(pooled_feature(d, encoder8), manual)
