import numpy as np
import pytest

from second.decoding import (
    CDConfig,
    StageLogits,
    greedy_token,
    multi_stage_cd,
    sequence_probability,
    single_stage_cd,
)
from second.errors import (
    IndexOutOfRange,
    LengthMismatch,
    MissingStage,
    VocabMismatch,
)


class TestSingleStageCD:
    def test_equal_vectors_unchanged(self):
        v = np.array([1.5, -2.0, 0.25])
        assert np.array_equal(single_stage_cd(v, v, 0.7), v)

    def test_alpha_zero_is_identity(self):
        expert = np.array([2.0, 0.0])
        assert np.array_equal(single_stage_cd(expert, np.array([1.0, 1.0]), 0.0), expert)

    def test_elementwise_arithmetic(self):
        out = single_stage_cd(np.array([2.0, 0.0]), np.array([1.0, 1.0]), 0.5)
        assert np.allclose(out, [2.5, -0.5])

    def test_vocab_mismatch(self):
        with pytest.raises(VocabMismatch):
            single_stage_cd(np.array([1.0, 2.0]), np.array([1.0, 2.0, 3.0]), 0.5)


class TestMultiStageCD:
    def test_identical_stages_telescope_to_expert(self):
        v = np.array([0.5, -1.0, 3.0])
        stages = StageLogits(expert=v, amateur3=v, amateur2=v, amateur1=v)
        assert np.array_equal(multi_stage_cd(stages, CDConfig(1.0, 1.0, 1.0)), v)

    def test_beta_gamma_zero_reduces_to_single(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            vecs = rng.standard_normal((4, 8))
            stages = StageLogits.from_stage_list(list(vecs))
            alpha = float(rng.random())
            multi = multi_stage_cd(stages, CDConfig(alpha, 0.0, 0.0))
            single = single_stage_cd(vecs[3], vecs[2], alpha)
            assert multi.tobytes() == single.tobytes()

    def test_scalar_chain(self):
        stages = StageLogits.from_stage_list(
            [np.array([0.0]), np.array([0.5]), np.array([1.0]), np.array([2.0])])
        out = multi_stage_cd(stages, CDConfig(1.0, 1.0, 1.0))
        assert out[0] == pytest.approx(4.0)

    def test_three_stage_variant_drops_gamma(self):
        am2, am3, expert = np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.array([2.0, 2.0])
        stages = StageLogits.from_stage_list([am2, am3, expert])
        assert stages.amateur1 is None
        out = multi_stage_cd(stages, CDConfig(alpha=0.5, beta=0.5, gamma=1.0))
        expected = expert + 0.5 * (expert - am3) + 0.5 * (am3 - am2)
        assert np.array_equal(out, expected)

    def test_linear_in_each_input(self):
        rng = np.random.default_rng(22)
        cfg = CDConfig(0.3, 0.6, 0.9)
        a, b = rng.standard_normal((2, 4, 6))
        out_sum = multi_stage_cd(StageLogits.from_stage_list(list(a + b)), cfg)
        out_parts = multi_stage_cd(StageLogits.from_stage_list(list(a)), cfg) \
            + multi_stage_cd(StageLogits.from_stage_list(list(b)), cfg)
        assert np.allclose(out_sum, out_parts)

    def test_shift_invariance_of_argmax(self):
        rng = np.random.default_rng(23)
        cfg = CDConfig(0.7, 0.7, 1.0)
        for _ in range(50):
            vecs = rng.standard_normal((4, 10))
            c = float(rng.standard_normal() * 100)
            base = multi_stage_cd(StageLogits.from_stage_list(list(vecs)), cfg)
            shifted = multi_stage_cd(StageLogits.from_stage_list(list(vecs + c)), cfg)
            assert greedy_token(base) == greedy_token(shifted)

    def test_needs_three_stages(self):
        with pytest.raises(MissingStage):
            StageLogits.from_stage_list([np.array([1.0, 2.0])] * 2)

    def test_five_stage_plans_use_first_three_amateurs(self):
        vecs = [np.full(2, float(i)) for i in range(5)]
        stages = StageLogits.from_stage_list(vecs)
        assert stages.amateur1[0] == 0.0
        assert stages.amateur3[0] == 2.0
        assert stages.expert[0] == 4.0


class TestGreedyToken:
    def test_lowest_index_on_ties(self):
        assert greedy_token(np.array([0.0, 3.0, 3.0])) == 1

    def test_vocab_must_be_at_least_two(self):
        with pytest.raises(ValueError):
            greedy_token(np.array([5.0]))

    def test_negative_values(self):
        assert greedy_token(np.array([-1.0, -2.0])) == 0


class TestSequenceProbability:
    def test_saturated_softmax(self):
        prob = sequence_probability([np.array([1e6, 0.0])], [0])
        assert prob == pytest.approx(1.0)

    def test_two_uniform_binary_steps(self):
        steps = [np.zeros(2), np.zeros(2)]
        assert sequence_probability(steps, [0, 1]) == pytest.approx(0.25)

    def test_empty_product(self):
        assert sequence_probability([], []) == 1.0

    def test_matches_cross_entropy_sum(self):
        rng = np.random.default_rng(24)
        steps = [rng.standard_normal(5) for _ in range(4)]
        chosen = [int(rng.integers(5)) for _ in range(4)]
        prob = sequence_probability(steps, chosen)
        # independent oracle: explicit softmax per step
        expected = 1.0
        for logits, token in zip(steps, chosen):
            e = np.exp(logits - logits.max())
            expected *= (e / e.sum())[token]
        assert prob == pytest.approx(expected, rel=1e-12)
        assert 0.0 < prob <= 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            sequence_probability([np.zeros(2)], [0, 1])

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            sequence_probability([np.zeros(2)], [2])


class TestCDConfig:
    @pytest.mark.parametrize("bad", [{"alpha": 1.5}, {"beta": -0.1}, {"gamma": float("nan")}])
    def test_coefficients_constrained(self, bad):
        with pytest.raises(ValueError):
            CDConfig(**bad)

    def test_defaults(self):
        cfg = CDConfig()
        assert (cfg.alpha, cfg.beta, cfg.gamma) == (0.7, 0.7, 1.0)
