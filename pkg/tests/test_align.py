import math

import numpy as np
import pytest

from swellkit.align import (
    PARAM_NAMES,
    AlignState,
    DemoConfig,
    DemoReport,
    DivergenceError,
    FeatureBatch,
    apply_aligner,
    bce_loss,
    classify_batch,
    disc_forward,
    grad_step,
    init_state,
    loss_and_grads,
    median_bandwidth,
    mmd,
    run_demo,
    write_trace_csv,
)


def random_state(rng, dim=2, hidden=16) -> AlignState:
    return AlignState(
        a_mat=rng.normal(0, 1, (dim, dim)),
        a_bias=rng.normal(0, 1, dim),
        w1=rng.normal(0, 1, (hidden, dim)),
        b1=rng.normal(0, 0.3, hidden),
        w2=rng.normal(0, 1, hidden),
        b2=float(rng.normal(0, 0.3)),
        lambda_=float(rng.uniform(0.1, 2.0)),
        lr=0.05,
    )


def random_batches(rng, dim=2, n=5):
    src = FeatureBatch("source", rng.normal(0, 1, (n, dim)))
    tgt = FeatureBatch("target", rng.normal(1, 1, (n + 2, dim)))
    return src, tgt


class TestFeatureBatch:
    def test_rejects_bad_domain(self):
        with pytest.raises(ValueError):
            FeatureBatch("daytime", np.zeros((3, 2)))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FeatureBatch("source", np.zeros((0, 2)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            FeatureBatch("source", np.array([[1.0, float("inf")]]))


class TestDiscForward:
    def test_zero_weights_give_half(self):
        state = AlignState(a_mat=np.eye(2), a_bias=np.zeros(2), w1=np.zeros((4, 2)),
                           b1=np.zeros(4), w2=np.zeros(4), b2=0.0, lambda_=1.0, lr=0.1)
        assert disc_forward(state, np.array([3.0, -1.0]), "source") == 0.5
        assert disc_forward(state, np.array([3.0, -1.0]), "target") == 0.5

    def test_hand_computed_two_layer(self):
        # identity aligner, one hidden unit: u = 1*1 + 2*0 + 0.5, o = 1.5*tanh(u) - 0.2
        state = AlignState(a_mat=np.eye(2), a_bias=np.zeros(2), w1=np.array([[1.0, 2.0]]),
                           b1=np.array([0.5]), w2=np.array([1.5]), b2=-0.2, lambda_=1.0, lr=0.1)
        expected = 1.0 / (1.0 + math.exp(-(1.5 * math.tanh(1.5) - 0.2)))
        assert disc_forward(state, np.array([1.0, 0.0]), "source") == pytest.approx(expected, abs=1e-15)
        # the aligner shifts target inputs before the discriminator sees them
        shifted = AlignState(a_mat=np.eye(2), a_bias=np.array([1.0, 0.0]), w1=state.w1,
                             b1=state.b1, w2=state.w2, b2=state.b2, lambda_=1.0, lr=0.1)
        expected_t = 1.0 / (1.0 + math.exp(-(1.5 * math.tanh(1.0 * 2.0 + 0.5) - 0.2)))
        assert disc_forward(shifted, np.array([1.0, 0.0]), "target") == pytest.approx(expected_t, abs=1e-15)

    def test_output_in_open_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            state = random_state(rng)
            p = disc_forward(state, rng.normal(0, 3, 2), "target")
            assert 0.0 < p < 1.0

    def test_dimension_mismatch(self):
        state = init_state(dim=2)
        with pytest.raises(ValueError):
            disc_forward(state, np.zeros(3), "source")


class TestBceLoss:
    def test_half_is_ln2_exactly(self):
        assert bce_loss(0.5, 1.0) == math.log(2.0)
        assert bce_loss(0.5, 0.0) == math.log(2.0)

    def test_clamped_extremes_are_tiny(self):
        assert bce_loss(1.0, 1.0) <= 1e-6
        assert bce_loss(0.0, 0.0) <= 1e-6

    def test_always_non_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            assert bce_loss(float(rng.uniform(0, 1)), float(rng.integers(0, 2))) >= 0.0

    def test_batch_mean_equals_per_sample_oracle(self):
        rng = np.random.default_rng(2)
        p = rng.uniform(0.01, 0.99, size=17)
        y = rng.integers(0, 2, size=17).astype(float)
        oracle = sum(-(yi * math.log(pi) + (1 - yi) * math.log(1 - pi)) for pi, yi in zip(p, y)) / 17
        assert bce_loss(p, y) == pytest.approx(oracle, rel=1e-12)


class TestGradients:
    def test_analytic_matches_central_finite_differences(self):
        rng = np.random.default_rng(7)
        eps = 1e-5
        for case in range(100):
            dim = int(rng.integers(2, 4))
            hidden = int(rng.integers(3, 17))
            state = random_state(rng, dim=dim, hidden=hidden)
            src, tgt = random_batches(rng, dim=dim, n=int(rng.integers(2, 7)))
            _, grads, _ = loss_and_grads(state, src, tgt)

            def loss_with(name, idx, value):
                s = state.copy()
                if name == "b2":
                    s.b2 = value
                else:
                    getattr(s, name)[idx] = value
                return loss_and_grads(s, src, tgt)[0]

            for name in PARAM_NAMES:
                if name == "b2":
                    fd = (loss_with("b2", None, state.b2 + eps)
                          - loss_with("b2", None, state.b2 - eps)) / (2 * eps)
                    pairs = [(float(grads["b2"]), fd)]
                else:
                    param = getattr(state, name)
                    pairs = []
                    for idx in np.ndindex(param.shape):
                        orig = param[idx]
                        fd = (loss_with(name, idx, orig + eps)
                              - loss_with(name, idx, orig - eps)) / (2 * eps)
                        pairs.append((float(grads[name][idx]), fd))
                for analytic, fd in pairs:
                    rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
                    assert rel <= 1e-4, f"case {case} {name}: analytic {analytic} vs fd {fd}"

    def test_reversal_contract_two_pass(self):
        rng = np.random.default_rng(11)
        state = random_state(rng)
        src, tgt = random_batches(rng)
        _, grads, _ = loss_and_grads(state, src, tgt)  # explicit second pass
        new, _ = grad_step(state, src, tgt)
        lr, lam = state.lr, state.lambda_
        # aligner descends the reversed gradient -lambda * g, i.e. moves by +lr*lambda*g
        assert np.allclose(new.a_mat - state.a_mat, lr * lam * grads["a_mat"], atol=1e-15)
        assert np.allclose(new.a_bias - state.a_bias, lr * lam * grads["a_bias"], atol=1e-15)
        # the discriminator plainly descends
        assert np.allclose(new.w1 - state.w1, -lr * grads["w1"], atol=1e-15)
        assert np.allclose(new.w2 - state.w2, -lr * grads["w2"], atol=1e-15)
        assert new.b2 - state.b2 == pytest.approx(-lr * grads["b2"], abs=1e-15)

    def test_lambda_zero_freezes_aligner(self):
        rng = np.random.default_rng(12)
        state = random_state(rng)
        state.lambda_ = 0.0
        src, tgt = random_batches(rng)
        new, _ = grad_step(state, src, tgt)
        assert np.array_equal(new.a_mat, state.a_mat)
        assert np.array_equal(new.a_bias, state.a_bias)
        assert not np.array_equal(new.w1, state.w1)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_error_carries_state(self):
        state = AlignState(a_mat=np.full((2, 2), 1e308), a_bias=np.zeros(2),
                           w1=np.array([[0.5, -0.5]]), b1=np.zeros(1), w2=np.ones(1),
                           b2=0.0, lambda_=1.0, lr=0.1)
        src = FeatureBatch("source", np.array([[0.1, 0.2]]))
        tgt = FeatureBatch("target", np.array([[1.0, 1.0]]))
        with pytest.raises(DivergenceError) as err:
            grad_step(state, src, tgt)
        assert err.value.state is state

    def test_domain_order_enforced(self):
        rng = np.random.default_rng(13)
        state = random_state(rng)
        src, tgt = random_batches(rng)
        with pytest.raises(ValueError):
            loss_and_grads(state, tgt, src)


class TestMmd:
    def test_identical_batches_clamp_to_zero(self):
        rng = np.random.default_rng(20)
        v = rng.normal(0, 1, (10, 2))
        assert mmd(FeatureBatch("source", v), FeatureBatch("target", v.copy()), 1.0) == 0.0

    def test_point_masses_closed_form(self):
        # all-duplicate batches at distance D: mmd^2 = 2 * (1 - exp(-D^2 / 2))
        a = FeatureBatch("source", np.tile([0.0, 0.0], (5, 1)))
        b = FeatureBatch("target", np.tile([3.0, 4.0], (6, 1)))
        expected = 2.0 * (1.0 - math.exp(-25.0 / 2.0))
        assert mmd(a, b, bandwidth=1.0) == pytest.approx(expected, rel=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(21)
        a = FeatureBatch("source", rng.normal(0, 1, (8, 3)))
        b = FeatureBatch("target", rng.normal(1, 1, (9, 3)))
        assert mmd(a, b, 1.3) == pytest.approx(mmd(b, a, 1.3), rel=1e-12)

    def test_small_batch_rejected(self):
        a = FeatureBatch("source", np.zeros((1, 2)))
        b = FeatureBatch("target", np.zeros((5, 2)))
        with pytest.raises(ValueError):
            mmd(a, b, 1.0)

    def test_dim_mismatch_rejected(self):
        a = FeatureBatch("source", np.zeros((3, 2)))
        b = FeatureBatch("target", np.zeros((3, 3)))
        with pytest.raises(ValueError):
            mmd(a, b, 1.0)

    def test_median_bandwidth_positive_even_for_duplicates(self):
        a = FeatureBatch("source", np.zeros((4, 2)))
        b = FeatureBatch("target", np.zeros((4, 2)))
        assert median_bandwidth(a, b) == 1.0

    def test_separated_masses_bigger_than_close_ones(self):
        rng = np.random.default_rng(22)
        base = rng.normal(0, 1, (30, 2))
        near = FeatureBatch("target", base + 0.1)
        far = FeatureBatch("target", base + 5.0)
        a = FeatureBatch("source", rng.normal(0, 1, (30, 2)))
        assert mmd(a, far, 1.0) > mmd(a, near, 1.0)


class TestRunDemo:
    def test_canonical_shifted_gaussians(self):
        report = run_demo(DemoConfig())
        assert report.config["seed"] == 7
        assert report.mmd_after <= 0.5 * report.mmd_before
        assert 0.45 <= report.disc_acc_heldout <= 0.60

    def test_zero_offset_stays_near_chance(self):
        report = run_demo(DemoConfig(tgt_mean=(0.0, 0.0)))
        assert report.mmd_before <= 0.02
        assert 0.4 <= report.disc_acc_heldout <= 0.6

    def test_deterministic_given_config(self):
        a = run_demo(DemoConfig(steps=50))
        b = run_demo(DemoConfig(steps=50))
        assert a.to_json() == b.to_json()
        assert a.loss_trace == b.loss_trace

    def test_steps_zero_rejected(self):
        with pytest.raises(ValueError):
            DemoConfig(steps=0)

    def test_mean_dims_must_match(self):
        with pytest.raises(ValueError):
            DemoConfig(src_mean=(0.0,), tgt_mean=(1.0, 2.0))

    def test_trace_csv(self, tmp_path):
        report = run_demo(DemoConfig(steps=20))
        write_trace_csv(report, tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "step,disc_loss"
        assert len(lines) == 21

    def test_aligner_actually_moves_target_distribution(self):
        cfg = DemoConfig()
        report = run_demo(cfg)
        assert report.mmd_before > 0.1  # the 3-sigma gap is visible before training
        assert report.mmd_after < report.mmd_before
