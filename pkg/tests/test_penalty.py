"""Penalty-method crafting: hinge, objective, descent loop."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uapaudio import (
    InvalidInputError,
    PenaltyConfig,
    hinge_targeted,
    hinge_untargeted,
    penalty_loss,
    penalty_uap,
    render_signal_v,
    to_tanh_space,
)
from uapaudio.models import linear_victim_from_params
from uapaudio.tanhspace import perturbed_sample

logit_vectors = st.lists(
    st.floats(min_value=-50.0, max_value=50.0, allow_nan=False), min_size=2, max_size=8
).map(np.asarray)


class TestHinge:
    def test_untargeted_examples(self):
        assert hinge_untargeted(np.array([3.0, 1.0]), 0, 0.0) == 2.0
        assert hinge_untargeted(np.array([1.0, 3.0]), 0, 0.0) == 0.0
        assert hinge_untargeted(np.array([1.0, 3.0]), 0, 5.0) == -2.0
        assert hinge_untargeted(np.array([1.0, 9.0]), 0, 5.0) == -5.0

    def test_targeted_examples(self):
        assert hinge_targeted(np.array([3.0, 1.0, 2.0]), 1, 0.0) == 2.0
        assert hinge_targeted(np.array([1.0, 5.0, 2.0]), 1, 10.0) == -3.0
        assert hinge_targeted(np.array([0.0, 20.0, 1.0]), 1, 5.0) == -5.0

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            hinge_untargeted(np.array([1.0, 2.0]), 2, 0.0)
        with pytest.raises(InvalidInputError):
            hinge_targeted(np.array([1.0]), 0, 0.0)
        with pytest.raises(InvalidInputError):
            hinge_untargeted(np.ones((2, 2)), 0, 0.0)

    @given(logit_vectors, st.integers(min_value=0, max_value=7))
    def test_zero_kappa_dichotomy(self, logits, label):
        """At kappa = 0 the hinge vanishes exactly when the label is dethroned."""
        label %= logits.size
        value = hinge_untargeted(logits, label, 0.0)
        others = np.delete(logits, label)
        if logits[label] > others.max():
            assert value > 0.0
        else:
            assert value == 0.0

    @given(logit_vectors, st.integers(min_value=0, max_value=7),
           st.floats(min_value=0.0, max_value=100.0))
    def test_floor_and_formula(self, logits, target, kappa):
        target %= logits.size
        value = hinge_targeted(logits, target, kappa)
        others = np.delete(logits, target)
        assert value == max(float(others.max() - logits[target]), -kappa)
        assert value >= -kappa

    @given(logit_vectors, st.integers(min_value=0, max_value=7),
           st.floats(min_value=-30.0, max_value=30.0))
    def test_shift_invariant(self, logits, label, shift):
        label %= logits.size
        assert hinge_untargeted(logits + shift, label, 7.0) == pytest.approx(
            hinge_untargeted(logits, label, 7.0), abs=1e-9)


class TestPenaltyLoss:
    def _setup(self, rng, d=32):
        weight = rng.normal(size=(d, 3))
        model = linear_victim_from_params(weight, np.zeros(3))
        x = rng.uniform(0.3, 0.7, d)
        return model, x, to_tanh_space(x)

    def test_zero_perturbation_hits_spl_floor(self, rng):
        model, x, x_tanh = self._setup(rng)
        w = perturbed_sample(x_tanh, np.zeros_like(x_tanh))
        loss, _ = penalty_loss(model, w, x_tanh, reference=0, c=0.5, kappa=10.0)
        expected_hinge = hinge_untargeted(model.logits(w), 0, 10.0)
        assert loss == pytest.approx(-240.0 + 0.5 * expected_hinge, abs=1e-9)

    def test_satisfied_attack_reduces_to_spl(self, rng):
        model, x, x_tanh = self._setup(rng)
        label = int(model.predict(x))
        loser = 1 - label if label <= 1 else 0
        w = perturbed_sample(x_tanh, np.zeros_like(x_tanh))
        # at kappa = 0 a dethroned reference contributes exactly nothing
        loss, _ = penalty_loss(model, w, x_tanh, reference=loser, c=3.0, kappa=0.0)
        assert loss == -240.0

    def test_gradient_matches_central_differences(self, rng):
        model, x, x_tanh = self._setup(rng)
        v = rng.normal(scale=0.3, size=x.size)
        w = perturbed_sample(x_tanh, v)
        loss, grad = penalty_loss(model, w, x_tanh, reference=int(model.predict(x)),
                                  c=0.4, kappa=25.0)
        step = 1e-6
        for i in rng.choice(x.size, size=8, replace=False):
            e = np.zeros(x.size)
            e[i] = step
            hi, _ = penalty_loss(model, w + e, x_tanh, int(model.predict(x)), 0.4, 25.0)
            lo, _ = penalty_loss(model, w - e, x_tanh, int(model.predict(x)), 0.4, 25.0)
            assert grad[i] == pytest.approx((hi - lo) / (2 * step), rel=1e-3, abs=1e-8)

    def test_targeted_mode_gradient(self, rng):
        model, x, x_tanh = self._setup(rng)
        v = rng.normal(scale=0.2, size=x.size)
        w = perturbed_sample(x_tanh, v)
        _, grad = penalty_loss(model, w, x_tanh, reference=2, c=1.0, kappa=30.0,
                               mode="targeted")
        step = 1e-6
        for i in [0, 7, 19]:
            e = np.zeros(x.size)
            e[i] = step
            hi, _ = penalty_loss(model, w + e, x_tanh, 2, 1.0, 30.0, mode="targeted")
            lo, _ = penalty_loss(model, w - e, x_tanh, 2, 1.0, 30.0, mode="targeted")
            assert grad[i] == pytest.approx((hi - lo) / (2 * step), rel=1e-3, abs=1e-8)

    def test_rejects_bad_w(self, rng):
        model, x, x_tanh = self._setup(rng, d=4)
        with pytest.raises(InvalidInputError):
            penalty_loss(model, np.full((2, 4), 0.5), x_tanh, 0, 0.2, 40.0)


class TestPenaltyConfig:
    def test_mode_defaults(self):
        cfg = PenaltyConfig()
        assert cfg.c == 0.2 and cfg.kappa == 40.0
        tgt = PenaltyConfig(mode="targeted", target=1)
        assert tgt.c == 0.15 and tgt.kappa == 10.0

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            PenaltyConfig(mode="targeted")
        with pytest.raises(InvalidInputError):
            PenaltyConfig(c=0.0)
        with pytest.raises(InvalidInputError):
            PenaltyConfig(kappa=-1.0)
        with pytest.raises(InvalidInputError):
            PenaltyConfig(delta=0.0)
        with pytest.raises(InvalidInputError):
            PenaltyConfig(batch_size=0)
        with pytest.raises(InvalidInputError):
            PenaltyConfig(min_iters=11, max_iters=10)
        with pytest.raises(InvalidInputError):
            PenaltyConfig(project=(3.0, 0.1))
        with pytest.raises(InvalidInputError):
            PenaltyConfig(project=(2.0, 0.0))


class TestPenaltyLoop:
    def test_delta_one_returns_immediately(self, victim, train_xy):
        x, y = train_xy
        res = penalty_uap(victim, x[:5], y[:5], PenaltyConfig(delta=1.0))
        assert res.converged and res.iterations == 0 and res.trace == []
        assert np.all(res.perturbation.v_signal == 0.5)
        np.testing.assert_array_equal(res.perturbation.v_tanh, np.zeros(x.shape[1]))

    def test_min_iters_defers_the_success_check(self, victim, train_xy):
        x, y = train_xy
        res = penalty_uap(victim, x[:5], y[:5],
                          PenaltyConfig(delta=1.0, min_iters=5, c=20.0))
        assert res.converged and res.iterations == 5 and len(res.trace) == 5
        assert len(res.asr_trace) == 6

    def test_first_update_follows_the_batch_gradient(self, rng):
        # with zero initial v the SPL term sits on its floor, so the descent
        # direction is the summed hinge gradient; step one of Adam is then
        # -lr * g / (|g| + eps) componentwise
        d = 24
        weight = rng.normal(size=(d, 3))
        model = linear_victim_from_params(weight, np.zeros(3))
        x = rng.uniform(0.35, 0.65, (3, d))
        y = np.asarray(model.predict(x))
        cfg = PenaltyConfig(c=0.7, kappa=50.0, batch_size=3, max_iters=1,
                            delta=0.01, lr=0.01, seed=0)
        res = penalty_uap(model, x, y, cfg)

        x_tanh = to_tanh_space(x)
        step = 1e-6

        def total_objective(v):
            total = 0.0
            for i in range(3):
                w = perturbed_sample(x_tanh[i], v)
                total += -240.0 + cfg.c * hinge_untargeted(model.logits(w), y[i], cfg.kappa)
            return total

        v_after = res.perturbation.v_tanh
        for j in rng.choice(d, size=6, replace=False):
            e = np.zeros(d)
            e[j] = step
            g = (total_objective(e) - total_objective(-e)) / (2 * step)
            expected = -cfg.lr * g / (abs(g) + cfg.adam_eps)
            assert v_after[j] == pytest.approx(expected, rel=1e-3)

    def test_spl_never_exceeds_objective_at_zero_kappa(self, victim, train_xy):
        x, y = train_xy
        cfg = PenaltyConfig(c=20.0, kappa=0.0, min_iters=30, max_iters=30, seed=0)
        res = penalty_uap(victim, x, y, cfg)
        assert len(res.trace) == 30
        for record in res.trace:
            floor = record["spl_vprime"]
            assert record["loss_min"] >= floor - 1e-9 * abs(floor)
            assert record["hinge_mean"] >= 0.0

    def test_converges_on_victim_training_set(self, victim, train_xy, test_xy):
        x, y = train_xy
        res = penalty_uap(victim, x, y, PenaltyConfig(c=20.0, seed=0))
        assert res.converged
        assert res.asr_trace[-1] >= 0.9
        assert res.perturbation.train_asr == max(res.asr_trace)
        assert len(res.asr_trace) == res.iterations + 1
        from uapaudio import evaluate_uap

        assert evaluate_uap(victim, test_xy, res.perturbation).test_asr >= 0.8

    def test_single_sample_flips_itself(self, victim, train_xy):
        x, y = train_xy
        i = 0
        cfg = PenaltyConfig(c=20.0, kappa=90.0, batch_size=1, max_iters=50, seed=0)
        res = penalty_uap(victim, x[i : i + 1], y[i : i + 1], cfg)
        assert res.converged
        from uapaudio import applied_perturbation

        perturbed = x[i] + applied_perturbation(x[i], res.perturbation)[0]
        assert int(victim.predict(perturbed)) != int(y[i])

    def test_targeted_converges(self, victim, train_xy):
        x, y = train_xy
        keep = y != 2
        cfg = PenaltyConfig(mode="targeted", target=2, c=20.0, kappa=10.0,
                            max_iters=100, seed=0)
        res = penalty_uap(victim, x[keep], None, cfg)
        assert res.converged
        assert res.perturbation.mode == "targeted" and res.perturbation.target == 2

    def test_projection_bound_honored(self, victim, train_xy):
        x, y = train_xy
        cfg = PenaltyConfig(c=20.0, max_iters=15, min_iters=15,
                            project=(np.inf, 0.05), seed=0)
        res = penalty_uap(victim, x[:30], y[:30], cfg)
        assert np.max(np.abs(res.perturbation.v_signal - 0.5)) <= 0.05 + 1e-9
        assert res.perturbation.params["projection"] == ["inf", 0.05]

    def test_deterministic_given_seed(self, victim, train_xy):
        x, y = train_xy
        cfg = PenaltyConfig(c=20.0, max_iters=8, min_iters=8, seed=4)
        a = penalty_uap(victim, x[:20], y[:20], cfg)
        b = penalty_uap(victim, x[:20], y[:20], cfg)
        np.testing.assert_array_equal(a.perturbation.v_tanh, b.perturbation.v_tanh)
        assert a.asr_trace == b.asr_trace

    def test_recorded_params(self, victim, train_xy):
        x, y = train_xy
        res = penalty_uap(victim, x[:5], y[:5], PenaltyConfig(delta=1.0))
        assert set(res.perturbation.params) == {"c", "kappa", "S", "lr", "epsilon",
                                                "projection"}
        assert res.perturbation.method == "penalty"

    def test_does_not_mutate_model(self, victim, train_xy):
        x, y = train_xy
        before = victim.parameter_vector().copy()
        penalty_uap(victim, x[:10], y[:10], PenaltyConfig(c=20.0, max_iters=3, min_iters=3))
        np.testing.assert_array_equal(victim.parameter_vector(), before)

    def test_validation(self, victim, train_xy):
        x, y = train_xy
        with pytest.raises(InvalidInputError):
            penalty_uap(victim, x[:4], None, PenaltyConfig())
        with pytest.raises(InvalidInputError):
            penalty_uap(victim, x[:4], y[:3], PenaltyConfig())
        with pytest.raises(InvalidInputError):
            penalty_uap(victim, x[:4], np.array([0, 1, 2, 99]), PenaltyConfig())
        with pytest.raises(InvalidInputError):
            penalty_uap(victim, np.zeros((0, 8)), None,
                        PenaltyConfig(mode="targeted", target=0))
