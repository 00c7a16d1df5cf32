import numpy as np
import pytest

from maskfusion.objectives import (
    BCE_EPS,
    LossWeights,
    bce_tbm_loss,
    combined_loss,
    mse_irm_loss,
)


def central_difference(fn, x, step=1e-5):
    """Finite-difference gradient oracle, one coordinate at a time."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += step
        xm[idx] -= step
        grad[idx] = (fn(xp) - fn(xm)) / (2 * step)
    return grad


class TestMse:
    def test_perfect_prediction(self, rng):
        x = rng.uniform(0, 1, (3, 4))
        loss, grad = mse_irm_loss(x, x)
        assert loss == 0.0
        assert np.all(grad == 0)

    def test_unit_deviation(self):
        loss, grad = mse_irm_loss(np.array([[1.0]]), np.array([[0.0]]))
        assert loss == 1.0
        assert grad[0, 0] == 2.0

    def test_hand_example(self):
        loss, _ = mse_irm_loss(np.array([0.2, 0.9]), np.array([0.0, 1.0]))
        assert loss == pytest.approx(0.05, abs=1e-12)

    def test_sum_not_mean(self, rng):
        # doubling the grid doubles the loss
        x = rng.uniform(0, 1, (2, 3))
        y = rng.uniform(0, 1, (2, 3))
        l1, _ = mse_irm_loss(x, y)
        l2, _ = mse_irm_loss(np.vstack([x, x]), np.vstack([y, y]))
        assert l2 == pytest.approx(2 * l1, rel=1e-12)

    def test_symmetry(self, rng):
        a = rng.uniform(0, 1, (4, 4))
        b = rng.uniform(0, 1, (4, 4))
        assert mse_irm_loss(a, b)[0] == mse_irm_loss(b, a)[0]

    def test_gradient_matches_finite_differences(self, rng):
        pred = rng.uniform(0.05, 0.95, (4, 8))
        target = rng.uniform(0, 1, (4, 8))
        _, grad = mse_irm_loss(pred, target)
        fd = central_difference(lambda p: mse_irm_loss(p, target)[0], pred)
        np.testing.assert_allclose(grad, fd, rtol=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mse_irm_loss(np.zeros((2, 3)), np.zeros((3, 2)))


class TestBce:
    def test_near_zero_at_match(self, rng):
        target = (rng.uniform(0, 1, (5, 7)) > 0.5).astype(float)
        loss, _ = bce_tbm_loss(target, target)
        assert 0 <= loss <= target.size * 1.1e-7

    def test_half_probability(self):
        for target in (0.0, 1.0):
            loss, _ = bce_tbm_loss(np.array([[0.5]]), np.array([[target]]))
            assert loss == pytest.approx(np.log(2), abs=1e-12)

    def test_saturated_is_finite(self):
        loss, grad = bce_tbm_loss(np.array([[BCE_EPS]]), np.array([[1.0]]))
        assert loss == pytest.approx(-np.log(BCE_EPS), rel=1e-9)
        assert np.isfinite(loss)

    def test_clamped_bins_get_zero_gradient(self):
        _, grad = bce_tbm_loss(np.array([[0.0, 1.0, 0.5]]), np.array([[1.0, 0.0, 1.0]]))
        assert grad[0, 0] == 0.0
        assert grad[0, 1] == 0.0
        assert grad[0, 2] != 0.0

    def test_gradient_matches_finite_differences(self, rng):
        pred = rng.uniform(0.05, 0.95, (4, 8))
        target = (rng.uniform(0, 1, (4, 8)) > 0.5).astype(float)
        _, grad = bce_tbm_loss(pred, target)
        fd = central_difference(lambda p: bce_tbm_loss(p, target)[0], pred)
        np.testing.assert_allclose(grad, fd, rtol=1e-5)

    def test_minimized_at_target(self):
        # grid search over a single bin
        grid = np.linspace(BCE_EPS, 1 - BCE_EPS, 201)
        for target in (0.0, 1.0):
            losses = [bce_tbm_loss(np.array([[p]]), np.array([[target]]))[0] for p in grid]
            assert grid[int(np.argmin(losses))] == pytest.approx(target, abs=0.01)

    def test_nonnegative(self, rng):
        for _ in range(20):
            pred = rng.uniform(0, 1, (3, 5))
            target = (rng.uniform(0, 1, (3, 5)) > 0.5).astype(float)
            assert bce_tbm_loss(pred, target)[0] >= 0
            assert mse_irm_loss(pred, target)[0] >= 0


class TestCombined:
    def test_perfect_predictions(self, rng):
        irm = rng.uniform(0, 1, (3, 4))
        tbm = (rng.uniform(0, 1, (3, 4)) > 0.5).astype(float)
        report = combined_loss(irm, tbm, irm, tbm, LossWeights(alpha=0.1))
        assert report.total == pytest.approx(0.0, abs=1e-6)

    def test_alpha_zero_degenerates_to_mse(self, rng):
        irm = rng.uniform(0, 1, (3, 4))
        tbm = rng.uniform(0, 1, (3, 4))
        t_irm = rng.uniform(0, 1, (3, 4))
        t_tbm = (rng.uniform(0, 1, (3, 4)) > 0.5).astype(float)
        report = combined_loss(irm, tbm, t_irm, t_tbm, LossWeights(alpha=0.0))
        assert report.total == mse_irm_loss(irm, t_irm)[0]
        assert np.all(report.grad_tbm == 0)

    def test_arithmetic(self):
        report = combined_loss(
            np.array([0.2, 0.9]),
            np.array([0.5, 0.5]),
            np.array([0.0, 1.0]),
            np.array([1.0, 1.0]),
            LossWeights(alpha=0.1),
        )
        assert report.irm_loss == pytest.approx(0.05, abs=1e-12)
        assert report.tbm_loss == pytest.approx(2 * np.log(2), abs=1e-12)
        assert report.total == pytest.approx(0.05 + 0.1 * 2 * np.log(2), rel=1e-12)

    def test_total_consistency(self, rng):
        irm = rng.uniform(0, 1, (5, 6))
        tbm = rng.uniform(0, 1, (5, 6))
        t_irm = rng.uniform(0, 1, (5, 6))
        t_tbm = (rng.uniform(0, 1, (5, 6)) > 0.5).astype(float)
        w = LossWeights(alpha=0.37)
        report = combined_loss(irm, tbm, t_irm, t_tbm, w)
        assert report.total == pytest.approx(
            report.irm_loss + w.alpha * report.tbm_loss, rel=1e-12
        )

    def test_perceptual_weight_rejected(self):
        with pytest.raises(NotImplementedError):
            LossWeights(alpha=0.1, perceptual=10.0)

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(alpha=-0.1)
