import numpy as np
import pytest
from scipy.signal.windows import gaussian

from app.core.exceptions import EmptyInputError, ShapeMismatchError
from app.schemas.eval_point import EvalPoint
from app.schemas.metrics import SsimConfig
from app.services.metrics_service import noised_accuracy, ssim, ssim_batch, ssim_window, top1_accuracy


def _brute_force_ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig) -> float:
    """창 위치마다 가중 평균/분산/공분산을 직접 계산합니다."""
    line = gaussian(cfg.window, cfg.gaussian_sigma)
    window = np.outer(line, line)
    window /= window.sum()
    size = cfg.window
    scores = []
    for channel in range(a.shape[0]):
        for i in range(a.shape[1] - size + 1):
            for j in range(a.shape[2] - size + 1):
                pa = a[channel, i : i + size, j : j + size]
                pb = b[channel, i : i + size, j : j + size]
                mu_a, mu_b = np.sum(window * pa), np.sum(window * pb)
                var_a = np.sum(window * pa * pa) - mu_a**2
                var_b = np.sum(window * pb * pb) - mu_b**2
                cov = np.sum(window * pa * pb) - mu_a * mu_b
                scores.append(
                    ((2 * mu_a * mu_b + cfg.c1) * (2 * cov + cfg.c2))
                    / ((mu_a**2 + mu_b**2 + cfg.c1) * (var_a + var_b + cfg.c2))
                )
    return float(np.mean(scores))


class TestSsim:
    def test_identical_images(self, rng):
        image = rng.uniform(size=(3, 16, 16))
        assert ssim(image, image) == pytest.approx(1.0)

    def test_constant_images_closed_form(self):
        # 창보다 작은 이미지: μa=0, μb=1, 분산 0 → C1 / (1 + C1)
        value = ssim(np.zeros((3, 8, 8)), np.ones((3, 8, 8)))
        assert value == pytest.approx(1e-4 / 1.0001, rel=1e-9)
        assert value == pytest.approx(9.999e-5, rel=1e-4)

    def test_symmetric(self, rng):
        a, b = rng.uniform(size=(3, 14, 14)), rng.uniform(size=(3, 14, 14))
        assert ssim(a, b) == pytest.approx(ssim(b, a))

    def test_matches_brute_force(self, rng):
        a = rng.uniform(size=(2, 14, 13))
        b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
        cfg = SsimConfig()
        assert ssim(a, b, cfg) == pytest.approx(_brute_force_ssim(a, b, cfg), abs=1e-9)

    def test_noise_lowers_score(self, rng):
        image = rng.uniform(size=(3, 16, 16))
        slight = np.clip(image + rng.normal(0, 0.02, size=image.shape), 0, 1)
        heavy = np.clip(image + rng.normal(0, 0.3, size=image.shape), 0, 1)
        assert ssim(image, slight) > ssim(image, heavy)

    def test_grayscale(self, rng):
        image = rng.uniform(size=(12, 12))
        assert ssim(image, image) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ssim(np.zeros((3, 8, 8)), np.zeros((3, 8, 9)))

    def test_small_image_window_is_uniform(self):
        window = ssim_window(11, 1.5, 8, 9)
        assert window.shape == (8, 8)
        assert np.allclose(window, 1 / 64)

    def test_batch(self, rng):
        images = rng.uniform(size=(4, 3, 8, 8))
        np.testing.assert_allclose(ssim_batch(images, images), np.ones(4))
        with pytest.raises(ShapeMismatchError):
            ssim_batch(images[:3], images)


class TestAccuracy:
    def test_ties_pick_lowest_class(self):
        logits = np.array([[1.0, 1.0, 0.0], [0.0, 2.0, 2.0]])
        assert top1_accuracy(logits, np.array([0, 1])) == 1.0
        assert top1_accuracy(logits, np.array([1, 2])) == 0.0

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            top1_accuracy(np.zeros((0, 3)), np.zeros(0, dtype=int))

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            top1_accuracy(np.zeros((2, 3)), np.zeros(3, dtype=int))

    def test_noised_accuracy_without_noise(self, toy_model, dataset):
        expected = top1_accuracy(toy_model.forward_full(dataset.images), dataset.labels)
        for point in toy_model.points:
            assert noised_accuracy(toy_model, point, 0.0, dataset) == pytest.approx(expected)

    def test_noised_accuracy_is_seeded(self, toy_model, dataset):
        point = EvalPoint.parse("1.5")
        first = noised_accuracy(toy_model, point, 0.5, dataset, trials=3, seed=4)
        second = noised_accuracy(toy_model, point, 0.5, dataset, trials=3, seed=4)
        assert first == second
        assert 0.0 <= first <= 1.0

    def test_noise_at_next_point(self, toy_model, dataset):
        assert noised_accuracy(toy_model, EvalPoint.parse("3"), 0.0, dataset, noise_at="next") == pytest.approx(
            top1_accuracy(toy_model.forward_full(dataset.images), dataset.labels)
        )

    def test_input_point_noise(self, toy_model, dataset):
        value = noised_accuracy(toy_model, EvalPoint(block=0), 0.1, dataset, seed=1)
        assert 0.0 <= value <= 1.0
