import numpy as np
import pytest

from app.core.exceptions import CalibrationError, ConfigError, EmptyInputError, NoBoundaryError
from app.schemas.eval_point import EvalPoint
from app.schemas.experiment import ExperimentConfig
from app.services.boundary_service import BoundaryService, calibrate_noise, search_boundary, select_noise

POINTS = [EvalPoint.parse(t) for t in ["1", "1.5", "2", "2.5", "3"]]


def _lookup(values: dict[str, float]):
    return lambda point, *_: values[point.render()]


class RecordingIdpa:
    def __init__(self, values: dict[str, float]):
        self.values = values
        self.calls: list[str] = []

    def __call__(self, point: EvalPoint) -> float:
        self.calls.append(point.render())
        return self.values[point.render()]


def _oracle(ssim: list[float], acc: list[float], sigma: float, delta: float) -> int | None:
    """단조 입력에서의 기대 경계 인덱스. 경계가 없으면 None."""
    last = len(ssim) - 1
    succeeded = [i for i in range(max(last - 1, 0) + 1) if ssim[i] >= sigma]
    candidate = min(max(succeeded) + 1, last) if succeeded else min(1, last)
    for j in range(candidate, last + 1):
        if acc[j] >= delta:
            return j
    return None


class TestSearchBoundary:
    def test_walks_back_then_forward(self):
        idpa = RecordingIdpa({"2.5": 0.1, "2": 0.2, "1.5": 0.5, "1": 0.9})
        accuracy = _lookup({"2": 0.4, "2.5": 0.8, "3": 0.9})
        result = search_boundary(POINTS, idpa, accuracy, sigma=0.3, delta=0.7, noise_lambda=0.1)
        assert idpa.calls == ["2.5", "2", "1.5"]
        assert [e.point.render() for e in result.phase2_trace] == ["2", "2.5"]
        assert result.boundary == EvalPoint.parse("2.5")
        assert not result.degenerate
        assert result.noise_lambda == 0.1

    def test_last_point_is_never_attacked(self):
        idpa = RecordingIdpa({"2.5": 0.9})
        result = search_boundary(POINTS, idpa, _lookup({"3": 1.0}), sigma=0.3, delta=0.5, noise_lambda=0.0)
        assert idpa.calls == ["2.5"]
        assert result.boundary == EvalPoint.parse("3")

    def test_degenerate_when_attack_always_fails(self):
        idpa = RecordingIdpa({p.render(): 0.05 for p in POINTS})
        result = search_boundary(POINTS, idpa, _lookup({"1.5": 0.95}), sigma=0.3, delta=0.5, noise_lambda=0.0)
        assert result.degenerate
        assert idpa.calls == ["2.5", "2", "1.5", "1"]
        assert result.boundary == EvalPoint.parse("1.5")

    def test_single_point(self):
        only = [EvalPoint.parse("1")]
        result = search_boundary(only, lambda p: 0.0, lambda p, l: 1.0, sigma=0.3, delta=0.5, noise_lambda=0.0)
        assert result.boundary == only[0] and result.degenerate

    def test_no_boundary(self):
        with pytest.raises(NoBoundaryError):
            search_boundary(POINTS, lambda p: 0.9, lambda p, l: 0.1, sigma=0.3, delta=0.5, noise_lambda=0.2)

    def test_empty_points(self):
        with pytest.raises(EmptyInputError):
            search_boundary([], lambda p: 0.0, lambda p, l: 1.0, sigma=0.3, delta=0.5, noise_lambda=0.0)

    @pytest.mark.parametrize("sigma, delta", [(0.0, 0.5), (1.5, 0.5), (0.3, 0.0), (0.3, 1.2)])
    def test_thresholds_out_of_range(self, sigma, delta):
        with pytest.raises(ConfigError):
            search_boundary(POINTS, lambda p: 0.0, lambda p, l: 1.0, sigma=sigma, delta=delta, noise_lambda=0.0)

    def test_matches_oracle_on_random_monotone_curves(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(1, 8))
            points = [EvalPoint(block=i // 2 + 1, post_relu=bool(i % 2)) for i in range(n)]
            ssim = sorted(rng.uniform(0, 1, size=n), reverse=True)
            acc = sorted(rng.uniform(0, 1, size=n))
            sigma, delta = float(rng.uniform(0.05, 1)), float(rng.uniform(0.05, 1))
            by_point = {p: i for i, p in enumerate(points)}
            expected = _oracle(ssim, acc, sigma, delta)
            call = lambda: search_boundary(
                points,
                lambda p: ssim[by_point[p]],
                lambda p, l: acc[by_point[p]],
                sigma=sigma,
                delta=delta,
                noise_lambda=0.1,
            )
            if expected is None:
                with pytest.raises(NoBoundaryError):
                    call()
            else:
                assert call().boundary == points[expected]


class TestSelectNoise:
    def test_largest_passing_lambda(self):
        table = {0.0: 0.9, 0.1: 0.8, 0.2: 0.7, 0.3: 0.6}
        assert select_noise(table.__getitem__, [0.0, 0.1, 0.2, 0.3], delta=0.75) == 0.1

    def test_non_monotone_curve_takes_max(self):
        table = {0.0: 0.9, 0.1: 0.6, 0.2: 0.8}
        assert select_noise(table.__getitem__, [0.0, 0.1, 0.2], delta=0.75) == 0.2

    def test_noise_free_accuracy_already_too_low(self):
        with pytest.raises(CalibrationError):
            select_noise(lambda l: 0.5, [0.0, 0.1], delta=0.75)

    def test_nothing_passes(self):
        with pytest.raises(CalibrationError):
            select_noise(lambda l: 0.5, [0.1, 0.2], delta=0.75)

    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            select_noise(lambda l: 1.0, [0.2, 0.1], delta=0.5)
        with pytest.raises(ConfigError):
            select_noise(lambda l: 1.0, [-0.1, 0.1], delta=0.5)
        with pytest.raises(EmptyInputError):
            select_noise(lambda l: 1.0, [], delta=0.5)

    def test_calibrate_with_model(self, toy_model, dataset):
        assert calibrate_noise(toy_model, EvalPoint.parse("1.5"), [0.0, 0.1, 0.2], 0.0, dataset) == 0.2


@pytest.fixture
def service(toy_model, dataset):
    config = ExperimentConfig.load(None, delta_drop=0.1, attack_kind="mla")
    train, test = dataset.subset(slice(0, 12), "train"), dataset.subset(slice(12, 18), "test")
    service = BoundaryService(toy_model, train, test, config, model_hash="feed", use_cache=False)
    service._baseline = 0.9
    return service


class FakeAttacks:
    def __init__(self, values):
        self.values = values
        self.runs: list[str] = []

    def run(self, point, kind=None, sigma=0.3):
        self.runs.append(point.render())
        return type("Report", (), {"avg_ssim": self.values[point.render()]})()

    def run_many(self, points, kind=None, sigma=0.3, workers=1):
        return [type("Outcome", (), {"report": self.run(p)})() for p in points]


class TestBoundaryService:
    def test_delta_from_baseline(self, service):
        assert service.delta() == pytest.approx(0.8)

    def test_delta_must_stay_positive(self, service):
        service._baseline = 0.05
        with pytest.raises(ConfigError):
            service.delta()

    def test_idpa_is_cached(self, service, monkeypatch):
        fake = FakeAttacks({"2": 0.4})
        monkeypatch.setattr(service, "attack_service", lambda noise_lambda: fake)
        assert service.idpa(EvalPoint.parse("2"), 0.1, 0.3) == 0.4
        assert service.idpa(EvalPoint.parse("2"), 0.1, 0.3) == 0.4
        assert fake.runs == ["2"]

    def test_search_records_provenance(self, service, monkeypatch):
        fake = FakeAttacks({"2.5": 0.1, "2": 0.5})
        monkeypatch.setattr(service, "attack_service", lambda noise_lambda: fake)
        monkeypatch.setattr(service, "accuracy", lambda point, noise_lambda: 0.85)
        result = service.search(sigma=0.3, noise_lambda=0.05)
        assert result.boundary == EvalPoint.parse("2.5")
        assert result.baseline_accuracy == 0.9
        assert result.delta == pytest.approx(0.8)
        assert result.provenance["model_hash"] == "feed"
        assert result.provenance["attack"] == "mla"

    def test_with_calibration_fills_result(self, service, monkeypatch):
        fake = FakeAttacks({"2.5": 0.1, "2": 0.5})
        monkeypatch.setattr(service, "attack_service", lambda noise_lambda: fake)
        monkeypatch.setattr(service, "accuracy", lambda point, noise_lambda: 0.85)
        monkeypatch.setattr(service, "calibrate", lambda boundary: 0.2 if boundary.post_relu else 0.0)
        result = service.with_calibration(service.search(sigma=0.3, noise_lambda=0.05))
        assert result.calibrated_lambda == 0.2
        assert result.boundary == EvalPoint.parse("2.5")

    def test_precompute_fills_cache(self, service, monkeypatch):
        fake = FakeAttacks({p.render(): 0.0 for p in POINTS})
        monkeypatch.setattr(service, "attack_service", lambda noise_lambda: fake)
        service.precompute(POINTS, 0.1, 0.3)
        assert sorted(fake.runs) == ["1", "1.5", "2", "2.5"]
        service.idpa(EvalPoint.parse("1"), 0.1, 0.3)
        assert len(fake.runs) == 4

    def test_real_accuracy_without_noise(self, service):
        value = service.accuracy(EvalPoint.parse("1.5"), 0.0)
        assert 0.0 <= value <= 1.0
