import numpy as np
import pytest

from app.core.exceptions import EmptyInputError, ShapeMismatchError
from app.core.provenance import config_hash
from app.crud import crud_artifact
from app.engine.tensor import Tape, Tensor
from app.schemas.attack import AttackConfig
from app.schemas.eval_point import EvalPoint
from app.services import attack_service
from app.services.attack_service import (
    AttackService,
    dina_coefficients,
    dina_loss,
    eina_loss,
    evaluate_attack,
    mla_attack,
    partition_subblocks,
    train_inversion,
)
from app.services.dataset_service import gen_synthetic


def P(text: str) -> EvalPoint:
    return EvalPoint.parse(text)


@pytest.fixture
def quick_config():
    return AttackConfig(kind="eina", epochs=1, batch_size=6, eval_samples=3, iterations=5, lr=0.05, seed=2)


@pytest.fixture
def split(dataset):
    return dataset.subset(slice(0, 12), "train"), dataset.subset(slice(12, 18), "test")


class TestPartition:
    def test_post_relu_point(self, toy_spec):
        blocks = partition_subblocks(toy_spec, P("2.5"))
        assert [(b.start, b.stop, b.relu_count) for b in blocks] == [(0, 3, 1), (3, 7, 1)]
        assert blocks[0].ends_at == P("1.5") and blocks[1].ends_at == P("2.5")
        assert blocks[0].input_shape == (3, 8, 8) and blocks[0].output_shape == (8, 4, 4)

    def test_linear_point_leaves_partial_block(self, toy_spec):
        blocks = partition_subblocks(toy_spec, P("2"))
        assert [(b.start, b.stop, b.relu_count) for b in blocks] == [(0, 3, 1), (3, 4, 0)]
        assert blocks[-1].partial

    def test_first_linear_point(self, toy_spec):
        blocks = partition_subblocks(toy_spec, P("1"))
        assert len(blocks) == 1 and blocks[0].partial

    def test_input_point(self, toy_spec):
        assert partition_subblocks(toy_spec, EvalPoint(block=0)) == []


class TestLosses:
    def test_doubling_coefficients(self):
        assert dina_coefficients(8) == [1, 3, 6, 12, 24, 48, 96, 192, 384]
        assert dina_coefficients(0) == [1]

    def test_uniform_coefficients(self):
        assert dina_coefficients(2, "uniform") == [1, 1, 1]

    def test_negative_count(self):
        with pytest.raises(ValueError):
            dina_coefficients(-1)

    def test_weighted_sum(self):
        x, x_hat = Tensor(np.array([[1.0, 1.0]])), Tensor(np.zeros((1, 2)))
        distilled, block_input = Tensor(np.array([[1.0, 2.0]])), Tensor(np.zeros((1, 2)))
        loss = dina_loss(x, x_hat, [(distilled, block_input)], [1.0, 3.0])
        # 1·2 + 3·5
        assert loss.item() == pytest.approx(17.0)

    def test_without_pairs_equals_reconstruction_loss(self, rng):
        x, x_hat = Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(2, 3)))
        assert dina_loss(x, x_hat, [], [1.0]).item() == pytest.approx(eina_loss(x, x_hat).item())

    def test_gradient_reaches_block_input(self):
        x, x_hat = Tensor(np.zeros((1, 1))), Tensor(np.zeros((1, 1)))
        distilled, block_input = Tensor(np.array([[2.0]])), Tensor(np.array([[1.0]]))
        with Tape() as tape:
            loss = dina_loss(x, x_hat, [(distilled, block_input)], [1.0, 3.0])
        grads = tape.backward(loss, wrt=[block_input])
        # d/dI 3(D − I)² = −6(D − I)
        assert grads[block_input][0, 0] == pytest.approx(-6.0)

    def test_coefficient_count_mismatch(self):
        x = Tensor(np.zeros((1, 2)))
        with pytest.raises(ShapeMismatchError):
            dina_loss(x, x, [(x, x)], [1.0])

    def test_pair_shape_mismatch(self):
        x = Tensor(np.zeros((1, 2)))
        with pytest.raises(ShapeMismatchError, match="pair 1"):
            dina_loss(x, x, [(x, Tensor(np.zeros((1, 3))))], [1.0, 3.0])


class TestMla:
    def test_identity_prefix_converges(self, toy_model, dataset):
        target = dataset.images[:2]
        config = AttackConfig(kind="mla", iterations=60, lr=0.25)
        result = mla_attack(toy_model, EvalPoint(block=0), target, config, seed=1)
        assert result.objective[-1] <= 1e-6
        np.testing.assert_allclose(result.recovered, target, atol=1e-3)

    def test_objective_decreases(self, toy_model, dataset):
        point = P("1")
        target = toy_model.forward_prefix(dataset.images[:2], point)
        result = mla_attack(toy_model, point, target, AttackConfig(kind="mla", iterations=20, lr=0.01), seed=0)
        assert result.objective[-1] < result.objective[0]
        assert np.all((result.recovered >= 0) & (result.recovered <= 1))

    def test_target_shape_checked(self, toy_model, rng):
        with pytest.raises(ShapeMismatchError):
            mla_attack(toy_model, P("1.5"), rng.normal(size=(1, 8, 8, 8)), AttackConfig(kind="mla", iterations=1))


class TestInversionTraining:
    def test_trains_dina_network(self, toy_model, split, quick_config):
        train, test = split
        network = train_inversion(toy_model, P("2.5"), train, quick_config, "dina", seed=3)
        recovered = network.invert(toy_model.forward_prefix(test.images, P("2.5")))
        assert recovered.shape == test.images.shape
        assert np.all(np.isfinite(recovered))

    def test_same_seed_same_weights(self, toy_model, split, quick_config):
        train, _ = split
        a = train_inversion(toy_model, P("1.5"), train, quick_config, "eina", seed=3)
        b = train_inversion(toy_model, P("1.5"), train, quick_config, "eina", seed=3)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_empty_dataset(self, toy_model, dataset, quick_config):
        with pytest.raises(EmptyInputError):
            train_inversion(toy_model, P("1"), dataset.take(0), quick_config, "eina")


class TestEvaluate:
    def test_perfect_recovery(self, dataset):
        report = evaluate_attack(dataset.images[:3], dataset.images[:3], sigma=0.3, target=P("1"), kind="mla")
        assert report.avg_ssim == pytest.approx(1.0)
        assert report.succeeded

    def test_recoveries_are_clipped(self, dataset):
        originals = dataset.images[:2]
        report = evaluate_attack(originals + 5.0, originals, kind="eina")
        clipped = evaluate_attack(np.ones_like(originals), originals, kind="eina")
        assert report.per_image_ssim == clipped.per_image_ssim

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            evaluate_attack(np.zeros((0, 3, 8, 8)), np.zeros((0, 3, 8, 8)))


class TestAttackService:
    def test_report(self, toy_model, split, quick_config):
        train, test = split
        report = AttackService(toy_model, train, test, quick_config).run(P("1.5"), sigma=0.3)
        assert len(report.per_image_ssim) == 3
        assert report.kind == "eina" and report.target == P("1.5")
        assert -1.0 <= report.avg_ssim <= 1.0

    def test_kind_override(self, toy_model, split, quick_config):
        train, test = split
        outcome = AttackService(toy_model, train, test, quick_config).attack(P("1"), kind="mla")
        assert outcome.report.kind == "mla" and outcome.report.config.kind == "mla"
        assert outcome.recovered.shape == (3, 3, 8, 8)

    def test_parallel_matches_sequential(self, toy_model, split, quick_config):
        train, test = split
        service = AttackService(toy_model, train, test, quick_config)
        points = [P("1"), P("1.5"), P("2")]
        sequential = [o.report.per_image_ssim for o in service.run_many(points, workers=1)]
        parallel = [o.report.per_image_ssim for o in service.run_many(points, workers=3)]
        assert parallel == sequential

    def test_inversion_cache(self, toy_model, split, quick_config, isolated_cache):
        train, test = split
        service = AttackService(toy_model, train, test, quick_config, model_hash="abc", use_cache=True)
        first = service.run(P("1.5"))
        path = crud_artifact.inversion_cache_path("abc", "1.5", config_hash(quick_config), "eina", train.fingerprint())
        assert path.is_file() and path.parent == isolated_cache
        assert service.run(P("1.5")).per_image_ssim == first.per_image_ssim

    def test_inversion_cache_misses_on_other_data(self, toy_model, split, quick_config, isolated_cache, monkeypatch):
        train, test = split
        AttackService(toy_model, train, test, quick_config, model_hash="abc", use_cache=True).run(P("1.5"))
        other = gen_synthetic(seed=8, classes=3, size=8, n_per_class=4)
        assert other.fingerprint() != train.fingerprint()

        trained = []
        real = attack_service.train_inversion
        monkeypatch.setattr(attack_service, "train_inversion", lambda *args: trained.append(args) or real(*args))
        AttackService(toy_model, other, test, quick_config, model_hash="abc", use_cache=True).run(P("1.5"))
        assert len(trained) == 1
        assert len(list(isolated_cache.glob("inversion-eina-1.5-*.npz"))) == 2

    def test_noise_changes_recovery(self, toy_model, split, quick_config):
        train, test = split
        clean = AttackService(toy_model, train, test, quick_config).recover(P("1"), "mla")[0]
        noisy_config = quick_config.model_copy(update={"noise_lambda": 0.5})
        noisy = AttackService(toy_model, train, test, noisy_config).recover(P("1"), "mla")[0]
        assert not np.array_equal(clean, noisy)
