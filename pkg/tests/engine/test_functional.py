import numpy as np
import pytest

from app.core.exceptions import ShapeMismatchError, UnknownLayerKindError
from app.engine import functional as F
from app.engine.gradcheck import grad_check
from app.engine.tensor import Tape, Tensor


SEEDS = range(20)


def _away_from_zero(rng, shape):
    """ReLU 꺾임점 근처 값을 피한 난수."""
    magnitude = rng.uniform(0.1, 1.0, size=shape)
    return magnitude * rng.choice([-1.0, 1.0], size=shape)


def _distinct(rng, shape):
    """풀링 창 안에서 동률이 없도록 0.1 간격의 서로 다른 값."""
    return (rng.permutation(int(np.prod(shape))).reshape(shape) - np.prod(shape) / 2) * 0.1


@pytest.mark.parametrize("seed", SEEDS)
class TestGradCheck:
    def test_conv2d_padded(self, seed):
        rng = np.random.default_rng(seed)
        params = {"weight": rng.normal(size=(2, 2, 3, 3)), "bias": rng.normal(size=2)}
        assert grad_check("conv2d", params, rng.normal(size=(2, 2, 5, 5)), seed=seed, padding=1)

    def test_conv2d_strided(self, seed):
        rng = np.random.default_rng(seed)
        params = {"weight": rng.normal(size=(3, 2, 3, 3)), "bias": rng.normal(size=3)}
        assert grad_check("conv2d", params, rng.normal(size=(1, 2, 7, 7)), seed=seed, stride=2)

    def test_conv2d_dilated(self, seed):
        rng = np.random.default_rng(seed)
        params = {"weight": rng.normal(size=(2, 2, 3, 3)), "bias": rng.normal(size=2)}
        assert grad_check("conv2d", params, rng.normal(size=(1, 2, 6, 6)), seed=seed, padding=2, dilation=2)

    def test_dense(self, seed):
        rng = np.random.default_rng(seed)
        params = {"weight": rng.normal(size=(3, 4)), "bias": rng.normal(size=3)}
        assert grad_check("dense", params, rng.normal(size=(2, 4)), seed=seed)

    def test_relu(self, seed):
        rng = np.random.default_rng(seed)
        assert grad_check("relu", {}, _away_from_zero(rng, (2, 3, 4, 4)), seed=seed)

    def test_maxpool(self, seed):
        rng = np.random.default_rng(seed)
        assert grad_check("maxpool", {}, _distinct(rng, (2, 2, 4, 4)), seed=seed, kernel=2)

    def test_avgpool(self, seed):
        rng = np.random.default_rng(seed)
        assert grad_check("avgpool", {}, rng.normal(size=(1, 2, 4, 4)), seed=seed, kernel=2)

    def test_flatten(self, seed):
        rng = np.random.default_rng(seed)
        assert grad_check("flatten", {}, rng.normal(size=(2, 2, 3, 3)), seed=seed)

    def test_upsample_nearest(self, seed):
        rng = np.random.default_rng(seed)
        assert grad_check("upsample_nearest", {}, rng.normal(size=(1, 2, 3, 3)), seed=seed, factor=2)

    def test_residual_add(self, seed):
        rng = np.random.default_rng(seed)
        assert grad_check("add", {"other": rng.normal(size=(2, 5))}, rng.normal(size=(2, 5)), seed=seed)

    def test_detects_wrong_gradient(self, seed):
        def broken(x, params):
            # 순전파는 2x 인데 역전파는 x 를 그대로 흘립니다
            return F.record_op("broken", (x,), 2 * x.data, lambda g: (g,))

        assert not grad_check(broken, {}, np.random.default_rng(seed).normal(size=(2, 3)), seed=seed)


class TestTape:
    def test_sum_squares_gradient(self):
        x = Tensor(np.array([[1.0, -2.0, 3.0]]))
        with Tape() as tape:
            loss = F.sum_squares(x)
        grads = tape.backward(loss, wrt=[x])
        np.testing.assert_allclose(grads[x], [[2.0, -4.0, 6.0]])

    def test_replays_every_entry_once_in_reverse(self, rng):
        x = Tensor(rng.normal(size=(2, 3)))
        with Tape() as tape:
            y = F.relu(x)
            z = F.mul_scalar(y, 3.0)
            loss = F.sum_squares(z)
        tape.backward(loss)
        assert tape.replayed == [2, 1, 0]

    def test_shared_input_accumulates(self):
        x = Tensor(np.array([[1.0, 2.0]]))
        with Tape() as tape:
            loss = F.sum_squares(F.add(x, x))
        grads = tape.backward(loss, wrt=[x])
        # d/dx (2x)^2 = 8x
        np.testing.assert_allclose(grads[x], [[8.0, 16.0]])

    def test_unused_tensor_gets_zero_gradient(self):
        x, unused = Tensor(np.ones((1, 2))), Tensor(np.ones((1, 3)))
        with Tape() as tape:
            loss = F.sum_squares(x)
        assert np.all(tape.backward(loss, wrt=[unused])[unused] == 0)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones((2, 2)))
        with Tape() as tape:
            y = F.relu(x)
        with pytest.raises(ShapeMismatchError):
            tape.backward(y)

    def test_ops_outside_tape_are_not_recorded(self):
        with Tape() as tape:
            pass
        F.relu(Tensor(np.ones((1, 1))))
        assert tape.entries == []


class TestForwardOps:
    def test_softmax_cross_entropy_uniform_logits(self):
        loss = F.softmax_cross_entropy(Tensor(np.zeros((4, 5))), np.array([0, 1, 2, 3]))
        assert loss.item() == pytest.approx(np.log(5))

    def test_maxpool_picks_window_maximum(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        out = F.maxpool2d(Tensor(x), 2).data
        np.testing.assert_array_equal(out[0, 0], [[5, 7], [13, 15]])

    def test_conv_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            F.conv2d(Tensor(rng.normal(size=(1, 3, 5, 5))), Tensor(rng.normal(size=(2, 2, 3, 3))))

    def test_dense_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            F.dense(Tensor(rng.normal(size=(2, 4))), Tensor(rng.normal(size=(3, 5))))

    def test_unknown_kind(self):
        with pytest.raises(UnknownLayerKindError):
            F.forward("batchnorm", {}, Tensor(np.ones((1, 2))))

    def test_tensor_is_read_only(self):
        t = Tensor(np.zeros(3))
        with pytest.raises(ValueError):
            t.data[0] = 1.0
