# app/services/training_service.py

import logging

import numpy as np

from app.core.exceptions import DivergenceError, EmptyInputError, NonFiniteError, ShapeMismatchError
from app.engine import functional as F
from app.engine.optim import SGD
from app.engine.tensor import Tape, Tensor
from app.models.dataset import Dataset
from app.models.network import TrainedModel, apply_layers
from app.models.zoo import init_weights
from app.schemas.model_spec import ModelSpec
from app.schemas.training import TrainingConfig, TrainingMeta
from app.services.metrics_service import top1_accuracy

logger = logging.getLogger(__name__)


def train_model(
    spec: ModelSpec,
    dataset: Dataset,
    config: TrainingConfig,
    test: Dataset | None = None,
) -> TrainedModel:
    """
    softmax 교차 엔트로피 + 미니배치 SGD. 같은 시드면 비트 단위로 같은 가중치를 만듭니다.
    epoch 마다 시드 생성기로 순서를 섞습니다.
    """
    if len(dataset) == 0:
        raise EmptyInputError("training dataset is empty")
    if dataset.input_shape != tuple(spec.input_shape):
        raise ShapeMismatchError("training data", spec.input_shape, dataset.input_shape)
    sgd = config.sgd
    params = init_weights(spec, sgd.seed)
    optimizer = SGD(sgd)
    rng = np.random.default_rng(sgd.seed + 1)
    epoch_losses: list[float] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(dataset))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            with Tape() as tape:
                tensors = {name: Tensor(value, name=name) for name, value in params.items()}
                logits = apply_layers(spec, tensors, Tensor(dataset.images[batch]))
                loss = F.softmax_cross_entropy(logits, dataset.labels[batch])
            value = loss.item()
            if not np.isfinite(value):
                logger.error(f"❌ Training diverged at epoch {epoch} (loss={value})")
                raise DivergenceError(epoch, value)
            grads = tape.backward(loss, wrt=list(tensors.values()))
            try:
                params = optimizer.step(params, {t.name: g for t, g in grads.items()})
            except NonFiniteError:
                logger.error(f"❌ Training diverged at epoch {epoch} (non-finite gradient)")
                raise DivergenceError(epoch, float("nan")) from None
            total += value * len(batch)
            seen += len(batch)
        epoch_losses.append(total / max(seen, 1))
        logger.info(f"epoch {epoch}/{config.epochs}: loss={epoch_losses[-1]:.4f}")

    model = TrainedModel(spec, params)
    accuracy = None
    if test is not None and len(test):
        accuracy = top1_accuracy(model.forward_full(test.images), test.labels)
    meta = TrainingMeta(
        seed=sgd.seed,
        epochs=config.epochs,
        batch_size=config.batch_size,
        learning_rate=sgd.learning_rate,
        momentum=sgd.momentum,
        epoch_losses=epoch_losses,
        final_accuracy=accuracy,
    )
    logger.info(f"✅ Training finished: {spec.name}, test accuracy={accuracy}")
    return TrainedModel(spec, model.weights, meta)
