# app/services/attack_service.py
# 서버 측 입력 복원 공격: MLA (경사 하강 역추정), EINA / DINA (역변환 모델 학습)

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core.exceptions import DivergenceError, EmptyInputError, NonFiniteError, ShapeMismatchError
from app.core.provenance import config_hash, derive_seed
from app.crud import crud_artifact
from app.engine import functional as F
from app.engine.optim import SGD
from app.engine.tensor import Tape, Tensor
from app.models.dataset import Dataset
from app.models.inversion import InversionNetwork, inverse_block_spec
from app.models.network import TrainedModel, point_extents, prefix_cut
from app.schemas.attack import AttackConfig, AttackReport, InversionModelSpec, SubBlock
from app.schemas.eval_point import EvalPoint
from app.schemas.metrics import SsimConfig
from app.schemas.model_spec import ModelSpec
from app.services.metrics_service import ssim_batch

logger = logging.getLogger(__name__)


def partition_subblocks(spec: ModelSpec, point: EvalPoint) -> list[SubBlock]:
    """
    point 까지의 prefix 를 ReLU 로 끝나는 서브 블록으로 나눕니다.
    정수 지점이면 마지막 선형 연산이 ReLU 없는 부분 블록으로 남습니다.
    """
    cut = prefix_cut(spec, point, allow_input=True)
    blocks: list[SubBlock] = []
    start = 0
    for candidate, extent in point_extents(spec).items():
        if not candidate.post_relu or extent > cut:
            continue
        blocks.append(
            SubBlock(
                start=start,
                stop=extent,
                ends_at=candidate,
                relu_count=1,
                input_shape=spec.shape_after(start),
                output_shape=spec.shape_after(extent),
            )
        )
        start = extent
    if start < cut:
        blocks.append(
            SubBlock(
                start=start,
                stop=cut,
                ends_at=point,
                relu_count=0,
                input_shape=spec.shape_after(start),
                output_shape=spec.shape_after(cut),
            )
        )
    return blocks


def dina_coefficients(count: int, schedule: str = "doubling") -> list[float]:
    """α_0 … α_N. doubling: 1, 3, 6, 12, … / uniform: 모두 1."""
    if count < 0:
        raise ValueError(f"distillation point count must be >= 0, got {count}")
    if schedule == "uniform":
        return [1.0] * (count + 1)
    coefficients = [1.0]
    for j in range(1, count + 1):
        coefficients.append(3.0 if j == 1 else 2.0 * coefficients[-1])
    return coefficients


def eina_loss(x: Tensor, x_hat: Tensor) -> Tensor:
    """‖x − x̂‖²₂"""
    if x.shape != x_hat.shape:
        raise ShapeMismatchError("reconstruction", x.shape, x_hat.shape)
    return F.sum_squares(F.sub(x, x_hat))


def dina_loss(
    x: Tensor,
    x_hat: Tensor,
    pairs: Sequence[tuple[Tensor, Tensor]],
    coefficients: Sequence[float],
) -> Tensor:
    """Σ_j α_j ‖D_j − I_j‖²₂ + α_0 ‖x − x̂‖²₂ (pairs[j−1] = (D_j, I_j))."""
    if len(coefficients) != len(pairs) + 1:
        raise ShapeMismatchError("dina coefficients", (len(pairs) + 1,), (len(coefficients),))
    terms = [F.mul_scalar(eina_loss(x, x_hat), coefficients[0])]
    for j, (distilled, block_input) in enumerate(pairs, start=1):
        if distilled.shape != block_input.shape:
            raise ShapeMismatchError(f"distillation pair {j}", distilled.shape, block_input.shape)
        terms.append(F.mul_scalar(F.sum_squares(F.sub(distilled, block_input)), coefficients[j]))
    return F.add_scalars(*terms)


def build_inversion_spec(spec: ModelSpec, point: EvalPoint, mode: str) -> InversionModelSpec:
    blocks = [inverse_block_spec(sb.output_shape, sb.input_shape) for sb in partition_subblocks(spec, point)]
    return InversionModelSpec(
        mode=mode,
        target=point,
        input_shape=spec.shape_after(prefix_cut(spec, point, allow_input=True)),
        output_shape=tuple(spec.input_shape),
        blocks=blocks,
    )


def _noised(activation: np.ndarray, noise_lambda: float, rng: np.random.Generator) -> np.ndarray:
    if noise_lambda <= 0:
        return activation
    return activation + rng.uniform(-noise_lambda, noise_lambda, size=activation.shape)


def train_inversion(
    model: TrainedModel,
    point: EvalPoint,
    dataset: Dataset,
    config: AttackConfig,
    mode: str,
    seed: int | None = None,
) -> InversionNetwork:
    """
    공격자 자신의 데이터로 (M_l(x), x) 쌍을 만들어 M* 를 학습합니다.
    DINA 는 서브 블록 경계의 평문 활성값 D_j 로 각 inverse block 의 입력을 감독합니다.
    """
    seed = config.seed if seed is None else seed
    images = dataset.images if config.train_samples is None else dataset.images[: config.train_samples]
    if len(images) == 0:
        raise EmptyInputError("inversion training set is empty")
    inv_spec = build_inversion_spec(model.spec, point, mode)
    network = InversionNetwork.initialize(inv_spec, seed)
    subblocks = partition_subblocks(model.spec, point)
    seams = [model.forward_prefix(images, sb.ends_at) for sb in subblocks[:-1]] if mode == "dina" else []
    coefficients = dina_coefficients(len(seams), config.schedule)
    boundary = model.forward_prefix(images, point, allow_input=True)

    rng = np.random.default_rng(derive_seed(seed, "inversion-batches"))
    optimizer = SGD(config.inversion_sgd)
    params = network.params
    logger.info(
        f"🚀 Training {mode.upper()} inversion at {point}: {len(subblocks)} sub-blocks, "
        f"{len(seams)} distillation points, epochs={config.epochs}"
    )
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(images))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            activation = _noised(boundary[batch], config.noise_lambda, rng)
            with Tape() as tape:
                tensors = {name: Tensor(value, name=name) for name, value in params.items()}
                recovered, block_inputs = network.forward(Tensor(activation), tensors)
                pairs = [(Tensor(seam[batch]), block_inputs[j]) for j, seam in enumerate(seams)]
                loss = dina_loss(Tensor(images[batch]), recovered, pairs, coefficients)
                loss = F.mul_scalar(loss, 1.0 / len(batch))
            value = loss.item()
            if not np.isfinite(value):
                logger.error(f"❌ Inversion training diverged at epoch {epoch}")
                raise DivergenceError(epoch, value)
            if not tensors:
                continue
            grads = tape.backward(loss, wrt=list(tensors.values()))
            try:
                params = optimizer.step(params, {t.name: g for t, g in grads.items()})
            except NonFiniteError:
                raise DivergenceError(epoch, float("nan")) from None
            total += value * len(batch)
        logger.debug(f"{mode} epoch {epoch}: loss={total / len(images):.5f}")
    return InversionNetwork(inv_spec, params)


@dataclass(frozen=True, eq=False)
class MlaResult:
    recovered: np.ndarray
    objective: list[float]


def mla_attack(
    model: TrainedModel,
    point: EvalPoint,
    target: np.ndarray,
    config: AttackConfig,
    seed: int | None = None,
) -> MlaResult:
    """
    x̂ = argmin ‖M_l(x̂) − M_l(x)‖²₂ 를 경사 하강으로 구합니다. 매 스텝 [0, 1] 로 자릅니다.
    목적함수가 유한하지 않으면 새 시드로 한 번 다시 시작합니다.
    """
    seed = config.seed if seed is None else seed
    target = np.asarray(target, dtype=np.float64)
    expected = model.activation_shape(point)
    if target.shape[1:] != expected:
        raise ShapeMismatchError(f"MLA target at {point}", ("N", *expected), target.shape)
    target_t = Tensor(target)
    for attempt in range(2):
        rng = np.random.default_rng(derive_seed(seed, "mla", attempt))
        x = rng.uniform(0.0, 1.0, size=(target.shape[0], *model.spec.input_shape))
        trace: list[float] = []
        for _ in range(config.iterations):
            with Tape() as tape:
                x_t = Tensor(x)
                objective = F.sum_squares(F.sub(model.prefix_tensor(x_t, point), target_t))
            value = objective.item()
            if not np.isfinite(value):
                break
            trace.append(value)
            grad = tape.backward(objective, wrt=[x_t])[x_t]
            x = np.clip(x - config.lr * grad, 0.0, 1.0)
        else:
            return MlaResult(x, trace)
        logger.warning(f"⚠️ MLA objective became non-finite at {point}; restarting with a new seed")
    raise DivergenceError(config.iterations, float("nan"))


def evaluate_attack(
    recoveries: np.ndarray,
    originals: np.ndarray,
    sigma: float = 0.3,
    target: EvalPoint | None = None,
    kind: str = "dina",
    config: AttackConfig | None = None,
    ssim_cfg: SsimConfig | None = None,
    provenance: dict | None = None,
) -> AttackReport:
    """복원 이미지를 [0, 1] 로 자른 뒤 이미지별 SSIM 을 구합니다."""
    if len(recoveries) == 0 or len(originals) == 0:
        raise EmptyInputError("attack evaluation needs at least one image")
    config = config or AttackConfig(kind=kind)
    scores = ssim_batch(np.clip(recoveries, 0.0, 1.0), originals, ssim_cfg or config.ssim)
    return AttackReport(
        target=target or EvalPoint(block=0),
        kind=kind,
        per_image_ssim=[float(s) for s in scores],
        sigma=sigma,
        config=config,
        provenance=provenance or {},
    )


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    report: AttackReport
    recovered: np.ndarray


class AttackService:
    """
    한 모델에 대한 공격 실행기. 역변환 모델은 (model hash, 지점, 설정 해시, 모드) 로 캐시합니다.
    지점마다 시드를 파생하므로 병렬 실행과 순차 실행의 결과가 같습니다.
    """

    def __init__(
        self,
        model: TrainedModel,
        train: Dataset,
        test: Dataset,
        config: AttackConfig,
        model_hash: str = "",
        use_cache: bool = False,
    ):
        self.model = model
        self.train = train
        self.test = test
        self.config = config
        self.model_hash = model_hash
        self.use_cache = use_cache and bool(model_hash)

    def _inversion(self, point: EvalPoint, mode: str, seed: int) -> InversionNetwork:
        path = crud_artifact.inversion_cache_path(
            self.model_hash, point.render(), config_hash(self.config), mode, self.train.fingerprint()
        )
        if self.use_cache:
            cached = crud_artifact.load_params(path)
            if cached is not None:
                network = InversionNetwork(build_inversion_spec(self.model.spec, point, mode), cached)
                if set(cached) == set(InversionNetwork.initialize(network.spec, 0).params):
                    logger.info(f"✅ Inversion cache hit: {path.name}")
                    return network
        network = train_inversion(self.model, point, self.train, self.config, mode, seed)
        if self.use_cache:
            crud_artifact.save_params(path, network.params)
        return network

    def recover(self, point: EvalPoint, kind: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(복원 이미지, 원본 이미지) 를 돌려줍니다. 평가 입력의 활성값에는 설정된 λ 노이즈가 더해집니다."""
        kind = kind or self.config.kind
        seed = derive_seed(self.config.seed, point.render(), kind)
        originals = self.test.images[: self.config.eval_samples]
        activation = self.model.forward_prefix(originals, point, allow_input=True)
        activation = _noised(activation, self.config.noise_lambda, np.random.default_rng(derive_seed(seed, "noise")))
        if kind == "mla":
            recovered = mla_attack(self.model, point, activation, self.config, seed).recovered
        else:
            recovered = self._inversion(point, kind, seed).invert(activation)
        return recovered, originals

    def attack(self, point: EvalPoint, kind: str | None = None, sigma: float = 0.3) -> AttackOutcome:
        kind = kind or self.config.kind
        recovered, originals = self.recover(point, kind)
        config = self.config.model_copy(update={"kind": kind})
        report = evaluate_attack(
            recovered,
            originals,
            sigma,
            point,
            kind,
            config,
            provenance={"model_hash": self.model_hash, "config_hash": config_hash(config)},
        )
        logger.info(f"✅ {kind.upper()} at {point}: avg SSIM={report.avg_ssim:.4f} (σ={sigma})")
        return AttackOutcome(report, np.clip(recovered, 0.0, 1.0))

    def run(self, point: EvalPoint, kind: str | None = None, sigma: float = 0.3) -> AttackReport:
        return self.attack(point, kind, sigma).report

    def run_many(
        self, points: Sequence[EvalPoint], kind: str | None = None, sigma: float = 0.3, workers: int = 1
    ) -> list[AttackOutcome]:
        """지점별 독립 작업. 결과는 points 순서대로 합칩니다."""
        if workers <= 1:
            return [self.attack(point, kind, sigma) for point in points]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda point: self.attack(point, kind, sigma), points))
