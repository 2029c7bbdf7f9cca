# app/commands/attack.py
# 지정한 EvalPoint(들) 에서 입력 복원 공격 → AttackReport JSON + 복원 이미지 덤프

import logging

import click

from app.commands.deps import common_options, get_pipeline, load_config, model_option, out_path, parse_point
from app.core.config import settings
from app.crud import crud_artifact
from app.schemas.eval_point import INPUT_POINT
from app.services.attack_service import AttackService

logger = logging.getLogger(__name__)


@click.command("attack", help="MLA / EINA / DINA 로 경계 활성값에서 입력을 복원해 봅니다.")
@common_options
@model_option
@click.option("--point", "points", multiple=True, callback=parse_point, help='EvalPoint, 예: "2.5" (여러 번 지정 가능)')
@click.option("--all-layers", is_flag=True, help="모든 EvalPoint 를 병렬로 공격합니다")
@click.option("--kind", type=click.Choice(["mla", "eina", "dina"]), default=None)
@click.option("--lambda", "noise_lambda", type=click.FloatRange(min=0), default=0.0, show_default=True)
@click.option("--sigma", type=click.FloatRange(0, 1, min_open=True), default=None)
@click.option("--epochs", type=click.IntRange(min=0), default=None, help="역변환 모델 학습 epoch")
@click.option("--iterations", type=click.IntRange(min=1), default=None, help="MLA 반복 횟수")
@click.option("--workers", type=click.IntRange(min=1), default=None)
def attack_command(
    config_path, seed, out_dir, model_path, points, all_layers, kind, noise_lambda, sigma, epochs, iterations, workers
):
    config = load_config(
        config_path,
        seed=seed,
        model_path=model_path,
        attack_kind=kind,
        sigma=sigma,
        attack_epochs=epochs,
        attack_iterations=iterations,
    )
    prepared = get_pipeline(config).prepare()
    targets = list(prepared.model.points) if all_layers else list(points)
    if not targets:
        raise click.UsageError("give at least one --point or --all-layers")
    service = AttackService(
        prepared.model,
        prepared.train,
        prepared.test,
        config.attack_config(noise_lambda=noise_lambda),
        prepared.model_hash,
        use_cache=True,
    )
    workers = (workers or settings.PARALLEL_WORKERS) if all_layers else 1
    outcomes = service.run_many(targets, sigma=config.sigma, workers=workers)

    for point, outcome in zip(targets, outcomes):
        stem = f"attack-{config.attack_kind}-{point.render() if point != INPUT_POINT else 'input'}"
        crud_artifact.write_artifact(out_path(out_dir, f"{stem}.json"), outcome.report)
        crud_artifact.dump_recovered(out_path(out_dir, stem), outcome.recovered)
        report = outcome.report
        click.echo(f"{point}\tavg_ssim={report.avg_ssim:.6f}\tsucceeded={report.succeeded}")
