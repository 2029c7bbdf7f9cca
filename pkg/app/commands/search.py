# app/commands/search.py
# 경계 탐색 → BoundaryResult JSON

import logging

import click

from app.commands.deps import common_options, get_pipeline, load_config, model_option, out_path
from app.crud import crud_artifact

logger = logging.getLogger(__name__)


@click.command("search", help="crypto/clear 경계를 탐색합니다.")
@common_options
@model_option
@click.option("--sigma", type=click.FloatRange(0, 1, min_open=True), default=None)
@click.option("--delta-drop", type=click.FloatRange(0, 1, max_open=True), default=None)
@click.option("--lambda", "noise_lambda", type=click.FloatRange(min=0), default=None)
@click.option("--kind", type=click.Choice(["mla", "eina", "dina"]), default=None, help="1단계에서 사용할 공격")
@click.option("--noise-at", type=click.Choice(["output", "next"]), default=None, help="정확도 측정 시 노이즈 위치")
@click.option("--parallel", is_flag=True, help="모든 지점의 공격을 미리 병렬 실행")
@click.option("--calibrate", is_flag=True, help="찾은 경계에서 최대 노이즈 크기도 구합니다")
def search_command(
    config_path, seed, out_dir, model_path, sigma, delta_drop, noise_lambda, kind, noise_at, parallel, calibrate
):
    config = load_config(
        config_path,
        seed=seed,
        model_path=model_path,
        sigma=sigma,
        delta_drop=delta_drop,
        noise_lambda=noise_lambda,
        attack_kind=kind,
        noise_at=noise_at,
        parallel_precompute=parallel or None,
    )
    pipeline = get_pipeline(config)
    prepared = pipeline.prepare()
    service = pipeline.boundary_service(prepared)
    result = service.search()
    if calibrate:
        result = service.with_calibration(result)
    crud_artifact.write_artifact(out_path(out_dir, "boundary.json"), result)
    click.echo(f"boundary={result.boundary}\tbaseline={result.baseline_accuracy:.4f}\tdelta={result.delta:.4f}")
    if result.calibrated_lambda is not None:
        click.echo(f"calibrated_lambda={result.calibrated_lambda}")
