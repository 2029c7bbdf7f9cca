# app/commands/sweep_noise.py
# 고정 EvalPoint 에서 λ 를 바꿔 가며 (λ, avg_ssim, accuracy) CSV 를 만듭니다

import click

from app.commands.deps import common_options, get_pipeline, load_config, model_option, out_path, parse_point
from app.crud import crud_artifact
from app.services.pipeline_service import parse_lambda_range


@click.command("sweep-noise", help="노이즈 크기에 따른 공격 SSIM 과 정확도를 측정합니다.")
@common_options
@model_option
@click.option("--point", required=True, callback=parse_point, help='EvalPoint, 예: "2.5"')
@click.option("--lambdas", default="0:0.5:0.05", show_default=True, help="start:stop:step 또는 a,b,c")
@click.option("--kind", type=click.Choice(["mla", "eina", "dina"]), default=None)
def sweep_noise_command(config_path, seed, out_dir, model_path, point, lambdas, kind):
    grid = parse_lambda_range(lambdas)
    config = load_config(config_path, seed=seed, model_path=model_path, attack_kind=kind)
    pipeline = get_pipeline(config)
    rows = pipeline.sweep_noise(pipeline.prepare(), point, grid)
    path = crud_artifact.write_csv(
        out_path(out_dir, "noise_sweep.csv"),
        ["lambda", "avg_ssim", "accuracy"],
        [(row.noise_lambda, row.avg_ssim, row.accuracy) for row in rows],
    )
    click.echo(f"{path}\trows={len(rows)}")
