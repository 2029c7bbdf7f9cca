# app/commands/report.py
# σ 별 (데이터셋, 모델, 기준 정확도, 경계, 경계 정확도) 표

import click

from app.commands.deps import common_options, get_pipeline, load_config, model_option, out_path
from app.crud import crud_artifact

HEADER = ["dataset", "model", "baseline_acc", "sigma", "boundary", "lambda", "acc"]
COST_HEADER = [
    "full_pi_bytes",
    "full_pi_rounds",
    "boundary_bytes",
    "boundary_rounds",
    "lan_seconds",
    "wan_seconds",
    "full_pi_lan_seconds",
    "full_pi_wan_seconds",
]


@click.command("report", help="전체 파이프라인을 돌려 표 형태의 결과를 만듭니다.")
@common_options
@model_option
@click.option("--sigma", "sigmas", type=click.FloatRange(0, 1, min_open=True), multiple=True, help="여러 번 지정 가능")
@click.option("--with-costs", is_flag=True, help="crypto 페이즈 통신량과 LAN/WAN 지연 추정 포함")
@click.option("--calibrate", is_flag=True, help="σ 마다 경계에서의 최대 노이즈 크기 열 추가")
def report_command(config_path, seed, out_dir, model_path, sigmas, with_costs, calibrate):
    config = load_config(config_path, seed=seed, model_path=model_path)
    pipeline = get_pipeline(config)
    report, results = pipeline.report(pipeline.prepare(), sigmas or config.report_sigmas, with_costs, calibrate)

    header = HEADER + (["calibrated_lambda"] if calibrate else []) + (COST_HEADER if with_costs else [])
    rows = []
    for row in report.rows:
        values = [row.dataset, row.model, row.baseline_acc, row.sigma, row.boundary.render(), row.noise_lambda, row.acc]
        if calibrate:
            values.append(row.calibrated_lambda)
        if row.costs is not None:
            values += [getattr(row.costs, name) for name in COST_HEADER]
        rows.append(values)

    crud_artifact.write_artifact(out_path(out_dir, "report.json"), report)
    for result in results:
        crud_artifact.write_artifact(out_path(out_dir, f"boundary-sigma{result.sigma}.json"), result)
    crud_artifact.write_csv(out_path(out_dir, "report.csv"), header, rows)
    for row in report.rows:
        click.echo(f"σ={row.sigma}\tboundary={row.boundary}\tacc={row.acc:.4f}\tbaseline={row.baseline_acc:.4f}")
