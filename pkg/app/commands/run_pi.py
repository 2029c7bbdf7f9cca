# app/commands/run_pi.py
# 클라이언트/서버/딜러 세션을 실행하고 Transcript 와 결과를 저장합니다

import logging

import click
import numpy as np

from app.commands.deps import common_options, get_pipeline, load_config, model_option, out_path, parse_point
from app.crud import crud_artifact
from app.protocol.cost import PROFILES, estimate_latency
from app.protocol.session import run_session

logger = logging.getLogger(__name__)


@click.command("run-pi", help="경계까지 비밀 분산으로, 나머지는 평문으로 추론합니다.")
@common_options
@model_option
@click.option("--boundary", required=True, callback=parse_point, help='마지막 crypto EvalPoint, 예: "2.5"')
@click.option("--lambda", "noise_lambda", type=click.FloatRange(min=0), default=None)
@click.option("--transport", type=click.Choice(["in_proc", "tcp"]), default=None)
@click.option("--reveal", "reveal_result", type=click.Choice(["logits", "argmax"]), default=None)
@click.option("--samples", type=click.IntRange(min=1), default=1, show_default=True, help="테스트 이미지 수 (배치)")
def run_pi_command(
    config_path, seed, out_dir, model_path, boundary, noise_lambda, transport, reveal_result, samples
):
    config = load_config(
        config_path,
        seed=seed,
        model_path=model_path,
        noise_lambda=noise_lambda,
        transport=transport,
        reveal_result=reveal_result,
    )
    prepared = get_pipeline(config).prepare()
    x = prepared.test.images[:samples]
    session = config.session_config(boundary)
    result = run_session(prepared.model, x, session)

    plain = prepared.model.forward_full(x)
    summary = {
        "boundary": boundary.render(),
        "lambda": session.noise_lambda,
        "reveal": session.reveal_result,
        "output": result.output.tolist(),
        "plaintext_argmax": np.argmax(plain, axis=1).tolist(),
        "dealer_slots": result.dealer_slots,
        "latency": {
            name: estimate_latency(result.transcript, profile).model_dump() for name, profile in PROFILES.items()
        },
        "provenance": {"model_hash": prepared.model_hash, **result.transcript.provenance},
    }
    if session.reveal_result == "logits":
        summary["max_abs_diff"] = float(np.max(np.abs(result.output - plain)))
        summary["argmax_agreement"] = float(np.mean(np.argmax(result.output, axis=1) == np.argmax(plain, axis=1)))
    else:
        summary["argmax_agreement"] = float(np.mean(result.output == np.argmax(plain, axis=1)))

    crud_artifact.write_artifact(out_path(out_dir, "transcript.json"), result.transcript)
    crud_artifact.write_json(out_path(out_dir, "result.json"), summary)
    crypto = result.transcript.totals["crypto"]
    click.echo(
        f"crypto_bytes={crypto.bytes}\trounds={result.transcript.rounds}\t"
        f"argmax_agreement={summary['argmax_agreement']:.4f}"
    )
