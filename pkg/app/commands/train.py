# app/commands/train.py
# 모델 학습 → .c2m 저장

import logging

import click

from app.commands.deps import common_options, get_pipeline, load_config, out_path
from app.crud import crud_model
from app.models.zoo import MODEL_BUILDERS

logger = logging.getLogger(__name__)


@click.command("train", help="설정된 데이터셋으로 모델을 학습하고 .c2m 파일로 저장합니다.")
@common_options
@click.option("--model-name", type=click.Choice(sorted(MODEL_BUILDERS)), default=None, help="zoo 모델 이름")
@click.option("--epochs", type=click.IntRange(min=0), default=None)
@click.option("--batch-size", type=click.IntRange(min=1), default=None)
@click.option("--learning-rate", type=float, default=None)
def train_command(config_path, seed, out_dir, model_name, epochs, batch_size, learning_rate):
    config = load_config(
        config_path, seed=seed, model=model_name, epochs=epochs, batch_size=batch_size, learning_rate=learning_rate
    )
    prepared = get_pipeline(config).prepare(model_path=None)
    path = out_path(out_dir, f"{config.model}.c2m")
    digest = crud_model.save_model(prepared.model, path)
    accuracy = prepared.model.training_meta.final_accuracy
    click.echo(f"{path}\tsha256={digest}\ttest_accuracy={accuracy}")
