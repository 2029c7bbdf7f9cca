# app/commands/cli.py

from app.commands.attack import attack_command
from app.commands.report import report_command
from app.commands.run_pi import run_pi_command
from app.commands.search import search_command
from app.commands.sweep_noise import sweep_noise_command
from app.commands.train import train_command

# 👇 각 명령 모듈을 직접 임포트해 한 목록으로 등록합니다
commands = [
    train_command,
    attack_command,
    search_command,
    run_pi_command,
    sweep_noise_command,
    report_command,
]
