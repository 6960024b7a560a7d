import argparse

from nlstm.cli.commands.common import add_config_arguments, load_config
from nlstm.cli.deps import get_pipeline_service
from nlstm.core.exceptions import EXIT_OK
from nlstm.repositories.run_repository import CHECKPOINT_FILE, HISTORY_FILE


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Entraîne un modèle sur les données préparées")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    result, out_dir = get_pipeline_service().train(load_config(args))
    print(f"best_epoch={result.best_epoch}\tsteps={result.steps}")
    print(out_dir / HISTORY_FILE)
    print(out_dir / CHECKPOINT_FILE)
    return EXIT_OK
