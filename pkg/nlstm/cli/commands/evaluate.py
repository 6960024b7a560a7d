import argparse

from nlstm.cli.commands.common import add_config_arguments, load_config
from nlstm.cli.deps import get_pipeline_service, get_run_repository
from nlstm.core.exceptions import EXIT_OK
from nlstm.repositories.run_repository import CHECKPOINT_FILE


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Évalue un checkpoint sur un split")
    add_config_arguments(parser)
    parser.add_argument("--checkpoint", default=None, help="Checkpoint (défaut: <out>/best.ckpt)")
    parser.add_argument("--split", default="valid", choices=("train", "valid", "test"))
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    checkpoint = args.checkpoint or str(get_run_repository().out_dir(config) / CHECKPOINT_FILE)
    for record in get_pipeline_service().evaluate(config, checkpoint, args.split):
        print(record.to_line())
    return EXIT_OK
