import argparse

from nlstm.cli.commands.common import add_config_arguments, load_config
from nlstm.cli.deps import get_pipeline_service, get_run_repository, get_settings_dependency
from nlstm.core.exceptions import EXIT_OK
from nlstm.repositories.run_repository import CHECKPOINT_FILE
from nlstm.utils.validators import parse_units


def register(subparsers) -> None:
    parser = subparsers.add_parser("trace", help="Exporte les mémoires des cellules en CSV")
    add_config_arguments(parser)
    parser.add_argument("--checkpoint", default=None, help="Checkpoint (défaut: <out>/best.ckpt)")
    parser.add_argument("--split", default="test", choices=("train", "valid", "test"))
    parser.add_argument("--units", default=None, help="Unités tracées A..B, bornes incluses")
    parser.add_argument("--length", type=int, default=None, help="Longueur de la séquence tracée")
    parser.add_argument("--offset", type=int, default=0, help="Position de départ dans le split")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    settings = get_settings_dependency()
    config = load_config(args)
    checkpoint = args.checkpoint or str(get_run_repository().out_dir(config) / CHECKPOINT_FILE)
    report = get_pipeline_service().trace(
        config,
        checkpoint,
        args.split,
        parse_units(args.units or settings.default_units),
        args.length or settings.trace_length,
        args.offset,
    )
    print(report.path)
    for level, rate in report.rates.items():
        print(f"{level}\t{rate!r}")
    return EXIT_OK
