import argparse

from nlstm.cli.commands.common import add_config_arguments, load_config
from nlstm.cli.deps import get_pipeline_service
from nlstm.core.exceptions import EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("prep", help="Prépare les données (vocabulaire, splits, glimpses)")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    prepared, directory = get_pipeline_service().prepare(config)
    sizes = " ".join(f"{split}={prepared.split_size(split)}" for split in prepared.splits)
    print(f"{directory}\tinput_size={prepared.input_size}\toutput_size={prepared.output_size}\t{sizes}")
    return EXIT_OK
