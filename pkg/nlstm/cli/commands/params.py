import argparse

from nlstm.cli.commands.common import add_config_arguments, load_config
from nlstm.cli.deps import get_pipeline_service
from nlstm.core.exceptions import EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("params", help="Table des paramètres du modèle et des modèles de référence")
    add_config_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    for row in get_pipeline_service().param_table(load_config(args)):
        print(row.to_line())
    return EXIT_OK
