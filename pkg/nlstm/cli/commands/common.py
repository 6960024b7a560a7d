import argparse

from nlstm.cli.deps import get_run_repository
from nlstm.schemas.run_config import RunConfig


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Options partagées: --config, --set, --seed, --out."""
    parser.add_argument("--config", required=True, help="Fichier .conf ou preset (ptb, text8, mnist, smoke)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Surcharge une clé de configuration (répétable)")
    parser.add_argument("--seed", type=int, default=None, help="Graine du modèle et de l'entraînement")
    parser.add_argument("--out", default=None, help="Répertoire de sortie du run")


def load_config(args: argparse.Namespace) -> RunConfig:
    return get_run_repository().load_run_config(args.config, args.overrides, args.seed, args.out)
