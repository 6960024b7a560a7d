import argparse

from nlstm.cli.commands import evaluate, params, prep, trace, train
from nlstm.core.exceptions import ConfigError


class CliParser(argparse.ArgumentParser):
    """Les erreurs d'usage deviennent des ConfigError (code de sortie 1)."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(prog="nlstm", description="Nested LSTM: préparation, entraînement, évaluation, trace")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    # Commandes
    prep.register(subparsers)
    train.register(subparsers)
    evaluate.register(subparsers)
    trace.register(subparsers)
    params.register(subparsers)
    return parser
