import sys
from typing import Optional, Sequence

import structlog

from nlstm.cli.router import build_parser
from nlstm.core.exceptions import EXIT_CONFIG, NLSTMError, map_exception
from nlstm.core.logging import configure_logging

logger = structlog.get_logger()


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Point d'entrée du CLI

    Returns:
        int: 0 succès, 1 usage/configuration, 2 données, 3 divergence numérique
    """
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except SystemExit as e:
        # --help
        if e.code is None or isinstance(e.code, int):
            return e.code or 0
        return EXIT_CONFIG
    except NLSTMError as e:
        return _report(e)
    except (OSError, ValueError) as e:
        return _report(map_exception(e))


def _report(error: NLSTMError) -> int:
    logger.error("❌ Commande interrompue", code=error.code, exit_code=error.exit_code, **error.details)
    print(f"error[{error.code}]: {error.message}", file=sys.stderr)
    return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
