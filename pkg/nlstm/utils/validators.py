import re
from typing import Tuple

from nlstm.core.exceptions import ConfigError

UNITS_PATTERN = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*$")
KEY_PATTERN = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)*$")


def parse_assignment(text: str) -> Tuple[str, str]:
    """
    Découpe une affectation ``clé=valeur`` (option --set ou ligne de fichier conf)

    Args:
        text: l'affectation brute, la clé peut être pointée (``model.cell_size``)

    Returns:
        (clé, valeur) sans espaces superflus; la valeur peut être vide (= non renseignée)

    Raises:
        ConfigError: si le ``=`` manque ou si la clé est mal formée
    """
    if "=" not in text:
        raise ConfigError(f"Affectation invalide (clé=valeur attendu): {text!r}")
    key, value = text.split("=", 1)
    key = key.strip()
    if not KEY_PATTERN.match(key):
        raise ConfigError(f"Clé de configuration invalide: {key!r}")
    return key, value.strip()


def parse_units(text: str) -> range:
    """
    Plage d'unités ``A..B`` (bornes incluses)

    Raises:
        ConfigError: si la plage est mal formée ou vide
    """
    match = UNITS_PATTERN.match(text)
    if not match:
        raise ConfigError(f"Plage d'unités invalide (A..B attendu): {text!r}")
    first, last = int(match.group(1)), int(match.group(2))
    if last < first:
        raise ConfigError(f"Plage d'unités vide: {text!r}")
    return range(first, last + 1)


def escape_symbol(symbol: str) -> str:
    """Échappe un caractère pour l'export CSV (``\\n`` -> ``\\\\n``); les caractères imprimables restent tels quels."""
    if symbol.isprintable() and symbol != "\\":
        return symbol
    return symbol.encode("unicode_escape").decode("ascii")
