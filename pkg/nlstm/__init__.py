"""Nested LSTM: cellules à mémoire imbriquée, entraînement et analyse en numpy."""

__version__ = "1.0.0"
