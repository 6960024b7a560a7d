#!/usr/bin/env python3
"""
Comparaison réduite NLSTM / LSTM empilé sur PTB caractères

500 Ko du split d'entraînement, cellules de 128, 3 époques, graines fixes.
Rapport indicatif seulement: aucun seuil n'est vérifié.

Usage:
    python scripts/compare_ptb.py --ptb-dir data/ptb --out runs/compare_ptb
"""

import argparse
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from nlstm.core.exceptions import NLSTMError
from nlstm.core.logging import configure_logging
from nlstm.repositories.run_repository import RunRepository
from nlstm.services.pipeline_service import PipelineService

SHAPES = {
    "nlstm": ["model.architecture=nlstm", "model.layers=1", "model.nesting_depth=2"],
    "stacked": ["model.architecture=stacked", "model.layers=2", "model.nesting_depth=1"],
}


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="NLSTM vs LSTM empilé sur 500 Ko de PTB")
    parser.add_argument("--ptb-dir", required=True, help="Dossier contenant ptb.char.{train,valid,test}.txt")
    parser.add_argument("--out", default="runs/compare_ptb", help="Dossier des runs")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--cell-size", type=int, default=128)
    parser.add_argument("--max-train-chars", type=int, default=500_000)
    return parser.parse_args()


def run_shape(pipeline: PipelineService, repository: RunRepository, args: argparse.Namespace,
              name: str, overrides: list) -> float:
    ptb_dir = Path(args.ptb_dir)
    out = Path(args.out)
    config = repository.load_run_config(
        "ptb",
        overrides=[
            *overrides,
            f"model.cell_size={args.cell_size}",
            f"train.epochs={args.epochs}",
            f"data.max_train_chars={args.max_train_chars}",
            f"data.prepared_dir={out / 'data'}",
            *(f"data.{split}={ptb_dir / f'ptb.char.{split}.txt'}" for split in ("train", "valid", "test")),
        ],
        seed=args.seed,
        out_dir=str(out / name),
    )
    if not (out / "data" / "manifest.json").is_file():
        pipeline.prepare(config)
    print(f"🚀 {name}: entraînement ({args.epochs} époques, cellule {args.cell_size})")
    result, _ = pipeline.train(config)
    record = next(r for r in result.history if r.epoch == result.best_epoch)
    return record.value("valid", "bpc")


def main() -> int:
    """Fonction principale"""
    args = parse_args()
    configure_logging()
    repository = RunRepository()
    pipeline = PipelineService(run_repository=repository)

    try:
        scores = {name: run_shape(pipeline, repository, args, name, overrides) for name, overrides in SHAPES.items()}
    except NLSTMError as e:
        print(f"❌ error[{e.code}]: {e.message}", file=sys.stderr)
        return e.exit_code

    print("=" * 50)
    print(f"{'modèle':<12}{'meilleure BPC valid':>24}")
    for name, score in scores.items():
        print(f"{name:<12}{score:>24.4f}")
    print("=" * 50)
    return 0


if __name__ == "__main__":
    sys.exit(main())
