#!/usr/bin/env python3
"""
Téléchargement des jeux de données (PTB caractères, text8, MNIST)

Outil hors du paquet: les commandes nlstm ne font jamais d'accès réseau.

Usage:
    python scripts/fetch_datasets.py --dest data ptb text8 mnist
"""

import argparse
import gzip
import io
import sys
import tarfile
import zipfile
from pathlib import Path

import httpx

PTB_ARCHIVE = "http://www.fit.vutbr.cz/~imikolov/rnnlm/simple-examples.tgz"
TEXT8_ARCHIVE = "http://mattmahoney.net/dc/text8.zip"
MNIST_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist"
MNIST_FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)


def download(client: httpx.Client, url: str) -> bytes:
    print(f"⬇️  {url}")
    with client.stream("GET", url) as response:
        response.raise_for_status()
        return b"".join(response.iter_bytes())


def fetch_ptb(client: httpx.Client, dest: Path) -> None:
    target = dest / "ptb"
    target.mkdir(parents=True, exist_ok=True)
    with tarfile.open(fileobj=io.BytesIO(download(client, PTB_ARCHIVE)), mode="r:gz") as archive:
        for split in ("train", "valid", "test"):
            member = archive.getmember(f"./simple-examples/data/ptb.char.{split}.txt")
            (target / f"ptb.char.{split}.txt").write_bytes(archive.extractfile(member).read())
    print(f"✅ PTB caractères -> {target}")


def fetch_text8(client: httpx.Client, dest: Path) -> None:
    target = dest / "text8"
    target.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(io.BytesIO(download(client, TEXT8_ARCHIVE))) as archive:
        (target / "text8").write_bytes(archive.read("text8"))
    print(f"✅ text8 -> {target}")


def fetch_mnist(client: httpx.Client, dest: Path) -> None:
    target = dest / "mnist"
    target.mkdir(parents=True, exist_ok=True)
    for name in MNIST_FILES:
        (target / name).write_bytes(gzip.decompress(download(client, f"{MNIST_MIRROR}/{name}.gz")))
    print(f"✅ MNIST -> {target}")


FETCHERS = {"ptb": fetch_ptb, "text8": fetch_text8, "mnist": fetch_mnist}


def main() -> int:
    """Fonction principale"""
    parser = argparse.ArgumentParser(description="Télécharge les jeux de données des presets")
    parser.add_argument("datasets", nargs="+", choices=sorted(FETCHERS))
    parser.add_argument("--dest", default="data", help="Dossier de destination")
    parser.add_argument("--timeout", type=float, default=60.0, help="Timeout HTTP en secondes")
    args = parser.parse_args()

    dest = Path(args.dest)
    try:
        with httpx.Client(timeout=httpx.Timeout(args.timeout), follow_redirects=True) as client:
            for name in args.datasets:
                FETCHERS[name](client, dest)
    except httpx.TimeoutException:
        print("❌ Timeout dépassé", file=sys.stderr)
        return 2
    except httpx.HTTPError as e:
        print(f"❌ Erreur HTTP: {e}", file=sys.stderr)
        return 2
    except (KeyError, tarfile.TarError, zipfile.BadZipFile, OSError) as e:
        print(f"❌ Archive inattendue: {e}", file=sys.stderr)
        return 2

    print("🎉 Téléchargements terminés")
    print(f"   ptb:   --set data.train={dest}/ptb/ptb.char.train.txt (idem valid/test)")
    print(f"   text8: --set data.train={dest}/text8/text8")
    print(f"   mnist: --set data.train={dest}/mnist/train-images-idx3-ubyte ...")
    return 0


if __name__ == "__main__":
    sys.exit(main())
