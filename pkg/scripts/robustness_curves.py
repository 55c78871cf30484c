#!/usr/bin/env python3
"""End-to-end certified-robustness curve experiment on a synthetic model.

Synthesizes a well-posed network, labels random inputs with the model's own
argmax, and sweeps an epsilon grid with all four certification methods:

    python scripts/robustness_curves.py --n 100 --r 20 --q 10 \
        --inputs 200 --eps-max 0.15 --grid-points 10 --out curves.csv

The output is the `method,epsilon,fraction` CSV of the `curve` subcommand;
see the README for a plotting snippet.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from implicitcert import cli
from implicitcert.certify import LabeledInput
from implicitcert.modelio import load_model, save_dataset
from implicitcert.network import _forward_solve_batch


@dataclass
class Config:
    n: int = 100
    r: int = 20
    q: int = 10
    inputs: int = 200
    eps_max: float = 0.15
    grid_points: int = 10
    seed: int = 424242
    out: str | None = None


def parse_args() -> Config:
    ap = argparse.ArgumentParser(description=__doc__)
    for name, default in [("n", 100), ("r", 20), ("q", 10), ("inputs", 200),
                          ("grid-points", 10), ("seed", 424242)]:
        ap.add_argument(f"--{name}", type=int, default=default)
    ap.add_argument("--eps-max", type=float, default=0.15)
    ap.add_argument("--out")
    a = ap.parse_args()
    return Config(a.n, a.r, a.q, a.inputs, a.eps_max, a.grid_points, a.seed, a.out)


def main() -> int:
    cfg = parse_args()
    with tempfile.TemporaryDirectory() as td:
        model = Path(td) / "model.json"
        data = Path(td) / "data.jsonl"
        rc = cli.main(["synth", "--n", str(cfg.n), "--r", str(cfg.r), "--q", str(cfg.q),
                       "--seed", str(cfg.seed), "--out", str(model)])
        if rc != 0:
            return rc

        net = load_model(model)
        rng = np.random.default_rng(cfg.seed + 1)
        U = rng.normal(size=(cfg.r, cfg.inputs))
        _, Y = _forward_solve_batch(net, U)
        records = [LabeledInput(U[:, i], int(np.argmax(Y[:, i]))) for i in range(cfg.inputs)]
        save_dataset(cfg.r, cfg.q, records, data)

        grid = ",".join(f"{v:.12g}" for v in np.linspace(0.0, cfg.eps_max, cfg.grid_points))
        argv = ["curve", str(model), str(data), "--eps-grid", grid]
        if cfg.out:
            argv += ["--out", cfg.out]
        t0 = time.perf_counter()
        rc = cli.main(argv)
        print(f"# curve sweep finished in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        return rc


if __name__ == "__main__":
    sys.exit(main())
