#!/usr/bin/env python3
"""Compare output enclosures for one model and one input box.

Computes the embedded (mm) box, the sign-split (ibp) box, and the
Lipschitz box around the nominal output, then samples outputs of random
inputs from the box so the enclosures can be plotted against the truth:

    python scripts/box_comparison.py models/example_5_1.json \
        --nominal 0.25,1.5 --lower 0,1 --upper 0.3333333333333333,2 \
        --samples 1000 --out boxes.csv

The CSV has rows `kind,tag,y1,...,yq` with kind in {box_lower, box_upper,
sample}; plot the sample cloud and the three rectangles from it.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from implicitcert.certify import ibp_solve, lipschitz_bound
from implicitcert.embedding import IntervalVector, embedded_solve
from implicitcert.errors import MaxIterExceededError
from implicitcert.modelio import atomic_write_text, load_model
from implicitcert.network import _forward_solve_batch, forward_solve


@dataclass
class Config:
    model: str
    nominal: np.ndarray
    box: IntervalVector
    samples: int
    seed: int
    out: str | None


def parse_args() -> Config:
    ap = argparse.ArgumentParser(description=__doc__)
    # vector flags must accept leading negative components
    ap._negative_number_matcher = __import__("re").compile(r"^-[\d.]")
    ap.add_argument("model")
    ap.add_argument("--nominal", required=True, help="comma-separated nominal input")
    ap.add_argument("--lower", required=True)
    ap.add_argument("--upper", required=True)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    a = ap.parse_args()
    vec = lambda s: np.array([float(x) for x in s.split(",")])
    return Config(a.model, vec(a.nominal), IntervalVector(vec(a.lower), vec(a.upper)),
                  a.samples, a.seed, a.out)


def main() -> int:
    cfg = parse_args()
    net = load_model(cfg.model)
    rows = []

    mm = embedded_solve(net, cfg.box)
    rows.append(("box_lower", "mm", mm.y_box.lower))
    rows.append(("box_upper", "mm", mm.y_box.upper))

    try:
        ibp = ibp_solve(net, cfg.box)
        rows.append(("box_lower", "ibp", ibp.y_box.lower))
        rows.append(("box_upper", "ibp", ibp.y_box.upper))
    except MaxIterExceededError as exc:
        print(f"ibp iteration did not converge ({exc}); skipping its box", file=sys.stderr)

    _, y_nom, _ = forward_solve(net, cfg.nominal)
    lip = lipschitz_bound(net)
    dev = float(max(np.max(cfg.box.upper - cfg.nominal), np.max(cfg.nominal - cfg.box.lower)))
    rows.append(("box_lower", "lip", y_nom - lip * dev))
    rows.append(("box_upper", "lip", y_nom + lip * dev))

    rng = np.random.default_rng(cfg.seed)
    V = rng.uniform(cfg.box.lower, cfg.box.upper, size=(cfg.samples, net.r)).T
    _, Y = _forward_solve_batch(net, V)
    for i in range(cfg.samples):
        rows.append(("sample", str(i), Y[:, i]))

    header = "kind,tag," + ",".join(f"y{j + 1}" for j in range(net.q))
    lines = [header] + [
        f"{kind},{tag}," + ",".join(f"{v:.12g}" for v in vec) for kind, tag, vec in rows
    ]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        atomic_write_text(cfg.out, text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
