"""Regenerate the worked-example tables and measure how fast E(X) settles.

    python3 scripts/reproduce_examples.py --out runs/examples --x-max 200
"""

from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ffrace.counting import race_trajectory
from ffrace.reproduce import EX1, EX3, ETABLE1, ETABLE3, TABLES, reproduce, write_bundle
from ffrace.unitgroup import build_modulus


@dataclass
class Config:
    out: Path = Path("runs/examples")
    tables: tuple[str, ...] = TABLES
    x_max: int = 200
    window: int = 15


def transient(modulus: str, gold: dict, x_max: int, window: int) -> list[dict]:
    """Worst |E(X) - limit| over sliding windows, with X times that gap."""
    mod = build_modulus(modulus, 3)
    classes = list(gold)
    E = race_trajectory(mod, classes, x_max).E
    out = []
    for lo in range(10, x_max - window + 2, window):
        X = np.arange(lo, lo + window)
        ref = np.array([[gold[a][(x - 1) % 4] for a in classes] for x in X])
        gap = float(np.abs(E[X - 1] - ref).max())
        out.append({"X_from": lo, "X_to": lo + window - 1, "max_gap": gap, "gap_times_X": gap * lo})
    return out


def main(cfg: Config) -> int:
    res = reproduce(cfg.tables)
    write_bundle(res, cfg.out, asdict(cfg) | {"out": str(cfg.out)})
    decay = {name: transient(ms, gold, cfg.x_max, cfg.window)
             for name, ms, gold in (("table1", EX1, ETABLE1), ("table3", EX3, ETABLE3))}
    (cfg.out / "transient.json").write_text(json.dumps(decay, indent=2))
    print(f"{len(res.cells)} cells, {len(res.failures)} outside tolerance")
    for c in res.failures[:10]:
        print(f"  {c.name}: expected {c.expected}, got {c.got}")
    for name, rows in decay.items():
        print(name, " ".join(f"X>={r['X_from']}:{r['max_gap']:.3f}" for r in rows[:6]))
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Config.out)
    ap.add_argument("--x-max", type=int, default=Config.x_max)
    ap.add_argument("--window", type=int, default=Config.window)
    a = ap.parse_args()
    raise SystemExit(main(Config(out=a.out, x_max=a.x_max, window=a.window)))
