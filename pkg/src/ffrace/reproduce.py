"""Golden values for the three worked examples and a checker that regenerates them."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bias import build_spectrum
from .characters import all_characters, char_angle, find_character, format_value
from .counting import race_trajectory
from .densities import density_exact_periodic, parity_calibration, periodic_spectrum
from .lfunctions import l_polynomial
from .unitgroup import build_modulus

S3 = math.sqrt(3)
TABLES = ("chars1", "chars2", "lfuncs1", "etable", "densities")
TRAJECTORY_TOL = 0.05
EXACT_TOL = 1e-12

EX1 = "T^2+T+1"
EX3 = "T^3+2*T"

CHARS1_CLASSES = ["1", "2", "T", "T+1", "2*T", "2*T+2"]
# rows chi_1..chi_5, where chi_k sends T+1 to exp(2 pi i k/6)
CHARS1 = {
    1: ["1", "-1", "(-1+√3i)/2", "(1+√3i)/2", "(1-√3i)/2", "(-1-√3i)/2"],
    2: ["1", "1", "(-1-√3i)/2", "(-1+√3i)/2", "(-1-√3i)/2", "(-1+√3i)/2"],
    3: ["1", "-1", "1", "-1", "-1", "1"],
    4: ["1", "1", "(-1+√3i)/2", "(-1-√3i)/2", "(-1+√3i)/2", "(-1-√3i)/2"],
    5: ["1", "-1", "(-1-√3i)/2", "(1-√3i)/2", "(1+√3i)/2", "(-1+√3i)/2"],
}
LFUNCS1 = {1: [1, S3 * 1j], 2: [1, -1], 3: [1], 4: [1, -1], 5: [1, -S3 * 1j]}

CHARS2_CLASSES = ["1", "2", "T^2+1", "T^2+T+2", "T^2+2*T+2", "2*T^2+2", "2*T^2+T+1", "2*T^2+2*T+1"]
CHARS2 = {
    1: [1, -1, -1, 1, -1, 1, 1, -1],
    2: [1, 1, 1, -1, -1, 1, -1, -1],
    3: [1, -1, -1, -1, 1, 1, -1, 1],
    4: [1, -1, 1, -1, -1, -1, 1, 1],
    5: [1, 1, -1, 1, -1, -1, -1, 1],
    6: [1, -1, 1, 1, 1, -1, -1, -1],
    7: [1, 1, -1, -1, 1, -1, 1, -1],
}
LFUNCS2 = {6: [1, 0, 3]}  # every other non-principal character: 1 - u^2

# limits of E_{m,a}(X) for X = 1, 2, 3, 4 (mod 4)
ETABLE1 = {
    "T": [S3 / 2, -1.5, -3 * S3 / 2, -1.5],
    "T+1": [S3, 3.0, 0.0, 0.0],
    "2*T": [-S3 / 2, 1.5, 3 * S3 / 2, 1.5],
    "2": [S3, 0.0, 0.0, 3.0],
}
ETABLE3 = {
    "1": [-4 * S3, -9.0, -3 * S3, -12.0],
    "T^2+1": [0.0, 3.0, S3, 0.0],
    "2*T^2+2": [S3, 0.0, 0.0, 3.0],
}
DENSITIES = [
    (EX1, ("T+1", "2*T", "2"), Fraction(1, 4)),
    (EX1, ("T", "T+1"), Fraction(0)),
    (EX3, ("1", "T^2+1"), Fraction(0)),
    (EX1, ("T+1", "T"), Fraction(1)),
    (EX3, ("1", "2*T^2+2"), Fraction(0)),
    (EX1, ("T+1", "T", "2"), Fraction(0)),
]


@dataclass
class Cell:
    table: str
    name: str
    expected: object
    got: object
    ok: bool

    def to_dict(self) -> dict:
        return {"table": self.table, "cell": self.name, "expected": _jsonable(self.expected), "got": _jsonable(self.got), "pass": self.ok}


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


@dataclass
class ReproduceResult:
    cells: list[Cell] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[Cell]:
        return [c for c in self.cells if not c.ok]

    def add(self, table, name, expected, got, ok):
        self.cells.append(Cell(table, name, expected, got, bool(ok)))


def _chars1(res: ReproduceResult) -> None:
    mod = build_modulus(EX1, 3)
    rows = []
    chars = [c for c in all_characters(mod) if c.is_principal]
    res.add("chars1", "chi_0", ["1"] * 6, [format_value(char_angle(chars[0], a)) for a in CHARS1_CLASSES],
            all(format_value(char_angle(chars[0], a)) == "1" for a in CHARS1_CLASSES))
    rows.append(["chi_0"] + ["1"] * 6)
    for k, want in CHARS1.items():
        chi = find_character(mod, {"T+1": Fraction(k, 6)})
        got = [format_value(char_angle(chi, a)) for a in CHARS1_CLASSES]
        rows.append([f"chi_{k}"] + got)
        for a, w, g in zip(CHARS1_CLASSES, want, got):
            res.add("chars1", f"chi_{k}({a})", w, g, w == g)
    res.artifacts["chars1.csv"] = (["character"] + CHARS1_CLASSES, rows)


def _lfuncs1(res: ReproduceResult) -> None:
    mod = build_modulus(EX1, 3)
    rows = []
    for k, want in LFUNCS1.items():
        chi = find_character(mod, {"T+1": Fraction(k, 6)})
        c = l_polynomial(chi).coeffs
        ok = len(c) == len(want) and np.allclose(c, want, atol=EXACT_TOL, rtol=0)
        res.add("lfuncs1", f"L(u,chi_{k})", [complex(x) for x in want], [complex(x) for x in c], ok)
        rows.append([f"chi_{k}"] + [f"{complex(x):.12g}" for x in c])
    spec = build_spectrum(mod)
    got = [complex(g) for g in spec.gamma]
    ok = len(got) == 1 and abs(got[0] - S3 * 1j) < EXACT_TOL
    res.add("lfuncs1", "positive zeros", [complex(0, S3)], got, ok)
    res.artifacts["lfuncs1.csv"] = (["character", "c0", "c1"], rows)


def _chars2(res: ReproduceResult) -> None:
    mod = build_modulus(EX3, 3)
    table = {}
    for chi in all_characters(mod):
        if chi.is_principal:
            continue
        vals = tuple(int(round(math.cos(2 * math.pi * float(char_angle(chi, a))))) for a in CHARS2_CLASSES)
        table[vals] = chi
    rows = []
    for k, want in CHARS2.items():
        chi = table.get(tuple(want))
        res.add("chars2", f"chi_{k}", want, None if chi is None else list(want), chi is not None)
        if chi is None:
            continue
        rows.append([f"chi_{k}"] + want)
        c = np.round(l_polynomial(chi).coeffs.real, 12)
        expect = LFUNCS2.get(k, [1, 0, -1])
        res.add("chars2", f"L(u,chi_{k})", expect, c.tolist(), len(c) == len(expect) and np.allclose(c, expect, atol=EXACT_TOL))
    res.add("chars2", "character count", 7, len(table), len(table) == 7)
    res.artifacts["chars2.csv"] = (["character"] + CHARS2_CLASSES, rows)


def _etable(res: ReproduceResult, x_lo: int = 30, x_hi: int = 44) -> None:
    for name, ms, gold in (("table1", EX1, ETABLE1), ("table3", EX3, ETABLE3)):
        mod = build_modulus(ms, 3)
        classes = list(gold)
        ps = periodic_spectrum(mod, classes)
        lim = ps.limits([1, 2, 3, 4])
        for j, a in enumerate(classes):
            for i in range(4):
                ok = abs(lim[i, j] - gold[a][i]) < EXACT_TOL
                res.add("etable", f"{name} limit E_{a}(X = {i + 1} mod 4)", gold[a][i], float(lim[i, j]), ok)
        tr = race_trajectory(mod, classes, x_hi)
        rows = []
        for X in range(x_lo, x_hi + 1):
            row = [X]
            for j, a in enumerate(classes):
                e = float(tr.E[X - 1, j])
                want = gold[a][(X - 1) % 4]
                res.add("etable", f"{name} trajectory E_{a}({X})", want, e, abs(e - want) <= TRAJECTORY_TOL)
                row.append(e)
            rows.append(row)
        res.artifacts[f"etable_{name}.csv"] = (["X"] + [f"E_{a}" for a in classes], rows)
        cal = parity_calibration(mod, classes, x_lo, x_hi)
        res.artifacts[f"parity_{name}.json"] = {
            "deviation_default": cal.deviation_default,
            "deviation_flipped": cal.deviation_flipped,
            "chosen": cal.chosen,
        }


def _densities(res: ReproduceResult) -> None:
    out = []
    for ms, classes, want in DENSITIES:
        mod = build_modulus(ms, 3)
        d = density_exact_periodic(mod, list(classes))
        res.add("densities", f"delta[{ms}; {', '.join(classes)}]", want, d.density, d.density == want)
        out.append({"modulus": ms, "classes": list(classes), **d.to_dict()})
    res.artifacts["densities.json"] = out


RUNNERS = {"chars1": _chars1, "chars2": _chars2, "lfuncs1": _lfuncs1, "etable": _etable, "densities": _densities}


def reproduce(tables=TABLES) -> ReproduceResult:
    res = ReproduceResult()
    for t in tables:
        RUNNERS[t](res)
    return res


def write_bundle(res: ReproduceResult, out_dir: Path, config: dict) -> Path:
    """Write artifacts and a pass/fail manifest; returns the manifest path."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, art in res.artifacts.items():
        path = out_dir / name
        if name.endswith(".csv"):
            header, rows = art
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)
        else:
            path.write_text(json.dumps(art, indent=2) + "\n")
    manifest = {
        "version": __version__,
        "config": config,
        "passed": sum(c.ok for c in res.cells),
        "failed": len(res.failures),
        "cells": [c.to_dict() for c in res.cells],
    }
    mpath = out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    return mpath
