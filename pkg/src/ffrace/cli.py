"""Command-line entry point: ``ffrace <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, lfunctions
from .bias import (
    b_m,
    b_m_predictor,
    build_spectrum,
    first_moment_bm,
    race_report,
)
from .characters import all_characters, char_angle, format_value
from .densities import (
    LimitingSampler,
    asymptotic_density,
    density_count,
    density_exact_periodic,
    default_probes,
)
from .errors import CapExceededError, NumericalError, PreconditionError
from .ffpoly import parse_poly
from .lfunctions import all_l_data
from .reproduce import TABLES, reproduce, write_bundle
from .counting import race_trajectory
from .unitgroup import DEFAULT_PHI_CAP, build_modulus

EXIT_USAGE, EXIT_CAP, EXIT_NUMERIC, EXIT_MISMATCH = 2, 3, 4, 1
VALUE_TABLE_LIMIT = 256


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--q", type=int, default=3, help="field size (a prime)")
    p.add_argument("--modulus", default="T^2+T+1", help="monic modulus, e.g. 'T^3+2*T'")
    p.add_argument("--format", choices=("json", "csv", "table"), default=None,
                   help="output format (default: table on a terminal, json otherwise)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to FFRACE_SEED)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for sampling")
    p.add_argument("--phi-cap", type=int, default=DEFAULT_PHI_CAP, help="largest unit group accepted")
    p.add_argument("--degree-cap", type=int, default=None, help="largest modulus degree for L-functions")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ffrace", description="Prime races in F_q[T]: characters, zeros, biases and densities.")
    parser.add_argument("--version", action="version", version=f"ffrace {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("chars", parents=[common], help="character table")
    p.add_argument("--max-rows", type=int, default=1000, help="list at most this many characters")
    p = sub.add_parser("lfunc", parents=[common], help="L-polynomials")
    p.add_argument("--char", type=int, default=None, help="only this character index")
    p = sub.add_parser("zeros", parents=[common], help="inverse zeros and LI diagnostics")
    p.add_argument("--char", type=int, default=None)
    p = sub.add_parser("bias", parents=[common], help="C, N, B, V and covariance for a race")
    p.add_argument("--classes", required=True)
    p.add_argument("--predictors", action="store_true", help="add main-term predictions of B_m")
    p.add_argument("--first-moment", action="store_true", help="add the mean of |B_m| over all pairs")
    p = sub.add_parser("density", parents=[common], help="race density by one engine")
    p.add_argument("--engine", choices=("asymptotic", "mc", "periodic", "count"), default="periodic")
    p.add_argument("--classes", required=True)
    p.add_argument("--draws", type=int, default=10**6)
    p.add_argument("--xmax", type=int, default=60)
    p.add_argument("--mode", choices=("full", "first_order", "cor2", "cor3"), default="full")
    p = sub.add_parser("race", parents=[common], help="exact trajectory E(X)")
    p.add_argument("--classes", required=True)
    p.add_argument("--xmax", type=int, default=60)
    p = sub.add_parser("reproduce", parents=[common], help="regenerate the worked-example tables")
    p.add_argument("--table", choices=TABLES + ("all",), default="all")
    p.add_argument("--out", default="ffrace-reproduce")
    return parser


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FFRACE_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"FFRACE_SEED must be an integer, got {env!r}") from exc


def _modulus(args):
    if args.degree_cap is not None:
        lfunctions.DEGREE_CAP[args.q] = args.degree_cap
    return build_modulus(args.modulus, args.q, phi_cap=args.phi_cap)


def _classes(args, mod):
    items = [s.strip() for s in args.classes.split(",") if s.strip()]
    if not items:
        raise UsageError("--classes needs at least one class")
    polys = [parse_poly(s, mod.p) for s in items]
    return items, polys


def _cnum(z: complex, nd: int = 12) -> str:
    re, im = round(z.real, nd) + 0.0, round(z.imag, nd) + 0.0
    if im == 0:
        return f"{re:.{nd}g}"
    return f"{re:.{nd}g}{'+' if im >= 0 else '-'}{abs(im):.{nd}g}i"


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("threads",)}
    return cfg


def _render(payload: dict, columns: list[str] | None, rows: list[list] | None, fmt: str) -> str:
    if fmt == "json" or columns is None:
        return json.dumps(payload, indent=2, default=_json_default) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
        return buf.getvalue()
    text = [[str(c) for c in columns]] + [[str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in text) for i in range(len(columns))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in text]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def cmd_chars(args):
    mod = _modulus(args)
    chars = all_characters(mod)
    units = mod.units()
    show = mod.phi <= VALUE_TABLE_LIMIT
    columns = ["index", "exponents", "order", "conductor", "parity"] + ([str(u) for u in units] if show else [])
    rows, items = [], []
    for c in chars[: args.max_rows]:
        vals = [format_value(char_angle(c, u)) for u in units] if show else []
        rows.append([c.index, " ".join(map(str, c.exps)), c.order, str(c.conductor), c.parity] + vals)
        items.append({"index": c.index, "exponents": list(c.exps), "order": c.order,
                      "conductor": str(c.conductor), "parity": c.parity,
                      **({"values": dict(zip([str(u) for u in units], vals))} if show else {})})
    payload = {"modulus": str(mod.m), "q": mod.q, "phi": mod.phi, "invariants": list(mod.orders),
               "generators": [str(g) for g in mod.generators], "characters": items,
               "truncated": len(chars) > args.max_rows}
    return payload, columns, rows


def _select(datas, idx):
    if idx is None:
        return [L for L in datas if not L.character.is_principal]
    if not 0 <= idx < len(datas):
        raise UsageError(f"character index must lie in 0..{len(datas) - 1}")
    return [datas[idx]]


def cmd_lfunc(args):
    mod = _modulus(args)
    datas = _select(all_l_data(mod), args.char)
    columns = ["index", "degree", "coefficients", "primitive_coefficients"]
    rows, items = [], []
    for L in datas:
        co = [_cnum(complex(c)) for c in L.coeffs]
        pco = [_cnum(complex(c)) for c in L.primitive_coeffs]
        rows.append([L.character.index, L.degree, " ".join(co), " ".join(pco)])
        items.append({"index": L.character.index, "degree": L.degree, "coefficients": co,
                      "primitive_coefficients": pco, "conductor": str(L.character.conductor)})
    return {"modulus": str(mod.m), "q": mod.q, "l_polynomials": items}, columns, rows


def cmd_zeros(args):
    mod = _modulus(args)
    datas = _select(all_l_data(mod), args.char)
    columns = ["index", "re", "im", "abs", "theta_over_pi", "kind", "multiplicity"]
    rows = []
    for L in datas:
        for z in L.zeros:
            g = z.gamma
            re, im = round(g.real, 13) + 0.0, round(g.imag, 13) + 0.0
            rows.append([L.character.index, f"{re:.12g}", f"{im:.12g}", f"{abs(g):.12g}",
                         f"{math.atan2(im, re) / math.pi:.12g}", z.kind, z.multiplicity])
    spec = build_spectrum(mod)
    payload = {"modulus": str(mod.m), "q": mod.q, "li": spec.li_diagnostics(),
               "zeros": [dict(zip(columns, r)) for r in rows]}
    return payload, columns, rows


def cmd_bias(args):
    mod = _modulus(args)
    names, polys = _classes(args, mod)
    spec = build_spectrum(mod)
    rep = race_report(spec, polys)
    payload = rep.to_dict()
    payload["li"] = spec.li_diagnostics()
    columns = ["class", "C"] + [f"cov_{j + 1}" for j in range(len(names))]
    rows = [[n, int(rep.C[j])] + [f"{v:.12g}" for v in rep.covariance[j]] for j, n in enumerate(names)]
    if args.predictors:
        preds = []
        for j in range(len(polys)):
            for k in range(j + 1, len(polys)):
                a, b = polys[j], polys[k]
                item = {"pair": [names[j], names[k]], "B": b_m(spec, a, b)}
                try:
                    item["predictor"] = b_m_predictor(mod, a, b)
                    item["difference"] = item["B"] - item["predictor"]
                except PreconditionError as exc:
                    item["predictor"] = None
                    item["note"] = str(exc)
                preds.append(item)
        payload["predictors"] = preds
    if args.first_moment:
        fm = first_moment_bm(mod)
        payload["first_moment"] = {"mean_abs_B": fm.mean_abs, "lower": fm.lower, "upper": fm.upper,
                                   "identity_lhs": fm.identity_lhs, "identity_rhs": fm.identity_rhs}
    return payload, columns, rows


def cmd_density(args):
    mod = _modulus(args)
    names, polys = _classes(args, mod)
    if len(polys) < 2:
        raise UsageError("a race needs at least two classes")
    payload = {"engine": args.engine, "classes": names}
    meta = {}
    if args.engine == "periodic":
        d = density_exact_periodic(mod, polys)
        payload.update(estimate=float(d.density), exact=str(d.density),
                       ties={"classes": d.tie_classes, "lower": str(d.lower), "upper": str(d.upper)})
        meta["period"] = d.period
    elif args.engine == "count":
        d = density_count(mod, polys, args.xmax)
        payload.update(estimate=float(d.density), exact=str(d.density), ordered_X=d.ordered_X)
        meta["xmax"] = args.xmax
    else:
        spec = build_spectrum(mod)
        rep = race_report(spec, polys)
        meta.update(N_m=rep.N_m, B=rep.B.tolist(), C=rep.C.tolist(), li=spec.li_diagnostics())
        if args.engine == "asymptotic":
            a = asymptotic_density(spec, polys, mode=args.mode)
            payload.update(estimate=a.value, error_scale=a.error_scale, mode=a.mode, terms=a.terms)
        else:
            seed = _seed(args)
            if seed is None:
                raise UsageError("the mc engine needs --seed or FFRACE_SEED")
            res = LimitingSampler(spec, polys, seed).run(args.draws, threads=args.threads,
                                                        probes=default_probes(spec, len(polys)))
            est, se = res.density()
            payload.update(estimate=est, stderr=se, draws=res.draws,
                           sample_covariance=res.covariance.tolist(),
                           covariance_stderr=res.covariance_stderr.tolist())
    if meta:
        payload["metadata"] = meta
    columns = ["engine", "classes", "estimate"] + (["stderr"] if "stderr" in payload else [])
    row = [args.engine, " > ".join(names), payload["estimate"]] + ([payload["stderr"]] if "stderr" in payload else [])
    return payload, columns, [row]


def cmd_race(args):
    mod = _modulus(args)
    names, polys = _classes(args, mod)
    tr = race_trajectory(mod, polys, args.xmax)
    ranks = tr.ranks()
    ordered = tr.ordered()
    columns = ["X"] + [f"E_{n}" for n in names] + [f"rank_{n}" for n in names] + ["ordered"]
    rows = []
    for i, X in enumerate(tr.X):
        rows.append([int(X)] + [f"{v:.12g}" for v in tr.E[i]] + [int(v) for v in ranks[i]] + [int(ordered[i])])
    payload = {"modulus": str(mod.m), "q": mod.q, "classes": names,
               "ordered_X": [int(x) for x in tr.X[ordered]],
               "trajectory": [dict(zip(columns, row)) for row in rows]}
    return payload, columns, rows


def cmd_reproduce(args):
    tables = TABLES if args.table == "all" else (args.table,)
    res = reproduce(tables)
    path = write_bundle(res, Path(args.out), _config(args))
    columns = ["table", "cell", "pass"]
    rows = [[c.table, c.name, "PASS" if c.ok else "FAIL"] for c in res.cells]
    payload = {"manifest": str(path), "passed": len(res.cells) - len(res.failures),
               "failed": len(res.failures), "failures": [c.to_dict() for c in res.failures]}
    return payload, columns, rows, res


COMMANDS = {"chars": cmd_chars, "lfunc": cmd_lfunc, "zeros": cmd_zeros, "bias": cmd_bias,
            "density": cmd_density, "race": cmd_race, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fmt = args.format or ("table" if sys.stdout.isatty() else "json")
    try:
        out = COMMANDS[args.command](args)
    except (UsageError, PreconditionError) as exc:
        print(f"ffrace: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceededError as exc:
        print(f"ffrace: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except NumericalError as exc:
        print(f"ffrace: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    payload, columns, rows = out[:3]
    if fmt == "json":
        payload = {"version": __version__, "seed": _seed(args), "config": _config(args), **payload}
    sys.stdout.write(_render(payload, columns, rows, fmt))
    if args.command == "reproduce" and out[3].failures:
        for c in out[3].failures:
            print(f"ffrace: mismatch in {c.table}: {c.name} expected {c.expected}, got {c.got}", file=sys.stderr)
        return EXIT_MISMATCH
    return 0


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
