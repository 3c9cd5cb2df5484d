"""Command-line front end.

Each run reads one JSON config (``--config`` or a shipped ``--preset``) and
writes a JSON result, plus a CSV series for series-producing subcommands.

Config layout (schema version 1; unknown fields are rejected)::

    {
      "version": 1,
      "kind": "norm" | "kronecker" | "key-lemma" | "finite-section"
              | "so-check" | "identities",
      "name": "output file stem (default: kind)",
      "exponent": "lerner(3)",              # grammar of saplab.exponents
      "function": {"kind": "bump", "center": 0, "radius": 1},
      "symbol": {...},                      # saplab.symbols document or {"ap": AP}
      "quadrature": {"truncation_T": 1000, "abs_tol": 1e-12, ...},
      "root_tol": 1e-10,
      "params": {...}                       # per kind, see PARAM_SCHEMAS
    }

Exponent grammar::

    expr   := constant(num) | lerner(num) | decay(num, num)
            | sum(expr, ...) | scale(num, expr) | clamp(expr, num, num)
    num    := arithmetic over literals, pi, e with + - * / ** and
              sqrt(.), exp(.), log(.)

``lerner(a)`` is ``a + sin(log log|x|)`` for ``|x| >= e`` and ``a`` elsewhere;
``decay(q, b)`` is ``q + b/(1 + x^2)``. Numbers inside ``params`` and symbol
frequencies accept the same ``num`` strings, e.g. ``"sqrt(2)"``.

Symbol documents: ``{"a_l": AP, "a_r": AP, "a_0": [[entry|null]]|null,
"u": {"name": "tanh"|"arctan", "scale": s}}`` with ``AP = {"size": N,
"terms": [{"frequency": num | {"pi": r}, "coefficient": c}]}``; ``c`` is a
number, ``[re, im]`` or an ``N x N`` array of ``[re, im]``; ``a_0`` entries are
``{"name": "lorentzian", "scale": s}``. ``{"ap": AP}`` is a pure AP symbol.

Key-lemma plans: ``{"loglog": [t_k]}`` (shifts ``exp(exp(t_k))``),
``{"shifts": [h_k]}``, or ``{"extract": {"t_range", "candidates", "terms",
"target"?}}`` which scans a log-log grid and keeps a convergent subsequence.

Exit codes: 0 success, 2 config/validation error, 3 numerical failure,
4 budget exhausted.
"""

from __future__ import annotations

import argparse
import io
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence

import jsonschema
import numpy as np

from . import exponents, functions, limits, sio, symbols
from .modular import (NonMonotoneError, RootFindingError, luxemburg_norm_report,
                      vector_norm)
from .quadrature import QuadratureSpec
from .shifts import Translation

log = logging.getLogger("saplab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4
OUT_ENV = "SAPLAB_OUT"
SCHEMA_VERSION = 1

_NUM = {"type": ["number", "string"]}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT_POS = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "kind"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "kind": {"enum": ["norm", "kronecker", "key-lemma", "finite-section", "so-check",
                          "identities"]},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "seed": {"type": "integer"},
        "exponent": {"type": "string"},
        "function": {"type": "object", "required": ["kind"]},
        "symbol": {"type": "object"},
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "truncation_T": _POS, "abs_tol": _POS,
                "max_refinements": {"type": "integer", "minimum": 0},
                "order": {"type": "integer", "minimum": 2},
                "pv_window": _POS,
                "tail_refinements": {"type": "integer", "minimum": 0},
            },
        },
        "root_tol": _POS,
        "params": {"type": "object"},
    },
}

_PLAN = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "loglog": _NUMS,
        "shifts": _NUMS,
        "extract": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_range", "candidates", "terms"],
            "properties": {
                "t_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "candidates": _INT_POS,
                "terms": _INT_POS,
                "target": _NUM,
            },
        },
    },
    "minProperties": 1,
    "maxProperties": 1,
}

PARAM_SCHEMAS: Dict[str, dict] = {
    "norm": {
        "type": "object", "additionalProperties": False,
        "properties": {"components": {"type": "array", "items": {"type": "object"}}},
    },
    "kronecker": {
        "type": "object", "additionalProperties": False,
        "required": ["frequencies", "eps", "count"],
        "properties": {
            "frequencies": _NUMS, "eps": _POS, "count": _INT_POS,
            "direction": {"enum": [1, -1]}, "budget": _INT_POS, "step": _POS, "min_gap": _POS,
        },
    },
    "key-lemma": {
        "type": "object", "additionalProperties": False,
        "required": ["plan"],
        "properties": {
            "plan": _PLAN,
            "q": _NUM,
            "direction": {"enum": [1, -1]},
            "tol": _POS,
            "plan_tol": _POS,
            "tld_eps": _POS,
            "sequence": {
                "type": "object", "additionalProperties": False,
                "required": ["mode"],
                "properties": {
                    "mode": {"enum": ["constant", "symbol"]},
                    "entry": {"type": "array", "items": {"type": "integer", "minimum": 0},
                              "minItems": 2, "maxItems": 2},
                    "conjugate": {"type": "boolean"},
                },
            },
        },
    },
    "finite-section": {
        "type": "object", "additionalProperties": False,
        "required": ["half_widths", "spacing"],
        "properties": {
            "half_widths": {"type": "array", "items": _POS, "minItems": 1},
            "spacing": _POS,
            "kind": {"enum": list(sio.KINDS)},
            "residuals": {"type": "boolean"},
        },
    },
    "identities": {
        "type": "object", "additionalProperties": False,
        "required": ["T", "n"],
        "properties": {
            "T": _POS,
            "n": {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 1},
        },
    },
    "so-check": {
        "type": "object", "additionalProperties": False,
        "required": ["abscissae"],
        "properties": {
            "abscissae": _NUMS,
            "builtin": {"enum": ["sin", "cos", "arctan", "tanh"]},
            "sampling": {"type": "integer", "minimum": 2},
            "threshold": _POS,
        },
    },
}

# kinds that need these top-level blocks
_REQUIRES = {
    "norm": ("exponent", "function"),
    "key-lemma": ("exponent", "function"),
    "finite-section": ("symbol",),
    "identities": ("symbol",),
}

_SO_BUILTINS = {"sin": np.sin, "cos": np.cos, "arctan": np.arctan, "tanh": np.tanh}


class ConfigError(ValueError):
    pass


@dataclass
class RunResult:
    payload: Dict[str, Any]
    csv_header: Optional[List[str]] = None
    csv_rows: List[list] = field(default_factory=list)


# --- deterministic serialisation ---------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with sorted keys and floats at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else
                    ("" if v is None else v) for v in row])
    return buf.getvalue()


# --- config -------------------------------------------------------------

def preset_names() -> List[str]:
    root = resources.files("saplab") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("saplab") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(path.read_text())


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        jsonschema.validate(cfg.get("params", {}), PARAM_SCHEMAS[cfg["kind"]])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    for key in _REQUIRES.get(cfg["kind"], ()):
        if key not in cfg:
            raise ConfigError(f"kind {cfg['kind']!r} requires a {key!r} block")
    if cfg.get("kind") == "so-check":
        if "builtin" not in cfg.get("params", {}) and "exponent" not in cfg:
            raise ConfigError("so-check needs an 'exponent' or params.builtin")
    return cfg


def _quad(cfg) -> QuadratureSpec:
    return QuadratureSpec(**cfg.get("quadrature", {}))


def _num(v) -> float:
    return exponents.parse_number(v)


# --- subcommands -------------------------------------------------------------

def cmd_norm(cfg: dict, threads: int = 1) -> RunResult:
    p = exponents.parse_exponent(cfg["exponent"])
    quad = _quad(cfg)
    tol = cfg.get("root_tol", 1e-10)
    f = functions.function_from_spec(cfg["function"])
    r = luxemburg_norm_report(f, p, quad, tol)
    out = {"norm": r.norm, "modular_at_norm": r.modular_at_norm, "error_bound": r.error_bound,
           "exponent": cfg["exponent"], "function": f.label}
    comps = cfg.get("params", {}).get("components")
    if comps:
        fs = [f] + [functions.function_from_spec(c) for c in comps]
        out["vector_norm"] = vector_norm(fs, p, quad, tol)
    return RunResult(out)


def cmd_kronecker(cfg: dict, threads: int = 1) -> RunResult:
    pr = cfg["params"]
    freqs = [_num(v) for v in pr["frequencies"]]
    hs = symbols.kronecker_translations(
        freqs, pr["eps"], pr["count"], pr.get("direction", 1),
        budget=pr.get("budget", 10_000_000), step=pr.get("step", 1e-3),
        min_gap=pr.get("min_gap", 1.0))
    rows = []
    for m, h in enumerate(hs, start=1):
        d = max(abs(complex(math.cos(f * h), math.sin(f * h)) - 1.0) for f in freqs)
        rows.append([m, h, d])
    out = {"frequencies": freqs, "eps": pr["eps"],
           "translations": [{"m": m, "h": h, "defect": d} for m, h, d in rows],
           "all_below_eps": all(d < pr["eps"] for _, _, d in rows)}
    return RunResult(out, ["m", "h", "defect"], rows)


def _build_plan(cfg: dict, p, lattice: Optional[float]):
    pr = cfg["params"]
    spec = pr["plan"]
    direction = pr.get("direction", 1)
    plan_tol = pr.get("plan_tol", 1e-2)
    meta: Dict[str, Any] = {}
    if "loglog" in spec:
        shifts = limits.loglog_shifts([_num(t) for t in spec["loglog"]], direction, lattice)
        q = _num(pr["q"]) if "q" in pr else None
    elif "shifts" in spec:
        shifts = [Translation.of(_num(h), lattice) for h in spec["shifts"]]
        q = _num(pr["q"]) if "q" in pr else None
    else:
        ex = spec["extract"]
        t0, t1 = (_num(t) for t in ex["t_range"])
        cands, vals = limits.lattice_candidates(p, (t0, t1), ex["candidates"], lattice, direction)
        target = _num(ex["target"]) if "target" in ex else None
        idx, q = limits.extract_convergent_subsequence(vals, ex["terms"], p.p_minus, p.p_plus,
                                                       target)
        shifts = [cands[i] for i in idx]
        meta["extracted_indices"] = idx
    if q is None:
        raise ConfigError("params.q is required unless the plan is extracted")
    return limits.TranslationPlan(p, shifts, q, direction, plan_tol), meta


@dataclass
class KeyLemmaInputs:
    """Everything a key-lemma config resolves to before the experiment runs."""

    plan: limits.TranslationPlan
    w: functions.FunctionHandle
    w_k: Optional[List[functions.FunctionHandle]]
    quad: QuadratureSpec
    root_tol: float
    meta: Dict[str, Any]


def key_lemma_inputs(cfg: dict) -> KeyLemmaInputs:
    """Resolve a validated key-lemma config to a plan and a sequence ``w_k -> w``.

    In ``symbol`` mode the plan is built on the lattice of common periods of
    the relevant AP representative, so huge shifts keep exact AP phases.
    """
    pr = cfg["params"]
    p = exponents.parse_exponent(cfg["exponent"])
    phi = functions.function_from_spec(cfg["function"])
    seq = pr.get("sequence", {"mode": "constant"})
    direction = pr.get("direction", 1)
    lattice = None
    s = None
    meta: Dict[str, Any] = {}
    if seq["mode"] == "symbol":
        if "symbol" not in cfg:
            raise ConfigError("sequence mode 'symbol' needs a 'symbol' block")
        s = symbols.symbol_like_from_dict(cfg["symbol"])
        if isinstance(s, symbols.APPolynomial):
            s = symbols.SAPSymbol.from_ap(s)
        rep = s.a_r if direction > 0 else s.a_l
        freqs = [f for f in rep.frequencies if f != 0.0]
        if freqs:
            lattice = symbols.kronecker_lattice(freqs)
            meta["kronecker"] = symbols.kronecker_translations(freqs, 1e-12, 5, direction)
        meta["lattice"] = lattice
    plan, extra = _build_plan(cfg, p, lattice)
    meta.update(extra)
    if s is not None:
        w, ws = limits.limit_symbol_sequence(s, phi, plan.shifts, tuple(seq.get("entry", (0, 0))),
                                             direction, seq.get("conjugate", False))
    else:
        w, ws = phi, None
    return KeyLemmaInputs(plan, w, ws, _quad(cfg), cfg.get("root_tol", 1e-10), meta)


def cmd_key_lemma(cfg: dict, threads: int = 1) -> RunResult:
    pr = cfg["params"]
    ki = key_lemma_inputs(cfg)
    rep = limits.key_lemma_experiment(ki.plan, ki.w, ki.w_k, ki.quad, ki.root_tol,
                                      pr.get("tol", 1e-2), pr.get("tld_eps"))
    out = rep.to_dict()
    out["verdict"] = "PASS" if rep.verdict else "FAIL"
    out["exponent"] = cfg["exponent"]
    out.update(ki.meta)
    rows = [[r.k, None if abs(r.h) > 1e15 else r.h, r.loglog_h, r.p_hk, r.measured, r.target,
             r.deviation] for r in rep.records]
    return RunResult(out, ["k", "h_k", "loglog_h_k", "p_hk", "measured", "target", "deviation"],
                     rows)


def _pool_map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def cmd_finite_section(cfg: dict, threads: int = 1) -> RunResult:
    pr = cfg["params"]
    a = symbols.symbol_like_from_dict(cfg["symbol"])
    kind = pr.get("kind", "aP+Q")
    res = pr.get("residuals", False)

    def one(T):
        return sio.sigma_min_sweep(a, [T], pr["spacing"], kind, res)[0]

    recs = _pool_map(one, pr["half_widths"], threads)
    out = {"kind": kind, "spacing": pr["spacing"],
           "records": [{"T": r.T, "n": r.n, "sigma_min": r.sigma_min, "residuals": r.residuals}
                       for r in recs]}
    return RunResult(out, ["T", "n", "sigma_min"], [[r.T, r.n, r.sigma_min] for r in recs])


def cmd_identities(cfg: dict, threads: int = 1) -> RunResult:
    pr = cfg["params"]
    a = symbols.symbol_like_from_dict(cfg["symbol"])
    T = pr["T"]
    reps = _pool_map(lambda n: sio.identity_residuals(a, sio.GridSpec(T, n)), pr["n"], threads)
    names = sorted(reps[0].normalized)
    decreasing = {k: all(b < a_ or (a_ == 0.0 and b == 0.0)
                         for a_, b in zip([r.normalized[k] for r in reps],
                                          [r.normalized[k] for r in reps[1:]]))
                  for k in names}
    out = {"T": T, "records": [{"n": r.grid.n, "normalized": r.normalized, "raw": r.raw}
                               for r in reps],
           "decreasing": decreasing}
    rows = [[r.grid.n] + [r.normalized[k] for k in names] for r in reps]
    return RunResult(out, ["n"] + names, rows)


def cmd_so_check(cfg: dict, threads: int = 1) -> RunResult:
    pr = cfg["params"]
    if "builtin" in pr:
        f, label = _SO_BUILTINS[pr["builtin"]], pr["builtin"]
    else:
        f, label = exponents.parse_exponent(cfg["exponent"]), cfg["exponent"]
    xs = [_num(x) for x in pr["abscissae"]]
    ser = exponents.so_diagnostic(f, xs, pr.get("sampling", 256), pr.get("threshold", 1e-2))
    out = {"function": label, "abscissae": ser.abscissae, "values": ser.values,
           "threshold": ser.threshold, "verdict": "PASS" if ser.so_consistent else "FAIL"}
    return RunResult(out, ["abscissa", "oscillation"],
                     [[x, v] for x, v in zip(ser.abscissae, ser.values)])


COMMANDS = {
    "norm": cmd_norm,
    "kronecker": cmd_kronecker,
    "key-lemma": cmd_key_lemma,
    "finite-section": cmd_finite_section,
    "so-check": cmd_so_check,
    "identities": cmd_identities,
}


def run_config(cfg: dict, threads: int = 1) -> RunResult:
    """Validate ``cfg`` and run it; the library-level entry point of the CLI."""
    validate_config(cfg)
    res = COMMANDS[cfg["kind"]](cfg, threads)
    res.payload = {"version": SCHEMA_VERSION, "kind": cfg["kind"], "result": res.payload}
    return res


def write_outputs(res: RunResult, stem: str, out_dir: Optional[str]) -> List[str]:
    text = dumps(res.payload) + "\n"
    if out_dir is None:
        sys.stdout.write(text)
        return []
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, f"{stem}.json")]
    with open(paths[0], "w") as fh:
        fh.write(text)
    if res.csv_header:
        paths.append(os.path.join(out_dir, f"{stem}.csv"))
        with open(paths[1], "w", newline="") as fh:
            fh.write(_csv_text(res.csv_header, res.csv_rows))
    return paths


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="saplab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="path to a JSON config")
        src.add_argument("--preset", help="name of a shipped preset")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}, else stdout)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--verbose", action="store_true")
    sub.add_parser("presets", help="list shipped presets")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.preset:
            cfg = load_preset(args.preset)
        else:
            with open(args.config) as fh:
                cfg = json.load(fh)
        if cfg.get("kind") != args.command:
            raise ConfigError(f"config kind {cfg.get('kind')!r} does not match "
                              f"subcommand {args.command!r}")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        res = run_config(cfg, args.threads)
    except symbols.BudgetExhausted as exc:
        log.error("%s", exc)
        return EXIT_BUDGET
    except (RootFindingError, NonMonotoneError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError, OSError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out_dir = args.out or os.environ.get(OUT_ENV)
    write_outputs(res, cfg.get("name", cfg["kind"]), out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
