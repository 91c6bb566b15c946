"""Command line front end: JSON in, JSON report and exit code out.

Exit codes: 0 the property holds, 1 a violation or counterexample was found,
2 bad input.  Every report carries a ``config`` block with the inputs
inlined, and ``ncjensen replay REPORT`` reruns it.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .cfree import (CFreeFunctional, CompletePositivityError, build_gns, find_fubini_chain, is_free_product_map,
                    pattern_subspaces, verify_fubini_chain)
from .convexity import (JENSEN_TOL, check_separate_convexity, jensen_verify,
                        make_conjugated_square, make_symmetrized_product)
from .cp import CompressedPointEval, DilationChain, FiniteRep, Subspace, encode_matrix
from .fixtures import FIXTURES
from .fock import semicircular_inequality_experiment
from .ncalg import IntervalAlgebra, NCPoly

RANDOMIZED = {"convexity", "semicircular"}


class InputError(Exception):
    pass


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None


def parse_poly(spec) -> NCPoly:
    """Either NCPoly JSON or a shorthand ``[-]sym:i,j,...`` / ``[-]sq:i,j,...``."""
    if isinstance(spec, dict):
        return NCPoly.from_json(spec)
    if not isinstance(spec, str) or ":" not in spec:
        raise InputError(f"cannot read polynomial {spec!r}")
    sign = -1.0 if spec.startswith("-") else 1.0
    kind, _, idx = spec.lstrip("-").partition(":")
    try:
        indices = [int(s) for s in idx.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"bad index list in {spec!r}") from None
    makers = {"sym": make_symmetrized_product, "sq": make_conjugated_square}
    if kind not in makers:
        raise InputError(f"unknown polynomial family {kind!r} (use sym or sq)")
    return makers[kind](indices) * sign


def _map_from(data: dict):
    if "cfree" in data:
        return CFreeFunctional.from_json(data["cfree"])
    if "compressed" in data:
        return CompressedPointEval.from_json(data["compressed"])
    raise InputError("input needs a 'cfree' or 'compressed' map")


def _rep_and_H(data: dict) -> Tuple[FiniteRep, Subspace]:
    if "compressed" in data:
        mu = CompressedPointEval.from_json(data["compressed"])
        return mu.rep, mu.range
    if "rep" not in data or "H" not in data:
        raise InputError("input needs 'rep' and 'H' (or 'compressed')")
    rep = FiniteRep.from_json(data["rep"])
    return rep, Subspace.from_json(data["H"], rep.N)


# ---------------------------------------------------------------------------
# subcommands; each takes the config dict and returns (exit code, result)
# ---------------------------------------------------------------------------

def _jensen(cfg) -> Tuple[int, dict]:
    data = cfg["input"]
    f = parse_poly(data.get("f", cfg.get("f")))
    rep = jensen_verify(f, _map_from(data), cfg["tol"])
    return (0 if rep.holds else 1), rep.to_json()


def _convexity(cfg) -> Tuple[int, dict]:
    data = cfg["input"]
    f = parse_poly(data.get("f", cfg.get("f")))
    algs = [IntervalAlgebra(int(a["index"]), *a["interval"]) for a in data["algebras"]]
    res = check_separate_convexity(f, algs, data.get("mode", cfg["mode"]), cfg["levels"],
                                   cfg["trials"], cfg["seed"])
    return (1 if res else 0), {"kind": type(res).__name__, **res.to_json()}


def _fubini(cfg) -> Tuple[int, dict]:
    data = cfg["input"]
    if "chain" in data:
        rep = FiniteRep.from_json(data["rep"])
        spaces = [Subspace.from_json(s, rep.N) for s in data["chain"]["spaces"]]
        chain = DilationChain(rep, spaces, data["chain"].get("steps", []))
    else:
        rep, H = _rep_and_H(data)
        chain = find_fubini_chain(rep, H, tol=cfg["tol"])
        if chain is None:
            return 1, {"chain": "NotFound"}
    fub = verify_fubini_chain(chain, cfg["tol"])
    return (0 if fub.ok else 1), {"chain": chain.to_json(), "report": fub.to_json()}


def _freeproduct(cfg) -> Tuple[int, dict]:
    data = cfg["input"]
    if "cfree" in data:
        ok, pr = is_free_product_map(CFreeFunctional.from_json(data["cfree"]), cfg["max_len"], tol=cfg["tol"])
    else:
        rep, H = _rep_and_H(data)
        pr = pattern_subspaces(rep, cfg["max_len"], H, cfg["tol"])
        ok = pr.verdict
    out = pr.to_json()
    out["spaces"] = {".".join(map(str, w)) or "e": encode_matrix(s) for w, s in pr.spaces.items()}
    return (0 if ok else 1), out


def _gns(cfg) -> Tuple[int, dict]:
    F = CFreeFunctional.from_json(cfg["input"]["cfree"])
    try:
        g = build_gns(F, cfg["max_len"])
    except CompletePositivityError as e:
        return 1, {"psd": False, "error": str(e)}
    return 0, {"psd": True, **g.to_json()}


def _semicircular(cfg) -> Tuple[int, dict]:
    rep = semicircular_inequality_experiment(cfg["k"], cfg["radii"], cfg["trials"], cfg["seed"])
    ok = rep["min_eig_symmetrized"] >= -cfg["tol"] and rep["min_eig_conjugated_square"] >= -cfg["tol"]
    return (0 if ok else 1), rep


def _fixtures(cfg) -> Tuple[int, dict]:
    names = list(FIXTURES) if cfg["name"] == "all" else [cfg["name"]]
    if any(n not in FIXTURES for n in names):
        raise InputError(f"unknown fixture {cfg['name']!r}; choose from {', '.join(FIXTURES)} or all")
    results = {n: FIXTURES[n]() for n in names}
    if len(names) == 1:
        return results[names[0]]
    return 0, {n: {"exit_code": c, "report": r} for n, (c, r) in results.items()}


COMMANDS = {"jensen": _jensen, "convexity": _convexity, "fubini": _fubini,
            "freeproduct": _freeproduct, "gns": _gns, "semicircular": _semicircular,
            "fixtures": _fixtures}


def run(cfg: Dict[str, Any]) -> Tuple[int, dict]:
    """Run one configuration; returns ``(exit code, report)``."""
    cmd = cfg.get("subcommand")
    if cmd not in COMMANDS:
        raise InputError(f"unknown subcommand {cmd!r}")
    if cmd in RANDOMIZED and cfg.get("seed") is None:
        raise InputError(f"{cmd} needs --seed")
    try:
        code, result = COMMANDS[cmd](cfg)
    except InputError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as e:
        what = f"missing field {e}" if isinstance(e, KeyError) else str(e)
        raise InputError(f"{cmd}: {type(e).__name__}: {what}") from None
    return code, {"config": cfg, "exit_code": code, "result": result}


def _levels(s: str) -> List[int]:
    try:
        out = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {s!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("levels are positive integers")
    return out


def _floats(s: str) -> List[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncjensen", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--levels", type=_levels, default=[1, 2, 3])
    common.add_argument("--max-len", type=int, default=3)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in ("jensen", "convexity", "fubini", "freeproduct", "gns"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("input", help="input JSON file")
        if name in ("jensen", "convexity"):
            sp.add_argument("--f", default=None, help="shorthand such as sym:0,1 or -sq:0,1")
        if name == "convexity":
            sp.add_argument("--mode", choices=["separate", "joint"], default="separate")
    sp = sub.add_parser("semicircular", parents=[common])
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--radii", type=_floats, default=[1.0, 1.0])
    sp = sub.add_parser("fixtures", parents=[common])
    sp.add_argument("name", help=f"one of {', '.join(FIXTURES)} or all")
    sp = sub.add_parser("replay")
    sp.add_argument("report", help="a report written by an earlier run")
    sp.add_argument("--out", default=None)
    return p


def config_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    if args.subcommand == "replay":
        rep = load_json(args.report)
        if not isinstance(rep, dict) or "config" not in rep:
            raise InputError(f"{args.report}: no 'config' block")
        return rep["config"]
    cfg = {"subcommand": args.subcommand, "seed": args.seed,
           "tol": JENSEN_TOL if args.tol is None else args.tol,
           "trials": args.trials, "levels": args.levels, "max_len": args.max_len}
    if hasattr(args, "input"):
        cfg["input_path"] = args.input
        cfg["input"] = load_json(args.input)
        if not isinstance(cfg["input"], dict):
            raise InputError(f"{args.input}: top level must be an object")
    for key in ("f", "mode", "k", "radii", "name"):
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    if args.subcommand == "fubini" and args.tol is None:
        cfg["tol"] = 1e-9
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        code, report = run(cfg)
    except InputError as e:
        print(f"ncjensen: error: {e}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, default=_default)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
