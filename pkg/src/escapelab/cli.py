"""Command line entry point.

Each subcommand builds an :class:`ExperimentConfig` from its flags and hands
it to :func:`escapelab.experiment.run`, so a flag invocation and the
equivalent config file produce identical reports.
Exit codes: 0 success, 2 finished with hypothesis warnings, 1 error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .experiment import (
    ConfigError,
    ExperimentConfig,
    RunResult,
    default_threads,
    run,
    summary_table,
    write_artifacts,
)

RECIPES = ("bunimovich-yurchenko", "ferguson-pollicott-drop", "kac-ldp-suite")


def _potential_values(text: str) -> dict[str, str]:
    """``lebesgue``, ``geometric[:t]``, ``bernoulli:p0,p1,..``, ``zero`` or ``file:PATH``."""
    kind, _, arg = text.partition(":")
    if kind in ("lebesgue", "geometric"):
        return {"kind": "geometric", "t": arg}
    if kind == "bernoulli":
        if not arg:
            raise ConfigError("bernoulli potential needs probabilities, e.g. bernoulli:0.3,0.7")
        return {"kind": "bernoulli", "probs": arg}
    if kind == "zero":
        return {"kind": "zero"}
    if kind == "file":
        return {"kind": "file", "file": arg}
    raise ConfigError(f"unknown potential {text!r}")


def _system_values(text: str) -> dict[str, str]:
    return {"file": text} if Path(text).suffix == ".json" or "/" in text else {"name": text}


def _common(p: argparse.ArgumentParser, potential: bool = True) -> None:
    p.add_argument("--system", default="doubling", help="instance name or GDMS JSON file")
    if potential:
        p.add_argument("--potential", default="lebesgue",
                       help="lebesgue | geometric[:t] | bernoulli:p0,p1,.. | zero | file:PATH")
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--threads", type=int, default=None, help="worker threads (env ESCAPELAB_THREADS)")
    p.add_argument("--out-dir", default="", help="write CSV/JSON artifacts here")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--name", default="", help="artifact base name")


def _center_args(p: argparse.ArgumentParser, default: str = "0") -> None:
    p.add_argument("--center", default=default,
                   help="point (0, 1/3, 0.25), periodic:WORD, word:WORD, nonperiodic or fibonacci")
    p.add_argument("--levels", default="1..12", help="a..b[:step] or comma list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="escapelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"escapelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("escape", help="escape-rate asymptotics for shrinking holes")
    _common(p)
    _center_args(p)
    p.add_argument("--radii", default="", help="ball radii; switches to ball holes")
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--method", choices=("auto", "cylinder", "automaton"), default="auto")

    p = sub.add_parser("dimdrop", help="dimension drop of survivor sets")
    _common(p, potential=False)
    _center_args(p)
    p.add_argument("--method", choices=("auto", "cylinder", "automaton"), default="auto")

    p = sub.add_parser("induce", help="first-return induced system, Kac, tails and LDP")
    _common(p)
    p.add_argument("--F", default="1", help="comma list of cylinder words forming F")
    p.add_argument("--T-max", type=int, default=60)
    p.add_argument("--theta-grid", default="-1.0..0.5:31")
    p.add_argument("--center", default="", help="optional hole center for the transfer check")
    p.add_argument("--levels", default="")

    p = sub.add_parser("wbt", help="annulus and straddle diagnostics for balls")
    _common(p)
    p.add_argument("--center", default="0.5", help="ball center (a point)")
    p.add_argument("--radii", default="0.25,0.1,0.05,0.02,0.01")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--kappa", type=float, default=0.5)

    p = sub.add_parser("montecarlo", help="sampled survival probability against the exact one")
    _common(p)
    p.add_argument("--hole", default="", help="comma list of hole words")
    p.add_argument("--center", default="0")
    p.add_argument("--level", type=int, default=3)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="run an INI or JSON experiment config")
    p.add_argument("config")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default="")
    p.add_argument("--format", choices=("csv", "json", "both"), default=None)

    p = sub.add_parser("reproduce", help="rerun a bundled recipe and compare with golden values")
    p.add_argument("recipe", choices=RECIPES)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out-dir", default="")
    p.add_argument("--golden-dir", default="", help="read golden files from here instead")
    p.add_argument("--update-golden", action="store_true", help="rewrite the golden file")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cmd = args.command
    values: dict[str, dict[str, str]] = {
        "system": _system_values(args.system),
        "tolerances": {"tol": repr(args.tol)},
        "output": {"format": args.format, "name": args.name},
        "analysis": {"kind": cmd},
    }
    if hasattr(args, "potential"):
        values["potential"] = _potential_values(args.potential)
    if cmd == "escape":
        ball = bool(args.radii)
        values["hole"] = {"type": "ball" if ball else "cylinder", "center": args.center,
                          "levels": args.levels, "radii": args.radii, "kappa": repr(args.kappa)}
        values["analysis"]["method"] = args.method
    elif cmd == "dimdrop":
        values["hole"] = {"center": args.center, "levels": args.levels}
        values["analysis"]["method"] = args.method
    elif cmd == "induce":
        values["analysis"].update(F=args.F, T_max=str(args.T_max), theta_grid=args.theta_grid)
        values["hole"] = {"center": args.center, "levels": args.levels}
    elif cmd == "wbt":
        values["hole"] = {"center": args.center, "radii": args.radii, "kappa": repr(args.kappa)}
        values["analysis"]["beta"] = repr(args.beta)
    elif cmd == "montecarlo":
        values["hole"] = {"words": args.hole, "center": args.center, "levels": str(args.level)}
        values["analysis"].update(k=str(args.k), samples=str(args.samples), seed=str(args.seed))
    return ExperimentConfig(values)


# -- recipes -----------------------------------------------------------------------
def recipe_runs(name: str) -> list[dict]:
    text = resources.files("escapelab.recipes").joinpath(f"{name}.json").read_text()
    return json.loads(text)["runs"]


def _golden_path(name: str, golden_dir: str):
    if golden_dir:
        return Path(golden_dir) / f"{name}.golden.json"
    return resources.files("escapelab.recipes").joinpath(f"{name}.golden.json")


def _numeric_summary(result: RunResult) -> dict[str, float]:
    out = {}
    for key, entry in result.summary.items():
        v = entry["value"]
        if isinstance(v, bool) or v is None:
            out[key] = v
        elif isinstance(v, (int, float)):
            out[key] = float(v)
    return out


def compare_golden(observed: dict, golden: dict) -> list[str]:
    """Mismatches between observed and golden summaries, within the stored tolerances."""
    problems = []
    rtol = golden.get("rtol", 1e-6)
    atol = golden.get("atol", 1e-9)
    for run_id, expected in golden["runs"].items():
        got = observed.get(run_id)
        if got is None:
            problems.append(f"{run_id}: missing from this run")
            continue
        for key, want in expected.items():
            have = got.get(key)
            if isinstance(want, float) and isinstance(have, float):
                if not math.isclose(have, want, rel_tol=rtol, abs_tol=atol):
                    problems.append(f"{run_id}.{key}: {have!r} differs from golden {want!r}")
            elif have != want:
                problems.append(f"{run_id}.{key}: {have!r} differs from golden {want!r}")
    return problems


def reproduce(name: str, threads: int, out_dir: str = "", golden_dir: str = "",
              update: bool = False) -> tuple[int, list[str]]:
    observed: dict[str, dict] = {}
    messages: list[str] = []
    warned = False
    for spec in recipe_runs(name):
        run_id = spec["id"]
        cfg = ExperimentConfig(spec["config"])
        result = run(cfg, threads)
        warned |= bool(result.warnings)
        if out_dir:
            write_artifacts(result, cfg, str(Path(out_dir) / name))
        observed[run_id] = _numeric_summary(result)
        messages.append(f"[{run_id}]\n{summary_table(result)}")
    golden_path = _golden_path(name, golden_dir)
    if update:
        target = Path(golden_dir) / f"{name}.golden.json" if golden_dir else Path(str(golden_path))
        target.write_text(json.dumps({"rtol": 1e-6, "atol": 1e-9, "runs": observed}, indent=2, sort_keys=True) + "\n")
        messages.append(f"golden values written to {target}")
        return 0, messages
    if not golden_path.is_file():
        raise FileNotFoundError(f"golden file for recipe {name!r} is missing: {golden_path}")
    problems = compare_golden(observed, json.loads(golden_path.read_text()))
    messages += [f"golden mismatch: {p}" for p in problems]
    if problems:
        return 1, messages
    messages.append(f"recipe {name}: all values match golden")
    return (2 if warned else 0), messages


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads or default_threads()
    try:
        if args.command == "reproduce":
            code, messages = reproduce(args.recipe, threads, args.out_dir, args.golden_dir, args.update_golden)
            print("\n".join(messages))
            return code
        if args.command == "run":
            cfg = ExperimentConfig.from_file(args.config)
        else:
            cfg = config_from_args(args)
        result = run(cfg, threads)
        written = write_artifacts(result, cfg, args.out_dir or None, args.format)
        print(summary_table(result))
        for path in written:
            print(f"wrote {path}")
        return result.exit_code
    except (ConfigError, FileNotFoundError, KeyError, ValueError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
