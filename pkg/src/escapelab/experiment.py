"""Experiment configuration, execution and report emission."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .gdms import Gdms, bowen_parameter, get_instance, parse_gdms
from .holes import (
    Center,
    aperiodic_center,
    ball_hole_sequence,
    center_from_point,
    check_U_conditions,
    classify_center,
    cylinder_hole_sequence,
)
from .thermo import GibbsState, Potential, gibbs_state, parse_potential

SECTIONS: dict[str, dict[str, Any]] = {
    "system": {"name": "doubling", "file": ""},
    "potential": {"kind": "geometric", "probs": "", "t": "", "file": ""},
    "hole": {"type": "cylinder", "center": "0", "levels": "1..12", "radii": "", "kappa": "0.5",
             "words": ""},
    "analysis": {"kind": "escape", "beta": "2.0", "t_grid": "", "F": "1", "T_max": "60",
                 "theta_grid": "-1.0..0.5:31", "k": "10", "samples": "100000", "seed": "0",
                 "method": "auto"},
    "tolerances": {"tol": "1e-13"},
    "output": {"dir": "", "format": "both", "name": ""},
}


class ConfigError(ValueError):
    pass


class HypothesisWarning(Exception):
    pass


@dataclass
class ExperimentConfig:
    values: dict[str, dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        merged = {sec: dict(keys) for sec, keys in SECTIONS.items()}
        for sec, keys in self.values.items():
            if sec not in SECTIONS:
                raise ConfigError(f"unknown section [{sec}]")
            for key, val in keys.items():
                if key not in SECTIONS[sec]:
                    raise ConfigError(f"[{sec}] unknown key {key!r}")
                merged[sec][key] = str(val)
        self.values = merged

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def canonical(self) -> str:
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str, fmt: str | None = None) -> ExperimentConfig:
        stripped = text.lstrip()
        if fmt == "json" or (fmt is None and stripped.startswith("{")):
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"line {exc.lineno}: {exc.msg}") from exc
            if not isinstance(doc, dict) or not all(isinstance(v, dict) for v in doc.values()):
                raise ConfigError("JSON config must map section names to objects")
            return cls(doc)
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"line {exc.lineno}: expected a [section] header") from exc
        except configparser.ParsingError as exc:
            lines = "; ".join(f"line {n}: cannot parse {line}" for n, line in exc.errors)
            raise ConfigError(lines) from exc
        except configparser.Error as exc:
            where = f"line {exc.lineno}: " if getattr(exc, "lineno", None) else ""
            raise ConfigError(where + exc.message.splitlines()[0].split("]: ")[-1]) from exc
        return cls({sec: dict(parser[sec]) for sec in parser.sections()})

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ExperimentConfig:
        p = Path(path)
        return cls.from_text(p.read_text(), "json" if p.suffix == ".json" else None)


# -- parsing helpers -------------------------------------------------------------
def parse_int_range(text: str) -> list[int]:
    """``"1..20"``, ``"1..20:2"`` or ``"3,5,8"``."""
    text = text.strip()
    if ".." in text:
        body, _, step = text.partition(":")
        a, b = body.split("..")
        return list(range(int(a), int(b) + 1, int(step) if step else 1))
    return [int(x) for x in text.split(",") if x.strip()]


def parse_float_grid(text: str) -> list[float]:
    """``"a..b:n"`` (n points) or a comma list."""
    text = text.strip()
    if ".." in text:
        body, _, n = text.partition(":")
        a, b = (float(x) for x in body.split(".."))
        return [float(x) for x in np.linspace(a, b, int(n) if n else 11)]
    return [float(x) for x in text.split(",") if x.strip()]


def load_system(cfg: ExperimentConfig) -> Gdms:
    path = cfg.get("system", "file")
    if path:
        return parse_gdms(Path(path).read_text())
    return get_instance(cfg.get("system", "name"))


def load_potential(cfg: ExperimentConfig, g: Gdms) -> tuple[Potential, float | None]:
    kind = cfg.get("potential", "kind")
    s = g.subshift
    if kind in ("geometric", "lebesgue"):
        t = cfg.get("potential", "t")
        t = float(t) if t else bowen_parameter(g).value
        return g.family().at(t), t
    if kind == "bernoulli":
        probs = [float(x) for x in cfg.get("potential", "probs").split(",")]
        if len(probs) != s.alphabet_size:
            raise ConfigError(f"[potential] probs needs {s.alphabet_size} entries")
        return Potential.from_letters(s, np.log(probs)), None
    if kind == "zero":
        return Potential.constant(s, 0.0), None
    if kind == "file":
        return parse_potential(Path(cfg.get("potential", "file")).read_text(), s), None
    raise ConfigError(f"[potential] unknown kind {kind!r}")


def fibonacci_center(depth: int = 256) -> Center:
    """Fixed point of ``1 -> 10, 0 -> 1``; it contains no ``00``."""
    w = "1"
    while len(w) < depth:
        w = "".join("10" if c == "1" else "1" for c in w)
    return Center(tuple(int(c) for c in w[:depth]), "fibonacci")


def load_center(text: str, g: Gdms) -> Center:
    text = text.strip()
    if text.startswith("periodic:"):
        return Center.periodic(g.subshift.parse_word(text.split(":", 1)[1]))
    if text in ("nonperiodic", "aperiodic", "sqrt2-1"):
        return aperiodic_center(256, g.subshift.alphabet_size)
    if text == "fibonacci":
        return fibonacci_center()
    if text.startswith("word:"):
        return Center(g.subshift.parse_word(text.split(":", 1)[1]), text)
    try:
        Fraction(text)
    except ValueError:
        raise ConfigError(f"[hole] cannot read center {text!r}") from None
    return center_from_point(g, text, 256)


def center_point(text: str) -> float:
    return float(Fraction(text.strip()))


# -- running ---------------------------------------------------------------------
def tagged(value, provenance: str) -> dict:
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        value = str(value)
    return {"value": value, "provenance": provenance}


@dataclass
class RunResult:
    summary: dict
    table_csv: str
    report: dict
    warnings: list[str]

    @property
    def exit_code(self) -> int:
        return 2 if self.warnings else 0


def default_threads() -> int:
    env = os.environ.get("ESCAPELAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run(cfg: ExperimentConfig, threads: int | None = None) -> RunResult:
    threads = threads or default_threads()
    kind = cfg.get("analysis", "kind")
    handlers = {
        "escape": _run_escape,
        "dimdrop": _run_dimdrop,
        "induce": _run_induce,
        "wbt": _run_wbt,
        "montecarlo": _run_montecarlo,
    }
    if kind not in handlers:
        raise ConfigError(f"[analysis] unknown kind {kind!r}")
    summary, csv_text, body, warnings = handlers[kind](cfg, threads)
    report = {
        "config": cfg.values,
        "config_hash": cfg.digest,
        "version": __version__,
        "tolerances": {"tol": float(cfg.get("tolerances", "tol"))},
        "summary": summary,
        "warnings": warnings,
        **body,
    }
    return RunResult(summary, csv_text, report, warnings)


def _is_point(text: str) -> bool:
    try:
        Fraction(text.strip())
    except ValueError:
        return False
    return True


def _hole_sequence(cfg, g, gibbs):
    text = cfg.get("hole", "center")
    center = load_center(text, g)
    levels = parse_int_range(cfg.get("hole", "levels"))
    # a point may have several codings; classify it metrically
    cls = classify_center(g, text.strip() if _is_point(text) and g.is_affine else center)
    h = cylinder_hole_sequence(g, center, max(levels), gibbs, cls, n_min=min(levels))
    return h, levels


def _condition_warnings(conds) -> list[str]:
    return [f"{name} fails: {c.detail}" for name, c in conds.items() if c.status == "fail"]


def _run_escape(cfg, threads):
    from .escape import ball_escape_asymptotics, escape_asymptotics

    g = load_system(cfg)
    pot, _ = load_potential(cfg, g)
    tol = float(cfg.get("tolerances", "tol"))
    gibbs = gibbs_state(pot, tol, n_check=0)
    method = cfg.get("analysis", "method")
    if cfg.get("hole", "type") == "ball":
        z = center_point(cfg.get("hole", "center"))
        radii = parse_float_grid(cfg.get("hole", "radii"))
        kappa = float(cfg.get("hole", "kappa"))
        h, sandwiches = ball_hole_sequence(g, gibbs, z, radii, kappa)
        rep = ball_escape_asymptotics(gibbs, sandwiches, method)
        warnings = _condition_warnings(check_U_conditions(h, gibbs)) if h.levels else ["no usable radii"]
        ext = rep.extra["ball_extrapolation"]
        summary = {f"{side}_limit": tagged(e["limit"], "extrapolated") for side, e in sorted(ext.items())}
        return summary, rep.to_csv(), rep.to_dict(), warnings
    h, levels = _hole_sequence(cfg, g, gibbs)
    conds = check_U_conditions(h, gibbs)
    rep = escape_asymptotics(gibbs, h, levels, method, threads)
    rep.extra["conditions"] = {k: dataclasses.asdict(v) for k, v in conds.items()}
    ext = rep.extrapolation
    summary = {
        "last_ratio": tagged(rep.rows[-1].ratio, "computed"),
        "extrapolated_limit": tagged(ext.limit, "extrapolated"),
        "extrapolation_uncertainty": tagged(ext.uncertainty, "extrapolated"),
        "theoretical_limit": tagged(rep.theoretical, "theory"),
    }
    return summary, rep.to_csv(), rep.to_dict(), _condition_warnings(conds)


def _run_dimdrop(cfg, threads):
    from .dimension import dimension_drop_asymptotics

    g = load_system(cfg)
    tol = float(cfg.get("tolerances", "tol"))
    b = bowen_parameter(g, tol).value
    gibbs_b = gibbs_state(g.family().at(b), tol, n_check=0)
    h, levels = _hole_sequence(cfg, g, gibbs_b)
    rep = dimension_drop_asymptotics(g, h, levels, tol, cfg.get("analysis", "method"), threads)
    ext = rep.extrapolation
    warnings = [] if ext else ["every survivor set is degenerate"]
    summary = {
        "b": tagged(rep.b, "computed"),
        "chi": tagged(rep.chi, "computed"),
        "last_ratio": tagged(rep.rows[-1].drop_ratio, "computed"),
        "extrapolated_limit": tagged(ext.limit if ext else None, "extrapolated"),
        "theoretical_limit": tagged(rep.theoretical_limit, "theory"),
    }
    return summary, rep.to_csv(), rep.to_dict(), warnings


def _run_induce(cfg, threads):
    from .escape import extrapolate_limit, map_levels
    from .induce import build_induced, kac_check, ldp_rate, tail_decay, transfer_escape_rate

    g = load_system(cfg)
    pot, _ = load_potential(cfg, g)
    tol = float(cfg.get("tolerances", "tol"))
    gibbs = gibbs_state(pot, tol, n_check=0)
    F = [g.subshift.parse_word(w) for w in cfg.get("analysis", "F").split(",")]
    ind = build_induced(gibbs, F, int(cfg.get("analysis", "T_max")))
    kac = kac_check(ind)
    td = tail_decay(ind)
    grid = [t for t in parse_float_grid(cfg.get("analysis", "theta_grid")) if t < td.alpha]
    if 0.0 not in grid:
        grid = sorted(grid + [0.0])
    curve = ldp_rate(ind, grid, td.alpha)
    warnings = []
    if not td.etd:
        warnings.append("exponential tail decay fit failed")
    if not curve.gap_negative():
        warnings.append("gap(theta) is not negative off zero")
    if not kac.holds:
        warnings.append("Kac gap exceeds the certificate width")
    summary = {
        "kac_lhs": tagged(kac.lhs, "computed"),
        "kac_rhs": tagged(kac.rhs, "theory"),
        "kac_gap": tagged(kac.gap, "computed"),
        "kac_width": tagged(kac.width, "computed"),
        "alpha": tagged(td.alpha, "fitted"),
        "ldp_gap_negative": tagged(curve.gap_negative(), "computed"),
        "pressure_at_zero": tagged(curve.pressure_at_zero(), "computed"),
        "convexity_min": tagged(curve.convexity_min, "computed"),
    }
    body = {"induced": json.loads(ind.to_json()),
            "ldp": [dataclasses.asdict(p) for p in curve.points]}
    lines = ["theta,pressure,mean_tau,gap"]
    lines += [",".join(repr(float(x)) for x in (p.theta, p.pressure, p.mean_tau, p.gap)) for p in curve.points]
    hole_text = cfg.get("hole", "center")
    if cfg.get("hole", "type") == "cylinder" and hole_text and cfg.get("hole", "levels"):
        center = load_center(hole_text, g)
        levels = parse_int_range(cfg.get("hole", "levels"))
        ig = gibbs_state(ind.potential, 1e-14, n_check=0)
        rows = map_levels(lambda n: transfer_escape_rate(ind, [center.prefix(n)], n, ig,
                                                           td.etd and curve.gap_negative()),
                            [n for n in levels if n >= ind.d], threads)
        base_ext = extrapolate_limit([r.mu_B for r in rows], [r.base_ratio for r in rows])
        ind_ext = extrapolate_limit([r.mu_F_B for r in rows], [r.induced_ratio for r in rows])
        summary["base_limit"] = tagged(base_ext.limit, "extrapolated")
        summary["induced_limit"] = tagged(ind_ext.limit, "extrapolated")
        body["transfer"] = [dataclasses.asdict(r) for r in rows]
    return summary, "\n".join(lines) + "\n", body, warnings


def _run_wbt(cfg, threads):
    from .diagnostics import dbt_curve, probes_to_csv, wbt_curve, wbt_verdict

    g = load_system(cfg)
    pot, _ = load_potential(cfg, g)
    tol = float(cfg.get("tolerances", "tol"))
    gibbs = gibbs_state(pot, tol, n_check=0)
    z = center_point(cfg.get("hole", "center"))
    radii = parse_float_grid(cfg.get("hole", "radii"))
    beta = float(cfg.get("analysis", "beta"))
    kappa = float(cfg.get("hole", "kappa"))
    probes = wbt_curve(g, gibbs, z, beta, radii)
    dbt = dbt_curve(g, gibbs, z, kappa, radii)
    warnings = [] if wbt_verdict(probes) else ["WBT ratio not below threshold at the smallest radius"]
    if not all(p.sandwich_holds for p in dbt):
        warnings.append("N_kappa sandwich violated")
    summary = {
        "last_wbt_ratio": tagged(probes[-1].ratio, "computed"),
        "last_dbt_ratio": tagged(dbt[-1].ratio, "computed"),
        "wbt_verdict": tagged(wbt_verdict(probes), "computed"),
    }
    body = {"wbt": [dataclasses.asdict(p) for p in probes],
            "dbt": [dataclasses.asdict(p) | {"sandwich_holds": p.sandwich_holds} for p in dbt]}
    return summary, probes_to_csv(probes), body, warnings


def _run_montecarlo(cfg, threads):
    from .escape import monte_carlo_survival, survival_probability_exact

    g = load_system(cfg)
    pot, _ = load_potential(cfg, g)
    tol = float(cfg.get("tolerances", "tol"))
    gibbs = gibbs_state(pot, tol, n_check=0)
    words_text = cfg.get("hole", "words")
    if words_text:
        words = [g.subshift.parse_word(w) for w in words_text.split(",")]
    else:
        center = load_center(cfg.get("hole", "center"), g)
        words = [center.prefix(max(parse_int_range(cfg.get("hole", "levels"))))]
    k = int(cfg.get("analysis", "k"))
    samples = int(cfg.get("analysis", "samples"))
    seed = int(cfg.get("analysis", "seed"))
    mc = monte_carlo_survival(gibbs, words, k, samples, seed, threads=threads)
    exact = survival_probability_exact(gibbs, words, k)
    # binomial error under the exact value, so zero-hit runs of rare events stay testable
    null_se = math.sqrt(max(exact * (1.0 - exact), 0.0) / samples)
    z = abs(mc.estimate - exact) / null_se if null_se > 0 else (0.0 if mc.estimate == exact else math.inf)
    warnings = [] if z <= 3 else [f"Monte Carlo estimate is {z:.1f} standard errors from the exact value"]
    summary = {
        "estimate": tagged(mc.estimate, "monte-carlo"),
        "std_error": tagged(mc.std_error, "monte-carlo"),
        "exact": tagged(exact, "computed"),
        "z_score": tagged(z, "monte-carlo"),
    }
    csv_text = ("k,samples,seed,estimate,std_error,exact\n"
                f"{k},{samples},{seed},{float(mc.estimate)!r},{float(mc.std_error)!r},{float(exact)!r}\n")
    return summary, csv_text, {"hole_words": [g.subshift.format_word(w) for w in words]}, warnings


def write_artifacts(result: RunResult, cfg: ExperimentConfig, out_dir: str | None, fmt: str | None = None) -> list[Path]:
    out_dir = out_dir or cfg.get("output", "dir")
    if not out_dir:
        return []
    fmt = fmt or cfg.get("output", "format")
    name = cfg.get("output", "name") or f"{cfg.get('analysis', 'kind')}-{cfg.digest}"
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        p = path / f"{name}.csv"
        p.write_text(result.table_csv)
        written.append(p)
    if fmt in ("json", "both"):
        p = path / f"{name}.json"
        p.write_text(json.dumps(result.report, indent=2, sort_keys=True, default=_json_default) + "\n")
        written.append(p)
    return written


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def summary_table(result: RunResult) -> str:
    lines = []
    width = max((len(k) for k in result.summary), default=0)
    for key, entry in result.summary.items():
        val = entry["value"]
        text = f"{val:.10g}" if isinstance(val, float) else str(val)
        lines.append(f"{key:<{width}}  {text:<20} [{entry['provenance']}]")
    for w in result.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines)
