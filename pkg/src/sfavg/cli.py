"""Command-line front end: declarative experiment configs, one subcommand per
study, persistent artifacts, and deterministic re-runs.

Config files are strict INI documents with sections [system], [spaces],
[integrator], [provider], [plan] and [output]. Unknown sections or keys are
fatal (with a nearest-match suggestion) so mathematical parameters cannot be
silently misspelled. Scientific outputs (results.json, tables/*.csv,
paths/*.bin) never contain wall-clock data; timing lives in timing.json, and
every artifact is listed in manifest.json with a content hash.

Exit codes: 0 = pass, 1 = error, 2 = study ran but flagged its result
(inconclusive trend, failed check, or rejected diagnostic).
"""

from __future__ import annotations

import argparse
import configparser
import difflib
import io
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import average, coeffs, ergodic, harness, integrate, reportio
from . import timefuncs as tf
from ._backend import backend_name, set_threads
from .spaces import (STREAM_W2, ConfigurationRejected, InvalidArgument,
                     NoiseSource, TimeGrid)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2

COMMANDS = ("simulate", "frozen", "measure", "average", "converge",
            "khasminskii", "apcheck", "conditions")

SECTION_ORDER = ("system", "spaces", "integrator", "provider", "plan",
                 "output")

# kind -> (parse, canonical) handled in _parse_value below
_SCHEMA: Dict[str, Dict[str, str]] = {
    "system": {
        "name": "name",
        "ell1": "timefunc",
        "ell2": "timefunc",
        "phi": "timefunc",
        "c": "float",
        "a_coupling": "float",
        "f_x": "float",
        "f_y": "float",
        "nu": "float",
        "b_nl": "float",
        "fast_kappa": "float",
    },
    "spaces": {
        "slow_dim": "int",
        "fast_dim": "int",
    },
    "integrator": {
        "step": "float",
        "newton_tol": "float",
        "newton_max_iter": "int",
        "taming_power": "float",
        "h_fast_factor": "float",
        "divergence_threshold": "float",
        "cell_exponent": "int",
    },
    "provider": {
        "mode": "mode",
        "ensemble_m": "int",
        "pullback_s": "float",
        "stderr_tol": "float",
        "ensemble_step": "float",
        "te_spacing": "float",
        "seed": "int",
    },
    "plan": {
        "eps_list": "floats",
        "epsilon": "float",
        "mc_paths": "int",
        "horizon": "float",
        "moment_p": "float",
        "seed_base": "int",
        "theorem": "theorem",
        "deltas": "floats",
        "delta_rule": "delta_rule",
        "limit_window_t": "float",
        "limit_anchors": "floats",
        "t_anchor": "float",
        "x_scale": "float",
        "taus": "floats",
        "ap_anchors": "floats",
        "epsilon_ap": "float",
        "dictionary_size": "int",
        "ap_step": "float",
        "tau_range": "floats",
        "tau_step": "float",
        "scan_epsilon": "float",
        "probe_window_t": "float",
        "probe_points": "int",
        "samples": "int",
    },
    "output": {
        "dir": "str",
        "formats": "str",
        "write_paths": "bool",
    },
}

_DEFAULTS: Dict[str, Dict[str, str]] = {
    "system": {
        "name": "cahn_hilliard_heat_1d",
    },
    "spaces": {
        "slow_dim": "16",
        "fast_dim": "16",
    },
    "integrator": {
        "step": "0.0002",
        "cell_exponent": "16",
    },
    "provider": {
        "mode": "oracle_linear",
        "ensemble_m": "400",
        "seed": "0",
    },
    "plan": {
        "eps_list": "0.1,0.02,0.004",
        "epsilon": "0.1",
        "mc_paths": "200",
        "horizon": "1.0",
        "moment_p": "1.0",
        "seed_base": "2024",
        "theorem": "t1",
        "deltas": "0.2,0.05,0.0125",
        "delta_rule": "fixed",
        "limit_window_t": "400.0",
        "limit_anchors": "0.0,37.0",
        "t_anchor": "0.0",
        "x_scale": "0.5",
        "taus": "6.283185307179586,3.141592653589793",
        "ap_anchors": "1.5707963267948966",
        "epsilon_ap": "0.002",
        "dictionary_size": "256",
        "ap_step": "0.004",
        "tau_range": "0.0,600.0",
        "tau_step": "0.02",
        "scan_epsilon": "0.3",
        "probe_window_t": "60.0",
        "probe_points": "3000",
        "samples": "10000",
    },
    "output": {
        "dir": "out",
        "formats": "json,csv",
        "write_paths": "false",
    },
}

_TIMEFUNC_FORMS = ("constant", "zero", "sine", "xi", "quasi", "ap_series")


class ConfigError(ValueError):
    """Config document rejected; message carries the field path."""


def _suggest(word: str, options: Sequence[str]) -> str:
    close = difflib.get_close_matches(word, options, n=1, cutoff=0.5)
    return f"; did you mean {close[0]!r}?" if close else ""


def _parse_float(text: str, path: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{path}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite, got {text}")
    return value


def _parse_int(text: str, path: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ConfigError(f"{path}: not an integer: {text!r}") from None


def _parse_floats(text: str, path: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{path}: empty list")
    return tuple(_parse_float(p, path) for p in parts)


def parse_timefunc(text: str, path: str = "timefunc"):
    """Build a time function from its spec string.

    Grammar: zero | constant:v | sine:amp,omega[,phase] | xi:iota,offset |
    quasi:a1,omega1,a2[,omega2] | ap_series:n_terms,scale
    """
    head, _, tail = text.partition(":")
    head = head.strip()
    args = _parse_floats(tail, path) if tail.strip() else ()
    counts = {"zero": (0, 0), "constant": (1, 1), "sine": (2, 3),
              "xi": (2, 2), "quasi": (3, 4), "ap_series": (2, 2)}
    if head not in counts:
        raise ConfigError(
            f"{path}: unknown time-function form {head!r}"
            f"{_suggest(head, _TIMEFUNC_FORMS)}")
    lo, hi = counts[head]
    if not lo <= len(args) <= hi:
        raise ConfigError(
            f"{path}: {head} takes {lo}"
            + (f"-{hi}" if hi != lo else "") + f" arguments, got {len(args)}")
    try:
        if head == "zero":
            return tf.zero()
        if head == "constant":
            return tf.constant(args[0])
        if head == "sine":
            return tf.sine(*args)
        if head == "xi":
            return tf.xi_class(iota=args[0], offset=args[1])
        if head == "quasi":
            return tf.quasi_periodic(*args)
        return tf.ap_series(n_terms=int(args[0]), scale=args[1])
    except InvalidArgument as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _canonical_timefunc(text: str, path: str) -> str:
    parse_timefunc(text, path)
    head, _, tail = text.partition(":")
    head = head.strip()
    if not tail.strip():
        return head
    args = _parse_floats(tail, path)
    return head + ":" + ",".join(repr(a) for a in args)


def _canonical_value(kind: str, text: str, path: str) -> str:
    text = text.strip()
    if kind == "float":
        return repr(_parse_float(text, path))
    if kind == "int":
        return str(_parse_int(text, path))
    if kind == "floats":
        return ",".join(repr(v) for v in _parse_floats(text, path))
    if kind == "bool":
        low = text.lower()
        if low not in ("true", "false"):
            raise ConfigError(f"{path}: expected true or false, got {text!r}")
        return low
    if kind == "timefunc":
        return _canonical_timefunc(text, path)
    if kind == "name":
        if text not in coeffs.EXAMPLE_NAMES:
            raise ConfigError(f"{path}: unknown system {text!r}"
                              f"{_suggest(text, coeffs.EXAMPLE_NAMES)}")
        return text
    if kind == "mode":
        options = tuple(m.value for m in average.DriftMode)
        if text not in options:
            raise ConfigError(f"{path}: unknown provider mode {text!r}"
                              f"{_suggest(text, options)}")
        return text
    if kind == "theorem":
        if text not in ("t1", "t2"):
            raise ConfigError(f"{path}: theorem must be t1 or t2, got {text!r}")
        return text
    if kind == "delta_rule":
        options = tuple(r.value for r in average.DeltaRule)
        if text not in options:
            raise ConfigError(f"{path}: unknown delta rule {text!r}"
                              f"{_suggest(text, options)}")
        return text
    return text


@dataclass(frozen=True)
class RunConfig:
    """Validated experiment document in canonical string form."""

    values: Tuple[Tuple[str, Tuple[Tuple[str, str], ...]], ...]

    def section(self, name: str) -> Dict[str, str]:
        for sec, items in self.values:
            if sec == name:
                return dict(items)
        return {}

    def get(self, section: str, key: str) -> Optional[str]:
        return self.section(section).get(key)

    def fval(self, section: str, key: str) -> float:
        return float(self.section(section)[key])

    def ival(self, section: str, key: str) -> int:
        return int(self.section(section)[key])

    def flist(self, section: str, key: str) -> Tuple[float, ...]:
        return tuple(float(p) for p in self.section(section)[key].split(","))

    def bval(self, section: str, key: str) -> bool:
        return self.section(section)[key] == "true"

    @property
    def seed_base(self) -> int:
        return self.ival("plan", "seed_base")


def parse_config(source: str) -> RunConfig:
    """Parse and fully validate a config document.

    source is a file path or the document text itself (anything containing
    a newline or a '[' prefix is treated as text).
    """
    if "\n" in source or source.lstrip().startswith("["):
        text = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()

    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    merged = {sec: dict(items) for sec, items in _DEFAULTS.items()}
    for sec in parser.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]"
                              f"{_suggest(sec, SECTION_ORDER)}")
        for key, raw in parser.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(
                    f"unknown key {key!r} in [{sec}]"
                    f"{_suggest(key, tuple(_SCHEMA[sec]))}")
            merged[sec][key] = raw

    canon = []
    for sec in SECTION_ORDER:
        items = []
        for key in _SCHEMA[sec]:
            if key in merged[sec]:
                items.append((key, _canonical_value(
                    _SCHEMA[sec][key], merged[sec][key], f"[{sec}] {key}")))
        canon.append((sec, tuple(items)))
    cfg = RunConfig(values=tuple(canon))

    # Cross-field constraints are enforced by actually building the system
    # and plan; builder messages name the violated inequality.
    build_bundle(cfg)
    build_plan(cfg)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    out = io.StringIO()
    for sec, items in cfg.values:
        out.write(f"[{sec}]\n")
        for key, value in items:
            out.write(f"{key} = {value}\n")
        out.write("\n")
    return out.getvalue()


def build_example(cfg: RunConfig) -> "coeffs.ExampleSystem":
    sysc = cfg.section("system")
    overrides = {}
    for key in ("ell1", "ell2", "phi"):
        if key in sysc:
            overrides[key] = parse_timefunc(sysc[key], f"[system] {key}")
    for key in ("c", "a_coupling", "f_x", "f_y", "nu", "b_nl", "fast_kappa"):
        if key in sysc:
            overrides[key] = float(sysc[key])
    try:
        return coeffs.example_system(sysc["name"], **overrides)
    except InvalidArgument as exc:
        raise ConfigError(f"[system]: {exc}") from None


def build_bundle(cfg: RunConfig):
    example = build_example(cfg)
    try:
        slow, fast = coeffs.default_spaces(
            example, cfg.ival("spaces", "slow_dim"),
            cfg.ival("spaces", "fast_dim"))
        bundle = coeffs.build_system(example, slow, fast)
    except (ConfigurationRejected, InvalidArgument) as exc:
        raise ConfigError(f"[system]: {exc}") from None
    return bundle, (slow, fast)


def build_integrator(cfg: RunConfig) -> integrate.IntegratorConfig:
    sec = cfg.section("integrator")
    kw = {}
    for key, field in (("step", "step"), ("newton_tol", "newton_tol"),
                       ("newton_max_iter", "newton_max_iter"),
                       ("taming_power", "taming_power"),
                       ("h_fast_factor", "h_fast_factor"),
                       ("divergence_threshold", "divergence_threshold")):
        if key in sec:
            value = float(sec[key]) if field != "newton_max_iter" else int(sec[key])
            kw[field] = value
    try:
        return integrate.IntegratorConfig(**kw)
    except InvalidArgument as exc:
        raise ConfigError(f"[integrator]: {exc}") from None


def build_provider(cfg: RunConfig) -> average.AveragedDriftProvider:
    sec = cfg.section("provider")
    try:
        return average.AveragedDriftProvider(
            mode=average.DriftMode(sec["mode"]),
            ensemble_M=int(sec["ensemble_m"]),
            pullback_S=float(sec["pullback_s"]) if "pullback_s" in sec else None,
            stderr_tol=float(sec.get("stderr_tol", "inf")),
            ensemble_step=float(sec.get("ensemble_step", "0.002")),
            te_spacing=float(sec.get("te_spacing", "0.02")),
            seed_base=int(sec["seed"]),
        )
    except InvalidArgument as exc:
        raise ConfigError(f"[provider]: {exc}") from None


def build_plan(cfg: RunConfig) -> harness.ExperimentPlan:
    example = build_example(cfg)
    try:
        return harness.ExperimentPlan(
            system=example,
            eps_list=cfg.flist("plan", "eps_list"),
            mc_paths=cfg.ival("plan", "mc_paths"),
            horizon=cfg.fval("plan", "horizon"),
            moment_p=cfg.fval("plan", "moment_p"),
            slow_dim=cfg.ival("spaces", "slow_dim"),
            fast_dim=cfg.ival("spaces", "fast_dim"),
            step=cfg.fval("integrator", "step"),
            cell_exponent=cfg.ival("integrator", "cell_exponent"),
            integrator=build_integrator(cfg),
            provider=build_provider(cfg),
            seed_base=cfg.seed_base,
            limit_window_T=cfg.fval("plan", "limit_window_t"),
            limit_anchors=cfg.flist("plan", "limit_anchors"),
        )
    except InvalidArgument as exc:
        raise ConfigError(f"[plan]: {exc}") from None


def _default_x0(cfg: RunConfig) -> np.ndarray:
    n = cfg.ival("spaces", "slow_dim")
    return cfg.fval("plan", "x_scale") / np.arange(1.0, n + 1.0)


def _grid(cfg: RunConfig) -> TimeGrid:
    return TimeGrid(0.0, cfg.fval("plan", "horizon"),
                    cfg.fval("integrator", "step"),
                    cell_exponent=cfg.ival("integrator", "cell_exponent"))


def _maybe_write_path(cfg: RunConfig, out_dir: str, name: str, sample,
                      eps: float, files: Dict[str, str]) -> None:
    if not cfg.bval("output", "write_paths"):
        return
    os.makedirs(os.path.join(out_dir, "paths"), exist_ok=True)
    rel = os.path.join("paths", f"{name}.bin")
    reportio.write_path_bin(sample, os.path.join(out_dir, rel), eps=eps)
    files[rel] = reportio.sha256_file(os.path.join(out_dir, rel))


def _write_results(out_dir: str, payload: dict, wall: float,
                   files: Dict[str, str]) -> None:
    reportio.dump_json(payload, os.path.join(out_dir, reportio.RESULTS_NAME))
    files[reportio.RESULTS_NAME] = reportio.sha256_file(
        os.path.join(out_dir, reportio.RESULTS_NAME))
    reportio.dump_json({"wall_time": wall},
                       os.path.join(out_dir, reportio.TIMING_NAME))
    files[reportio.TIMING_NAME] = reportio.sha256_file(
        os.path.join(out_dir, reportio.TIMING_NAME))


def cmd_simulate(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    bundle, spc = build_bundle(cfg)
    eps = cfg.fval("plan", "epsilon")
    x0 = _default_x0(cfg)
    y0 = np.zeros(cfg.ival("spaces", "fast_dim"))
    t0 = time.perf_counter()
    sample = integrate.simulate_coupled(bundle, spc, eps, x0, y0, _grid(cfg),
                                        cfg.seed_base, build_integrator(cfg))
    wall = time.perf_counter() - t0
    files: Dict[str, str] = {}
    payload = {
        "command": "simulate",
        "eps": eps,
        "seed_base": cfg.seed_base,
        "points": int(sample.slow.shape[0]),
        "final_slow_norm": float(np.linalg.norm(sample.slow[-1])),
        "final_fast_norm": float(np.linalg.norm(sample.fast[-1])),
        "newton_failures": int(sample.newton_failures),
        "seeds": sample.seed_record.as_dict(),
    }
    _maybe_write_path(cfg, out_dir, "coupled", sample, eps, files)
    _write_results(out_dir, payload, wall, files)
    return EXIT_PASS, files, "simulated coupled pair"


def cmd_frozen(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    bundle, spc = build_bundle(cfg)
    x0 = _default_x0(cfg)
    y0 = np.zeros(cfg.ival("spaces", "fast_dim"))
    noise = NoiseSource(seed=cfg.seed_base,
                        modes=cfg.ival("spaces", "fast_dim"),
                        stream_id=STREAM_W2,
                        cell_exponent=cfg.ival("integrator", "cell_exponent"))
    t_anchor = cfg.fval("plan", "t_anchor")
    t0 = time.perf_counter()
    sample = integrate.simulate_frozen(
        bundle, spc, x0, t_anchor, t_anchor + cfg.fval("plan", "horizon"),
        y0, cfg.fval("integrator", "step"), noise, build_integrator(cfg))
    wall = time.perf_counter() - t0
    files: Dict[str, str] = {}
    payload = {
        "command": "frozen",
        "t_anchor": cfg.fval("plan", "t_anchor"),
        "seed_base": cfg.seed_base,
        "points": int(sample.fast.shape[0]),
        "final_fast_norm": float(np.linalg.norm(sample.fast[-1])),
        "newton_failures": int(sample.newton_failures),
        "seeds": sample.seed_record.as_dict(),
    }
    _maybe_write_path(cfg, out_dir, "frozen", sample, 1.0, files)
    _write_results(out_dir, payload, wall, files)
    return EXIT_PASS, files, "simulated frozen fast equation"


def cmd_measure(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    bundle, spc = build_bundle(cfg)
    x0 = _default_x0(cfg)
    sec = cfg.section("provider")
    pullback = float(sec["pullback_s"]) if "pullback_s" in sec else None
    if pullback is None:
        pullback = ergodic.required_pullback(bundle, x0, None, 1e-3)
    t0 = time.perf_counter()
    ensemble = ergodic.estimate_evolution_measure(
        bundle, spc, x0, cfg.fval("plan", "t_anchor"),
        M=cfg.ival("provider", "ensemble_m"), S=pullback,
        step=cfg.fval("integrator", "step"), seeds=cfg.seed_base)
    wall = time.perf_counter() - t0
    files: Dict[str, str] = {}
    rel = "ensemble.bin"
    ergodic.save_ensemble(os.path.join(out_dir, rel), ensemble)
    files[rel] = reportio.sha256_file(os.path.join(out_dir, rel))
    payload = {
        "command": "measure",
        "t_anchor": ensemble.t_anchor,
        "pullback_horizon": ensemble.pullback_horizon,
        "particles": int(ensemble.particles.shape[0]),
        "mean": [float(v) for v in ensemble.particles.mean(axis=0)],
        "second_moment": float(np.mean(np.sum(ensemble.particles ** 2, axis=1))),
        "moment_ratio": ensemble.moment_ratio,
        "seed_base": cfg.seed_base,
    }
    _write_results(out_dir, payload, wall, files)
    return EXIT_PASS, files, "estimated evolution measure"


def cmd_average(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    bundle, spc = build_bundle(cfg)
    provider = build_provider(cfg)
    provider.bind(bundle, spc)
    x0 = _default_x0(cfg)
    anchors = cfg.flist("plan", "limit_anchors")
    window = cfg.fval("plan", "limit_window_t")
    t0 = time.perf_counter()
    lc = average.limit_coefficients(bundle, provider, T=window,
                                    anchors=anchors)
    drift = average.bohr_limit_drift(provider, bundle, spc, x0, window,
                                     anchors)
    g1_bar, g1_dev = average.time_avg_G1(bundle, x0, window, anchors,
                                         quad_step=0.01)
    try:
        a_bar, a_resid = average.asymptotic_A(bundle, [x0],
                                              cfg.fval("plan", "horizon"))
        a_block = {"ell1_limit_residual": a_resid,
                   "a_bar_first": float(np.asarray(a_bar(x0))[0])}
    except average.UnsupportedBundle as exc:
        a_block = {"unsupported": str(exc)}
    wall = time.perf_counter() - t0
    files: Dict[str, str] = {}
    payload = {
        "command": "average",
        "ell1_bar": lc.ell1_bar,
        "ell2_bar": lc.ell2_bar,
        "drift_multipliers": [float(v) for v in lc.drift_multipliers],
        "bohr_drift": [float(v) for v in drift.value],
        "bohr_tail": drift.tail_estimate,
        "g1_bar_deviation": g1_dev,
        "asymptotic_a": a_block,
        "seed_base": cfg.seed_base,
    }
    _write_results(out_dir, payload, wall, files)
    return EXIT_PASS, files, "built averaged coefficients"


def cmd_converge(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    plan = build_plan(cfg)
    runner = (harness.run_convergence_T1
              if cfg.get("plan", "theorem") == "t1"
              else harness.run_convergence_T2)
    report = runner(plan)
    files = reportio.write_report(report, out_dir, report.kind)
    if report.passed:
        return EXIT_PASS, files, f"{report.kind}: slope {report.rate.slope:.4f}"
    reasons = "; ".join(report.inconclusive_reasons) or "flagged"
    return EXIT_FLAGGED, files, f"{report.kind}: {reasons}"


def cmd_khasminskii(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    plan = build_plan(cfg)
    report = harness.run_khasminskii_study(
        plan, list(cfg.flist("plan", "deltas")),
        eps=cfg.fval("plan", "epsilon"),
        rule=cfg.get("plan", "delta_rule"))
    files = reportio.write_report(report, out_dir, "khasminskii")
    if report.passed:
        return EXIT_PASS, files, f"block scaling slope {report.rate.slope:.4f}"
    reasons = "; ".join(report.inconclusive_reasons) or "slope outside band"
    return EXIT_FLAGGED, files, f"khasminskii: {reasons}"


def cmd_apcheck(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    bundle, spc = build_bundle(cfg)
    example = build_example(cfg)
    phi = example.params.phi
    lo, hi = cfg.flist("plan", "tau_range")
    probes = np.linspace(0.0, cfg.fval("plan", "probe_window_t"),
                         cfg.ival("plan", "probe_points"))
    t0 = time.perf_counter()
    accepted = average.translation_number_scan(
        phi, cfg.fval("plan", "scan_epsilon"), (lo, hi),
        cfg.fval("plan", "tau_step"), probes)
    x = cfg.fval("plan", "x_scale") * np.ones(cfg.ival("spaces", "slow_dim"))
    rep = average.measure_ap_diagnostic(
        bundle, spc, x, taus=cfg.flist("plan", "taus"),
        t_anchors=cfg.flist("plan", "ap_anchors"),
        M=cfg.ival("provider", "ensemble_m"),
        S=float(cfg.section("provider").get("pullback_s", "8.0")),
        seeds=cfg.seed_base,
        epsilon_ap=cfg.fval("plan", "epsilon_ap"),
        dictionary_size=cfg.ival("plan", "dictionary_size"),
        step=cfg.fval("plan", "ap_step"))
    wall = time.perf_counter() - t0
    files: Dict[str, str] = {}
    payload = {
        "command": "apcheck",
        "accepted_taus": [float(v) for v in accepted],
        "distances": {f"tau={k[0]!r},t={k[1]!r}": v
                      for k, v in rep.distances.items()},
        "mc_tol": rep.mc_tol,
        "threshold": rep.threshold,
        "passed": rep.passed,
        "seed_base": cfg.seed_base,
    }
    _write_results(out_dir, payload, wall, files)
    if rep.passed and accepted:
        return EXIT_PASS, files, f"{len(accepted)} translation numbers accepted"
    return EXIT_FLAGGED, files, "almost-periodicity diagnostic flagged"


def cmd_conditions(cfg: RunConfig, out_dir: str) -> Tuple[int, Dict[str, str], str]:
    bundle, _ = build_bundle(cfg)
    t0 = time.perf_counter()
    reports = coeffs.run_all_checks(bundle,
                                    samples=cfg.ival("plan", "samples"),
                                    seed=cfg.seed_base)
    wall = time.perf_counter() - t0
    files: Dict[str, str] = {}
    payload = {
        "command": "conditions",
        "checks": [
            {"condition": r.condition, "passed": r.passed,
             "violations": r.violations, "max_margin": r.max_margin,
             "samples": r.samples}
            for r in reports
        ],
        "seed_base": cfg.seed_base,
    }
    _write_results(out_dir, payload, wall, files)
    if all(r.passed for r in reports):
        return EXIT_PASS, files, "all condition checks passed"
    failed = [r.condition for r in reports if not r.passed]
    return EXIT_FLAGGED, files, "failed checks: " + ", ".join(failed)


_COMMAND_FNS: Dict[str, Callable] = {
    "simulate": cmd_simulate,
    "frozen": cmd_frozen,
    "measure": cmd_measure,
    "average": cmd_average,
    "converge": cmd_converge,
    "khasminskii": cmd_khasminskii,
    "apcheck": cmd_apcheck,
    "conditions": cmd_conditions,
}


def _apply_overrides(cfg: RunConfig, seed: Optional[int]) -> RunConfig:
    if seed is None:
        return cfg
    values = []
    for sec, items in cfg.values:
        if sec == "plan":
            items = tuple((k, str(seed) if k == "seed_base" else v)
                          for k, v in items)
        values.append((sec, items))
    return RunConfig(values=tuple(values))


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfavg",
        description="Slow-fast averaging studies: simulate, measure, average, "
                    "and run convergence experiments from a config file.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="path to the INI config document")
    parser.add_argument("--seed", type=int, default=None,
                        help="override [plan] seed_base")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker thread cap (results are thread-count "
                             "independent)")
    parser.add_argument("--out", default=None,
                        help="override [output] dir")
    parser.add_argument("--verify", action="store_true",
                        help="verify the manifest of an existing output "
                             "directory instead of running")
    parser.add_argument("--version", action="version",
                        version=f"sfavg {__version__} ({backend_name()})")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)

    if args.threads is not None:
        set_threads(args.threads)

    try:
        if args.verify:
            out_dir = args.out
            if out_dir is None and args.config is not None:
                cfg = parse_config(args.config)
                out_dir = cfg.get("output", "dir")
            if out_dir is None:
                print("error: --verify needs --out or a config with "
                      "[output] dir", file=sys.stderr)
                return EXIT_ERROR
            problems = reportio.verify_manifest(out_dir)
            if problems:
                for p in problems:
                    print(f"verify: {p}", file=sys.stderr)
                return EXIT_ERROR
            print(f"{args.command}: manifest verified ({out_dir})")
            return EXIT_PASS

        if args.config is None:
            print("error: --config is required", file=sys.stderr)
            return EXIT_ERROR
        cfg = parse_config(args.config)
        cfg = _apply_overrides(cfg, args.seed)
        out_dir = args.out or cfg.get("output", "dir")
        os.makedirs(out_dir, exist_ok=True)

        code, files, note = _COMMAND_FNS[args.command](cfg, out_dir)

        config_text = serialize_config(cfg)
        reportio.write_manifest(
            out_dir, files,
            config_sha256=reportio.sha256_bytes(config_text.encode("utf-8")),
            seed_base=cfg.seed_base, tool_version=__version__)

        if code == EXIT_PASS:
            print(f"{args.command}: PASS - {note}")
        else:
            print(f"{args.command}: FLAGGED - {note}")
        return code
    except (ConfigError, ConfigurationRejected, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
