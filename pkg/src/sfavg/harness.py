"""Monte Carlo convergence studies for the averaging approximations.

The two study drivers couple each coupled-system path with its averaged
counterpart through the identical slow noise realization, estimate the
strong sup-norm error moment per scale separation, and fit a log-log
rate. A companion study measures the block-frozen auxiliary fast
process gap as the block length shrinks. All estimates are seeded per
path, so reports are reproducible bit for bit regardless of the thread
count or path schedule.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._backend import get_kernels
from .spaces import (
    STREAM_W1,
    STREAM_W2,
    GalerkinSpace,
    InvalidArgument,
    NoiseSource,
    TimeGrid,
    _coeffs_of,
)
from . import coeffs as coeffs_mod
from .average import AveragedDriftProvider, KhasminskiiConfig, _block_rows
from .ergodic import SEED_STRIDE, _lattice_exponent
from .integrate import (
    IntegratorConfig,
    PathSample,
    _cfg_args,
    _fast_args,
    _slow_args,
    _substep_counts,
    _stream_pair,
)

REPORT_SPEC_VERSION = "1"
RATE_SLOPE_FLOOR = 1.0 / 6.0
KHASMINSKII_SLOPE_BAND = (0.3, 0.8)
MAX_FAILED_FRACTION = 0.05
LOW_R2_FLOOR = 0.5


@dataclass
class ExperimentPlan:
    """Inputs of one convergence study.

    eps_list must be strictly decreasing inside (0, 1); the grid step
    and horizon are shared across every scale so errors are comparable.
    cell_exponent defaults to the step-matched noise lattice (about
    eight cells per step).
    """

    system: "coeffs_mod.ExampleSystem"
    eps_list: Tuple[float, ...]
    mc_paths: int = 200
    horizon: float = 1.0
    moment_p: float = 1.0
    slow_dim: int = 16
    fast_dim: int = 16
    step: float = 2e-4
    cell_exponent: Optional[int] = None
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    integrator: Optional[IntegratorConfig] = None
    provider: AveragedDriftProvider = field(
        default_factory=AveragedDriftProvider)
    seed_base: int = 2024
    seed_stride: int = SEED_STRIDE
    limit_window_T: float = 400.0
    limit_anchors: Tuple[float, ...] = (0.0, 37.0)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if len(eps) < 1:
            raise InvalidArgument("eps_list must be non-empty")
        if any(not 0.0 < e <= 1.0 for e in eps):
            raise InvalidArgument("every eps must lie in (0, 1]")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise InvalidArgument("eps_list must be strictly decreasing")
        self.eps_list = eps
        if self.mc_paths < 2:
            raise InvalidArgument("mc_paths must be >= 2")
        if self.horizon <= 0.0:
            raise InvalidArgument("horizon must be positive")
        if self.moment_p < 1.0:
            raise InvalidArgument("moment_p must be >= 1")
        if self.step <= 0.0 or self.step > self.horizon:
            raise InvalidArgument("step must lie in (0, horizon]")
        if self.integrator is None:
            self.integrator = IntegratorConfig(step=self.step)
        if self.cell_exponent is None:
            self.cell_exponent = _lattice_exponent(self.integrator)

    def build(self):
        """Realize (bundle, spaces, grid, x0, y0) for this plan."""
        spaces = coeffs_mod.default_spaces(self.system, self.slow_dim,
                                           self.fast_dim)
        bundle = coeffs_mod.build_system(self.system, *spaces)
        grid = TimeGrid(0.0, self.horizon, self.step,
                        cell_exponent=self.cell_exponent)
        if self.x0 is None:
            x0 = 0.5 / np.arange(1.0, self.slow_dim + 1.0)
        else:
            x0 = np.asarray(self.x0, dtype=np.float64)
            if x0.shape != (self.slow_dim,):
                raise InvalidArgument("x0 shape does not match slow_dim")
        if self.y0 is None:
            y0 = np.zeros(self.fast_dim)
        else:
            y0 = np.asarray(self.y0, dtype=np.float64)
            if y0.shape != (self.fast_dim,):
                raise InvalidArgument("y0 shape does not match fast_dim")
        return bundle, spaces, grid, np.ascontiguousarray(x0), \
            np.ascontiguousarray(y0)


@dataclass(frozen=True)
class RateFit:
    """Least squares line through (log scale, log error)."""

    slope: float
    intercept: float
    r2: float
    slope_stderr: float
    n_points: int


@dataclass(frozen=True)
class EpsilonResult:
    """Strong-error estimate at one scale separation."""

    eps: float
    error: float
    stderr: float
    failed_paths: int
    n_paths: int
    flagged_invalid: bool
    conditional: bool
    w1_checksum: str
    wall_time: float
    diag_error: Optional[float] = None
    diag_stderr: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-scale errors with the fitted rate and its quality flags.

    `monotone` certifies each error drop exceeds twice the combined
    standard error; `bound_satisfied` compares the fitted slope against
    the theoretical floor minus the fit uncertainty. When either check
    fails the report is marked inconclusive with named reasons rather
    than silently passing.
    """

    kind: str
    results: Tuple[EpsilonResult, ...]
    rate: RateFit
    bound_satisfied: bool
    monotone: bool
    passed: bool
    inconclusive_reasons: Tuple[str, ...]
    moment_p: float
    horizon: float
    step: float
    seed_base: int
    spec_version: str = REPORT_SPEC_VERSION
    limit_tail: Optional[float] = None

    def as_dict(self, include_timing: bool = True) -> Dict:
        rows = []
        for r in self.results:
            row = {
                "eps": r.eps,
                "error": r.error,
                "stderr": r.stderr,
                "failed_paths": r.failed_paths,
                "n_paths": r.n_paths,
                "flagged_invalid": r.flagged_invalid,
                "conditional": r.conditional,
                "w1_checksum": r.w1_checksum,
            }
            if r.diag_error is not None:
                row["diag_error"] = r.diag_error
                row["diag_stderr"] = r.diag_stderr
            if include_timing:
                row["wall_time"] = r.wall_time
            rows.append(row)
        out = {
            "kind": self.kind,
            "spec_version": self.spec_version,
            "moment_p": self.moment_p,
            "horizon": self.horizon,
            "step": self.step,
            "seed_base": self.seed_base,
            "results": rows,
            "rate": {
                "slope": self.rate.slope,
                "intercept": self.rate.intercept,
                "r2": self.rate.r2,
                "slope_stderr": self.rate.slope_stderr,
                "n_points": self.rate.n_points,
            },
            "bound_satisfied": self.bound_satisfied,
            "monotone": self.monotone,
            "passed": self.passed,
            "inconclusive_reasons": list(self.inconclusive_reasons),
        }
        if self.limit_tail is not None:
            out["limit_tail"] = self.limit_tail
        return out


@dataclass(frozen=True)
class DeltaResult:
    """Auxiliary-process gap estimate at one block length."""

    delta: float
    error: float
    stderr: float
    failed_paths: int
    n_paths: int
    flagged_invalid: bool
    wall_time: float


@dataclass(frozen=True)
class KhasminskiiReport:
    """Block-length study of the auxiliary fast process gap."""

    results: Tuple[DeltaResult, ...]
    rate: RateFit
    slope_band: Tuple[float, float]
    passed: bool
    inconclusive_reasons: Tuple[str, ...]
    eps: float
    seed_base: int
    spec_version: str = REPORT_SPEC_VERSION

    def as_dict(self, include_timing: bool = True) -> Dict:
        rows = []
        for r in self.results:
            row = {
                "delta": r.delta,
                "error": r.error,
                "stderr": r.stderr,
                "failed_paths": r.failed_paths,
                "n_paths": r.n_paths,
                "flagged_invalid": r.flagged_invalid,
            }
            if include_timing:
                row["wall_time"] = r.wall_time
            rows.append(row)
        return {
            "kind": "khasminskii",
            "spec_version": self.spec_version,
            "eps": self.eps,
            "seed_base": self.seed_base,
            "results": rows,
            "rate": {
                "slope": self.rate.slope,
                "intercept": self.rate.intercept,
                "r2": self.rate.r2,
                "slope_stderr": self.rate.slope_stderr,
                "n_points": self.rate.n_points,
            },
            "slope_band": list(self.slope_band),
            "passed": self.passed,
            "inconclusive_reasons": list(self.inconclusive_reasons),
        }


@dataclass(frozen=True)
class StoppingDiagnostic:
    """Cumulative growth functional of one slow path.

    functional_trace is non-decreasing by construction; hit_time is the
    first time the trace reaches threshold_R (None when it never does
    or the threshold is infinite).
    """

    times: np.ndarray
    functional_trace: np.ndarray
    threshold_R: float
    hit_time: Optional[float]


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------


def strong_error(slow_a: PathSample, slow_b: PathSample,
                 p: float = 1.0) -> float:
    """Pathwise sup over the grid of the squared H-distance to power p."""
    if slow_a.slow is None or slow_b.slow is None:
        raise InvalidArgument("both samples must carry the slow component")
    ga, gb = slow_a.grid, slow_b.grid
    if (ga.cell_exponent != gb.cell_exponent
            or not np.array_equal(ga.cells, gb.cells)):
        raise InvalidArgument("samples live on different grids")
    if p < 1.0:
        raise InvalidArgument("p must be >= 1")
    sup_sq = float(np.max(np.sum((slow_a.slow - slow_b.slow) ** 2, axis=1)))
    return sup_sq ** p


def stopping_diagnostic(path: PathSample, space: GalerkinSpace,
                        alpha: float = 2.0, beta: float = 0.0,
                        threshold_R: float = 1e6) -> StoppingDiagnostic:
    """Integrate (1 + |X|_V**alpha) (1 + |X|_H)**beta along a path.

    The trace is the cumulative trapezoid integral; the hit time, when
    the threshold is finite and reached, is located by linear
    interpolation inside the crossing step.
    """
    if path.slow is None:
        raise InvalidArgument("path must carry the slow component")
    if threshold_R <= 0.0:
        raise InvalidArgument("threshold_R must be positive")
    xs = path.slow
    lamv = space.eigenvalues ** space.v_exponent
    v_norm = np.sqrt(xs ** 2 @ lamv)
    h_norm = np.sqrt(np.sum(xs ** 2, axis=1))
    integrand = (1.0 + v_norm ** alpha) * (1.0 + h_norm) ** beta
    times = path.grid.times
    widths = np.diff(times)
    inc = 0.5 * (integrand[1:] + integrand[:-1]) * widths
    trace = np.concatenate([[0.0], np.cumsum(inc)])
    hit: Optional[float] = None
    if math.isfinite(threshold_R):
        above = np.nonzero(trace >= threshold_R)[0]
        if above.size:
            i = int(above[0])
            if i == 0:
                hit = float(times[0])
            else:
                frac = (threshold_R - trace[i - 1]) / (trace[i] - trace[i - 1])
                hit = float(times[i - 1] + frac * (times[i] - times[i - 1]))
    return StoppingDiagnostic(times=times, functional_trace=trace,
                              threshold_R=threshold_R, hit_time=hit)


def _loglog_fit(xs: np.ndarray, ys: np.ndarray) -> RateFit:
    """Fit log y = slope * log x + intercept with the slope's stderr."""
    lx = np.log(xs)
    ly = np.log(ys)
    n = len(lx)
    A = np.vstack([lx, np.ones(n)]).T
    coef, _res, _rank, _sv = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fit = A @ coef
    ss_res = float(np.sum((ly - fit) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    if n > 2:
        sxx = float(np.sum((lx - lx.mean()) ** 2))
        se = math.sqrt(ss_res / (n - 2) / sxx) if sxx > 0.0 else math.inf
    else:
        se = 0.0
    return RateFit(slope=slope, intercept=intercept,
                   r2=min(max(r2, 0.0), 1.0), slope_stderr=se, n_points=n)


def _w1_checksum(seed: int, slow_dim: int, grid: TimeGrid) -> str:
    """Digest of the slow-noise increment log of the base-seed path."""
    src = NoiseSource(seed=seed, modes=slow_dim, stream_id=STREAM_W1,
                      cell_exponent=grid.cell_exponent)
    inc = src.increments(grid)
    return hashlib.sha256(
        np.ascontiguousarray(inc, dtype="<f8").tobytes()).hexdigest()[:16]


def _aggregate(errs: np.ndarray, failed: np.ndarray, p: float):
    """Moment estimate over surviving paths; (mean, stderr, n_failed)."""
    ok = failed == 0
    n_ok = int(np.count_nonzero(ok))
    if n_ok == 0:
        return math.nan, math.nan, int(len(errs))
    vals = errs[ok] ** p
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.inf
    return mean, se, int(len(errs) - n_ok)


def _stream_ids(grid: TimeGrid, slow_dim: int, fast_dim: int):
    _w1, _s, w1p, w1n = _stream_pair(0, STREAM_W1, slow_dim,
                                     grid.cell_exponent)
    _w2, _s2, w2p, w2n = _stream_pair(0, STREAM_W2, fast_dim,
                                      grid.cell_exponent)
    return w1p, w1n, w2p, w2n


def _drift_table(plan: ExperimentPlan, bundle, spaces, grid: TimeGrid,
                 eps: float):
    table = plan.provider.bind(bundle, spaces).multiplier_table(grid, eps)
    if table is None:
        raise InvalidArgument(
            "convergence studies need a table-capable averaged-drift "
            "provider (oracle_linear)")
    tf0, dtf, tab = table
    return float(tf0), float(dtf), np.ascontiguousarray(tab)


def _check_trend(results: Sequence, reasons: List[str]) -> bool:
    """Strict error decrease beyond twice the combined standard error."""
    monotone = True
    for a, b in zip(results, results[1:]):
        gap = a.error - b.error
        need = 2.0 * math.hypot(a.stderr, b.stderr)
        if not gap > need:
            monotone = False
            reasons.append(
                f"error drop from eps={a.eps:g} to eps={b.eps:g} is "
                f"{gap:.3g}, within noise band {need:.3g}")
    return monotone


# ---------------------------------------------------------------------------
# study drivers
# ---------------------------------------------------------------------------


def run_convergence_T1(plan: ExperimentPlan) -> ConvergenceReport:
    """Strong error of the scale-dependent averaged equation.

    Every path couples the full system and its averaged counterpart
    through the same slow noise stream; the per-scale estimate is the
    Monte Carlo mean of sup-norm-squared errors to the plan's moment
    power. Scales with more than 5 percent failed paths are flagged
    invalid and excluded from the rate fit.
    """
    bundle, spaces, grid, x0, y0 = plan.build()
    kr = get_kernels()
    w1p, w1n, w2p, w2n = _stream_ids(grid, plan.slow_dim, plan.fast_dim)
    slow_args = _slow_args(bundle, spaces[0])
    fast_args = _fast_args(bundle, spaces[1])
    cfg_args = _cfg_args(plan.integrator)
    results = []
    for eps in plan.eps_list:
        t_start = time.perf_counter()
        tf0, dtf, tab = _drift_table(plan, bundle, spaces, grid, eps)
        nsub = _substep_counts(grid, eps, plan.integrator.h_fast_factor)
        err = np.empty(plan.mc_paths, np.float64)
        failed = np.zeros(plan.mc_paths, np.int64)
        kr.t1_errors_kernel(
            err, failed, np.uint64(plan.seed_base & 0xFFFFFFFFFFFFFFFF),
            np.uint64(plan.seed_stride), grid.cells, nsub, grid.cell_scale,
            eps, w1p, w1n, w2p, w2n, *slow_args, *fast_args,
            tf0, dtf, tab, x0, y0, *cfg_args,
            plan.slow_dim, plan.fast_dim)
        mean, se, n_failed = _aggregate(err, failed, plan.moment_p)
        results.append(EpsilonResult(
            eps=eps, error=mean, stderr=se, failed_paths=n_failed,
            n_paths=plan.mc_paths,
            flagged_invalid=n_failed > MAX_FAILED_FRACTION * plan.mc_paths,
            conditional=n_failed > 0,
            w1_checksum=_w1_checksum(plan.seed_base, plan.slow_dim, grid),
            wall_time=time.perf_counter() - t_start))
    return _assemble_report("T1", plan, results, None)


def run_convergence_T2(plan: ExperimentPlan) -> ConvergenceReport:
    """Strong error against the scale-free limit equation.

    Additionally integrates the scale-dependent averaged equation with
    the same noise and reports its distance to the limit equation
    (diag_error), the pure time-inhomogeneity contribution.
    """
    from .average import limit_coefficients
    bundle, spaces, grid, x0, y0 = plan.build()
    kr = get_kernels()
    lc = limit_coefficients(bundle, plan.provider, T=plan.limit_window_T,
                            anchors=plan.limit_anchors)
    tab_lim = np.ascontiguousarray(lc.drift_multipliers[None, :])
    w1p, w1n, w2p, w2n = _stream_ids(grid, plan.slow_dim, plan.fast_dim)
    slow_args = _slow_args(bundle, spaces[0])
    fast_args = _fast_args(bundle, spaces[1])
    cfg_args = _cfg_args(plan.integrator)
    results = []
    for eps in plan.eps_list:
        t_start = time.perf_counter()
        tf0, dtf, tab_eps = _drift_table(plan, bundle, spaces, grid, eps)
        nsub = _substep_counts(grid, eps, plan.integrator.h_fast_factor)
        err = np.empty(plan.mc_paths, np.float64)
        err_diag = np.empty(plan.mc_paths, np.float64)
        failed = np.zeros(plan.mc_paths, np.int64)
        kr.t2_errors_kernel(
            err, err_diag, failed,
            np.uint64(plan.seed_base & 0xFFFFFFFFFFFFFFFF),
            np.uint64(plan.seed_stride), grid.cells, nsub, grid.cell_scale,
            eps, w1p, w1n, w2p, w2n, *slow_args, *fast_args,
            tf0, dtf, tab_eps, tab_lim, lc.ell1_bar, lc.ell2_bar,
            x0, y0, *cfg_args, plan.slow_dim, plan.fast_dim)
        mean, se, n_failed = _aggregate(err, failed, plan.moment_p)
        dmean, dse, _ = _aggregate(err_diag, failed, plan.moment_p)
        results.append(EpsilonResult(
            eps=eps, error=mean, stderr=se, failed_paths=n_failed,
            n_paths=plan.mc_paths,
            flagged_invalid=n_failed > MAX_FAILED_FRACTION * plan.mc_paths,
            conditional=n_failed > 0,
            w1_checksum=_w1_checksum(plan.seed_base, plan.slow_dim, grid),
            wall_time=time.perf_counter() - t_start,
            diag_error=dmean, diag_stderr=dse))
    return _assemble_report("T2", plan, results, None)


def _assemble_report(kind: str, plan: ExperimentPlan,
                     results: List[EpsilonResult],
                     limit_tail: Optional[float]) -> ConvergenceReport:
    reasons: List[str] = []
    usable = [r for r in results if not r.flagged_invalid
              and math.isfinite(r.error) and r.error > 0.0]
    for r in results:
        if r.flagged_invalid:
            reasons.append(
                f"eps={r.eps:g} flagged invalid: {r.failed_paths} of "
                f"{r.n_paths} paths failed")
    if len(usable) >= 2:
        rate = _loglog_fit(np.array([r.eps for r in usable]),
                           np.array([r.error for r in usable]))
    else:
        rate = RateFit(slope=math.nan, intercept=math.nan, r2=0.0,
                       slope_stderr=math.inf, n_points=len(usable))
        reasons.append("fewer than two usable scales; no rate fit")
    monotone = _check_trend(usable, reasons) if len(usable) >= 2 else False
    bound = (math.isfinite(rate.slope)
             and rate.slope >= RATE_SLOPE_FLOOR - rate.slope_stderr)
    if not bound:
        reasons.append(
            f"fitted slope {rate.slope:.3g} sits below the floor "
            f"{RATE_SLOPE_FLOOR:.3g} minus fit stderr {rate.slope_stderr:.3g}")
    if rate.r2 < LOW_R2_FLOOR:
        reasons.append(f"rate fit r2 = {rate.r2:.3g} is low; slope reported "
                       f"but unreliable")
    passed = bound and monotone and not any(r.flagged_invalid
                                            for r in results)
    return ConvergenceReport(
        kind=kind, results=tuple(results), rate=rate, bound_satisfied=bound,
        monotone=monotone, passed=passed,
        inconclusive_reasons=tuple(reasons), moment_p=plan.moment_p,
        horizon=plan.horizon, step=plan.step, seed_base=plan.seed_base,
        limit_tail=limit_tail)


def run_khasminskii_study(plan: ExperimentPlan,
                          delta_list: Sequence[float],
                          eps: Optional[float] = None,
                          rule: str = "fixed") -> KhasminskiiReport:
    """Auxiliary-process gap as a function of the block length.

    For each block length delta the fast equation is re-integrated with
    the slow input frozen on blocks, against the same noise as the
    coupled run, and the time-integrated squared gap is averaged over
    paths. The fitted log-log slope must land inside the acceptance
    band to pass.
    """
    deltas = [float(d) for d in delta_list]
    if len(deltas) < 2:
        raise InvalidArgument("delta_list needs at least two block lengths")
    if any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise InvalidArgument("delta_list must be strictly decreasing")
    eps = float(eps) if eps is not None else plan.eps_list[0]
    bundle, spaces, grid, x0, y0 = plan.build()
    if any(d < grid.step * (1.0 - 1e-9) for d in deltas):
        raise InvalidArgument("every delta must be at least the grid step")
    kr = get_kernels()
    w1p, w1n, w2p, w2n = _stream_ids(grid, plan.slow_dim, plan.fast_dim)
    slow_args = _slow_args(bundle, spaces[0])
    fast_args = _fast_args(bundle, spaces[1])
    cfg_args = _cfg_args(plan.integrator)
    nsub = _substep_counts(grid, eps, plan.integrator.h_fast_factor)
    results = []
    for delta in deltas:
        t_start = time.perf_counter()
        cfg_delta = KhasminskiiConfig(delta=delta, rule=rule)
        row_of_step = _block_rows(grid, cfg_delta.resolved_delta(eps))
        err = np.empty(plan.mc_paths, np.float64)
        failed = np.zeros(plan.mc_paths, np.int64)
        kr.khasminskii_errors_kernel(
            err, failed, np.uint64(plan.seed_base & 0xFFFFFFFFFFFFFFFF),
            np.uint64(plan.seed_stride), grid.cells, nsub, grid.cell_scale,
            eps, w1p, w1n, w2p, w2n, *slow_args, *fast_args,
            x0, y0, row_of_step, *cfg_args, plan.slow_dim, plan.fast_dim)
        mean, se, n_failed = _aggregate(err, failed, 1.0)
        results.append(DeltaResult(
            delta=delta, error=mean, stderr=se, failed_paths=n_failed,
            n_paths=plan.mc_paths,
            flagged_invalid=n_failed > MAX_FAILED_FRACTION * plan.mc_paths,
            wall_time=time.perf_counter() - t_start))
    reasons: List[str] = []
    usable = [r for r in results if not r.flagged_invalid
              and math.isfinite(r.error) and r.error > 0.0]
    for r in results:
        if r.flagged_invalid:
            reasons.append(
                f"delta={r.delta:g} flagged invalid: {r.failed_paths} of "
                f"{r.n_paths} paths failed")
    if len(usable) >= 2:
        rate = _loglog_fit(np.array([r.delta for r in usable]),
                           np.array([r.error for r in usable]))
    else:
        rate = RateFit(slope=math.nan, intercept=math.nan, r2=0.0,
                       slope_stderr=math.inf, n_points=len(usable))
        reasons.append("fewer than two usable block lengths; no rate fit")
    lo, hi = KHASMINSKII_SLOPE_BAND
    in_band = math.isfinite(rate.slope) and lo <= rate.slope <= hi
    if not in_band:
        reasons.append(f"fitted slope {rate.slope:.3g} lies outside the "
                       f"acceptance band [{lo:g}, {hi:g}]")
    passed = in_band and not any(r.flagged_invalid for r in results)
    return KhasminskiiReport(
        results=tuple(results), rate=rate, slope_band=(lo, hi),
        passed=passed, inconclusive_reasons=tuple(reasons), eps=eps,
        seed_base=plan.seed_base)
