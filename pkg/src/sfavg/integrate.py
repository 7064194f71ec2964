"""Time stepping for the coupled slow-fast system and its averaged forms.

The stiff monotone drift parts (the slow operator and the linear part of
the fast drift) are taken implicitly at the new state; coupling terms,
noise coefficients, and nonautonomous scalars are evaluated at the left
endpoint. The fast equation sub-cycles with an internal step
h_fast = min(h, eps * h_fast_factor) so the 1/eps drift stays resolved
while the slow grid remains eps-independent. A tamed explicit scheme is
provided as a cross-check.

All stochastic input comes from counter-based streams, so any two runs
that share a seed and stream ids consume bit-identical Wiener increments
regardless of backend, thread count, or call order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ._backend import get_kernels
from .spaces import (
    STREAM_W1,
    STREAM_W2,
    GalerkinSpace,
    InvalidArgument,
    NoiseSource,
    State,
    TimeGrid,
    _coeffs_of,
)

DIVERGENCE_THRESHOLD = 1e12
DEFAULT_H_FAST_FACTOR = 0.1

_OK = 0
_DIVERGED = 1
_BREAKDOWN = 2
_STATUS_TEXT = {
    _DIVERGED: "divergence detected (state non-finite or above threshold)",
    _BREAKDOWN: "implicit solve breakdown (non-positive denominator)",
}


class Scheme(Enum):
    """Time-stepping scheme selector."""

    SEMI_IMPLICIT_EULER = "semi_implicit_euler"
    TAMED_EULER = "tamed_euler"


class StepFailure(RuntimeError):
    """A path aborted; carries the failing time and a status label."""

    def __init__(self, message: str, t_fail: float, status: str):
        super().__init__(message)
        self.t_fail = t_fail
        self.status = status


@dataclass(frozen=True)
class IntegratorConfig:
    """Scheme selection and solver tolerances.

    Parameters
    ----------
    scheme : Scheme or str
        semi_implicit_euler (default) or tamed_euler.
    step : float
        Nominal slow step h; also the largest h accepted by step_coupled.
    newton_tol : float
        Relative residual tolerance of the per-mode implicit solves.
    newton_max_iter : int
        Newton iterations before the bisection fallback engages.
    taming_power : float
        Exponent of the drift-norm taming denominator (tamed_euler only).
    h_fast_factor : float
        Fast sub-step target as a fraction of eps.
    divergence_threshold : float
        Any coefficient magnitude beyond this aborts the path.
    """

    scheme: Scheme = Scheme.SEMI_IMPLICIT_EULER
    step: float = 2e-4
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    taming_power: float = 1.0
    h_fast_factor: float = DEFAULT_H_FAST_FACTOR
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.step <= 0.0:
            raise InvalidArgument("step must be positive")
        if self.newton_tol <= 0.0:
            raise InvalidArgument("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise InvalidArgument("newton_max_iter must be >= 1")
        if self.taming_power <= 0.0:
            raise InvalidArgument("taming_power must be positive")
        if self.h_fast_factor <= 0.0:
            raise InvalidArgument("h_fast_factor must be positive")

    @property
    def scheme_code(self) -> int:
        return 0 if self.scheme is Scheme.SEMI_IMPLICIT_EULER else 1


@dataclass(frozen=True)
class SeedRecord:
    """Seed and stream ids that fully determine a path's noise."""

    seed: int
    streams: Tuple[Tuple[str, int], ...]

    def stream_id(self, name: str) -> int:
        for key, val in self.streams:
            if key == name:
                return val
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"seed": self.seed, "streams": dict(self.streams)}

    @classmethod
    def from_dict(cls, data: dict) -> "SeedRecord":
        streams = tuple(sorted((str(k), int(v))
                               for k, v in data["streams"].items()))
        return cls(seed=int(data["seed"]), streams=streams)


@dataclass(frozen=True)
class PathSample:
    """A simulated trajectory on a time grid.

    slow and fast are (grid.points, dim) arrays of spectral coefficients,
    either of which may be absent. The seed record pins the exact noise
    realization, so a sample can be reproduced or re-coupled later.
    """

    grid: TimeGrid
    slow: Optional[np.ndarray]
    fast: Optional[np.ndarray]
    seed_record: SeedRecord
    newton_failures: int = 0

    def __post_init__(self):
        if self.slow is None and self.fast is None:
            raise InvalidArgument("at least one of slow/fast must be present")
        for name, arr in (("slow", self.slow), ("fast", self.fast)):
            if arr is None:
                continue
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != self.grid.points:
                raise InvalidArgument(
                    f"{name} must have grid.points = {self.grid.points} rows")
            object.__setattr__(self, name, arr)

    def slow_state(self, i: int) -> State:
        return State(self.slow[i])

    def fast_state(self, i: int) -> State:
        return State(self.fast[i])


@dataclass(frozen=True)
class LimitCoefficients:
    """Autonomous limit coefficients in spectral-diagonal form.

    ell1_bar scales the slow operator shape, drift_multipliers holds the
    per-mode linear factor of the averaged coupling drift, ell2_bar the
    constant noise factor, and nu the cubic coefficient carried over from
    the slow drift.
    """

    ell1_bar: float
    drift_multipliers: np.ndarray
    ell2_bar: float
    nu: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "drift_multipliers",
            np.ascontiguousarray(self.drift_multipliers, dtype=np.float64))
        if self.ell1_bar <= 0.0:
            raise InvalidArgument("ell1_bar must be positive")


# ---------------------------------------------------------------------------
# bundle / config unpacking shared by every simulation entry point
# ---------------------------------------------------------------------------


def _check_spaces(bundle, spaces):
    slow_space, fast_space = spaces
    if slow_space.dim != bundle.slow_space.dim \
            or fast_space.dim != bundle.fast_space.dim:
        raise InvalidArgument("spaces do not match the coefficient bundle")
    return slow_space, fast_space


def _slow_args(bundle, slow_space):
    p = bundle.system.params
    lam1pow = np.ascontiguousarray(
        slow_space.eigenvalues ** bundle.system.slow_power, dtype=np.float64)
    return (lam1pow, float(p.nu),
            p.ell1.kinds, p.ell1.pars, p.ell2.kinds, p.ell2.pars,
            float(p.f_x), float(p.f_y))


def _fast_args(bundle, fast_space):
    p = bundle.system.params
    lam2 = np.ascontiguousarray(fast_space.eigenvalues, dtype=np.float64)
    return (lam2, p.phi.kinds, p.phi.pars, float(p.c),
            float(p.a_coupling), float(p.b_nl), float(p.fast_kappa))


def _cfg_args(config):
    return (config.scheme_code, config.newton_tol, config.newton_max_iter,
            config.taming_power, config.divergence_threshold)


def _substep_counts(grid: TimeGrid, eps: float, factor: float) -> np.ndarray:
    target = eps * factor
    widths = grid.step_widths
    nsub = np.ceil(widths / target - 1e-12).astype(np.int64)
    return np.maximum(nsub, 1)


def _empty_tab():
    return 0.0, 1.0, np.zeros((1, 1), np.float64)


def _nan_rows(points: int, dim: int) -> np.ndarray:
    return np.full((points, dim), np.nan, np.float64)


def _raise_failure(status: int, out: np.ndarray, grid: TimeGrid):
    bad = np.nonzero(~np.isfinite(out).all(axis=1))[0]
    idx = int(bad[0]) if bad.size else grid.points - 1
    t_fail = float(grid.times[idx])
    label = _STATUS_TEXT.get(status, f"status {status}")
    raise StepFailure(f"step failed at t = {t_fail:g}: {label}", t_fail, label)


def _seed_u64(seed: int) -> np.uint64:
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def _stream_pair(seed: int, stream_id: int, modes: int, cell_exponent: int):
    src = NoiseSource(seed=seed, modes=modes, stream_id=stream_id,
                      cell_exponent=cell_exponent)
    s, spos, sneg = src._key()
    return src, s, spos, sneg


def default_seed_record(seed: int) -> SeedRecord:
    """Stream layout used by the coupled and averaged simulators."""
    w1 = NoiseSource(seed=seed, modes=1, stream_id=STREAM_W1)
    w2 = NoiseSource(seed=seed, modes=1, stream_id=STREAM_W2)
    return SeedRecord(seed=int(seed), streams=(
        ("w1", w1.stream_id), ("w1_neg", w1.negative_stream_id),
        ("w2", w2.stream_id), ("w2_neg", w2.negative_stream_id)))


def w1_increments(sample: PathSample, modes: int) -> np.ndarray:
    """Reconstruct the exact slow-noise increments a sample consumed.

    Streams are stateless, so the log is recomputable from the seed
    record alone; equality of two logs certifies noise coupling.
    """
    rec = sample.seed_record
    src = NoiseSource(seed=rec.seed, modes=modes,
                      stream_id=rec.stream_id("w1"),
                      cell_exponent=sample.grid.cell_exponent,
                      negative_stream_id=rec.stream_id("w1_neg"))
    return src.increments(sample.grid)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def step_coupled(bundle, spaces, eps: float, x, y, t: float, h: float,
                 noise: Tuple[NoiseSource, NoiseSource],
                 config: Optional[IntegratorConfig] = None):
    """Advance the coupled pair (x, y) one slow step from time t.

    The slow update uses the fast state at the step start; the fast
    equation then sub-cycles across the same window with the slow state
    frozen at the step start. Returns (State, State).
    """
    config = config or IntegratorConfig(step=h)
    if not 0.0 < eps <= 1.0:
        raise InvalidArgument("eps must lie in (0, 1]")
    if h <= 0.0 or h > config.step * (1.0 + 1e-12):
        raise InvalidArgument("h must lie in (0, config.step]")
    slow_space, fast_space = _check_spaces(bundle, spaces)
    w1, w2 = noise
    if w1.cell_exponent != w2.cell_exponent:
        raise InvalidArgument("noise sources must share one lattice")
    grid = TimeGrid(t, t + h, h, cell_exponent=w1.cell_exponent)
    kr = get_kernels()
    xv = _coeffs_of(x)
    yv = _coeffs_of(y)
    slow_out = _nan_rows(2, slow_space.dim)
    fast_out = _nan_rows(2, fast_space.dim)
    nsub = _substep_counts(grid, eps, config.h_fast_factor)
    s1, w1pos, w1neg = w1._key()
    s2, w2pos, w2neg = w2._key()
    if int(s1) != int(s2):
        raise InvalidArgument("noise sources must share one seed")
    status, _nf = kr.simulate_coupled_kernel(
        slow_out, fast_out, grid.cells, nsub, grid.cell_scale, eps,
        s1, w1pos, w1neg, w2pos, w2neg,
        *_slow_args(bundle, slow_space), *_fast_args(bundle, fast_space),
        xv, yv, *_cfg_args(config), w1.modes, w2.modes)
    if status != _OK:
        _raise_failure(status, slow_out, grid)
    return State(slow_out[1]), State(fast_out[1])


def simulate_coupled(bundle, spaces, eps: float, x0, y0, grid: TimeGrid,
                     seeds: int,
                     config: Optional[IntegratorConfig] = None) -> PathSample:
    """Simulate the coupled slow-fast pair over a grid starting at 0.

    The slow noise stream id is recorded so an averaged run can be
    driven by the identical realization.
    """
    config = config or IntegratorConfig(step=grid.step)
    if not 0.0 < eps <= 1.0:
        raise InvalidArgument("eps must lie in (0, 1]")
    if abs(grid.t0) > 0.0:
        raise InvalidArgument("coupled runs start at t0 = 0")
    slow_space, fast_space = _check_spaces(bundle, spaces)
    kr = get_kernels()
    _w1, s, w1pos, w1neg = _stream_pair(seeds, STREAM_W1, slow_space.dim,
                                        grid.cell_exponent)
    _w2, _s, w2pos, w2neg = _stream_pair(seeds, STREAM_W2, fast_space.dim,
                                         grid.cell_exponent)
    slow_out = _nan_rows(grid.points, slow_space.dim)
    fast_out = _nan_rows(grid.points, fast_space.dim)
    nsub = _substep_counts(grid, eps, config.h_fast_factor)
    status, nfail = kr.simulate_coupled_kernel(
        slow_out, fast_out, grid.cells, nsub, grid.cell_scale, eps,
        s, w1pos, w1neg, w2pos, w2neg,
        *_slow_args(bundle, slow_space), *_fast_args(bundle, fast_space),
        _coeffs_of(x0), _coeffs_of(y0), *_cfg_args(config),
        slow_space.dim, fast_space.dim)
    if status != _OK:
        _raise_failure(status, slow_out, grid)
    return PathSample(grid=grid, slow=slow_out, fast=fast_out,
                      seed_record=default_seed_record(seeds),
                      newton_failures=int(nfail))


def simulate_frozen(bundle, spaces, x, s: float, t_end: float, y,
                    grid_step: float, noise: NoiseSource,
                    config: Optional[IntegratorConfig] = None) -> PathSample:
    """Simulate the fast equation with the slow input frozen at x.

    Runs in real (unrescaled) time from s to t_end; both endpoints may
    be negative, in which case the two-sided stream extension supplies
    the noise. Returns a fast-only sample.
    """
    if not s < t_end:
        raise InvalidArgument("need s < t_end")
    if grid_step <= 0.0:
        raise InvalidArgument("grid_step must be positive")
    config = config or IntegratorConfig(step=grid_step)
    slow_space, fast_space = _check_spaces(bundle, spaces)
    n = max(1, int(math.ceil((t_end - s) / grid_step - 1e-12)))
    grid = TimeGrid(s, t_end, (t_end - s) / n,
                    cell_exponent=noise.cell_exponent)
    kr = get_kernels()
    sd, spos, sneg = noise._key()
    fast_out = _nan_rows(grid.points, fast_space.dim)
    nsub = _substep_counts(grid, 1.0, config.h_fast_factor)
    xref_rows = np.ascontiguousarray(_coeffs_of(x)[None, :])
    row_of_step = np.zeros(grid.n_steps, np.int64)
    status, nfail = kr.simulate_fast_kernel(
        fast_out, grid.cells, nsub, grid.cell_scale, 1.0, sd, spos, sneg,
        *_fast_args(bundle, fast_space), xref_rows, row_of_step,
        _coeffs_of(y), *_cfg_args(config), noise.modes)
    if status != _OK:
        _raise_failure(status, fast_out, grid)
    rec = SeedRecord(seed=int(noise.seed), streams=(
        ("w2", noise.stream_id), ("w2_neg", noise.negative_stream_id)))
    return PathSample(grid=grid, slow=None, fast=fast_out, seed_record=rec,
                      newton_failures=int(nfail))


def simulate_averaged_eps(bundle, spaces, eps: float, x0, grid: TimeGrid,
                          avg_drift, seeds: int,
                          config: Optional[IntegratorConfig] = None
                          ) -> PathSample:
    """Simulate the averaged slow equation that keeps the 1/eps clock.

    avg_drift supplies the averaged coupling drift: either an object
    with multiplier_table(grid, eps) / drift_fn(te, x) (the provider
    types), or a bare callable (te, x) -> vector. The slow noise stream
    matches simulate_coupled exactly, realizing the pathwise coupling.
    """
    config = config or IntegratorConfig(step=grid.step)
    if not 0.0 < eps <= 1.0:
        raise InvalidArgument("eps must lie in (0, 1]")
    slow_space, _fast_space = _check_spaces(bundle, spaces)
    kr = get_kernels()
    _w1, s, w1pos, w1neg = _stream_pair(seeds, STREAM_W1, slow_space.dim,
                                        grid.cell_exponent)
    slow_out = _nan_rows(grid.points, slow_space.dim)
    table = None
    if hasattr(avg_drift, "multiplier_table"):
        table = avg_drift.multiplier_table(grid, eps)
    if table is not None:
        tf0, dtf, tab = table
        status, nfail = kr.simulate_averaged_kernel(
            slow_out, grid.cells, grid.cell_scale, eps, s, w1pos, w1neg,
            *_slow_args(bundle, slow_space)[:6],
            float(tf0), float(dtf), np.ascontiguousarray(tab, np.float64),
            0, 0.0, 0.0, _coeffs_of(x0), *_cfg_args(config), slow_space.dim)
        if status != _OK:
            _raise_failure(status, slow_out, grid)
        return PathSample(grid=grid, slow=slow_out, fast=None,
                          seed_record=default_seed_record(seeds),
                          newton_failures=int(nfail))
    drift_fn = avg_drift.drift_fn if hasattr(avg_drift, "drift_fn") \
        else avg_drift
    return _simulate_averaged_python(bundle, slow_space, eps, x0, grid,
                                     drift_fn, seeds, s, w1pos, w1neg, config)


def _simulate_averaged_python(bundle, slow_space, eps, x0, grid, drift_fn,
                              seeds, s, w1pos, w1neg, config):
    """Slow-equation stepping with a per-step Python drift callback.

    Uses the portable step primitive directly so the numerics match the
    compiled table path for identical drift values.
    """
    from . import _kernels_numpy as knp

    lam1pow, nu, e1k, e1p, e2k, e2p, _fx, _fy = _slow_args(bundle, slow_space)
    tf0, dtf, tab = _empty_tab()
    cells = grid.cells
    cell_w = grid.cell_scale ** 2
    x = _coeffs_of(x0).copy()
    slow_out = _nan_rows(grid.points, slow_space.dim)
    slow_out[0] = x
    nfail_total = 0
    for i in range(grid.n_steps):
        te = float(cells[i]) * cell_w / eps
        fbar = np.asarray(drift_fn(te, x), dtype=np.float64)
        x, status, nf = knp._slow_step(
            x, fbar, int(cells[i]), int(cells[i + 1]), cell_w,
            grid.cell_scale, eps, s, w1pos, w1neg,
            lam1pow, nu, e1k, e1p, e2k, e2p, 0.0, 1.0,
            0, tf0, dtf, tab, 0, 0.0, 0.0, *_cfg_args(config),
            slow_space.dim)
        nfail_total += nf
        if status != _OK:
            t_fail = float(grid.times[i + 1])
            label = _STATUS_TEXT.get(status, f"status {status}")
            raise StepFailure(f"step failed at t = {t_fail:g}: {label}",
                              t_fail, label)
        slow_out[i + 1] = x
    return PathSample(grid=grid, slow=slow_out, fast=None,
                      seed_record=default_seed_record(seeds),
                      newton_failures=int(nfail_total))


def simulate_averaged_limit(bundle_limits, spaces, x0, grid: TimeGrid,
                            seeds: int,
                            config: Optional[IntegratorConfig] = None
                            ) -> PathSample:
    """Simulate the autonomous limit equation with constant coefficients.

    bundle_limits is a LimitCoefficients instance or an
    (ell1_bar, drift_multipliers, ell2_bar) triple.
    """
    config = config or IntegratorConfig(step=grid.step)
    if not isinstance(bundle_limits, LimitCoefficients):
        ell1_bar, mult, ell2_bar = bundle_limits
        bundle_limits = LimitCoefficients(float(ell1_bar), mult,
                                          float(ell2_bar))
    slow_space = spaces[0]
    if bundle_limits.drift_multipliers.shape[0] != slow_space.dim:
        raise InvalidArgument("drift_multipliers must match the slow dim")
    kr = get_kernels()
    _w1, s, w1pos, w1neg = _stream_pair(seeds, STREAM_W1, slow_space.dim,
                                        grid.cell_exponent)
    lam1pow = np.ascontiguousarray(
        slow_space.eigenvalues ** slow_space.v_exponent, dtype=np.float64)
    zero_k = np.zeros(1, np.int64)
    zero_p = np.zeros((1, 3), np.float64)
    tab = np.ascontiguousarray(
        bundle_limits.drift_multipliers[None, :], np.float64)
    slow_out = _nan_rows(grid.points, slow_space.dim)
    status, nfail = kr.simulate_averaged_kernel(
        slow_out, grid.cells, grid.cell_scale, 1.0, s, w1pos, w1neg,
        lam1pow, float(bundle_limits.nu), zero_k, zero_p, zero_k, zero_p,
        0.0, 1.0, tab, 1, float(bundle_limits.ell1_bar),
        float(bundle_limits.ell2_bar), _coeffs_of(x0), *_cfg_args(config),
        slow_space.dim)
    if status != _OK:
        _raise_failure(status, slow_out, grid)
    return PathSample(grid=grid, slow=slow_out, fast=None,
                      seed_record=default_seed_record(seeds),
                      newton_failures=int(nfail))
