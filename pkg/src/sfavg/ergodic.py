"""Frozen-equation ergodics: pullback measures, mixing rates, semigroups.

The evolution family of measures of the fast equation with frozen slow
input is approximated by pullback: start M particles at time t - S and
run them to t under independent noise realizations. The contraction of
the fast drift bounds the initialization bias by exp(-gamma S / 2)
times the initial displacement scale, so S can be chosen from a bias
tolerance. Distances between particle ensembles use a seeded dictionary
of bounded-Lipschitz test functions, giving a deterministic lower bound
of the bounded-Lipschitz metric.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ._backend import get_kernels
from .spaces import (
    STREAM_W2,
    ConfigurationRejected,
    GalerkinSpace,
    InvalidArgument,
    NoiseSource,
    State,
    TimeGrid,
    _coeffs_of,
)
from .integrate import (
    IntegratorConfig,
    StepFailure,
    _cfg_args,
    _fast_args,
    _substep_counts,
)

DEFAULT_DICTIONARY_SIZE = 256
DEFAULT_MEASURE_STEP = 1e-3
DEFAULT_BIAS_TOL = 1e-3
SEED_STRIDE = 0x9E3779B97F4A7C15
_ENSEMBLE_MAGIC = b"SFAVGENS"
_ENSEMBLE_VERSION = 1
_DISTANCE_FLOOR = 1e-24


@dataclass(frozen=True)
class MeasureEnsemble:
    """Uniformly weighted particle approximation of one measure mu_t^x.

    moment_ratio records the empirical second moment divided by
    (1 + |x|^2), witnessing the affine moment bound of the family.
    """

    particles: np.ndarray
    t_anchor: float
    x_anchor: np.ndarray
    pullback_horizon: float
    seed_base: int
    seed_stride: int = SEED_STRIDE
    moment_ratio: float = field(init=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(self.particles, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidArgument("particles must be a (M, dim) array, M >= 1")
        if not np.isfinite(pts).all():
            raise InvalidArgument("particles must be finite")
        xa = np.ascontiguousarray(self.x_anchor, dtype=np.float64)
        object.__setattr__(self, "particles", pts)
        object.__setattr__(self, "x_anchor", xa)
        second = float(np.mean(np.sum(pts * pts, axis=1)))
        ratio = second / (1.0 + float(np.sum(xa * xa)))
        object.__setattr__(self, "moment_ratio", ratio)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)


@dataclass(frozen=True)
class MixingReport:
    """Least-squares fit of log E|dY|^2 against elapsed time.

    fitted_rate is the signed exponent (negative for contraction).
    degenerate marks an identically-zero distance (y1 = y2); truncated
    marks a fit window cut short because the distance hit the numerical
    floor before the horizon.
    """

    fitted_rate: float
    theoretical_gamma: Optional[float]
    pairs_used: int
    fit_r2: float
    degenerate: bool = False
    truncated: bool = False
    window_used: float = 0.0

    def __post_init__(self):
        if not (math.isnan(self.fit_r2) or 0.0 <= self.fit_r2 <= 1.0):
            raise InvalidArgument("fit_r2 must lie in [0, 1]")


@dataclass(frozen=True)
class EvolutionReport:
    """Two-sided consistency check of the evolution-measure property."""

    discrepancies: np.ndarray
    stderrs: np.ndarray
    z_scores: np.ndarray
    max_abs_z: float
    passed: bool


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _fast_noise_ids(cell_exponent: int) -> Tuple[int, int]:
    src = NoiseSource(seed=0, modes=1, stream_id=STREAM_W2,
                      cell_exponent=cell_exponent)
    return src.stream_id, src.negative_stream_id


def _frozen_grid(t0: float, t1: float, step: float,
                 cell_exponent: int) -> TimeGrid:
    if step <= 0.0:
        raise InvalidArgument("step must be positive")
    n = max(1, int(math.ceil((t1 - t0) / step - 1e-12)))
    return TimeGrid(t0, t1, (t1 - t0) / n, cell_exponent=cell_exponent)


def _run_ensemble(bundle, fast_space, x, grid, y_init, seed_base, config):
    """Propagate an (M, dim) block of particles along one frozen grid."""
    kr = get_kernels()
    sw2, sw2n = _fast_noise_ids(grid.cell_exponent)
    nsub = _substep_counts(grid, 1.0, config.h_fast_factor)
    out = np.empty_like(y_init)
    status = np.zeros(y_init.shape[0], np.int64)
    kr.ensemble_final_kernel(
        out, status, np.uint64(int(seed_base) & 0xFFFFFFFFFFFFFFFF),
        np.uint64(SEED_STRIDE), y_init, grid.cells, nsub, grid.cell_scale,
        1.0, np.uint64(sw2), np.uint64(sw2n),
        *_fast_args(bundle, fast_space), _coeffs_of(x),
        *_cfg_args(config), fast_space.dim)
    bad = int(np.count_nonzero(status))
    if bad:
        raise StepFailure(
            f"{bad} of {y_init.shape[0]} particles failed during the "
            f"frozen-equation run ending at t = {grid.t_end:g}",
            float(grid.t_end), "particle failures")
    return out


def required_pullback(bundle, x, y_start, bias_tol: float) -> float:
    """Pullback horizon whose bias envelope sits at half of bias_tol."""
    gamma = bundle.profile.gamma
    scale = _bias_scale(x, y_start)
    return max(2.0 * math.log(2.0 * scale / bias_tol) / gamma, 1.0 / gamma)


def _bias_scale(x, y_start) -> float:
    xv = _coeffs_of(x)
    yv = _coeffs_of(y_start) if y_start is not None else np.zeros(1)
    return 1.0 + float(np.linalg.norm(xv)) + float(np.linalg.norm(yv))


def default_test_functions(space: GalerkinSpace, count: int = 5,
                           seed: int = 2024) -> List[Callable]:
    """Seeded bounded-Lipschitz dictionary functions on the fast space.

    Each function y -> tanh(<a, y> + b) / (|a| + 1) has sup-norm and
    Lipschitz constant at most 1.
    """
    rng = np.random.default_rng(seed)
    fns = []
    for _ in range(count):
        a = rng.standard_normal(space.dim)
        b = float(rng.standard_normal())
        nrm = float(np.linalg.norm(a)) + 1.0

        def fn(y, a=a, b=b, nrm=nrm):
            return float(np.tanh(float(np.dot(a, _coeffs_of(y))) + b) / nrm)

        fns.append(fn)
    return fns


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def estimate_evolution_measure(bundle, spaces, x, t: float, M: int, S: float,
                               y_start=None, step: float = DEFAULT_MEASURE_STEP,
                               seeds: int = 0,
                               bias_tol: float = DEFAULT_BIAS_TOL,
                               config: Optional[IntegratorConfig] = None
                               ) -> MeasureEnsemble:
    """Pullback approximation of mu_t^x with M independent particles.

    Particles start at y_start (default 0) at time t - S and evolve to t
    under the frozen equation, each with its own noise realization. The
    initialization bias is bounded by exp(-gamma S / 2) times the
    initial displacement scale; an S below the tolerance is rejected
    with the required horizon in the message.
    """
    if S <= 0.0:
        raise InvalidArgument("S must be positive")
    if M < 1:
        raise InvalidArgument("M must be >= 1")
    _slow_space, fast_space = spaces
    gamma = bundle.profile.gamma
    scale = _bias_scale(x, y_start)
    bias = math.exp(-0.5 * gamma * S) * scale
    if bias > bias_tol:
        need = required_pullback(bundle, x, y_start, bias_tol)
        raise ConfigurationRejected(
            f"pullback horizon S = {S:g} leaves an initialization bias "
            f"envelope {bias:.3g} above the tolerance {bias_tol:g}; "
            f"use S >= {need:.3g}")
    config = config or IntegratorConfig(step=step)
    grid = _frozen_grid(t - S, t, step, _lattice_exponent(config))
    y0 = np.zeros(fast_space.dim) if y_start is None else _coeffs_of(y_start)
    y_init = np.ascontiguousarray(
        np.broadcast_to(y0, (M, fast_space.dim)), dtype=np.float64)
    out = _run_ensemble(bundle, fast_space, x, grid, y_init, seeds, config)
    return MeasureEnsemble(particles=out, t_anchor=float(grid.t_end),
                           x_anchor=_coeffs_of(x), pullback_horizon=float(S),
                           seed_base=int(seeds))


def _lattice_exponent(config: IntegratorConfig) -> int:
    """Lattice exponent used by the ergodic drivers.

    One Gaussian is drawn per lattice cell, so the exponent tracks the
    substep width: about eight cells per substep keeps increments exact
    while the per-step noise cost stays constant.
    """
    sub = min(config.step, config.h_fast_factor)
    L = int(math.ceil(math.log2(8.0 / sub)))
    return max(8, min(L, 40))


def estimate_mixing_rate(bundle, spaces, x, y1, y2, horizon: float,
                         step: float = DEFAULT_MEASURE_STEP,
                         replicas: int = 1000, seeds: int = 0,
                         synchronous: bool = True,
                         config: Optional[IntegratorConfig] = None
                         ) -> MixingReport:
    """Fit the decay exponent of E|Y(y1) - Y(y2)|^2 under one noise.

    Both solutions of the frozen equation share the Wiener increments
    per replica (synchronous coupling); the fitted slope of the log mean
    squared distance is the signed mixing exponent. A constant-scalar
    drift modulation admits a closed-form exponent which is attached as
    theoretical_gamma.
    """
    if horizon <= 0.0:
        raise InvalidArgument("horizon must be positive")
    if replicas < 1:
        raise InvalidArgument("replicas must be >= 1")
    _slow_space, fast_space = spaces
    config = config or IntegratorConfig(step=step)
    y1v = _coeffs_of(y1)
    y2v = _coeffs_of(y2)
    theo = _linear_theory_rate(bundle, fast_space, y1v - y2v)
    if float(np.max(np.abs(y1v - y2v))) == 0.0:
        return MixingReport(fitted_rate=0.0, theoretical_gamma=theo,
                            pairs_used=0, fit_r2=0.0, degenerate=True,
                            truncated=True, window_used=0.0)
    grid = _frozen_grid(0.0, horizon, step, _lattice_exponent(config))
    kr = get_kernels()
    sw2, sw2n = _fast_noise_ids(grid.cell_exponent)
    nsub = _substep_counts(grid, 1.0, config.h_fast_factor)
    d2 = np.empty((replicas, grid.points), np.float64)
    kr.mixing_pairs_kernel(
        d2, np.uint64(int(seeds) & 0xFFFFFFFFFFFFFFFF),
        np.uint64(SEED_STRIDE), y1v, y2v, grid.cells, nsub,
        grid.cell_scale, 1.0, np.uint64(sw2), np.uint64(sw2n),
        *_fast_args(bundle, fast_space), _coeffs_of(x),
        *_cfg_args(config), fast_space.dim, 1 if synchronous else 0)
    ok_rows = np.isfinite(d2).all(axis=1)
    pairs = int(np.count_nonzero(ok_rows))
    if pairs == 0:
        raise StepFailure("all mixing replicas failed", horizon,
                          "particle failures")
    mean_d2 = d2[ok_rows].mean(axis=0)
    times = grid.times - grid.times[0]
    valid = mean_d2 > _DISTANCE_FLOOR
    cut = int(np.argmin(valid)) if not valid.all() else grid.points
    cut = max(cut, 2)
    slope, intercept, r2 = _loglin_fit(times[:cut], mean_d2[:cut])
    return MixingReport(fitted_rate=slope, theoretical_gamma=theo,
                        pairs_used=pairs, fit_r2=r2,
                        truncated=cut < grid.points,
                        window_used=float(times[cut - 1]))


def _linear_theory_rate(bundle, fast_space, dy) -> Optional[float]:
    p = bundle.system.params
    if p.b_nl != 0.0 or not p.phi.is_constant():
        return None
    phi0 = float(p.phi(0.0))
    nz = np.nonzero(np.abs(dy) > 0.0)[0]
    lam = fast_space.eigenvalues[nz[0]] if nz.size else \
        fast_space.first_eigenvalue()
    return 2.0 * (phi0 - float(lam)) + p.c ** 2


def _loglin_fit(times, values):
    logs = np.log(values)
    A = np.vstack([times, np.ones_like(times)]).T
    coef, _res, _rank, _sv = np.linalg.lstsq(A, logs, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fit = A @ coef
    ss_res = float(np.sum((logs - fit) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
    return slope, intercept, min(max(r2, 0.0), 1.0)


def semigroup_expectation(bundle, spaces, x, s: float, t: float, y,
                          test_fn: Callable, M: int,
                          step: float = DEFAULT_MEASURE_STEP,
                          seeds: int = 0,
                          config: Optional[IntegratorConfig] = None
                          ) -> Tuple[float, float]:
    """Monte Carlo transition expectation E[phi(Y_t)] from state y at s."""
    if t < s:
        raise InvalidArgument("need t >= s")
    if M < 2:
        raise InvalidArgument("M must be >= 2")
    _slow_space, fast_space = spaces
    config = config or IntegratorConfig(step=step)
    yv = _coeffs_of(y)
    if t == s or (t - s) < 2.0 ** (-_lattice_exponent(config)):
        return float(test_fn(yv)), 0.0
    grid = _frozen_grid(s, t, step, _lattice_exponent(config))
    y_init = np.ascontiguousarray(
        np.broadcast_to(yv, (M, fast_space.dim)), dtype=np.float64)
    out = _run_ensemble(bundle, fast_space, x, grid, y_init, seeds, config)
    vals = np.array([float(test_fn(out[m])) for m in range(M)])
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(M))
    return est, se


def check_evolution_property(bundle, spaces, x, s: float, t: float,
                             test_fns: Sequence[Callable], M: int,
                             seeds: int = 0, S: Optional[float] = None,
                             step: float = DEFAULT_MEASURE_STEP,
                             x_target=None,
                             config: Optional[IntegratorConfig] = None
                             ) -> EvolutionReport:
    """Test whether propagating mu_s^x to time t reproduces mu_t^x.

    Draws an ensemble at s, pushes every particle to t with fresh noise,
    and compares dictionary means against an ensemble anchored at t.
    Passing x_target anchors the t-side ensemble at a different slow
    state, which a sound construction must detect as a mismatch.
    """
    if t < s:
        raise InvalidArgument("need t >= s")
    config = config or IntegratorConfig(step=step)
    x_rhs_anchor = x if x_target is None else x_target
    if S is None:
        S = max(required_pullback(bundle, x, None, DEFAULT_BIAS_TOL),
                required_pullback(bundle, x_rhs_anchor, None,
                                  DEFAULT_BIAS_TOL))
    _slow_space, fast_space = spaces
    ens_s = estimate_evolution_measure(bundle, spaces, x, s, M, S,
                                       step=step, seeds=seeds, config=config)
    if t > s:
        grid = _frozen_grid(s, t, step, _lattice_exponent(config))
        pushed = _run_ensemble(bundle, fast_space, x, grid, ens_s.particles,
                               int(seeds) + 0x5B0C, config)
    else:
        pushed = ens_s.particles
    ens_t = estimate_evolution_measure(bundle, spaces, x_rhs_anchor, t, M, S,
                                       step=step, seeds=int(seeds) + 0xA71E,
                                       config=config)
    disc = np.empty(len(test_fns))
    ses = np.empty(len(test_fns))
    zs = np.empty(len(test_fns))
    for j, fn in enumerate(test_fns):
        lhs = np.array([float(fn(pushed[m])) for m in range(pushed.shape[0])])
        rhs = np.array([float(fn(ens_t.particles[m]))
                        for m in range(ens_t.size)])
        d = float(lhs.mean() - rhs.mean())
        se = math.sqrt(lhs.var(ddof=1) / lhs.size
                       + rhs.var(ddof=1) / rhs.size)
        disc[j] = d
        ses[j] = se
        zs[j] = d / se if se > 0.0 else (0.0 if d == 0.0 else math.inf)
    max_z = float(np.max(np.abs(zs))) if len(test_fns) else 0.0
    return EvolutionReport(discrepancies=disc, stderrs=ses, z_scores=zs,
                           max_abs_z=max_z, passed=bool(max_z < 4.0))


def dbl_distance(e1: MeasureEnsemble, e2: MeasureEnsemble,
                 dictionary_size: int = DEFAULT_DICTIONARY_SIZE,
                 seed: int = 0, return_stderr: bool = False):
    """Dictionary lower bound of the bounded-Lipschitz distance.

    The dictionary draws directions a_j and offsets b_j from a seeded
    generator; each phi_j(y) = tanh(<a_j, y> + b_j) / (|a_j| + 1) has
    BL-norm at most 1, so the maximal mean discrepancy never exceeds
    the true distance. Symmetry and the triangle inequality hold
    exactly for fixed (dictionary_size, seed). With return_stderr the
    Monte Carlo standard error of the selected (argmax) statistic is
    attached.
    """
    if e1.dim != e2.dim:
        raise InvalidArgument("ensembles live on different fast spaces")
    if dictionary_size < 1:
        raise InvalidArgument("dictionary_size must be >= 1")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dictionary_size, e1.dim))
    b = rng.standard_normal(dictionary_size)
    nrm = np.linalg.norm(a, axis=1) + 1.0
    v1 = np.tanh(e1.particles @ a.T + b) / nrm
    v2 = np.tanh(e2.particles @ a.T + b) / nrm
    diff = v1.mean(axis=0) - v2.mean(axis=0)
    j = int(np.argmax(np.abs(diff)))
    dist = float(abs(diff[j]))
    if not return_stderr:
        return dist
    se = math.sqrt(v1[:, j].var(ddof=1) / e1.size
                   + v2[:, j].var(ddof=1) / e2.size)
    return dist, float(se)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_ensemble(path, ensemble: MeasureEnsemble) -> None:
    """Write an ensemble as a JSON header plus raw particle block.

    Particles are stored little-endian float64 in row-major order, so
    the round-trip is bit-exact.
    """
    header = {
        "t_anchor": ensemble.t_anchor,
        "x_anchor": [float(v) for v in ensemble.x_anchor],
        "pullback_horizon": ensemble.pullback_horizon,
        "m": ensemble.size,
        "dim": ensemble.dim,
        "seed_base": ensemble.seed_base,
        "seed_stride": ensemble.seed_stride,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    body = np.ascontiguousarray(ensemble.particles, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_ENSEMBLE_MAGIC)
        fh.write(struct.pack("<II", _ENSEMBLE_VERSION, len(blob)))
        fh.write(blob)
        fh.write(body)


def load_ensemble(path) -> MeasureEnsemble:
    """Read an ensemble written by save_ensemble."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_ENSEMBLE_MAGIC))
        if magic != _ENSEMBLE_MAGIC:
            raise InvalidArgument(f"{path} is not an ensemble file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != _ENSEMBLE_VERSION:
            raise InvalidArgument(f"unsupported ensemble version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        body = fh.read(header["m"] * header["dim"] * 8)
    particles = np.frombuffer(body, dtype="<f8").reshape(
        header["m"], header["dim"]).astype(np.float64)
    return MeasureEnsemble(particles=particles,
                           t_anchor=header["t_anchor"],
                           x_anchor=np.asarray(header["x_anchor"]),
                           pullback_horizon=header["pullback_horizon"],
                           seed_base=header["seed_base"],
                           seed_stride=header["seed_stride"])
