"""Averaged-coefficient construction and almost-periodicity diagnostics.

The averaged coupling drift integrates F(t, x, y) over the evolution
measure mu_t^x of the frozen fast equation. Three evaluation modes are
provided: a closed-form oracle valid when the fast drift is linear and
F is affine in y (the measure's mean then solves a scalar ODE per
mode), a nested Monte Carlo estimator built on pullback ensembles, and
a tabulated mode replaying previously exported values. Bohr sliding
window means, translation-number scans, and asymptotic limits of
time-modulated coefficients supply the ingredients of the autonomous
limit equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._backend import get_kernels
from .spaces import (
    STREAM_W2,
    ConfigurationRejected,
    InvalidArgument,
    TimeGrid,
    _coeffs_of,
)
from .integrate import (
    IntegratorConfig,
    LimitCoefficients,
    PathSample,
    SeedRecord,
    _cfg_args,
    _fast_args,
    _raise_failure,
    _substep_counts,
    _stream_pair,
)
from . import ergodic

T_QUANTUM = 1e-3
X_QUANTUM = 1e-6
DEFAULT_TE_SPACING = 0.02
DEFAULT_QUAD_STEP = 1e-3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_MIX_GAMMA = 0x9E3779B97F4A7C15


class DriftMode(Enum):
    ORACLE_LINEAR = "oracle_linear"
    NESTED_MC = "nested_mc"
    TABULATED = "tabulated"


class DeltaRule(Enum):
    FIXED = "fixed"
    EPS_TWO_THIRDS = "eps_two_thirds"


class UnsupportedBundle(ValueError):
    """The bundle lacks the structure an operation requires."""


class EnsembleTooSmall(RuntimeError):
    """Retryable: the drift stderr exceeded the tolerance.

    required_M estimates the ensemble size that would meet it.
    """

    def __init__(self, message: str, required_M: int):
        super().__init__(message)
        self.required_M = required_M


def _mix(z: int) -> int:
    z = (z + _MIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass
class AveragedDriftProvider:
    """Averaged-drift evaluator with a quantized query cache.

    The provider binds to one coefficient bundle; queries are keyed on
    (t, x) quantized to T_QUANTUM and X_QUANTUM so repeated calls along
    a trajectory reuse ensembles. Cached values depend only on the seed
    and the key, so concurrent duplicate inserts are benign.
    """

    mode: DriftMode = DriftMode.ORACLE_LINEAR
    ensemble_M: int = 400
    pullback_S: Optional[float] = None
    stderr_tol: float = math.inf
    ensemble_step: float = 2e-3
    te_spacing: float = DEFAULT_TE_SPACING
    seed_base: int = 0
    cache: Dict = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0
    last_stderr: float = 0.0

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = DriftMode(self.mode)
        if self.mode is DriftMode.NESTED_MC and self.ensemble_M < 100:
            raise InvalidArgument("nested_mc requires ensemble_M >= 100")
        self._bundle = None
        self._spaces = None
        self._table = None

    # -- binding ------------------------------------------------------

    def bind(self, bundle, spaces) -> "AveragedDriftProvider":
        """Attach a bundle; validates mode-specific structure."""
        if self._bundle is bundle:
            return self
        p = bundle.system.params
        if self.mode is DriftMode.ORACLE_LINEAR:
            if p.b_nl != 0.0:
                raise UnsupportedBundle(
                    "oracle_linear needs a linear fast drift (b_nl = 0)")
        if self.pullback_S is None:
            self.pullback_S = 40.0 / bundle.profile.gamma
        self._bundle = bundle
        self._spaces = spaces
        return self

    def _require_bound(self):
        if self._bundle is None:
            raise InvalidArgument("provider is not bound to a bundle; "
                                  "call bind(bundle, spaces) first")

    # -- oracle machinery ----------------------------------------------

    def _ode_hint(self) -> float:
        lam_max = float(self._bundle.fast_space.eigenvalues.max())
        return min(self.te_spacing, 0.2 / lam_max)

    def _mean_at(self, te: float) -> np.ndarray:
        """Bounded solution of m' = (phi(te) - lam) m + 1 at one time."""
        kr = get_kernels()
        p = self._bundle.system.params
        lam2 = np.ascontiguousarray(self._bundle.fast_space.eigenvalues,
                                    dtype=np.float64)
        tab = kr.ode_mean_table(lam2, p.phi.kinds, p.phi.pars, float(te), 1,
                                1.0, float(self.pullback_S), self._ode_hint())
        return tab[0]

    def _oracle_value(self, te: float, xv: np.ndarray) -> np.ndarray:
        p = self._bundle.system.params
        n1 = self._bundle.slow_space.dim
        m_unit = self._mean_at(te)
        mult = _pad_vec(p.a_coupling * m_unit, n1)
        return p.f_x * xv + p.f_y * mult * xv

    def multiplier_table(self, grid: TimeGrid, eps: float):
        """Per-mode drift multiplier table over the grid's fast clock.

        Returns (te0, dte, table) for table-capable modes, None
        otherwise; rows are f_x + f_y * a * I_k(te_j) with I_k the
        bounded solution of the unit-forced mean equation.
        """
        self._require_bound()
        if self.mode is not DriftMode.ORACLE_LINEAR:
            return None
        p = self._bundle.system.params
        n1 = self._bundle.slow_space.dim
        te0 = float(grid.times[0]) / eps
        te1 = float(grid.times[-1]) / eps
        if p.f_y == 0.0 or p.a_coupling == 0.0:
            return te0, 1.0, np.full((1, n1), p.f_x, np.float64)
        if p.phi.is_constant():
            mult = _pad_vec(p.a_coupling * self._mean_at(0.0), n1)
            return te0, 1.0, (p.f_x + p.f_y * mult)[None, :]
        kr = get_kernels()
        nt = max(2, int(math.ceil((te1 - te0) / self.te_spacing)) + 1)
        dte = (te1 - te0) / (nt - 1)
        lam2 = np.ascontiguousarray(self._bundle.fast_space.eigenvalues,
                                    dtype=np.float64)
        means = kr.ode_mean_table(lam2, p.phi.kinds, p.phi.pars, te0, nt,
                                  dte, float(self.pullback_S),
                                  self._ode_hint())
        tab = np.empty((nt, n1), np.float64)
        for j in range(nt):
            tab[j] = p.f_x + p.f_y * _pad_vec(p.a_coupling * means[j], n1)
        return te0, dte, tab

    # -- nested MC ------------------------------------------------------

    def _query_key(self, te: float, xv: np.ndarray):
        tk = int(round(te / T_QUANTUM))
        xk = tuple(int(round(v / X_QUANTUM)) for v in xv)
        return tk, xk

    def _key_seed(self, key) -> int:
        tk, xk = key
        acc = _mix(self.seed_base & _MASK64)
        acc ^= _mix(tk & _MASK64)
        for v in xk:
            acc = _mix(acc ^ (v & _MASK64))
        return acc

    def _nested_value(self, te: float, xv: np.ndarray):
        key = self._query_key(te, xv)
        hit = self.cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit
        self.cache_misses += 1
        bundle, spaces = self._bundle, self._spaces
        ens = ergodic.estimate_evolution_measure(
            bundle, spaces, xv, te, self.ensemble_M, self.pullback_S,
            step=self.ensemble_step, seeds=self._key_seed(key),
            bias_tol=math.inf)
        vals = np.asarray(bundle.F(te, xv, ens.particles), dtype=np.float64)
        mean = vals.mean(axis=0)
        se = float(np.linalg.norm(vals.std(axis=0, ddof=1))
                   / math.sqrt(ens.size))
        self.cache[key] = (mean, se)
        return mean, se

    # -- public evaluation ---------------------------------------------

    def evaluate(self, te: float, x) -> Tuple[np.ndarray, float]:
        """Averaged drift vector and its standard error at (te, x)."""
        self._require_bound()
        xv = _coeffs_of(x)
        if self.mode is DriftMode.ORACLE_LINEAR:
            return self._oracle_value(te, xv), 0.0
        if self.mode is DriftMode.TABULATED:
            key = self._query_key(te, xv)
            if self._table is None or key not in self._table:
                raise InvalidArgument(
                    f"tabulated drift has no entry for quantized key {key}")
            return self._table[key]
        mean, se = self._nested_value(te, xv)
        if se > self.stderr_tol:
            need = int(math.ceil(self.ensemble_M * (se / self.stderr_tol) ** 2))
            raise EnsembleTooSmall(
                f"drift stderr {se:.3g} exceeds tolerance "
                f"{self.stderr_tol:g}; retry with ensemble_M >= {need}", need)
        return mean, se

    def drift_fn(self, te: float, x) -> np.ndarray:
        vec, se = self.evaluate(te, x)
        self.last_stderr = se
        return vec

    # -- tabulated import/export ----------------------------------------

    def export_table(self, path) -> int:
        """Write cached queries as a columnar text table; returns rows."""
        rows = 0
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t_key\tx_key\tdrift\tstderr\n")
            for (tk, xk), (vec, se) in sorted(self.cache.items()):
                xs = ";".join(str(v) for v in xk)
                vs = ";".join(repr(float(v)) for v in vec)
                fh.write(f"{tk}\t{xs}\t{vs}\t{repr(float(se))}\n")
                rows += 1
        return rows

    def load_table(self, path) -> int:
        """Load a table written by export_table; returns rows read."""
        table = {}
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("t_key"):
                raise InvalidArgument(f"{path} is not a drift table")
            for line in fh:
                tk_s, xk_s, vs_s, se_s = line.rstrip("\n").split("\t")
                key = (int(tk_s),
                       tuple(int(v) for v in xk_s.split(";")) if xk_s else ())
                vec = np.array([float(v) for v in vs_s.split(";")])
                table[key] = (vec, float(se_s))
        self._table = table
        return len(table)


def _pad_vec(vec: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, np.float64)
    m = min(n, vec.shape[0])
    out[:m] = vec[:m]
    return out


# ---------------------------------------------------------------------------
# reports and configs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BohrMeanReport:
    """Sliding-window time average probed at several anchors."""

    value: np.ndarray
    window_T: float
    tail_estimate: float
    anchors_probed: int

    def __post_init__(self):
        if self.window_T <= 0.0:
            raise InvalidArgument("window_T must be positive")
        if self.tail_estimate < 0.0:
            raise InvalidArgument("tail_estimate must be nonnegative")

    @property
    def scalar(self) -> float:
        return float(np.asarray(self.value).reshape(-1)[0])


@dataclass(frozen=True)
class KhasminskiiConfig:
    """Block length for the time-discretized auxiliary fast process."""

    delta: float = 0.01
    rule: DeltaRule = DeltaRule.FIXED

    def __post_init__(self):
        if isinstance(self.rule, str):
            object.__setattr__(self, "rule", DeltaRule(self.rule))
        if self.delta <= 0.0:
            raise InvalidArgument("delta must be positive")

    def resolved_delta(self, eps: float) -> float:
        """Block length for a given scale separation.

        The two-thirds rule normalizes to 12 significant decimal digits
        so decimal-specified scales yield decimal block lengths (the
        raw power picks up one-ulp float noise).
        """
        if self.rule is DeltaRule.EPS_TWO_THIRDS:
            return float(f"{eps ** (2.0 / 3.0):.12g}")
        return self.delta


@dataclass(frozen=True)
class ApDiagnosticReport:
    """Bounded-Lipschitz distances between time-shifted measures."""

    distances: Dict[Tuple[float, float], float]
    threshold: float
    mc_tol: float
    passed: bool

    def max_distance(self) -> float:
        return max(self.distances.values()) if self.distances else 0.0


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def averaged_drift(provider: AveragedDriftProvider, bundle, spaces,
                   t: float, x) -> np.ndarray:
    """Averaged coupling drift at frozen time t and slow state x."""
    provider.bind(bundle, spaces)
    return provider.drift_fn(t, x)


def _window_mean(f: Callable, t0: float, T: float, quad_step: float):
    """Trapezoidal window mean of f over [t0, t0 + T], chunked."""
    n = max(1, int(math.ceil(T / quad_step - 1e-12)))
    h = T / n
    total = None
    chunk = 262144
    for start in range(0, n + 1, chunk):
        stop = min(start + chunk, n + 1)
        ts = t0 + h * np.arange(start, stop, dtype=np.float64)
        vals = _eval_vec(f, ts)
        w = np.ones(stop - start)
        if start == 0:
            w[0] = 0.5
        if stop == n + 1:
            w[-1] = 0.5
        part = (vals * w[:, None]).sum(axis=0)
        total = part if total is None else total + part
    return total * h / T


def _eval_vec(f: Callable, ts: np.ndarray) -> np.ndarray:
    """Evaluate f over a time array; returns (len(ts), dim)."""
    try:
        out = np.asarray(f(ts), dtype=np.float64)
        if out.shape[:1] == ts.shape:
            return out.reshape(len(ts), -1)
    except (TypeError, ValueError):
        pass
    rows = [np.atleast_1d(np.asarray(f(float(t)), dtype=np.float64))
            for t in ts]
    return np.stack(rows)


def bohr_mean(f: Callable, T: float, anchors: Sequence[float],
              quad_step: float = DEFAULT_QUAD_STEP) -> BohrMeanReport:
    """Sliding-window mean of f probed at several anchor times.

    value is the average of the anchor-window means; tail_estimate is
    the largest deviation of a single window from that value, the
    finite-sample stand-in for the almost-periodic tail bound.
    """
    if T <= 0.0:
        raise InvalidArgument("T must be positive")
    if not len(anchors):
        raise InvalidArgument("anchors must be non-empty")
    means = np.stack([_window_mean(f, float(a), T, quad_step)
                      for a in anchors])
    value = means.mean(axis=0)
    tail = float(np.max(np.linalg.norm(means - value, axis=1)))
    value = value if value.size > 1 else value.reshape(())
    return BohrMeanReport(value=value, window_T=T, tail_estimate=tail,
                          anchors_probed=len(anchors))


def bohr_limit_drift(provider: AveragedDriftProvider, bundle, spaces, x,
                     T: float, anchors: Sequence[float],
                     quad_step: float = 0.01) -> BohrMeanReport:
    """Bohr mean of the averaged drift; the limit drift at state x.

    The anchor spread (tail_estimate) is the finite-probe diagnostic of
    uniform almost periodicity: it should shrink as T grows.
    """
    provider.bind(bundle, spaces)
    xv = _coeffs_of(x)

    if provider.mode is DriftMode.ORACLE_LINEAR:
        p = bundle.system.params
        lo = min(anchors)
        hi = max(anchors) + T
        n1 = bundle.slow_space.dim
        nt = max(2, int(math.ceil((hi - lo) / quad_step)) + 1)
        dte = (hi - lo) / (nt - 1)
        kr = get_kernels()
        lam2 = np.ascontiguousarray(bundle.fast_space.eigenvalues,
                                    dtype=np.float64)
        means = kr.ode_mean_table(lam2, p.phi.kinds, p.phi.pars, lo, nt, dte,
                                  float(provider.pullback_S),
                                  provider._ode_hint())
        mult = np.empty((nt, n1), np.float64)
        for j in range(nt):
            mult[j] = p.f_x + p.f_y * _pad_vec(p.a_coupling * means[j], n1)
        csum = np.vstack([np.zeros(n1), np.cumsum(
            0.5 * (mult[1:] + mult[:-1]) * dte, axis=0)])
        times = lo + dte * np.arange(nt)
        window = []
        for a in anchors:
            i0 = int(round((a - lo) / dte))
            i1 = min(int(round((a + T - lo) / dte)), nt - 1)
            window.append((csum[i1] - csum[i0]) / (times[i1] - times[i0]))
        window = np.stack(window) * xv
    else:
        window = np.stack([
            _window_mean(lambda s: provider.drift_fn(s, xv), float(a), T,
                         quad_step) for a in anchors])
    value = window.mean(axis=0)
    spread = float(np.max(np.linalg.norm(window - value, axis=1)))
    return BohrMeanReport(value=value, window_T=T, tail_estimate=spread,
                          anchors_probed=len(anchors))


def asymptotic_A(bundle, probe_states: Sequence, t_probe: float):
    """Limit slow operator and its V*-residual at a probe time.

    Valid for bundles whose time modulation converges; the limit keeps
    the autonomous cubic part and replaces ell1 by its limit value.
    """
    meta = bundle.ap_metadata
    if meta is None or meta.ell1_limit is None:
        raise UnsupportedBundle(
            "bundle has no asymptotic ell1 limit; A(t, .) does not settle")
    ell1_bar = float(meta.ell1_limit)
    space = bundle.slow_space
    power = bundle.system.slow_power
    lam1p = space.eigenvalues ** power
    nu = bundle.system.params.nu

    def a_bar(x):
        xv = _coeffs_of(x)
        return -ell1_bar * lam1p * xv - nu * xv ** 3

    residual = 0.0
    for st in probe_states:
        xv = _coeffs_of(st)
        diff = np.asarray(bundle.A(t_probe, xv)) - a_bar(xv)
        vs = float(np.sqrt(np.sum(diff * diff
                                  / space.eigenvalues ** space.v_exponent)))
        residual = max(residual, vs)
    return a_bar, residual


def time_avg_G1(bundle, x, T: float, anchors: Sequence[float],
                quad_step: float = DEFAULT_QUAD_STEP):
    """Candidate limit noise factor and its window mean-square deviation.

    Returns (g1_bar, deviation) with g1_bar the mode multiplication by
    the limit of ell2 and deviation the largest anchor-window mean of
    the squared coefficient distance at state x.
    """
    if T <= 0.0:
        raise InvalidArgument("T must be positive")
    meta = bundle.ap_metadata
    if meta is None or meta.ell2_limit is None:
        raise UnsupportedBundle(
            "bundle has no asymptotic ell2 limit; G1(t, .) does not settle")
    ell2_bar = float(meta.ell2_limit)
    ell2 = bundle.system.params.ell2
    xv = _coeffs_of(x)
    sq = float(np.sum(xv * xv))

    def integrand(ts):
        return (np.asarray(ell2(ts), dtype=np.float64) - ell2_bar) ** 2 * sq

    deviation = 0.0
    for a in anchors:
        w = float(_window_mean(lambda ts: integrand(ts), float(a), T,
                               quad_step)[0])
        deviation = max(deviation, w)

    def g1_bar(state):
        return ell2_bar * _coeffs_of(state)

    return g1_bar, deviation


def limit_coefficients(bundle, provider: Optional[AveragedDriftProvider]
                       = None, T: float = 1e4,
                       anchors: Sequence[float] = (0.0, 37.0, 113.0),
                       quad_step: float = 0.01) -> LimitCoefficients:
    """Assemble the autonomous limit equation's spectral coefficients.

    The averaged drift multiplier is the Bohr mean of the per-mode
    oracle multiplier; requires a bundle with asymptotic metadata and a
    linear fast drift.
    """
    meta = bundle.ap_metadata
    if meta is None or meta.ell1_limit is None or meta.ell2_limit is None:
        raise UnsupportedBundle("bundle lacks asymptotic scalar limits")
    provider = provider or AveragedDriftProvider(DriftMode.ORACLE_LINEAR)
    spaces = (bundle.slow_space, bundle.fast_space)
    provider.bind(bundle, spaces)
    ones = np.ones(bundle.slow_space.dim)
    rep = bohr_limit_drift(provider, bundle, spaces, ones, T, anchors,
                           quad_step)
    return LimitCoefficients(
        ell1_bar=float(meta.ell1_limit),
        drift_multipliers=np.asarray(rep.value, dtype=np.float64),
        ell2_bar=float(meta.ell2_limit),
        nu=bundle.system.params.nu)


def _block_rows(grid: TimeGrid, delta: float) -> np.ndarray:
    """Grid row holding the slow state each step's block is frozen at.

    Block membership uses nominal step times i*h: grid times are
    lattice-snapped slightly below them, and a time-space floor would
    shift every block boundary one step early.
    """
    idx = np.arange(grid.n_steps, dtype=np.float64)
    block_id = np.floor(idx * grid.step / delta + 1e-9)
    return np.minimum(
        np.floor(block_id * delta / grid.step + 1e-9).astype(np.int64),
        grid.points - 1)


def khasminskii_auxiliary(bundle, spaces, eps: float,
                          slow_path: PathSample, y0,
                          cfg: KhasminskiiConfig, seeds: int,
                          config: Optional[IntegratorConfig] = None
                          ) -> PathSample:
    """Fast process driven by a block-frozen slow input.

    The slow trajectory is held constant on blocks of length delta
    (anchored at the grid point at or below each block start), while
    the noise and clock match the true coupled fast equation, so the
    pathwise gap against the coupled fast component isolates the time
    discretization of the averaging argument.
    """
    if slow_path.slow is None:
        raise InvalidArgument("slow_path must carry the slow component")
    grid = slow_path.grid
    config = config or IntegratorConfig(step=grid.step)
    delta = cfg.resolved_delta(eps)
    if delta < grid.step * (1.0 - 1e-9):
        raise ConfigurationRejected(
            f"delta = {delta:g} is below the grid step {grid.step:g}")
    _slow_space, fast_space = spaces
    row_of_step = _block_rows(grid, delta)
    kr = get_kernels()
    _w2, s, w2pos, w2neg = _stream_pair(seeds, STREAM_W2, fast_space.dim,
                                        grid.cell_exponent)
    fast_out = np.full((grid.points, fast_space.dim), np.nan, np.float64)
    nsub = _substep_counts(grid, eps, config.h_fast_factor)
    status, nfail = kr.simulate_fast_kernel(
        fast_out, grid.cells, nsub, grid.cell_scale, eps, s, w2pos, w2neg,
        *_fast_args(bundle, fast_space),
        np.ascontiguousarray(slow_path.slow), row_of_step,
        _coeffs_of(y0), *_cfg_args(config), fast_space.dim)
    if status != 0:
        _raise_failure(status, fast_out, grid)
    rec = SeedRecord(seed=int(seeds), streams=(
        ("w2", _w2.stream_id), ("w2_neg", _w2.negative_stream_id)))
    return PathSample(grid=grid, slow=None, fast=fast_out, seed_record=rec,
                      newton_failures=int(nfail))


def translation_number_scan(f: Callable, epsilon_ap: float,
                            tau_range: Tuple[float, float], tau_step: float,
                            probe_window: Sequence[float]) -> List[float]:
    """Candidate translation numbers passing a finite sup test.

    Accepts tau when max over the probe window of |f(t + tau) - f(t)|
    stays below epsilon_ap. A necessary-condition scan: probes are
    finite, so acceptance never certifies almost periodicity.
    """
    if tau_step <= 0.0:
        raise InvalidArgument("tau_step must be positive")
    probes = np.asarray(list(probe_window), dtype=np.float64)
    if probes.size == 0:
        raise InvalidArgument("probe_window must be non-empty")
    base = _eval_vec(f, probes)
    lo, hi = tau_range
    taus = np.arange(lo, hi + 0.5 * tau_step, tau_step)
    accepted = []
    for tau in taus:
        shifted = _eval_vec(f, probes + tau)
        dev = float(np.max(np.linalg.norm(shifted - base, axis=1)))
        if dev < epsilon_ap:
            accepted.append(float(tau))
    return accepted


def measure_ap_diagnostic(bundle, spaces, x, taus: Sequence[float],
                          t_anchors: Sequence[float], M: int, S: float,
                          seeds: int = 0, epsilon_ap: float = 0.3,
                          dictionary_size: int = 256,
                          step: float = 2e-3,
                          mc_tol: Optional[float] = None
                          ) -> ApDiagnosticReport:
    """Compare evolution measures across candidate time shifts.

    For each anchor t and shift tau, the bounded-Lipschitz dictionary
    distance between mu_{t+tau}^x and mu_t^x is computed from pullback
    ensembles with independent noise. Passing requires every distance
    below epsilon_ap + 3 * mc_tol. When mc_tol is not given it is
    derived from the measured argmax-statistic standard error inflated
    by the dictionary-maximum factor sqrt(2 ln J) + 2, an upper band
    for the pure-noise value of the max statistic; identical measures
    then sit below mc_tol itself.
    """
    xv = _coeffs_of(x)
    base = {}
    for i, t in enumerate(t_anchors):
        base[t] = ergodic.estimate_evolution_measure(
            bundle, spaces, xv, float(t), M, S, step=step,
            seeds=int(seeds) + 7919 * i, bias_tol=math.inf)
    distances = {}
    se_max = 0.0
    for j, tau in enumerate(taus):
        for i, t in enumerate(t_anchors):
            shifted = ergodic.estimate_evolution_measure(
                bundle, spaces, xv, float(t) + float(tau), M, S, step=step,
                seeds=int(seeds) + 104729 * (j + 1) + 7919 * i,
                bias_tol=math.inf)
            dist, se = ergodic.dbl_distance(
                base[t], shifted, dictionary_size, seed=int(seeds),
                return_stderr=True)
            distances[(float(tau), float(t))] = dist
            se_max = max(se_max, se)
    if mc_tol is None:
        mc_tol = se_max * (math.sqrt(2.0 * math.log(dictionary_size)) + 2.0)
    threshold = epsilon_ap + 3.0 * mc_tol
    passed = all(d < threshold for d in distances.values())
    return ApDiagnosticReport(distances=distances, threshold=threshold,
                              mc_tol=mc_tol, passed=passed)
