"""Coefficient maps for the built-in slow-fast systems and condition checks.

Every built-in system is spectral-diagonal: the slow drift relaxes mode k
at rate ell1(t) * lam_k**p (plus an optional cubic), the fast drift at
lam_k - phi(t) (plus an optional odd power), couplings act mode-wise, and
the noise operators are diagonal multipliers. That makes the structural
conditions (monotonicity, coercivity, dissipativity, Lipschitz, growth)
exact per-mode inequalities, which the checkers then probe with random
states: they are falsification harnesses over a sampling envelope, not
proofs.

Coefficient maps broadcast: ``t`` may be a scalar or a batch vector of
shape (S,), states a vector (n,) or a batch (S, n).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .spaces import ConfigurationRejected, GalerkinSpace, InvalidArgument
from .timefuncs import TimeFunction, sine, xi_class

CAHN_HILLIARD_HEAT_1D = "cahn_hilliard_heat_1d"
REACTION_DIFFUSION_1D = "reaction_diffusion_1d"
POROUS_FAST_1D = "porous_fast_1d"
EXAMPLE_NAMES = (CAHN_HILLIARD_HEAT_1D, REACTION_DIFFUSION_1D, POROUS_FAST_1D)

# slow spectral power p per example (drift -ell1(t) lam_k**p u_k)
_SLOW_POWER = {CAHN_HILLIARD_HEAT_1D: 2.0, REACTION_DIFFUSION_1D: 1.0, POROUS_FAST_1D: 1.0}

# default sampling envelope of the checkers (component std of random states)
CHECK_SCALE = 1.0
CHECK_T_WINDOW = 25.0
CHECK_TOL = 1e-9


@dataclass(frozen=True)
class ConditionProfile:
    """Constants of the structural conditions for one coefficient bundle.

    alpha, beta, theta govern the slow drift (monotonicity envelope and
    coercivity); kappa, gamma, eta, zeta the fast drift and noise
    (dissipativity rate gamma in 1/s, growth exponent zeta < 1); lip_F and
    lip_G1 the slow coupling and noise; generic_C is the shared catch-all
    constant of the inequalities.
    """

    alpha: float
    beta: float
    theta: float
    kappa: float
    gamma: float
    eta: float
    zeta: float
    lip_F: float
    lip_G1: float
    generic_C: float

    def __post_init__(self):
        checks = [
            (self.alpha > 1.0, "alpha must be > 1"),
            (self.beta >= 0.0, "beta must be >= 0"),
            (self.theta > 0.0, "theta must be > 0"),
            (self.kappa > 1.0, "kappa must be > 1"),
            (self.gamma > 0.0, "gamma must be > 0"),
            (self.eta > 0.0, "eta must be > 0"),
            (0.0 < self.zeta < 1.0, "zeta must lie in (0, 1)"),
            (self.lip_F >= 0.0, "lip_F must be >= 0"),
            (self.lip_G1 >= 0.0, "lip_G1 must be >= 0"),
            (self.generic_C > 0.0, "generic_C must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidArgument(msg)


@dataclass(frozen=True)
class SystemParams:
    """Scalar knobs of a built-in example system."""

    ell1: TimeFunction = field(default_factory=lambda: xi_class(1.0, 1.0))
    ell2: TimeFunction = field(default_factory=lambda: xi_class(1.0, 1.0))
    phi: TimeFunction = field(default_factory=lambda: sine(1.0, 1.0))
    c: float = 0.5
    a_coupling: float = 1.0
    f_x: float = 0.0
    f_y: float = 1.0
    nu: float = 0.0
    b_nl: float = 0.0
    fast_kappa: float = 4.0


@dataclass(frozen=True)
class ExampleSystem:
    name: str
    params: SystemParams

    def __post_init__(self):
        if self.name not in EXAMPLE_NAMES:
            raise InvalidArgument(f"unknown example {self.name!r}; expected one of {EXAMPLE_NAMES}")

    @property
    def slow_power(self) -> float:
        return _SLOW_POWER[self.name]


def example_system(name: str, **overrides) -> ExampleSystem:
    """Built-in system with per-name defaults; keyword overrides win."""
    if name == CAHN_HILLIARD_HEAT_1D:
        base = {"nu": 1.0}
    elif name == POROUS_FAST_1D:
        base = {"b_nl": 1.0, "fast_kappa": 4.0}
    else:
        base = {}
    base.update(overrides)
    return ExampleSystem(name=name, params=SystemParams(**base))


@dataclass(frozen=True)
class ApMetadata:
    """Almost-periodic structure recorded at build time.

    ell1_limit/ell2_limit are the asymptotic values of the scalar factors
    (None when the factor oscillates without a limit); phi_frequencies
    lists the angular frequencies of the oscillatory fast forcing.
    """

    ell1_limit: Optional[float]
    ell2_limit: Optional[float]
    phi_frequencies: tuple
    phi_sup: float


@dataclass(frozen=True)
class CoefficientBundle:
    """Evaluable coefficient maps plus their condition constants.

    A(t, u) and B(t, x, v) return drift coefficient vectors (the V*
    representation in eigencoordinates); G1(t, x) and G2(t, x, v) return
    per-mode diagonal multipliers d with (G dW)_k = d_k dW_k. G1 takes no
    fast argument: the slow noise never sees the fast component.
    """

    A: Callable
    F: Callable
    G1: Callable
    B: Callable
    G2: Callable
    profile: ConditionProfile
    ap_metadata: Optional[ApMetadata]
    system: ExampleSystem
    slow_space: GalerkinSpace
    fast_space: GalerkinSpace


def _pad_cols(arr, n):
    """Pad or truncate the last axis to length n (mode-matching map H2->H1)."""
    arr = np.asarray(arr, dtype=np.float64)
    m = arr.shape[-1]
    if m == n:
        return arr
    if m > n:
        return arr[..., :n]
    pad = [(0, 0)] * (arr.ndim - 1) + [(0, n - m)]
    return np.pad(arr, pad)


def fast_contraction_rate(system: ExampleSystem, fast_space: GalerkinSpace) -> float:
    """Mean-square contraction rate of the linear fast dynamics under
    synchronous noise coupling: 2 lam_1 - 2 sup|phi| - c**2.

    This is the sharp per-mode rate attained by differences concentrated
    on the first mode; the profile's gamma is deliberately smaller (half
    the uncoupled rate) so that the strong-monotonicity inequality holds
    with a finite coupling constant.
    """
    p = system.params
    lam1 = fast_space.first_eigenvalue()
    return 2.0 * lam1 - 2.0 * p.phi.sup_bound() - p.c ** 2


def build_system(example: ExampleSystem, slow_space: GalerkinSpace,
                 fast_space: GalerkinSpace) -> CoefficientBundle:
    """Spectral realization of a built-in system on concrete spaces.

    Raises ConfigurationRejected when the fast-scale admissibility
    inequality sup|phi| + c**2/2 < lambda_star fails, or when the slow
    space's V-exponent does not match the example's drift power (the
    coercivity identity <A v, v> = -ell1 ||v||_V**2 would silently break).
    """
    p = example.params
    lam_star = fast_space.first_eigenvalue()
    phi_sup = p.phi.sup_bound()
    margin = phi_sup + 0.5 * p.c ** 2
    if not margin < lam_star:
        raise ConfigurationRejected(
            f"sup|phi| + c^2/2 must be < lambda_star ({lam_star:.4f}), got {margin:.4f}")
    power = example.slow_power
    if abs(slow_space.v_exponent - power) > 1e-12:
        raise ConfigurationRejected(
            f"slow space v_exponent {slow_space.v_exponent:g} must equal the "
            f"drift power {power:g} of {example.name}")

    lam1p = slow_space.eigenvalues ** power
    lam2 = fast_space.eigenvalues
    n1 = slow_space.dim
    n2 = fast_space.dim
    ell1, ell2, phi = p.ell1, p.ell2, p.phi
    nu, c, a, b, kap = p.nu, p.c, p.a_coupling, p.b_nl, p.fast_kappa
    fx, fy = p.f_x, p.f_y

    def A(t, u):
        u = np.asarray(u, dtype=np.float64)
        lt = np.asarray(ell1(t), dtype=np.float64)
        return -lt[..., None] * lam1p * u - nu * u ** 3 if lt.ndim else -lt * lam1p * u - nu * u ** 3

    def F(t, x, y):
        x = np.asarray(x, dtype=np.float64)
        return fx * x + fy * _pad_cols(y, n1)

    def G1(t, x):
        x = np.asarray(x, dtype=np.float64)
        lt = np.asarray(ell2(t), dtype=np.float64)
        return lt[..., None] * x if lt.ndim else lt * x

    def B(t, x, v):
        v = np.asarray(v, dtype=np.float64)
        pt = np.asarray(phi(t), dtype=np.float64)
        lin = (pt[..., None] - lam2) * v if pt.ndim else (pt - lam2) * v
        nl = -lam2 * b * np.abs(v) ** (kap - 2.0) * v if b != 0.0 else 0.0
        return lin + nl + a * _pad_cols(x, n2)

    def G2(t, x, v):
        v = np.asarray(v, dtype=np.float64)
        return c * v

    gamma_cons = lam_star - phi_sup - 0.5 * c ** 2
    lam1f_sqrt = np.sqrt(lam_star)
    c_b2 = a ** 2 / gamma_cons
    c_b4 = (1.0 + phi_sup / lam_star) + abs(a) / lam1f_sqrt + abs(b) / lam_star
    y_max = CHECK_SCALE * (np.sqrt(n2) + 7.0)
    zeta = 0.5
    c_g2 = abs(c) * y_max ** (1.0 - zeta)
    generic_c = 1.25 * max(1.0, c_b2, c_b4, c_g2)

    ell1_inf = ell1.inf_bound()
    if ell1_inf <= 0.0:
        raise ConfigurationRejected(
            f"inf ell1 must be positive for slow coercivity, got {ell1_inf:g}")
    profile = ConditionProfile(
        alpha=2.0,
        beta=0.0,
        theta=0.5 * ell1_inf,
        kappa=kap if b != 0.0 else 2.0,
        gamma=gamma_cons,
        eta=0.5 * gamma_cons,
        zeta=zeta,
        lip_F=abs(fx) + abs(fy),
        lip_G1=ell2.sup_bound(),
        generic_C=generic_c,
    )
    meta = ApMetadata(
        ell1_limit=ell1.asymptotic_limit(),
        ell2_limit=ell2.asymptotic_limit(),
        phi_frequencies=phi.frequencies(),
        phi_sup=phi_sup,
    )
    return CoefficientBundle(A=A, F=F, G1=G1, B=B, G2=G2, profile=profile,
                             ap_metadata=meta, system=example,
                             slow_space=slow_space, fast_space=fast_space)


def default_spaces(example: ExampleSystem, dim_slow: int, dim_fast: int,
                   make_space_fn=None):
    """Dirichlet spaces with the V-exponents the example requires."""
    from .spaces import make_space
    mk = make_space_fn or make_space
    slow = mk(dim_slow, v_exponent=example.slow_power, label="slow")
    fast = mk(dim_fast, v_exponent=1.0, label="fast")
    return slow, fast


# ---------------------------------------------------------------------------
# condition checkers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one sampled condition check.

    max_margin is the largest sampled LHS - RHS; the condition holds on
    the sample when max_margin <= tol. Violations counts samples above
    tol. worst_index points at the offending sample for reproduction.
    """

    condition: str
    samples: int
    max_margin: float
    violations: int
    tol: float
    worst_index: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        verdict = "pass" if self.passed else f"FAIL ({self.violations} violations)"
        return (f"{self.condition}: {verdict}, max margin {self.max_margin:.3e} "
                f"over {self.samples} samples")


def _report(condition, margins, tol):
    margins = np.asarray(margins, dtype=np.float64)
    worst = int(np.argmax(margins))
    return CheckReport(condition=condition, samples=margins.size,
                       max_margin=float(margins[worst]),
                       violations=int(np.sum(margins > tol)),
                       tol=tol, worst_index=worst)


def _draw(rng, samples, dim, scale):
    return rng.normal(0.0, scale, size=(samples, dim))


def _times(rng, samples, t_window):
    return rng.uniform(-t_window, t_window, size=samples)


def _h_norm(a):
    return np.sqrt(np.sum(a * a, axis=-1))


def _v_norm(space, a):
    w = space.eigenvalues ** space.v_exponent
    return np.sqrt(np.sum(w * a * a, axis=-1))


def _v_star_norm(space, a):
    w = space.eigenvalues ** (-space.v_exponent)
    return np.sqrt(np.sum(w * a * a, axis=-1))


def _rho_eta(profile, space, v):
    """Admissible monotonicity envelope: C/2 (1+||v||_V^alpha)(1+||v||_H^beta)."""
    return 0.5 * profile.generic_C \
        * (1.0 + _v_norm(space, v) ** profile.alpha) \
        * (1.0 + _h_norm(v) ** profile.beta)


def check_local_monotonicity(bundle: CoefficientBundle, space: GalerkinSpace,
                             samples: int, seed: int, scale: float = CHECK_SCALE,
                             t_window: float = CHECK_T_WINDOW,
                             tol: float = CHECK_TOL) -> CheckReport:
    """<A(t,u)-A(t,v), u-v>  <=  [rho(v)+eta(u)] ||u-v||_H**2 on samples."""
    rng = np.random.default_rng(seed)
    t = _times(rng, samples, t_window)
    u = _draw(rng, samples, space.dim, scale)
    v = _draw(rng, samples, space.dim, scale)
    du = u - v
    lhs = np.sum((bundle.A(t, u) - bundle.A(t, v)) * du, axis=1)
    rhs = (_rho_eta(bundle.profile, space, v) + _rho_eta(bundle.profile, space, u)) \
        * np.sum(du * du, axis=1)
    return _report("A2 local monotonicity", lhs - rhs, tol)


def check_coercivity(bundle: CoefficientBundle, space: GalerkinSpace,
                     samples: int, seed: int, scale: float = CHECK_SCALE,
                     t_window: float = CHECK_T_WINDOW,
                     tol: float = CHECK_TOL) -> CheckReport:
    """<A(t,v), v>  <=  C ||v||_H**2 - theta ||v||_V**alpha + C on samples."""
    rng = np.random.default_rng(seed)
    t = _times(rng, samples, t_window)
    v = _draw(rng, samples, space.dim, scale)
    pr = bundle.profile
    lhs = np.sum(bundle.A(t, v) * v, axis=1)
    rhs = pr.generic_C * np.sum(v * v, axis=1) - pr.theta * _v_norm(space, v) ** pr.alpha \
        + pr.generic_C
    return _report("A3 coercivity", lhs - rhs, tol)


def check_strong_monotonicity_fast(bundle: CoefficientBundle, spaces,
                                   samples: int, seed: int,
                                   scale: float = CHECK_SCALE,
                                   t_window: float = CHECK_T_WINDOW,
                                   tol: float = CHECK_TOL,
                                   gamma: float = None,
                                   coupling_C: float = None) -> CheckReport:
    """2<B(t,x,u)-B(t,x',v), u-v> + ||G2(t,x,u)-G2(t,x',v)||**2
    <=  -gamma ||u-v||_H**2 + C ||x-x'||_H**2 on samples.

    gamma/coupling_C default to the bundle profile; pass explicit values
    to probe sharper rates (e.g. the full linear rate with x = x').
    """
    slow_space, fast_space = spaces
    pr = bundle.profile
    gamma = pr.gamma if gamma is None else gamma
    coupling_C = pr.generic_C if coupling_C is None else coupling_C
    rng = np.random.default_rng(seed)
    t = _times(rng, samples, t_window)
    x1 = _draw(rng, samples, slow_space.dim, scale)
    x2 = _draw(rng, samples, slow_space.dim, scale)
    u = _draw(rng, samples, fast_space.dim, scale)
    v = _draw(rng, samples, fast_space.dim, scale)
    dy = u - v
    dB = bundle.B(t, x1, u) - bundle.B(t, x2, v)
    dG = bundle.G2(t, x1, u) - bundle.G2(t, x2, v)
    lhs = 2.0 * np.sum(dB * dy, axis=1) + np.sum(dG * dG, axis=1)
    rhs = -gamma * np.sum(dy * dy, axis=1) + coupling_C * np.sum((x1 - x2) ** 2, axis=1)
    return _report("B2 strong monotonicity", lhs - rhs, tol)


def check_lipschitz_F_G1(bundle: CoefficientBundle, spaces,
                         samples: int, seed: int, scale: float = CHECK_SCALE,
                         t_window: float = CHECK_T_WINDOW,
                         tol: float = CHECK_TOL) -> CheckReport:
    """The four slow-coupling bounds: F Lipschitz and linear growth with
    constant lip_F, G1 Lipschitz and linear growth with constant lip_G1."""
    slow_space, fast_space = spaces
    pr = bundle.profile
    rng = np.random.default_rng(seed)
    t = _times(rng, samples, t_window)
    x1 = _draw(rng, samples, slow_space.dim, scale)
    x2 = _draw(rng, samples, slow_space.dim, scale)
    y1 = _draw(rng, samples, fast_space.dim, scale)
    y2 = _draw(rng, samples, fast_space.dim, scale)
    m_lip_f = _h_norm(bundle.F(t, x1, y1) - bundle.F(t, x2, y2)) \
        - pr.lip_F * (_h_norm(x1 - x2) + _h_norm(y1 - y2))
    m_grow_f = _h_norm(bundle.F(t, x1, y1)) - pr.lip_F * (1.0 + _h_norm(x1) + _h_norm(y1))
    m_lip_g = _h_norm(bundle.G1(t, x1) - bundle.G1(t, x2)) - pr.lip_G1 * _h_norm(x1 - x2)
    m_grow_g = _h_norm(bundle.G1(t, x1)) - pr.lip_G1 * (1.0 + _h_norm(x1))
    margins = np.concatenate([m_lip_f, m_grow_f, m_lip_g, m_grow_g])
    return _report("A5 Lipschitz/growth of F and G1", margins, tol)


def check_growth_fast(bundle: CoefficientBundle, spaces,
                      samples: int, seed: int, scale: float = CHECK_SCALE,
                      t_window: float = CHECK_T_WINDOW,
                      tol: float = CHECK_TOL) -> CheckReport:
    """||B(t,x,v)||_V* <= C (1 + ||v||_V**(kappa-1) + ||x||**(2(kappa-1)/kappa))
    and ||G2(t,x,v)|| <= C (1 + ||x|| + ||v||**zeta) on samples.

    The G2 bound with zeta < 1 cannot hold on all of H_2 for the built-in
    multiplicative noise; it holds on the documented sampling envelope
    (component std ``scale``), for which generic_C was sized. Raising
    ``scale`` far beyond 1 may legitimately fail the check.
    """
    slow_space, fast_space = spaces
    pr = bundle.profile
    rng = np.random.default_rng(seed)
    t = _times(rng, samples, t_window)
    x = _draw(rng, samples, slow_space.dim, scale)
    v = _draw(rng, samples, fast_space.dim, scale)
    b_norm = _v_star_norm(fast_space, bundle.B(t, x, v))
    m_b = b_norm - pr.generic_C * (1.0 + _v_norm(fast_space, v) ** (pr.kappa - 1.0)
                                   + _h_norm(x) ** (2.0 * (pr.kappa - 1.0) / pr.kappa))
    g_norm = _h_norm(bundle.G2(t, x, v))
    m_g = g_norm - pr.generic_C * (1.0 + _h_norm(x) + _h_norm(v) ** pr.zeta)
    return _report("B4 growth of B and G2", np.concatenate([m_b, m_g]), tol)


def run_all_checks(bundle: CoefficientBundle, samples: int = 10_000,
                   seed: int = 20240801, **kw):
    """All five condition checks; returns the reports in a fixed order."""
    slow, fast = bundle.slow_space, bundle.fast_space
    return [
        check_local_monotonicity(bundle, slow, samples, seed, **kw),
        check_coercivity(bundle, slow, samples, seed + 1, **kw),
        check_strong_monotonicity_fast(bundle, (slow, fast), samples, seed + 2, **kw),
        check_lipschitz_F_G1(bundle, (slow, fast), samples, seed + 3, **kw),
        check_growth_fast(bundle, (slow, fast), samples, seed + 4, **kw),
    ]


def hemicontinuity_trace(bundle: CoefficientBundle, t: float, u, v, w,
                         lam_grid) -> np.ndarray:
    """Values of lam -> <A(t, u + lam v), w> along a lambda grid.

    Smoothness diagnostics halve the grid and compare maximal adjacent
    jumps; for the built-in polynomial drifts the jump scales linearly
    with the grid width.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    lam_grid = np.asarray(lam_grid, dtype=np.float64)
    states = u[None, :] + lam_grid[:, None] * v[None, :]
    vals = bundle.A(np.full(lam_grid.shape, t), states)
    return np.sum(vals * w[None, :], axis=1)
