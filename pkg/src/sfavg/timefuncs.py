"""Scalar time coefficients built from a small closed set of atoms.

Every nonautonomous scalar in the engine (viscosity modulation, noise
modulation, fast-drift potential) is a sum of atoms from a fixed family,
encoded as flat arrays so the hot kernels can evaluate them without
callbacks:

    CONST      p0
    SIN        p0 * sin(p1 * t + p2)
    COS        p0 * cos(p1 * t + p2)
    XI_DECAY   p0 / (1 + |t|**p1)
    AP_SERIES  p0 * sum_{n=1}^{int(p1)} n^-2 sin(sqrt(n) * t)

The family covers constants, (quasi-)periodic modulations, uniformly
almost periodic series, and decaying-to-constant coefficients of the form
offset + 1/(1+|t|**iota).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOM_CONST = 0
ATOM_SIN = 1
ATOM_COS = 2
ATOM_XI_DECAY = 3
ATOM_AP_SERIES = 4

_ATOM_NAMES = {
    ATOM_CONST: "const",
    ATOM_SIN: "sin",
    ATOM_COS: "cos",
    ATOM_XI_DECAY: "xi_decay",
    ATOM_AP_SERIES: "ap_series",
}


@dataclass(frozen=True)
class TimeFunction:
    """Sum of scalar atoms, evaluable pointwise or on arrays.

    Attributes
    ----------
    kinds : int64 array (m,)
        Atom tags (ATOM_* constants).
    pars : float64 array (m, 3)
        Per-atom parameters, meaning depends on the tag.
    """

    kinds: np.ndarray
    pars: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        kinds = np.asarray(self.kinds, dtype=np.int64)
        pars = np.asarray(self.pars, dtype=np.float64)
        if pars.ndim != 2 or pars.shape != (kinds.shape[0], 3):
            raise ValueError("pars must have shape (len(kinds), 3)")
        if kinds.size and (kinds.min() < ATOM_CONST or kinds.max() > ATOM_AP_SERIES):
            raise ValueError(f"unknown atom kind in {kinds}")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "pars", pars)

    # -- evaluation -------------------------------------------------------

    def __call__(self, t):
        """Evaluate at a scalar or ndarray of times."""
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for k, (p0, p1, p2) in zip(self.kinds, self.pars):
            if k == ATOM_CONST:
                out = out + p0
            elif k == ATOM_SIN:
                out = out + p0 * np.sin(p1 * t + p2)
            elif k == ATOM_COS:
                out = out + p0 * np.cos(p1 * t + p2)
            elif k == ATOM_XI_DECAY:
                out = out + p0 / (1.0 + np.abs(t) ** p1)
            elif k == ATOM_AP_SERIES:
                n = np.arange(1, int(p1) + 1, dtype=np.float64)
                shp = (-1,) + (1,) * t.ndim
                terms = np.sin(np.sqrt(n).reshape(shp) * t) / (n * n).reshape(shp)
                out = out + p0 * terms.sum(axis=0)
        if out.ndim == 0:
            return float(out)
        return out

    # -- exact metadata ---------------------------------------------------

    def sup_bound(self) -> float:
        """Upper bound for sup_t |f(t)| (sum of per-atom sup bounds).

        Exact for a single oscillatory atom or a nonnegative combination
        of const + decay; an over-estimate for mixed sums.
        """
        s = 0.0
        for k, (p0, p1, _p2) in zip(self.kinds, self.pars):
            if k in (ATOM_SIN, ATOM_COS, ATOM_XI_DECAY):
                s += abs(p0)
            elif k == ATOM_CONST:
                s += abs(p0)
            elif k == ATOM_AP_SERIES:
                n = np.arange(1, int(p1) + 1, dtype=np.float64)
                s += abs(p0) * float(np.sum(1.0 / (n * n)))
        return s

    def inf_bound(self) -> float:
        """Lower bound for inf_t f(t) (consts minus oscillation bounds).

        For const + decay atoms with nonnegative weights this equals the
        true infimum (attained in the |t| -> inf limit).
        """
        s = 0.0
        for k, (p0, p1, _p2) in zip(self.kinds, self.pars):
            if k == ATOM_CONST:
                s += p0
            elif k == ATOM_XI_DECAY:
                s += min(p0, 0.0)
            elif k in (ATOM_SIN, ATOM_COS):
                s -= abs(p0)
            elif k == ATOM_AP_SERIES:
                n = np.arange(1, int(p1) + 1, dtype=np.float64)
                s -= abs(p0) * float(np.sum(1.0 / (n * n)))
        return s

    def mean_exact(self) -> float:
        """Long-run time average (Bohr mean): oscillatory and decaying
        atoms average to zero, constants survive."""
        s = 0.0
        for k, (p0, _p1, _p2) in zip(self.kinds, self.pars):
            if k == ATOM_CONST:
                s += p0
        return s

    def asymptotic_limit(self):
        """lim_{t->+inf} f(t) if it exists (None when oscillatory atoms
        with nonzero weight are present)."""
        s = 0.0
        for k, (p0, _p1, _p2) in zip(self.kinds, self.pars):
            if k == ATOM_CONST:
                s += p0
            elif k == ATOM_XI_DECAY:
                continue
            elif p0 != 0.0:
                return None
        return s

    def is_constant(self) -> bool:
        return all(
            k == ATOM_CONST or p[0] == 0.0
            for k, p in zip(self.kinds, self.pars)
        )

    def frequencies(self) -> tuple:
        """Angular frequencies of the oscillatory atoms, in atom order."""
        freqs = []
        for k, (p0, p1, _p2) in zip(self.kinds, self.pars):
            if p0 == 0.0:
                continue
            if k in (ATOM_SIN, ATOM_COS):
                freqs.append(float(p1))
            elif k == ATOM_AP_SERIES:
                freqs.extend(float(np.sqrt(n)) for n in range(1, int(p1) + 1))
        return tuple(freqs)

    def describe(self) -> str:
        parts = []
        for k, (p0, p1, p2) in zip(self.kinds, self.pars):
            name = _ATOM_NAMES[int(k)]
            parts.append(f"{name}({p0:g},{p1:g},{p2:g})")
        return self.label or "+".join(parts) or "zero"


def _tf(kinds, pars, label=""):
    return TimeFunction(
        np.asarray(kinds, dtype=np.int64),
        np.asarray(pars, dtype=np.float64).reshape(-1, 3),
        label,
    )


def constant(value: float, label: str = "") -> TimeFunction:
    return _tf([ATOM_CONST], [[value, 0.0, 0.0]], label or f"{value:g}")


def zero() -> TimeFunction:
    return _tf([], np.empty((0, 3)), "zero")


def sine(amplitude: float = 1.0, omega: float = 1.0, phase: float = 0.0) -> TimeFunction:
    return _tf([ATOM_SIN], [[amplitude, omega, phase]], "")


def quasi_periodic(a1: float = 1.0, omega1: float = 1.0,
                   a2: float = 1.0, omega2: float = float(np.sqrt(2.0))) -> TimeFunction:
    """a1*sin(omega1 t) + a2*cos(omega2 t); quasi-periodic when the
    frequency ratio is irrational."""
    return _tf(
        [ATOM_SIN, ATOM_COS],
        [[a1, omega1, 0.0], [a2, omega2, 0.0]],
        "sin+cos_sqrt2" if omega2 == float(np.sqrt(2.0)) else "",
    )


def ap_series(n_terms: int = 50, scale: float = 1.0) -> TimeFunction:
    """Truncated uniformly almost periodic series
    scale * sum_{n<=N} n^-2 sin(sqrt(n) t)."""
    return _tf([ATOM_AP_SERIES], [[scale, float(n_terms), 0.0]], f"ap_series[{n_terms}]")


def xi_class(iota: float = 1.0, offset: float = 1.0) -> TimeFunction:
    """offset + 1/(1+|t|**iota): decays to `offset` at rate |t|^-iota."""
    if iota <= 0:
        raise ValueError("iota must be positive")
    if offset <= 0:
        raise ValueError("offset must be positive for a coercive coefficient")
    return _tf(
        [ATOM_CONST, ATOM_XI_DECAY],
        [[offset, 0.0, 0.0], [1.0, iota, 0.0]],
        f"xi(iota={iota:g},offset={offset:g})",
    )


def add(f: TimeFunction, g: TimeFunction, label: str = "") -> TimeFunction:
    return _tf(
        np.concatenate([f.kinds, g.kinds]),
        np.concatenate([f.pars, g.pars], axis=0),
        label,
    )


# Named functions usable from config files.
NAMED = {
    "zero": zero,
    "one": lambda: constant(1.0),
    "sin": lambda: sine(1.0, 1.0),
    "one_plus_sin": lambda: add(constant(1.0), sine(1.0, 1.0), "one_plus_sin"),
    "sin+cos_sqrt2": quasi_periodic,
    "ap_series": ap_series,
    "xi": xi_class,
}
