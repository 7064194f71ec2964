"""Spectral Galerkin spaces, time grids, and reproducible Wiener noise.

The PDE side of the package is diagonalized: a space is its eigenvalue
sequence, a state is its coefficient vector, and the three norms (H, V,
V*) are weighted l2 norms with spectral weights ``lam**(+-s)``.

Time is discretized on a fixed dyadic lattice of width ``2**-L`` seconds
(L = ``cell_exponent``). Grid points snap to lattice cells, and Brownian
increments are generated per cell from a counter-based hash, which makes
every increment a pure function of (seed, stream, cell). Refining a grid
therefore refines the same Brownian path, and two solvers sharing a
NoiseSource see literally the same noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import get_kernels

DEFAULT_CELL_EXPONENT = 20

DIRICHLET_LAPLACIAN_1D = "dirichlet_laplacian_1d"
NEUMANN_LAPLACIAN_1D = "neumann_laplacian_1d"
_OPERATOR_KINDS = (DIRICHLET_LAPLACIAN_1D, NEUMANN_LAPLACIAN_1D)

# stream tags: slow noise, fast noise, and the independent copy used for
# negative times in the two-sided construction
STREAM_W1 = 1
STREAM_W2 = 2
STREAM_W2_NEG = 3
_NEG_STREAM_OFFSET = 512


class InvalidArgument(ValueError):
    """Raised when an operation precondition is violated."""


class ConfigurationRejected(ValueError):
    """Raised when a model configuration violates a standing assumption."""


@dataclass(frozen=True)
class GalerkinSpace:
    """Finite spectral truncation of a Gelfand triple V c H c V*.

    Parameters
    ----------
    dim : int
        Number of retained modes.
    eigenvalues : ndarray
        Positive, non-decreasing spectrum of the reference operator.
    v_exponent : float
        Power s with ||u||_V**2 = sum lam_k**s u_k**2.
    label : str
        Identifier used in reports.
    """

    dim: int
    eigenvalues: np.ndarray
    v_exponent: float
    label: str = ""

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=np.float64)
        if self.dim < 1:
            raise InvalidArgument("dim must be >= 1")
        if ev.shape != (self.dim,):
            raise InvalidArgument("eigenvalues must have shape (dim,)")
        if not np.all(ev > 0.0):
            raise InvalidArgument("eigenvalues must be strictly positive")
        if not np.all(np.diff(ev) >= 0.0):
            raise InvalidArgument("eigenvalues must be non-decreasing")
        object.__setattr__(self, "eigenvalues", ev)

    def first_eigenvalue(self) -> float:
        """Smallest eigenvalue (the lambda_* of admissibility constraints)."""
        return float(self.eigenvalues[0])

    def norm(self, u, which: str = "H") -> float:
        return norm(self, u, which)


@dataclass(frozen=True)
class State:
    """Coefficient vector of an element of H (or V) in the eigenbasis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 1:
            raise InvalidArgument("coeffs must be a 1-d vector")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("coeffs must be finite")
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.shape[0]


def _coeffs_of(u) -> np.ndarray:
    if isinstance(u, State):
        return u.coeffs
    return np.asarray(u, dtype=np.float64)


def make_space(dim: int, operator_kind: str = DIRICHLET_LAPLACIAN_1D,
               v_exponent: float = 1.0, mass_shift: float = 1.0,
               label: str = "") -> GalerkinSpace:
    """Space with the analytic 1-d Laplacian spectrum on [0, 1].

    Dirichlet: lam_k = (k pi)**2. Neumann: lam_k = ((k-1) pi)**2 with the
    zero mode shifted to ``mass_shift`` > 0 to keep the spectrum positive.
    """
    if dim < 1:
        raise InvalidArgument("dim must be >= 1")
    if operator_kind not in _OPERATOR_KINDS:
        raise InvalidArgument(f"unknown operator_kind {operator_kind!r}; "
                              f"expected one of {_OPERATOR_KINDS}")
    k = np.arange(1, dim + 1, dtype=np.float64)
    if operator_kind == DIRICHLET_LAPLACIAN_1D:
        ev = (k * np.pi) ** 2
    else:
        if mass_shift <= 0.0:
            raise InvalidArgument("mass_shift must be > 0 for the Neumann spectrum")
        ev = ((k - 1.0) * np.pi) ** 2
        ev[0] = mass_shift
    return GalerkinSpace(dim=dim, eigenvalues=ev, v_exponent=float(v_exponent),
                         label=label or operator_kind)


def norm(space: GalerkinSpace, u, which: str = "H") -> float:
    """Weighted l2 norm; ``which`` is one of 'H', 'V', 'V_star'."""
    c = _coeffs_of(u)
    if c.shape != (space.dim,):
        raise InvalidArgument(f"state has length {c.shape}, space dim {space.dim}")
    if which == "H":
        return float(np.sqrt(np.sum(c * c)))
    if which == "V":
        w = space.eigenvalues ** space.v_exponent
    elif which == "V_star":
        w = space.eigenvalues ** (-space.v_exponent)
    else:
        raise InvalidArgument(f"unknown norm {which!r}; expected 'H', 'V' or 'V_star'")
    return float(np.sqrt(np.sum(w * c * c)))


def _snap_cell(t: float, cell_exponent: int) -> int:
    return int(math.floor(t * 2.0 ** cell_exponent + 0.5))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nominal grid snapped to the dyadic noise lattice.

    The stored cell indices are exact int64 lattice coordinates; actual
    step widths (cells times 2**-L) are used consistently for drift and
    noise, so snapping introduces no variance bias.
    """

    t0: float
    t_end: float
    step: float
    cell_exponent: int = DEFAULT_CELL_EXPONENT
    cells: np.ndarray = field(init=False, repr=False)
    points: int = field(init=False)

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise InvalidArgument("t_end must exceed t0")
        if self.step <= 0.0:
            raise InvalidArgument("step must be positive")
        width = 2.0 ** (-self.cell_exponent)
        if self.step < width:
            raise ConfigurationRejected(
                f"step {self.step:g} is below the noise lattice width "
                f"2**-{self.cell_exponent}; raise the step or cell_exponent")
        n = int(round((self.t_end - self.t0) / self.step))
        if n < 1 or abs((self.t_end - self.t0) / self.step - n) > 1e-9 * max(1.0, n):
            raise InvalidArgument("(t_end - t0)/step must be integral within 1e-9")
        idx = np.arange(n + 1, dtype=np.float64)
        cells = np.floor((self.t0 + idx * self.step) * 2.0 ** self.cell_exponent + 0.5)
        cells = cells.astype(np.int64)
        if np.any(np.diff(cells) <= 0):
            raise ConfigurationRejected("grid points collapsed on the noise lattice")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "points", n + 1)

    @property
    def n_steps(self) -> int:
        return self.points - 1

    @property
    def times(self) -> np.ndarray:
        """Snapped grid times (exact lattice positions)."""
        return self.cells * 2.0 ** (-self.cell_exponent)

    @property
    def step_widths(self) -> np.ndarray:
        return np.diff(self.cells) * 2.0 ** (-self.cell_exponent)

    @property
    def cell_scale(self) -> float:
        """Standard deviation of a single-cell increment, 2**(-L/2)."""
        return 2.0 ** (-self.cell_exponent / 2.0)


@dataclass(frozen=True)
class NoiseSource:
    """Counter-based cylindrical Wiener noise, diagonal in the eigenbasis.

    Each (seed, stream_id, mode, cell) yields one Gaussian; negative-time
    cells are drawn from ``negative_stream_id`` and mirrored, realizing an
    independent two-sided extension glued at t = 0. Stateless, hence safe
    to share across threads and processes.
    """

    seed: int
    modes: int
    stream_id: int = STREAM_W1
    cell_exponent: int = DEFAULT_CELL_EXPONENT
    negative_stream_id: int = -1

    def __post_init__(self):
        if self.modes < 1:
            raise InvalidArgument("modes must be >= 1")
        if self.negative_stream_id < 0:
            neg = STREAM_W2_NEG if self.stream_id == STREAM_W2 \
                else self.stream_id + _NEG_STREAM_OFFSET
            object.__setattr__(self, "negative_stream_id", neg)

    def _key(self):
        return (np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF),
                np.uint64(self.stream_id),
                np.uint64(self.negative_stream_id))

    def increment(self, s: float, t: float) -> np.ndarray:
        """Increment vector over [s, t]; variance (t - s) per mode."""
        return wiener_increment(self, s, t)

    def increments(self, grid: TimeGrid) -> np.ndarray:
        """Per-step increments on a grid, shape (n_steps, modes)."""
        if grid.cell_exponent != self.cell_exponent:
            raise InvalidArgument(
                f"grid lattice 2**-{grid.cell_exponent} does not match the "
                f"noise lattice 2**-{self.cell_exponent}")
        seed, spos, sneg = self._key()
        kr = get_kernels()
        return kr.wiener_increments(seed, spos, sneg, self.modes,
                                    grid.cells, grid.cell_scale)


def wiener_increment(src: NoiseSource, s: float, t: float) -> np.ndarray:
    """Brownian increment of all modes over the real interval [s, t].

    Endpoints snap to the source's dyadic lattice; s and t may be
    negative, and an interval straddling zero splits there because dyadic
    blocks never cross the origin.
    """
    if not s < t:
        raise InvalidArgument("need s < t")
    c0 = _snap_cell(s, src.cell_exponent)
    c1 = _snap_cell(t, src.cell_exponent)
    if c1 <= c0:
        raise InvalidArgument(
            f"interval [{s:g}, {t:g}] is below the noise lattice resolution "
            f"2**-{src.cell_exponent}")
    seed, spos, sneg = src._key()
    kr = get_kernels()
    scale = 2.0 ** (-src.cell_exponent / 2.0)
    out = np.empty(src.modes, np.float64)
    for k in range(src.modes):
        out[k] = kr.wiener_sum(seed, spos, sneg, k, c0, c1, scale)
    return out
