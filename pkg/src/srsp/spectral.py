"""Dirichlet sine eigenbasis of a box and the transforms built on it.

The eigenfunctions of the Dirichlet Laplacian on ``[0, L_1] x ... x [0, L_d]``
are ``e_n(x) = prod_i sqrt(2/L_i) sin(n_i pi x_i / L_i)`` with eigenvalues
``mu_n = sum_i (n_i pi / L_i)**2``.  Point values live on the type-I sine grid
``x_j = j L_i / M_i`` (``1 <= j <= M_i - 1``), on which the first ``M_i - 1``
sine modes are discretely orthonormal with the cell-volume quadrature weight.

Coefficient arrays are stored with one axis per dimension (row-major flat
order when raveled) and may carry leading batch axes.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import fft


@dataclass(frozen=True)
class DomainSpec:
    """Box geometry, mode cutoffs and collocation grid resolution.

    ``N`` is the band limit of retained modes; the grid has ``M_i = q * N_i``
    subintervals per axis, i.e. ``M_i - 1`` interior points, and resolves the
    ``M_i - 1`` lowest sine modes exactly.
    """

    L: tuple[float, ...]
    N: tuple[int, ...]
    q: int = 2

    def __post_init__(self):
        L = tuple(float(x) for x in np.atleast_1d(self.L))
        N = tuple(int(x) for x in np.atleast_1d(self.N))
        if len(N) == 1 and len(L) > 1:
            N = N * len(L)
        if len(L) == 1 and len(N) > 1:
            L = L * len(N)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "N", N)
        if len(L) not in (1, 2, 3) or len(L) != len(N):
            raise ValueError(f"dimension must be 1, 2 or 3 with matching L and N, got L={L}, N={N}")
        if not all(math.isfinite(x) and x > 0 for x in L):
            raise ValueError(f"box lengths must be positive, got {L}")
        if not all(n >= 1 for n in N):
            raise ValueError(f"mode cutoffs must be >= 1, got {N}")
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"oversampling factor q must be an integer >= 2, got {self.q}")
        object.__setattr__(self, "q", int(self.q))

    @classmethod
    def box(cls, d: int, length: float = 1.0, modes: int = 32, q: int = 2) -> "DomainSpec":
        return cls((length,) * d, (modes,) * d, q)

    @property
    def d(self) -> int:
        return len(self.L)

    @property
    def M(self) -> tuple[int, ...]:
        return tuple(self.q * n for n in self.N)

    @property
    def grid_shape(self) -> tuple[int, ...]:
        """Interior grid points per axis; also the extent of the full mode set."""
        return tuple(m - 1 for m in self.M)

    @property
    def mode_count(self) -> int:
        return math.prod(self.N)

    @property
    def grid_count(self) -> int:
        return math.prod(self.grid_shape)

    @property
    def cell_volume(self) -> float:
        return math.prod(L / M for L, M in zip(self.L, self.M))

    @property
    def volume(self) -> float:
        return math.prod(self.L)

    @property
    def poincare_constant(self) -> float:
        """Smallest Dirichlet eigenvalue, sum_i (pi / L_i)**2."""
        return sum((math.pi / L) ** 2 for L in self.L)

    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    def grid_points(self) -> tuple[np.ndarray, ...]:
        """1-D node coordinates along each axis."""
        return tuple(np.arange(1, M) * (L / M) for L, M in zip(self.L, self.M))

    def eigenvalues(self, extent: Sequence[int] | None = None) -> np.ndarray:
        """Dirichlet eigenvalues on the mode block ``1..extent_i`` (full grid block by default)."""
        extent = self.grid_shape if extent is None else tuple(extent)
        return eigenvalue_table(self.L, extent)


def eigenvalue_table(L: tuple[float, ...], extent: tuple[int, ...]) -> np.ndarray:
    return _eigenvalue_table(tuple(L), tuple(int(n) for n in extent))


@functools.lru_cache(maxsize=64)
def _eigenvalue_table(L, extent):
    mu = np.zeros(extent)
    for axis, (length, n) in enumerate(zip(L, extent)):
        shape = [1] * len(extent)
        shape[axis] = n
        mu = mu + ((np.arange(1, n + 1) * np.pi / length) ** 2).reshape(shape)
    mu.setflags(write=False)
    return mu


def laplacian_eigenvalue(mode: Sequence[int] | int, dom: DomainSpec) -> float:
    mode = tuple(np.atleast_1d(mode).astype(int).tolist())
    if len(mode) != dom.d:
        raise ValueError(f"mode {mode} does not match dimension {dom.d}")
    for n, top in zip(mode, dom.grid_shape):
        if not 1 <= n <= top:
            raise IndexError(f"mode index {mode} outside 1..{dom.grid_shape}")
    return float(sum((n * math.pi / L) ** 2 for n, L in zip(mode, dom.L)))


def kinetic_symbol(mu, m: float):
    """Symbol of the semi-relativistic kinetic operator, sqrt(mu + m^2) - m.

    Written as mu / (sqrt(mu + m^2) + m) to avoid cancellation for mu << m^2.
    """
    mu = np.asarray(mu, dtype=float)
    if m < 0 or np.any(mu < 0):
        raise ValueError("kinetic_symbol needs mu >= 0 and m >= 0")
    if m == 0:
        out = np.sqrt(mu)
    else:
        out = mu / (np.sqrt(mu + m * m) + m)
    return out if out.ndim else float(out)


def _check_extent(shape: tuple[int, ...], dom: DomainSpec) -> tuple[int, ...]:
    tail = shape[-dom.d:] if len(shape) >= dom.d else ()
    if len(tail) != dom.d or any(n > g or n < 1 for n, g in zip(tail, dom.grid_shape)):
        raise ValueError(f"coefficient block {shape} incompatible with grid modes {dom.grid_shape}")
    return tail


def _pad(c: np.ndarray, dom: DomainSpec) -> np.ndarray:
    tail = _check_extent(c.shape, dom)
    if tail == dom.grid_shape:
        return c
    out = np.zeros(c.shape[: c.ndim - dom.d] + dom.grid_shape, dtype=c.dtype)
    out[(...,) + tuple(slice(0, n) for n in tail)] = c
    return out


def _synthesis_scale(dom: DomainSpec) -> float:
    return math.prod(math.sqrt(2.0 / L) / 2.0 for L in dom.L)


def synthesize(c: np.ndarray, dom: DomainSpec, workers: int | None = None) -> np.ndarray:
    """Evaluate ``sum_n c[n] e_n`` at every interior grid node.

    ``c`` may cover any leading block of the grid mode set; missing modes are
    treated as zero.  Leading batch axes are preserved.
    """
    c = np.asarray(c)
    full = _pad(c, dom)
    return fft.dstn(full, type=1, axes=dom.axes(), workers=workers) * _synthesis_scale(dom)


def analyze(f: np.ndarray, dom: DomainSpec, full: bool = False, workers: int | None = None) -> np.ndarray:
    """Discrete projection of grid values onto the sine modes.

    Returns the retained ``N`` block by default, or every grid mode with
    ``full=True``.  Exact inverse of :func:`synthesize` on the grid mode set.
    """
    f = np.asarray(f)
    if f.shape[f.ndim - dom.d:] != dom.grid_shape:
        raise ValueError(f"grid field shape {f.shape} does not match grid {dom.grid_shape}")
    c = fft.dstn(f, type=1, axes=dom.axes(), workers=workers) * (_synthesis_scale(dom) * dom.cell_volume)
    if full:
        return c
    return c[(...,) + tuple(slice(0, n) for n in dom.N)]


def quadrature(f: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """Grid quadrature of ``f`` over the box (sum over the trailing grid axes)."""
    return np.sum(f, axis=dom.axes()) * dom.cell_volume


def apply_multiplier(c: np.ndarray, g: Callable[[np.ndarray], np.ndarray], dom: DomainSpec) -> np.ndarray:
    """Multiply each coefficient by ``g(mu_n)``; ``c`` may be a retained or full mode block."""
    c = np.asarray(c)
    mu = dom.eigenvalues(_check_extent(c.shape, dom))
    factor = np.asarray(g(mu))
    if not np.all(np.isfinite(factor)):
        raise ValueError("multiplier is not finite on the retained eigenvalues")
    return c * factor


def mode_inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def point_values(c: np.ndarray, dom: DomainSpec, x: Sequence[float]) -> np.ndarray:
    """Evaluate the sine series of ``c`` (batch axes allowed) at one point ``x``."""
    c = np.asarray(c)
    tail = _check_extent(c.shape, dom)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dom.d,):
        raise ValueError(f"point {x} does not match dimension {dom.d}")
    out = c
    # contract the trailing axes one at a time, last axis first
    for axis in reversed(range(dom.d)):
        n = np.arange(1, tail[axis] + 1)
        basis = math.sqrt(2.0 / dom.L[axis]) * np.sin(n * np.pi * x[axis] / dom.L[axis])
        out = out @ basis
    return out
