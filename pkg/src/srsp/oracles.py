"""Independent reference computations used by ``srsp verify``.

These deliberately avoid the fast transforms: direct series evaluation and a
second-order finite-difference Poisson solve.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

from . import spectral
from .ensemble import poisson_solve
from .spectral import DomainSpec


def direct_synthesis_error(dom: DomainSpec, seed: int = 0, samples: int = 32) -> float:
    """Max relative error of :func:`spectral.synthesize` against direct series sums at sampled nodes."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(dom.N) + 1j * rng.standard_normal(dom.N)
    grid = spectral.synthesize(c, dom)
    axes = dom.grid_points()
    worst = 0.0
    scale = float(np.max(np.abs(grid)))
    for _ in range(samples):
        j = tuple(int(rng.integers(0, n)) for n in dom.grid_shape)
        x = [axes[i][j[i]] for i in range(dom.d)]
        worst = max(worst, abs(spectral.point_values(c, dom, x) - grid[j]) / scale)
    return worst


def eigenvalue_table_error(dom: DomainSpec, samples: int = 32, seed: int = 0) -> float:
    """Max relative mismatch between the eigenvalue table and the closed form."""
    rng = np.random.default_rng(seed)
    table = dom.eigenvalues()
    worst = 0.0
    for _ in range(samples):
        j = tuple(int(rng.integers(0, n)) for n in dom.grid_shape)
        exact = spectral.laplacian_eigenvalue([i + 1 for i in j], dom)
        worst = max(worst, abs(table[j] - exact) / exact)
    return worst


def fd_poisson_1d(n: np.ndarray, length: float) -> np.ndarray:
    """Three-point Dirichlet solve of -V'' = n on the interior nodes of a uniform grid."""
    n = np.asarray(n, dtype=float)
    h = length / (n.size + 1)
    bands = np.zeros((3, n.size))
    bands[0, 1:] = -1.0
    bands[1, :] = 2.0
    bands[2, :-1] = -1.0
    return solve_banded((1, 1), bands, n * h * h)


def smooth_source(x: np.ndarray, length: float, seed: int = 0, modes: int = 6) -> np.ndarray:
    """Band-limited source sum_n a_n sin(n pi x / L) with seeded amplitudes."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(modes) / np.arange(1, modes + 1) ** 2
    n = np.arange(1, modes + 1)
    return np.sin(np.outer(x, n) * np.pi / length) @ a


def poisson_fd_study(length: float = 1.0, grids=(64, 128, 256), seed: int = 0) -> list[tuple[int, float]]:
    """Relative L2 gap between finite-difference and spectral Poisson solves per grid size M."""
    out = []
    for M in grids:
        dom = DomainSpec((length,), (M // 2,), 2)
        (x,) = dom.grid_points()
        src = smooth_source(x, length, seed)
        spec = poisson_solve(src, dom).values
        fd = fd_poisson_1d(src, length)
        out.append((M, float(np.linalg.norm(fd - spec) / np.linalg.norm(spec))))
    return out


def observed_orders(h, err) -> list[float]:
    """log(err_i / err_{i+1}) / log(h_i / h_{i+1}) for consecutive levels."""
    orders = []
    for (h0, e0), (h1, e1) in zip(zip(h, err), zip(h[1:], err[1:])):
        if e0 > 0 and e1 > 0:
            orders.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            orders.append(math.nan)
    return orders
