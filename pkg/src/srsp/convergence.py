"""Self-convergence ladders in dt and in the mode cutoff N."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .ensemble import Ensemble, l2_norm, orthonormalize, random_coefficients
from .integrator import STEPPERS
from .oracles import observed_orders
from .spectral import DomainSpec


@dataclass
class LadderRow:
    ladder: str
    level: int
    dt: float
    N: int
    error: float
    observed_order: float
    tail_norm: float


def evolve(e: Ensemble, dt: float, t_final: float, scheme: str = "strang") -> Ensemble:
    step = STEPPERS[scheme]
    for _ in range(int(round(t_final / dt))):
        e = step(e, dt)
    return e


def l2_distance(a: Ensemble, b: Ensemble) -> float:
    return l2_norm(a.with_psi(a.psi - b.psi))


def tail_norm(e: Ensemble) -> float:
    """Weighted L2 mass in modes above half the grid extent on any axis, relative to the total."""
    mask = np.zeros(e.dom.grid_shape, dtype=bool)
    for axis, n in enumerate(e.dom.grid_shape):
        idx = [slice(None)] * e.dom.d
        idx[axis] = slice(n // 2, None)
        mask[tuple(idx)] = True
    tail = l2_norm(e.with_psi(e.psi * mask))
    total = l2_norm(e)
    return tail / total if total > 0 else 0.0


def dt_ladder(e0: Ensemble, dt0: float, t_final: float, levels: int = 5, scheme: str = "strang",
              ref_factor: int = 64) -> list[LadderRow]:
    """Errors at dt0, dt0/2, ... against a reference run at (finest dt) / ref_factor."""
    if levels < 2:
        raise ValueError("dt ladder needs at least two levels")
    dts = [dt0 / 2 ** i for i in range(levels)]
    ref = evolve(e0, dts[-1] / ref_factor, t_final, scheme)
    errors = [l2_distance(evolve(e0, dt, t_final, scheme), ref) for dt in dts]
    orders = [np.nan] + observed_orders(dts, errors)
    n = e0.dom.N[0]
    return [LadderRow("dt", i, dt, n, err, order, tail_norm(ref))
            for i, (dt, err, order) in enumerate(zip(dts, errors, orders))]


def n_ladder(dom: DomainSpec, K: int, *, m: float, weights, coupling: bool, seed: int, damping: float,
             dt: float, t_final: float, levels: int = 3, scheme: str = "strang") -> list[LadderRow]:
    """Refine N by factors of two ending at ``dom.N``; errors against the finest level on common modes.

    Initial data is drawn on the coarsest retained block so every level
    starts from the same function.
    """
    if levels < 2:
        raise ValueError("N ladder needs at least two levels")
    doms = [DomainSpec(dom.L, tuple(max(1, n // 2 ** (levels - 1 - i)) for n in dom.N), dom.q)
            for i in range(levels)]
    coarse = doms[0]
    rng = np.random.default_rng(seed)
    block = (slice(None),) + tuple(slice(0, n) for n in coarse.N)
    c = orthonormalize(random_coefficients(coarse, K, rng, damping)[block])
    finals = []
    for d in doms:
        e = Ensemble(d, weights, spectral._pad(c, d), m=m, coupling=coupling)
        finals.append(evolve(e, dt, t_final, scheme))
    best = finals[-1]
    errors = []
    for d, fin in zip(doms, finals):
        diff = best.psi.copy()
        diff[(slice(None),) + tuple(slice(0, n) for n in d.grid_shape)] -= fin.psi
        errors.append(l2_norm(best.with_psi(diff)))
    # the finest level is the reference, so it carries no order
    orders = [np.nan] + observed_orders([1.0 / d.N[0] for d in doms[:-1]], errors[:-1]) + [np.nan]
    return [LadderRow("N", i, dt, d.N[0], err, order, tail_norm(fin))
            for i, (d, fin, err, order) in enumerate(zip(doms, finals, errors, orders))]
