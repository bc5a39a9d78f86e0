"""Monitored quantities and the seedable verification probes."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import spectral
from .ensemble import (
    Ensemble,
    density,
    field_energy,
    gram_defect,
    kinetic_energy,
    nonlinearity,
    poisson_solve,
    random_coefficients,
    sobolev_norm,
)
from .spectral import DomainSpec

RECORD_FIELDS = ("t", "mass", "energy_Tm", "energy_half_p", "potential_energy",
                 "h12", "h1", "gram_defect", "density_min")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy_Tm: float
    energy_half_p: float
    potential_energy: float
    h12: float
    h1: float
    gram_defect: float
    density_min: float

    def as_row(self) -> tuple[float, ...]:
        return dataclasses.astuple(self)


def record(e: Ensemble, t: float) -> DiagnosticsRecord:
    n = density(e)
    pot = field_energy(poisson_solve(n, e.dom), e.dom)
    coupled = pot if e.coupling else 0.0
    return DiagnosticsRecord(
        t=float(t),
        mass=sobolev_norm(e, 0),
        energy_Tm=kinetic_energy(e, "Tm") + coupled,
        energy_half_p=kinetic_energy(e, "half_p") + coupled,
        potential_energy=pot,
        h12=sobolev_norm(e, 0.5),
        h1=sobolev_norm(e, 1),
        gram_defect=gram_defect(e),
        density_min=float(n.min()) if n.size else 0.0,
    )


# -- random states for the probes --------------------------------------------


def _random_state(dom: DomainSpec, K: int, rng: np.random.Generator, m: float = 1.0) -> Ensemble:
    """Random (not orthonormal) ensemble spread over the whole grid mode set."""
    damping = rng.uniform(0.0, 1.5)
    psi = random_coefficients(dom, K, rng, damping, extent=dom.grid_shape)
    weights = rng.uniform(0.05, 1.0, K)
    return Ensemble(dom, weights / weights.sum(), psi, m=m)


@dataclass
class BoundReport:
    """Outcome of a probe that checks an inequality on random states."""

    name: str
    seed: int
    trials: int
    violations: int = 0
    worst: dict[str, float] = field(default_factory=dict)
    bounds: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> str:
        status = "PASS" if self.passed else f"FAIL (seed={self.seed})"
        parts = [f"{k}={v:.12g}" for k, v in {**self.worst, **self.bounds}.items()]
        return f"{self.name}: {status} trials={self.trials} violations={self.violations} " + " ".join(parts)


# slack for comparing a ratio against a bound it can attain exactly
_RTOL = 1e-12


def norm_equivalence_bounds(dom: DomainSpec) -> tuple[float, float]:
    cp = dom.poincare_constant
    return math.sqrt(1.0 + 1.0 / math.sqrt(cp)), math.sqrt(1.0 + 1.0 / cp)


def verify_norm_equivalence(dom: DomainSpec, seed: int = 0, trials: int = 100, K: int = 3) -> BoundReport:
    """Check 1 <= inhom/hom <= sqrt(1 + 1/c_p^s) for s = 1/2 and s = 1 on random ensembles."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    b_half, b_one = norm_equivalence_bounds(dom)
    rep = BoundReport("norm_equivalence", seed, trials,
                      bounds={"bound_h12": b_half, "bound_h1": b_one})
    rng = np.random.default_rng(seed)
    lo_half = lo_one = math.inf
    hi_half = hi_one = 0.0
    for _ in range(trials):
        e = _random_state(dom, K, rng)
        r_half = sobolev_norm(e, 0.5, "inhomogeneous") / sobolev_norm(e, 0.5)
        r_one = sobolev_norm(e, 1, "inhomogeneous") / sobolev_norm(e, 1)
        lo_half, hi_half = min(lo_half, r_half), max(hi_half, r_half)
        lo_one, hi_one = min(lo_one, r_one), max(hi_one, r_one)
        if (r_half < 1 - _RTOL or r_half > b_half * (1 + _RTOL)
                or r_one < 1 - _RTOL or r_one > b_one * (1 + _RTOL)):
            rep.violations += 1
    # the lowest mode attains the H^1/2 bound
    lowest = Ensemble(dom, [1.0], spectral._pad(np.ones((1,) + (1,) * dom.d, complex), dom))
    attained = sobolev_norm(lowest, 0.5, "inhomogeneous") / sobolev_norm(lowest, 0.5)
    if abs(attained - b_half) > 1e-12:
        rep.violations += 1
        rep.notes.append(f"lowest mode ratio {attained!r} != bound {b_half!r}")
    rep.worst.update(max_ratio_h12=hi_half, min_ratio_h12=lo_half, max_ratio_h1=hi_one,
                     min_ratio_h1=lo_one, lowest_mode_ratio_h12=attained)
    return rep


def verify_kinetic_bound(dom: DomainSpec, m: float, seed: int = 0, trials: int = 100, K: int = 3) -> BoundReport:
    """Check ||T_m Psi||^2 <= ||Psi||_{H1 hom}^2 + 2 m^2 ||Psi||^2 on random ensembles."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rep = BoundReport(f"kinetic_bound(m={m:g})", seed, trials)
    rng = np.random.default_rng(seed)
    symbol = spectral.kinetic_symbol(dom.eigenvalues(), m)
    tightest = 0.0
    for _ in range(trials):
        e = _random_state(dom, K, rng, m=m)
        lhs = e.replace(psi=e.psi * symbol)
        lhs_sq = sobolev_norm(lhs, 0) ** 2
        rhs_sq = sobolev_norm(e, 1) ** 2 + 2 * m * m * sobolev_norm(e, 0) ** 2
        tightest = max(tightest, lhs_sq / rhs_sq)
        if lhs_sq > rhs_sq * (1 + _RTOL):
            rep.violations += 1
    rep.worst["max_ratio"] = tightest
    return rep


@dataclass
class LipschitzReport:
    seed: int
    trials: int
    quotients: np.ndarray
    scaling_errors: dict[float, float]

    @property
    def max_quotient(self) -> float:
        return float(np.max(self.quotients)) if self.quotients.size else 0.0

    def summary(self) -> str:
        scal = " ".join(f"s={s:g}:{err:.2e}" for s, err in self.scaling_errors.items())
        return (f"lipschitz: seed={self.seed} pairs={self.trials} max_quotient={self.max_quotient:.6g} "
                f"scaling_rel_err[{scal}]")


def h1_inhom(e: Ensemble) -> float:
    return sobolev_norm(e, 1, "inhomogeneous")


def lipschitz_quotient(psi: Ensemble, phi: Ensemble) -> float:
    """||F_V[Psi] - F_V[Phi]|| / ((||Psi||^2 + ||Phi||^2) ||Psi - Phi||), all in the H1 norm."""
    diff = psi.with_psi(psi.psi - phi.psi)
    dnorm = h1_inhom(diff)
    if dnorm == 0:
        return 0.0
    num = h1_inhom(psi.with_psi(nonlinearity(psi) - nonlinearity(phi)))
    return num / ((h1_inhom(psi) ** 2 + h1_inhom(phi) ** 2) * dnorm)


def _raw_quotient(psi: Ensemble, phi: Ensemble) -> float:
    num = h1_inhom(psi.with_psi(nonlinearity(psi) - nonlinearity(phi)))
    return num / h1_inhom(psi.with_psi(psi.psi - phi.psi))


def probe_lipschitz(dom: DomainSpec, K: int = 2, seed: int = 0, trials: int = 100,
                    scales: Sequence[float] = (2.0, 10.0)) -> LipschitzReport:
    """Sample normalized Lipschitz quotients of F_V on pairs with H1 norms in [0.5, 2].

    Also measures the relative error of the s^2 law for the un-normalized
    quotient under (Psi, Phi) -> (s Psi, s Phi) on the first pair.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    quotients = np.empty(trials)
    first = None
    for i in range(trials):
        pair = []
        for _ in range(2):
            e = _random_state(dom, K, rng)
            pair.append(e.scaled(rng.uniform(0.5, 2.0) / h1_inhom(e)))
        psi, phi = pair[0], pair[1].replace(weights=pair[0].weights)
        quotients[i] = lipschitz_quotient(psi, phi)
        if first is None:
            first = (psi, phi)
    scaling = {}
    base = _raw_quotient(*first)
    for s in scales:
        scaled = _raw_quotient(first[0].scaled(s), first[1].scaled(s))
        scaling[float(s)] = abs(scaled / (s * s * base) - 1.0)
    return LipschitzReport(seed, trials, quotients, scaling)


# -- conservation summary ----------------------------------------------------


@dataclass
class ConservationSummary:
    drifts: dict[str, float]
    conserved_energy: str
    gronwall_slope: float
    gronwall_intercept: float
    max_gram_defect: float
    min_density: float

    def lines(self) -> list[str]:
        out = [f"drift[{k}] = {v:.6e}" for k, v in self.drifts.items()]
        out.append(f"conserved energy variant: {self.conserved_energy}")
        out.append(f"gronwall slope of log h1: {self.gronwall_slope:.6e} (envelope intercept {self.gronwall_intercept:.6e})")
        out.append(f"max gram defect: {self.max_gram_defect:.3e}")
        return out


def relative_drift(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    scale = abs(v[0])
    dev = float(np.max(np.abs(v - v[0])))
    return dev / scale if scale > 0 else dev


def gronwall_envelope(t: Sequence[float], h1: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log h1 against t and the intercept making it an upper envelope."""
    t = np.asarray(t, dtype=float)
    y = np.log(np.asarray(h1, dtype=float))
    if t.size < 2 or np.ptp(t) == 0:
        return 0.0, float(y.max()) if y.size else 0.0
    slope = float(np.polyfit(t, y, 1)[0])
    return slope, float(np.max(y - slope * t))


def conservation_report(records: Sequence[DiagnosticsRecord]) -> ConservationSummary:
    if len(records) < 2:
        raise ValueError("conservation_report needs at least two records")
    cols = {name: [getattr(r, name) for r in records] for name in RECORD_FIELDS}
    drifts = {name: relative_drift(cols[name]) for name in ("mass", "energy_Tm", "energy_half_p")}
    conserved = "Tm" if drifts["energy_Tm"] <= drifts["energy_half_p"] else "half_p"
    h1 = np.asarray(cols["h1"])
    if np.all(h1 > 0):
        slope, intercept = gronwall_envelope(cols["t"], h1)
    else:
        slope, intercept = 0.0, -math.inf
    return ConservationSummary(drifts, conserved, slope, intercept,
                               max(cols["gram_defect"]), min(cols["density_min"]))
