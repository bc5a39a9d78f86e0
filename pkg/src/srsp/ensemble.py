"""Mixed-state ensembles and the functionals evaluated on them.

An :class:`Ensemble` holds K wavefunctions as sine-coefficient arrays over the
full grid mode set of its domain, together with constant occupation weights.
The density, Poisson potential, Hartree right-hand side, the weighted Sobolev
norms and the two energy variants are all defined here.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import spectral
from .spectral import DomainSpec

TAU_ORTH = 1e-8
TAU_POS = 1e-10


def normalize_weights(weights: Sequence[float]) -> np.ndarray:
    """Return ``weights / sum(weights)``; every entry must be strictly positive."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("at least one weight is required")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive (lambda_k > 0 for every k)")
    return w / w.sum()


def geometric_weights(K: int, r: float) -> np.ndarray:
    if not r > 0:
        raise ValueError(f"geometric ratio must be positive, got {r}")
    return normalize_weights(float(r) ** np.arange(1, K + 1))


@dataclass(frozen=True)
class Ensemble:
    """Truncated mixed state: weights, K coefficient arrays, particle mass.

    ``psi`` has shape ``(K, *dom.grid_shape)``.  Orthonormality is not enforced
    on construction (differences of states are ensembles too); use
    :meth:`check_orthonormal` where it matters.
    """

    dom: DomainSpec
    weights: np.ndarray
    psi: np.ndarray
    m: float = 1.0
    coupling: bool = True

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim == self.dom.d:
            psi = psi[None]
        if psi.shape[1:] != self.dom.grid_shape:
            psi = spectral._pad(psi, self.dom)
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape != (psi.shape[0],):
            raise ValueError(f"{w.size} weights for {psi.shape[0]} wavefunctions")
        if self.m < 0:
            raise ValueError(f"mass must be non-negative, got {self.m}")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "m", float(self.m))

    @property
    def K(self) -> int:
        return self.psi.shape[0]

    def replace(self, **changes) -> "Ensemble":
        return dataclasses.replace(self, **changes)

    def with_psi(self, psi: np.ndarray) -> "Ensemble":
        return dataclasses.replace(self, psi=psi)

    def scaled(self, s: float) -> "Ensemble":
        return self.with_psi(s * self.psi)

    def grid_values(self) -> np.ndarray:
        return spectral.synthesize(self.psi, self.dom)

    def check_orthonormal(self, tol: float = TAU_ORTH) -> None:
        defect = gram_defect(self)
        if defect > tol:
            raise ValueError(f"wavefunctions are not orthonormal: max|G - I| = {defect:.3e} > {tol:.1e}")


def orthonormalize(psi: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt over the leading axis in mode space."""
    psi = np.array(psi, dtype=complex, copy=True)
    flat = psi.reshape(psi.shape[0], -1)
    for k in range(flat.shape[0]):
        for j in range(k):
            flat[k] -= np.vdot(flat[j], flat[k]) * flat[j]
        norm = np.linalg.norm(flat[k])
        if norm == 0:
            raise ValueError(f"wavefunction {k} is linearly dependent on the previous ones")
        flat[k] /= norm
    return flat.reshape(psi.shape)


def random_coefficients(dom: DomainSpec, K: int, rng: np.random.Generator,
                        damping: float = 1.0, extent: Sequence[int] | None = None) -> np.ndarray:
    """Complex Gaussian coefficients on the mode block ``extent``, damped by (1 + mu)^-damping."""
    extent = dom.N if extent is None else tuple(extent)
    mu = dom.eigenvalues(extent)
    shape = (K,) + tuple(extent)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c = c * (1.0 + mu) ** (-damping)
    return spectral._pad(c, dom)


def random_ensemble(dom: DomainSpec, K: int, *, m: float = 1.0, weights=None, seed: int = 0,
                    damping: float = 1.0, coupling: bool = True) -> Ensemble:
    """Seeded orthonormal ensemble band-limited to the retained modes."""
    if K > dom.mode_count:
        raise ValueError(f"cannot build {K} orthonormal states from {dom.mode_count} retained modes")
    rng = np.random.default_rng(seed)
    psi = orthonormalize(random_coefficients(dom, K, rng, damping))
    w = np.full(K, 1.0 / K) if weights is None else normalize_weights(weights)
    return Ensemble(dom, w, psi, m=m, coupling=coupling)


def mode_state(dom: DomainSpec, modes: Sequence[Sequence[int] | int], *, m: float = 1.0,
               weights=None, coupling: bool = True) -> Ensemble:
    """Ensemble of single eigenmodes, one wavefunction per entry of ``modes``."""
    psi = np.zeros((len(modes),) + dom.grid_shape, dtype=complex)
    for k, mode in enumerate(modes):
        idx = tuple(int(n) - 1 for n in np.atleast_1d(mode))
        spectral.laplacian_eigenvalue(np.atleast_1d(mode), dom)
        psi[(k,) + idx] = 1.0
    w = np.full(len(modes), 1.0 / len(modes)) if weights is None else normalize_weights(weights)
    return Ensemble(dom, w, psi, m=m, coupling=coupling)


# -- density and potential ---------------------------------------------------


def density(e: Ensemble) -> np.ndarray:
    """n(x_j) = sum_k lambda_k |psi_k(x_j)|^2 on the interior grid."""
    values = e.grid_values()
    return np.tensordot(e.weights, values.real ** 2 + values.imag ** 2, axes=1)


@dataclass(frozen=True)
class PotentialField:
    """Potential on the grid together with its full sine-coefficient block."""

    values: np.ndarray
    coeffs: np.ndarray

    def min(self) -> float:
        return float(self.values.min()) if self.values.size else 0.0

    def check_sign(self, tol: float = TAU_POS) -> None:
        if self.min() < -tol:
            raise ValueError(f"potential undershoots zero: min V = {self.min():.3e}")


def poisson_solve(n: np.ndarray, dom: DomainSpec) -> PotentialField:
    """Dirichlet solve of -Lap V = n, mode by mode up to the grid Nyquist."""
    n = np.asarray(n)
    if np.iscomplexobj(n):
        if np.any(n.imag != 0):
            raise ValueError("density must be real")
        n = n.real
    coeffs = spectral.analyze(n, dom, full=True) / dom.eigenvalues()
    values = spectral.synthesize(coeffs, dom)
    return PotentialField(values, coeffs)


def potential(e: Ensemble) -> PotentialField:
    """V[Psi] for a coupled ensemble; identically zero when coupling is off."""
    if not e.coupling:
        zero = np.zeros(e.dom.grid_shape)
        return PotentialField(zero, zero.copy())
    return poisson_solve(density(e), e.dom)


# -- right-hand side ---------------------------------------------------------


def kinetic_part(e: Ensemble) -> np.ndarray:
    """-i T_m psi_k for every k."""
    return -1j * spectral.apply_multiplier(e.psi, lambda mu: spectral.kinetic_symbol(mu, e.m), e.dom)


def nonlinearity(e: Ensemble, V: PotentialField | None = None) -> np.ndarray:
    """F_V[Psi] = -i V[Psi] psi_k, evaluated pointwise and projected back to modes.

    Uses the ensemble's own potential even when coupling is off, since this
    is the map whose Lipschitz structure is probed.
    """
    if V is None:
        V = poisson_solve(density(e), e.dom)
    return -1j * spectral.analyze(V.values * e.grid_values(), e.dom, full=True)


def hartree_rhs(e: Ensemble) -> np.ndarray:
    """Coefficients of -i (T_m psi_k + V[Psi] psi_k)."""
    rhs = kinetic_part(e)
    if e.coupling:
        rhs = rhs + nonlinearity(e)
    return rhs


# -- norms and energies --------------------------------------------------------


def sobolev_norm(e: Ensemble, s: float = 0.0, kind: str = "homogeneous") -> float:
    """Weighted Sobolev norm of order s in {0, 1/2, 1}.

    homogeneous:   (sum_k lambda_k sum_n mu_n^s |c_k[n]|^2)^(1/2)
    inhomogeneous: (sum_k lambda_k sum_n (1 + mu_n^s) |c_k[n]|^2)^(1/2), s > 0
    """
    if s not in (0, 0.5, 1):
        raise ValueError(f"unsupported Sobolev order {s}")
    if kind not in ("homogeneous", "inhomogeneous"):
        raise ValueError(f"unknown norm kind {kind!r}")
    power = np.abs(e.psi) ** 2
    if s == 0:
        symbol = 1.0
    else:
        mu = e.dom.eigenvalues()
        symbol = mu ** s if kind == "homogeneous" else 1.0 + mu ** s
    per_k = np.sum(symbol * power, axis=tuple(range(1, power.ndim)))
    return math.sqrt(float(np.dot(e.weights, per_k)))


def l2_norm(e: Ensemble) -> float:
    return sobolev_norm(e, 0)


def kinetic_energy(e: Ensemble, variant: str = "Tm") -> float:
    mu = e.dom.eigenvalues()
    if variant == "Tm":
        symbol = spectral.kinetic_symbol(mu, e.m)
    elif variant == "half_p":
        symbol = np.sqrt(mu)
    else:
        raise ValueError(f"unsupported energy variant {variant!r}")
    per_k = np.sum(symbol * np.abs(e.psi) ** 2, axis=tuple(range(1, e.psi.ndim)))
    return float(np.dot(e.weights, per_k))


def field_energy(V: PotentialField, dom: DomainSpec) -> float:
    """1/2 ||grad V||^2 = 1/2 sum_n mu_n |V_n|^2."""
    return 0.5 * float(np.sum(dom.eigenvalues() * np.abs(V.coeffs) ** 2))


def field_energy_quadrature(V: PotentialField, n: np.ndarray, dom: DomainSpec) -> float:
    """1/2 integral of V n, equal to :func:`field_energy` by parts."""
    return 0.5 * float(spectral.quadrature(V.values * n, dom))


def potential_energy(e: Ensemble) -> float:
    """1/2 ||grad V[Psi]||^2 from the ensemble's own density (regardless of coupling)."""
    return field_energy(poisson_solve(density(e), e.dom), e.dom)


def energy(e: Ensemble, variant: str = "Tm") -> float:
    """Kinetic energy of the chosen variant plus the field energy when coupled."""
    total = kinetic_energy(e, variant)
    if e.coupling:
        total += potential_energy(e)
    return total


def gram_matrix(e: Ensemble) -> np.ndarray:
    flat = e.psi.reshape(e.K, -1)
    return flat.conj() @ flat.T


def gram_defect(e: Ensemble) -> float:
    return float(np.max(np.abs(gram_matrix(e) - np.eye(e.K)))) if e.K else 0.0


def _on_grid(x, dom: DomainSpec) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dom.d,):
        raise ValueError(f"point {x} does not match dimension {dom.d}")
    j = x / np.asarray(dom.L) * np.asarray(dom.M)
    idx = np.rint(j)
    if np.any(np.abs(j - idx) > 1e-9) or np.any(idx < 1) or np.any(idx > np.asarray(dom.M) - 1):
        raise ValueError(f"point {tuple(x)} is not an interior grid node")
    return x


def density_matrix_element(e: Ensemble, x, y) -> complex:
    """Kernel rho(x, y) = sum_k lambda_k psi_k(x) conj(psi_k(y)) at two grid nodes."""
    px = spectral.point_values(e.psi, e.dom, _on_grid(x, e.dom))
    py = spectral.point_values(e.psi, e.dom, _on_grid(y, e.dom))
    return complex(np.sum(e.weights * px * py.conj()))
