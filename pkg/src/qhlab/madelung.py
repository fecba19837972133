"""Polar decomposition of wavefunctions and the fluctuation momentum fields.

The complex state is split into amplitude R, action-phase S, and probability
density P = R^2.  From the logarithmic gradient grad(psi)/psi we obtain the
convective momentum hbar*Im, the osmotic momentum -hbar*Re, the velocity
field, and the local energy-fluctuation field (hbar/2) div v.

Nodes (zeros of R) make the osmotic quantities singular.  They are masked
and reported, never regularized: masked entries are NaN in the returned
fields and are excluded from norms and averages.
"""
from __future__ import annotations

from dataclasses import InitVar, dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateStateError, InvalidStateError
from .fields import (
    ComplexField,
    Grid,
    PhysicalConstants,
    RealField,
    VectorField,
    divergence,
    gradient,
    integrate,
)

NORM_TOL = 1e-9
DEFAULT_NODE_EPS = 1e-6
# Floor (relative to the field maximum) used when a pointwise residual is
# divided by a quantity that crosses zero.
RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class Wavefunction:
    """Normalized complex state with its physical constants and a time tag."""

    psi: ComplexField
    constants: PhysicalConstants = PhysicalConstants()
    time: float = 0.0
    norm_check: InitVar[bool] = True

    def __post_init__(self, norm_check: bool):
        if norm_check:
            nrm = self.norm()
            if abs(nrm - 1.0) > NORM_TOL:
                raise InvalidStateError(
                    f"wavefunction norm {nrm!r} deviates from 1 by more than {NORM_TOL}"
                )

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    def norm(self) -> float:
        return float(np.sqrt(integrate(RealField(self.grid, np.abs(self.psi.values) ** 2))))

    def density(self) -> RealField:
        r = np.abs(self.psi.values)
        return RealField(self.grid, r * r)

    def with_values(self, values, time: Optional[float] = None,
                    norm_check: bool = True) -> "Wavefunction":
        return Wavefunction(
            ComplexField(self.grid, values),
            self.constants,
            self.time if time is None else time,
            norm_check=norm_check,
        )


def normalized_wavefunction(grid: Grid, values, constants=PhysicalConstants(),
                            time: float = 0.0) -> Wavefunction:
    """Scale raw complex samples to unit norm and wrap them."""
    vals = np.asarray(values, dtype=np.complex128)
    nrm = np.sqrt(np.sum(np.abs(vals) ** 2) * grid.volume_element)
    if not nrm > 0:
        raise InvalidStateError("cannot normalize an all-zero state")
    return Wavefunction(ComplexField(grid, vals / nrm), constants, time)


def node_mask_of(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS) -> np.ndarray:
    """Boolean mask of cells where the amplitude is below eps_node * max."""
    r = np.abs(psi.psi.values)
    rmax = r.max()
    if not rmax > 0:
        raise InvalidStateError("all-zero state has no amplitude")
    return r < eps_node * rmax


def log_gradient(psi: Wavefunction, method: str = "spectral") -> VectorField:
    """grad(psi)/psi as a complex vector field (NaN where psi is exactly 0).

    Real part is grad(R)/R, imaginary part is grad(S)/hbar; all dynamical
    quantities are built from this form rather than from an unwrapped phase.
    """
    grad_psi = gradient(psi.psi, method)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = grad_psi.values / psi.psi.values[None, ...]
    return VectorField(psi.grid, g)


@dataclass(frozen=True)
class PolarFields:
    """Amplitude/action-phase/probability triple with node bookkeeping.

    S is the sweep-unwrapped phase times hbar, anchored to its principal
    value at gauge_ref (a flat row-major grid index).  It is a diagnostic;
    gradients of S used elsewhere come from log_gradient.
    """

    R: RealField
    S: RealField
    P: RealField
    node_mask: np.ndarray = field(repr=False)
    gauge_ref: int = 0
    eps_node: float = DEFAULT_NODE_EPS

    def __post_init__(self):
        mask = np.asarray(self.node_mask, dtype=bool)
        if mask.shape != self.R.grid.shape:
            raise InvalidStateError("node mask shape does not match grid")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "node_mask", mask)
        r = self.R.values
        if np.any(r < 0):
            raise InvalidStateError("amplitude R must be nonnegative")
        if not np.allclose(self.P.values, r * r, rtol=1e-9, atol=1e-12 * max(r.max() ** 2, 1.0)):
            raise InvalidStateError("P must equal R^2 pointwise")
        total = integrate(self.P)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidStateError(f"density integrates to {total!r}, expected 1")

    @property
    def masked_fraction(self) -> float:
        return float(np.mean(self.node_mask))


def decompose(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS,
              gauge_ref: int = 0) -> PolarFields:
    """Split psi into (R, S, P) with the phase unwrapped along a row-major sweep."""
    vals = psi.psi.values
    r = np.abs(vals)
    if not r.max() > 0:
        raise InvalidStateError("cannot decompose an all-zero state")
    hbar = psi.constants.hbar
    angles = np.angle(vals).ravel()
    unwrapped = np.unwrap(angles)
    unwrapped = unwrapped - unwrapped[gauge_ref] + angles[gauge_ref]
    s = (hbar * unwrapped).reshape(vals.shape)
    grid = psi.grid
    return PolarFields(
        R=RealField(grid, r),
        S=RealField(grid, s),
        P=RealField(grid, r * r),
        node_mask=r < eps_node * r.max(),
        gauge_ref=gauge_ref,
        eps_node=eps_node,
    )


def recompose(polar: PolarFields, constants: PhysicalConstants = PhysicalConstants(),
              time: float = 0.0) -> Wavefunction:
    """Rebuild psi = R * exp(i S / hbar) from polar fields."""
    r = polar.R.values
    if np.any(r < 0):
        raise InvalidStateError("amplitude R must be nonnegative")
    vals = r * np.exp(1j * polar.S.values / constants.hbar)
    return Wavefunction(ComplexField(polar.R.grid, vals), constants, time)


@dataclass(frozen=True)
class MomentumFields:
    """Convective/osmotic momenta, velocity, and energy-fluctuation fields.

    Entries under node_mask are NaN.  deltaE is computed from the divergence
    of the velocity with masked cells zero-filled first, so the FFT is not
    poisoned; those cells are masked in the output as well.
    """

    p_conv: VectorField
    p_osm: VectorField
    v: VectorField
    k_u: VectorField
    deltaE: RealField
    node_mask: np.ndarray = field(repr=False)

    @property
    def masked_fraction(self) -> float:
        return float(np.mean(self.node_mask))


def momentum_fields(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS,
                    method: str = "spectral") -> MomentumFields:
    """Momentum decomposition from the logarithmic gradient of psi."""
    mask = node_mask_of(psi, eps_node)
    frac = float(np.mean(mask))
    if frac > 0.5:
        raise DegenerateStateError(
            f"node fraction {frac:.3f} exceeds 0.5; momentum fields are undefined"
        )
    hbar = psi.constants.hbar
    m = psi.constants.mass
    g = log_gradient(psi, method).values
    g = np.where(mask[None, ...], np.nan + 0j, g)
    p_conv = hbar * g.imag
    p_osm = -hbar * g.real
    v = p_conv / m
    k_u = p_osm / hbar
    v_filled = np.where(mask[None, ...], 0.0, v)
    div_v = divergence(VectorField(psi.grid, v_filled), method).values
    delta_e = np.where(mask, np.nan, 0.5 * hbar * div_v)
    grid = psi.grid
    return MomentumFields(
        p_conv=VectorField(grid, p_conv),
        p_osm=VectorField(grid, p_osm),
        v=VectorField(grid, v),
        k_u=VectorField(grid, k_u),
        deltaE=RealField(grid, delta_e),
        node_mask=mask,
    )


def momentum_identity_residual(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS,
                               method: str = "spectral") -> RealField:
    """Pointwise defect of |grad psi / psi|^2 = (grad R/R)^2 + (grad S/hbar)^2.

    The left side is evaluated directly as |grad psi|^2 / P, the right side
    from the real/imaginary parts of the logarithmic gradient.  Returned
    relative to the local magnitude, NaN under the node mask.
    """
    mask = node_mask_of(psi, eps_node)
    grad_psi = gradient(psi.psi, method).values
    vals = psi.psi.values
    p = (vals * vals.conj()).real
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = np.sum((grad_psi * grad_psi.conj()).real, axis=0) / p
        g = grad_psi / vals[None, ...]
    amp_sq = np.sum(g.real ** 2, axis=0)
    phase_sq = np.sum(g.imag ** 2, axis=0)
    finite = np.isfinite(lhs) & ~mask
    scale = lhs[finite].max() if np.any(finite) else 1.0
    eps = RESIDUAL_FLOOR * max(scale, 1.0)
    residual = np.abs(lhs - amp_sq - phase_sq) / (lhs + eps)
    residual = np.where(mask, np.nan, residual)
    return RealField(psi.grid, residual)


@dataclass(frozen=True)
class FluctuationAverages:
    """Ensemble averages of the vacuum fluctuation terms and their relation.

    relation_residual is |cross_term - (m/hbar^2) <deltaE>|; the two sides
    are tied by integration by parts on a periodic grid.
    """

    mean_delta_e: float
    cross_term: float
    relation_residual: float
    masked_fraction: float


def fluctuation_averages(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS,
                         method: str = "spectral") -> FluctuationAverages:
    """<deltaE> = int P (hbar/2) div v and X = int P k . k_u, plus their relation."""
    mf = momentum_fields(psi, eps_node, method)
    p = psi.density().values
    hbar = psi.constants.hbar
    m = psi.constants.mass
    mask = mf.node_mask
    de_integrand = np.where(mask, 0.0, p * mf.deltaE.values)
    k = mf.p_conv.values / hbar
    kku = np.sum(k * mf.k_u.values, axis=0)
    x_integrand = np.where(mask, 0.0, p * kku)
    dv = psi.grid.volume_element
    mean_de = float(np.sum(de_integrand) * dv)
    cross = float(np.sum(x_integrand) * dv)
    return FluctuationAverages(
        mean_delta_e=mean_de,
        cross_term=cross,
        relation_residual=abs(cross - (m / hbar ** 2) * mean_de),
        masked_fraction=float(np.mean(mask)),
    )


def mean_energy_fluctuation(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS) -> float:
    return fluctuation_averages(psi, eps_node).mean_delta_e


def cross_term(psi: Wavefunction, eps_node: float = DEFAULT_NODE_EPS) -> float:
    return fluctuation_averages(psi, eps_node).cross_term
