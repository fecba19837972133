"""Residual checks for the hydrodynamic derivation chain.

Each operation takes a recorded trajectory (record_stride = 1) and evaluates
one link of the chain as a pointwise residual field:

* continuity:        dP/dt + div(v P)
* fluctuation:       d(ln P)/dt - (2/hbar)(dp . v - dE), which is the
                     continuity residual divided by P; the two are computed
                     from shared discrete primitives and their pointwise
                     agreement is itself asserted and reported
* action:            the density-form action versus the wavefunction-form
                     action, equal through the total-momentum identity
* Lagrangian density and the equation-of-motion residual i h dpsi/dt - H psi

Temporal derivatives use centered differences on adjacent snapshots, so
endpoints are excluded from all norms.  Node-masked cells are excluded from
norms and the masked fraction is always reported.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DegenerateStateError, NumericalError
from .fields import ComplexField, RealField, VectorField, divergence, gradient
from .madelung import DEFAULT_NODE_EPS, Wavefunction, log_gradient, node_mask_of
from .propagate import Potential, Trajectory

# Relative floor applied to the action-equality denominator: on-shell
# trajectories have actions that cancel to ~0, so the defect is measured
# against the magnitude of the integrated terms instead.
ACTION_SCALE_FLOOR = 1e-7
LAGRANGIAN_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class BalanceReport:
    """Residual norms of one balance check across a trajectory's interior."""

    residual_field: RealField
    l2_residual: float
    linf_residual: float
    masked_fraction: float
    convergence_order: Optional[float] = None
    per_snapshot: tuple = ()
    agreement_linf: Optional[float] = None


@dataclass(frozen=True)
class ActionReport:
    """Action computed in density form and wavefunction form, plus their gap."""

    A_classical: float
    A_psi: float
    rel_difference: float
    L_density_sample: RealField
    masked_fraction: float


def _require_verification(traj: Trajectory, min_snapshots: int = 3) -> None:
    if traj.record_stride != 1:
        raise ConfigurationError(
            f"balance checks need record_stride=1, got {traj.record_stride}"
        )
    if len(traj) < min_snapshots:
        raise ConfigurationError(
            f"balance checks need >= {min_snapshots} snapshots, got {len(traj)}"
        )


def time_derivative(traj: Trajectory, k: int) -> ComplexField:
    """Centered-difference time derivative at interior snapshot k."""
    if not 0 < k < len(traj) - 1:
        raise ConfigurationError(f"snapshot {k} has no two neighbors")
    spacing = traj.snapshot_spacing
    dvals = (traj[k + 1].psi.values - traj[k - 1].psi.values) / (2.0 * spacing)
    return ComplexField(traj[k].grid, dvals)


def _masked_norms(residual: np.ndarray, mask: np.ndarray, dv: float) -> tuple[float, float]:
    keep = ~mask & np.isfinite(residual)
    if not np.any(keep):
        return float("nan"), float("nan")
    vals = residual[keep]
    l2 = float(np.sqrt(np.sum(vals ** 2) * dv))
    linf = float(np.max(np.abs(vals)))
    return l2, linf


def _snapshot_terms(traj: Trajectory, k: int, method: str, eps_node: float) -> dict:
    """Shared discrete primitives for the continuity/fluctuation pair at snapshot k."""
    snap = traj[k]
    hbar, m = snap.constants.hbar, snap.constants.mass
    spacing = traj.snapshot_spacing
    p_now = snap.density()
    p_prev = traj[k - 1].density().values
    p_next = traj[k + 1].density().values
    dt_p = (p_next - p_prev) / (2.0 * spacing)
    mask = node_mask_of(snap, eps_node)
    g = log_gradient(snap, method).values
    v = np.where(mask[None, ...], 0.0, (hbar / m) * g.imag)
    grad_p = gradient(p_now, method).values
    div_v = divergence(VectorField(snap.grid, v), method).values
    v_dot_gradp = np.sum(v * grad_p, axis=0)
    return {
        "P": p_now.values,
        "dt_P": dt_p,
        "v_dot_gradp": v_dot_gradp,
        "div_v": div_v,
        "mask": mask,
        "grid": snap.grid,
        "time": snap.time,
    }


def _continuity_from_terms(t: dict) -> np.ndarray:
    # dP/dt + div(v P) with the divergence expanded by the product rule so
    # the fluctuation form below is its exact discrete P-quotient.
    return t["dt_P"] + t["v_dot_gradp"] + t["P"] * t["div_v"]


def _fluctuation_from_terms(t: dict) -> np.ndarray:
    # dt(ln P) - (2/hbar)(dp.v - dE) expanded with dp = -(hbar/2) gradP/P and
    # dE = (hbar/2) div v; the discrete logarithmic derivative is dt_P / P.
    p = t["P"]
    with np.errstate(divide="ignore", invalid="ignore"):
        return t["dt_P"] / p + t["v_dot_gradp"] / p + t["div_v"]


def _assemble_report(fields, norms, masked_fracs, grids, agreement=None) -> BalanceReport:
    worst = int(np.argmax([linf if np.isfinite(linf) else -1.0 for _, _, linf in norms]))
    per_snapshot = tuple((t, l2, linf) for t, l2, linf in norms)
    l2s = [l2 for _, l2, _ in norms if np.isfinite(l2)]
    linfs = [linf for _, _, linf in norms if np.isfinite(linf)]
    return BalanceReport(
        residual_field=RealField(grids[worst], fields[worst]),
        l2_residual=max(l2s) if l2s else float("nan"),
        linf_residual=max(linfs) if linfs else float("nan"),
        masked_fraction=float(np.mean(masked_fracs)),
        per_snapshot=per_snapshot,
        agreement_linf=agreement,
    )


def continuity_residual(traj: Trajectory, method: str = "spectral",
                        eps_node: float = DEFAULT_NODE_EPS) -> BalanceReport:
    """Pointwise dP/dt + div(vP) over all interior snapshots."""
    _require_verification(traj)
    dv = traj[0].grid.volume_element
    fields, norms, fracs, grids = [], [], [], []
    for k in range(1, len(traj) - 1):
        t = _snapshot_terms(traj, k, method, eps_node)
        r = _continuity_from_terms(t)
        l2, linf = _masked_norms(r, t["mask"], dv)
        fields.append(np.where(t["mask"], np.nan, r))
        norms.append((t["time"], l2, linf))
        fracs.append(float(np.mean(t["mask"])))
        grids.append(t["grid"])
    return _assemble_report(fields, norms, fracs, grids)


def fluctuation_balance(traj: Trajectory, method: str = "spectral",
                        eps_node: float = DEFAULT_NODE_EPS) -> BalanceReport:
    """Entropy/fluctuation balance along flow lines, with the continuity cross-check.

    agreement_linf is the largest off-node deviation between this residual
    and the continuity residual divided by P.
    """
    _require_verification(traj)
    dv = traj[0].grid.volume_element
    fields, norms, fracs, grids = [], [], [], []
    agreement = 0.0
    for k in range(1, len(traj) - 1):
        t = _snapshot_terms(traj, k, method, eps_node)
        frac = float(np.mean(t["mask"]))
        if frac > 0.5:
            raise DegenerateStateError(
                f"node fraction {frac:.3f} exceeds 0.5 at t={t['time']}"
            )
        r_f = _fluctuation_from_terms(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            r_c_over_p = _continuity_from_terms(t) / t["P"]
        diff = np.abs(r_f - r_c_over_p)
        keep = ~t["mask"] & np.isfinite(diff)
        if np.any(keep):
            agreement = max(agreement, float(np.max(diff[keep])))
        l2, linf = _masked_norms(r_f, t["mask"], dv)
        fields.append(np.where(t["mask"], np.nan, r_f))
        norms.append((t["time"], l2, linf))
        fracs.append(frac)
        grids.append(t["grid"])
    return _assemble_report(fields, norms, fracs, grids, agreement=agreement)


def lagrangian_density(psi: Wavefunction, psi_dot: ComplexField,
                       potential: Potential, method: str = "spectral") -> RealField:
    """-(i hbar/2)(psi* dpsi - dpsi* psi) + (hbar^2/2m) grad psi . grad psi* + V |psi|^2."""
    hbar, m = psi.constants.hbar, psi.constants.mass
    vals = psi.psi.values
    dot = psi_dot.values
    grad_psi = gradient(psi.psi, method).values
    term_t = -0.5j * hbar * (vals.conj() * dot - dot.conj() * vals)
    term_k = (hbar ** 2 / (2.0 * m)) * np.sum(grad_psi * grad_psi.conj(), axis=0)
    term_v = potential.profile.values * (vals.conj() * vals)
    total = term_t + term_k + term_v
    imag_max = float(np.max(np.abs(total.imag)))
    if imag_max > LAGRANGIAN_IMAG_TOL:
        raise NumericalError(
            f"Lagrangian density has imaginary part {imag_max} > {LAGRANGIAN_IMAG_TOL}"
        )
    return RealField(psi.grid, total.real)


def action_integral(traj: Trajectory, potential: Optional[Potential] = None,
                    method: str = "spectral",
                    eps_node: float = DEFAULT_NODE_EPS) -> ActionReport:
    """Action in density form and in wavefunction form over the trajectory interior.

    Density form:       int P (dS/dt + (grad S)^2/2m + (hbar grad R/R)^2/2m + V)
    Wavefunction form:  int |psi|^2 (dS/dt + V) + (hbar^2/2m)|grad psi|^2

    dS/dt is hbar Im(dpsi/dt / psi) with centered time differences; the time
    integral is trapezoidal over the interior snapshots.  Node cells are
    zeroed in both integrands and reported.
    """
    _require_verification(traj)
    if potential is None:
        potential = traj.potential
    hbar = traj[0].constants.hbar
    m = traj[0].constants.mass
    dv = traj[0].grid.volume_element
    v_pot = potential.profile.values
    a_cl_slices, a_psi_slices, scale_slices, fracs = [], [], [], []
    sample_field = None
    mid = (len(traj) - 1) // 2
    for k in range(1, len(traj) - 1):
        snap = traj[k]
        vals = snap.psi.values
        p = (vals * vals.conj()).real
        mask = node_mask_of(snap, eps_node)
        dot = time_derivative(traj, k).values
        grad_psi = gradient(snap.psi, method).values
        grad2 = np.sum((grad_psi * grad_psi.conj()).real, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ds_dt = hbar * (dot / vals).imag
            ktot2 = grad2 / p
        common = p * ds_dt + p * v_pot
        kin_cl = (hbar ** 2 / (2.0 * m)) * p * ktot2 / hbar ** 2
        kin_psi = grad2 / (2.0 * m)
        integrand_cl = np.where(mask, 0.0, common + kin_cl)
        integrand_psi = np.where(mask, 0.0, common + kin_psi)
        scale = np.where(mask, 0.0,
                         np.abs(p * ds_dt) + np.abs(kin_psi) + np.abs(p * v_pot))
        a_cl_slices.append(float(np.sum(integrand_cl) * dv))
        a_psi_slices.append(float(np.sum(integrand_psi) * dv))
        scale_slices.append(float(np.sum(scale) * dv))
        fracs.append(float(np.mean(mask)))
        if k == mid:
            sample_field = lagrangian_density(snap, ComplexField(snap.grid, dot),
                                              potential, method)
    spacing = traj.snapshot_spacing
    if len(a_cl_slices) == 1:
        a_cl, a_psi = a_cl_slices[0] * spacing, a_psi_slices[0] * spacing
        scale_total = scale_slices[0] * spacing
    else:
        a_cl = float(np.trapezoid(a_cl_slices, dx=spacing))
        a_psi = float(np.trapezoid(a_psi_slices, dx=spacing))
        scale_total = float(np.trapezoid(scale_slices, dx=spacing))
    eps = ACTION_SCALE_FLOOR * scale_total + np.finfo(float).tiny
    return ActionReport(
        A_classical=a_cl,
        A_psi=a_psi,
        rel_difference=abs(a_cl - a_psi) / (abs(a_psi) + eps),
        L_density_sample=sample_field,
        masked_fraction=float(np.mean(fracs)),
    )


def schroedinger_residual(traj: Trajectory, potential: Optional[Potential] = None,
                          method: str = "spectral") -> BalanceReport:
    """| i hbar dpsi/dt - (-hbar^2/2m lap + V) psi | over interior snapshots."""
    _require_verification(traj)
    if potential is None:
        potential = traj.potential
    hbar = traj[0].constants.hbar
    m = traj[0].constants.mass
    dv = traj[0].grid.volume_element
    v_pot = potential.profile.values
    no_mask = np.zeros(traj[0].grid.shape, dtype=bool)
    fields, norms, grids = [], [], []
    for k in range(1, len(traj) - 1):
        snap = traj[k]
        dot = time_derivative(traj, k).values
        lap = _laplacian_values(snap, method)
        h_psi = -(hbar ** 2) / (2.0 * m) * lap + v_pot * snap.psi.values
        r = np.abs(1j * hbar * dot - h_psi)
        l2, linf = _masked_norms(r, no_mask, dv)
        fields.append(r)
        norms.append((snap.time, l2, linf))
        grids.append(snap.grid)
    return _assemble_report(fields, norms, [0.0], grids)


def _laplacian_values(psi: Wavefunction, method: str) -> np.ndarray:
    from .fields import laplacian

    return laplacian(psi.psi, method).values


def estimate_order(step_sizes, errors) -> float:
    """Least-squares slope of log(error) against log(step size)."""
    h = np.asarray(step_sizes, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size < 2:
        raise ConfigurationError("order estimation needs at least two step sizes")
    if np.any(e <= 0):
        raise ConfigurationError("order estimation needs positive errors")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)
