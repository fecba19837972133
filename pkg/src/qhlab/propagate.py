"""Time propagation of the wave equation i*hbar dpsi/dt = (-hbar^2/2m lap + V) psi.

Two second-order unitary integrators are provided:

* split-step Fourier (Strang splitting, periodic power-of-two grids), and
* Crank-Nicolson with a central-difference Hamiltonian (cyclic tridiagonal
  solves in 1D, alternating-direction Strang sweeps in 2D),

so that every benchmark can be cross-validated between two independent
discretizations.  Trajectories record snapshots at a configurable stride;
balance checks that form time derivatives need record_stride = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError
from .fields import (
    ComplexField,
    Grid,
    PhysicalConstants,
    RealField,
    gradient,
    laplacian,
)
from .madelung import Wavefunction

NORM_DRIFT_TOL = 1e-6
TRAJECTORY_NORM_TOL = 1e-8

POTENTIAL_KINDS = ("free", "harmonic", "box-barrier", "double-slit", "sampled")


@dataclass(frozen=True)
class Potential:
    """A static external potential sampled on the grid."""

    kind: str
    params: dict
    profile: RealField


def make_potential(kind: str, grid: Grid, constants: PhysicalConstants = PhysicalConstants(),
                   **params) -> Potential:
    """Realize a named potential as a RealField on the grid."""
    coords = grid.meshgrid()
    if kind == "free":
        values = np.zeros(grid.shape)
    elif kind == "harmonic":
        omega = float(params.get("omega", 1.0))
        if not omega > 0:
            raise ConfigurationError(f"harmonic omega must be positive, got {omega}")
        r2 = sum(x ** 2 for x in coords)
        values = 0.5 * constants.mass * omega ** 2 * r2
    elif kind == "box-barrier":
        height = float(params["height"])
        intervals = params["intervals"]
        values = np.zeros(grid.shape)
        x = coords[0]
        for a, b in intervals:
            if not b > a:
                raise ConfigurationError(f"barrier interval [{a}, {b}] is empty")
            values = np.where((x >= a) & (x < b), height, values)
    elif kind == "double-slit":
        if grid.dims != 2:
            raise ConfigurationError("double-slit requires 2 dims")
        height = float(params["height"])
        wall_position = float(params["wall_position"])
        thickness = float(params.get("wall_thickness", 0.5))
        centers = [float(c) for c in params["slit_centers"]]
        width = float(params["slit_width"])
        if not (height > 0 and thickness > 0 and width > 0):
            raise ConfigurationError("double-slit height, thickness, width must be positive")
        x, y = coords
        in_wall = np.abs(x - wall_position) < thickness / 2.0
        open_slit = np.zeros(grid.shape, dtype=bool)
        for c in centers:
            open_slit |= np.abs(y - c) < width / 2.0
        values = np.where(in_wall & ~open_slit, height, 0.0)
    elif kind == "sampled":
        raw = params["values"]
        values = raw.values if isinstance(raw, RealField) else np.asarray(raw, dtype=float)
    else:
        raise ConfigurationError(f"unknown potential kind {kind!r}")
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("potential must be finite everywhere")
    return Potential(kind=kind, params=dict(params), profile=RealField(grid, values))


# ---------------------------------------------------------------------------
# split-step Fourier
# ---------------------------------------------------------------------------

class SplitStepper:
    """Strang splitting exp(-iV dt/2h) exp(-iT dt/h) exp(-iV dt/2h)."""

    def __init__(self, potential: Potential, constants: PhysicalConstants, dt: float):
        grid = potential.profile.grid
        grid.require_spectral()
        self.grid = grid
        self.dt = dt
        hbar, m = constants.hbar, constants.mass
        self.half_v = np.exp(-0.5j * potential.profile.values * dt / hbar)
        k2 = np.zeros(grid.shape)
        for ax, k in enumerate(grid.wavenumbers()):
            shape = [1] * grid.dims
            shape[ax] = grid.points[ax]
            k2 = k2 + (k ** 2).reshape(shape)
        self.kinetic = np.exp(-0.5j * hbar * k2 * dt / m)

    def step(self, values: np.ndarray) -> np.ndarray:
        out = values * self.half_v
        out = np.fft.ifftn(np.fft.fftn(out) * self.kinetic)
        return out * self.half_v


# ---------------------------------------------------------------------------
# Crank-Nicolson
# ---------------------------------------------------------------------------

class _CyclicThomasSolver:
    """Batched solver for cyclic tridiagonal systems with constant off-diagonal.

    Matrix rows: off * x[j-1] + diag[b, j] * x[j] + off * x[j+1] = rhs[b, j]
    with periodic corner entries equal to off.  Uses the Thomas algorithm on
    a rank-one-corrected matrix plus a Sherman-Morrison update; the forward
    elimination coefficients are precomputed so repeated solves are cheap.
    """

    def __init__(self, diag: np.ndarray, off: complex):
        batch, n = diag.shape
        self.off = off
        self.n = n
        gamma = -diag[:, 0].copy()
        self.gamma = gamma
        d = diag.astype(np.complex128, copy=True)
        d[:, 0] -= gamma
        d[:, -1] -= off * off / gamma
        denom = np.empty_like(d)
        w = np.zeros_like(d)
        denom[:, 0] = d[:, 0]
        w[:, 0] = off / denom[:, 0]
        for j in range(1, n):
            denom[:, j] = d[:, j] - off * w[:, j - 1]
            if j < n - 1:
                w[:, j] = off / denom[:, j]
        self.denom = denom
        self.w = w
        u = np.zeros((batch, n), dtype=np.complex128)
        u[:, 0] = gamma
        u[:, -1] = off
        self.z = self._thomas(u)
        self.sm_denom = 1.0 + self.z[:, 0] + (off / gamma) * self.z[:, -1]

    def _thomas(self, rhs: np.ndarray) -> np.ndarray:
        n, off = self.n, self.off
        g = np.empty_like(rhs)
        g[:, 0] = rhs[:, 0] / self.denom[:, 0]
        for j in range(1, n):
            g[:, j] = (rhs[:, j] - off * g[:, j - 1]) / self.denom[:, j]
        x = g
        for j in range(n - 2, -1, -1):
            x[:, j] = g[:, j] - self.w[:, j] * x[:, j + 1]
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = self._thomas(rhs.astype(np.complex128, copy=True))
        vy = y[:, 0] + (self.off / self.gamma) * y[:, -1]
        return y - self.z * (vy / self.sm_denom)[:, None]


class _CNSubstep:
    """One Cayley substep (1 + i tau H/2h) psi' = (1 - i tau H/2h) psi along one axis."""

    def __init__(self, v_axis: np.ndarray, grid: Grid, constants: PhysicalConstants,
                 axis: int, tau: float):
        hbar, m = constants.hbar, constants.mass
        dx = grid.dx[axis]
        alpha = 0.5j * tau / hbar
        t_off = -hbar ** 2 / (2.0 * m * dx * dx)
        t_diag = hbar ** 2 / (m * dx * dx)
        self.axis = axis
        n = grid.points[axis]
        # batch layout: axis under solve is last
        if grid.dims == 1:
            diag_h = (t_diag + v_axis).reshape(1, n)
        else:
            diag_h = np.moveaxis(t_diag + v_axis, axis, -1).reshape(-1, n)
        self.a_off = alpha * t_off
        self.b_off = -alpha * t_off
        self.a_solver = _CyclicThomasSolver(1.0 + alpha * diag_h, self.a_off)
        self.b_diag = 1.0 - alpha * diag_h
        self.grid = grid

    def apply(self, values: np.ndarray) -> np.ndarray:
        grid, axis = self.grid, self.axis
        n = grid.points[axis]
        if grid.dims == 1:
            work = values.reshape(1, n)
        else:
            work = np.moveaxis(values, axis, -1).reshape(-1, n)
        rhs = self.b_diag * work + self.b_off * (np.roll(work, 1, axis=1)
                                                 + np.roll(work, -1, axis=1))
        out = self.a_solver.solve(rhs)
        if grid.dims == 1:
            return out.reshape(grid.shape)
        shape = list(grid.shape)
        moved = shape[axis]
        del shape[axis]
        shape.append(moved)
        return np.moveaxis(out.reshape(shape), -1, axis)


class CrankNicolsonStepper:
    """Crank-Nicolson stepper; 1D direct, 2D via Strang-ordered direction sweeps."""

    def __init__(self, potential: Potential, constants: PhysicalConstants, dt: float):
        grid = potential.profile.grid
        self.grid = grid
        self.dt = dt
        v = potential.profile.values
        if grid.dims == 1:
            self.substeps = [_CNSubstep(v, grid, constants, axis=0, tau=dt)]
        else:
            half_v = 0.5 * v
            self.substeps = [
                _CNSubstep(half_v, grid, constants, axis=0, tau=0.5 * dt),
                _CNSubstep(half_v, grid, constants, axis=1, tau=dt),
                _CNSubstep(half_v, grid, constants, axis=0, tau=0.5 * dt),
            ]

    def step(self, values: np.ndarray) -> np.ndarray:
        out = values
        for sub in self.substeps:
            out = sub.apply(out)
        return out


def _make_stepper(method: str, potential: Potential, constants: PhysicalConstants,
                  dt: float):
    if method == "split-step":
        return SplitStepper(potential, constants, dt)
    if method == "crank-nicolson":
        return CrankNicolsonStepper(potential, constants, dt)
    raise ConfigurationError(f"unknown propagation method {method!r}")


def step_split_fourier(psi: Wavefunction, potential: Potential, dt: float) -> Wavefunction:
    """Advance one split-step; dt = 0 is the exact identity."""
    if dt == 0.0:
        return psi
    stepper = SplitStepper(potential, psi.constants, dt)
    return psi.with_values(stepper.step(psi.psi.values), time=psi.time + dt,
                           norm_check=False)


def step_crank_nicolson(psi: Wavefunction, potential: Potential, dt: float) -> Wavefunction:
    """Advance one Crank-Nicolson step; dt = 0 is the exact identity."""
    if dt == 0.0:
        return psi
    stepper = CrankNicolsonStepper(potential, psi.constants, dt)
    return psi.with_values(stepper.step(psi.psi.values), time=psi.time + dt,
                           norm_check=False)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Ordered snapshots of an evolving state plus the stepping metadata."""

    snapshots: tuple
    dt: float
    method: str
    potential: Potential
    record_stride: int = 1

    @classmethod
    def from_snapshots(cls, snapshots: Sequence[Wavefunction], dt: float, method: str,
                       potential: Potential, record_stride: int = 1,
                       validate: bool = True) -> "Trajectory":
        traj = cls(tuple(snapshots), dt, method, potential, record_stride)
        if validate:
            traj.validate()
        return traj

    def validate(self) -> None:
        if not self.snapshots:
            raise ConfigurationError("trajectory has no snapshots")
        spacing = self.dt * self.record_stride
        times = self.times
        tol = 1e-9 * max(1.0, abs(spacing))
        for i in range(1, len(times)):
            if abs((times[i] - times[i - 1]) - spacing) > tol:
                raise ConfigurationError(
                    f"snapshot times not spaced by dt*stride at index {i}"
                )
        for snap in self.snapshots:
            nrm = snap.norm()
            if abs(nrm - 1.0) > TRAJECTORY_NORM_TOL:
                raise NumericalError(f"snapshot at t={snap.time} has norm {nrm!r}")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def snapshot_spacing(self) -> float:
        return self.dt * self.record_stride

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, idx: int) -> Wavefunction:
        return self.snapshots[idx]


def evolve(psi0: Wavefunction, potential: Potential, dt: float, n_steps: int,
           method: str = "split-step", record_stride: int = 1,
           norm_drift_tol: float = NORM_DRIFT_TOL,
           inject_scale_at: Optional[int] = None,
           inject_scale: float = 1.01) -> Trajectory:
    """Propagate n_steps and return the recorded trajectory.

    Aborts with NumericalError if the norm drifts by more than norm_drift_tol.
    inject_scale_at is a test hook: the raw state is scaled once after that
    step, which the drift guard must catch.
    """
    if n_steps < 0:
        raise ConfigurationError(f"n_steps must be >= 0, got {n_steps}")
    if record_stride < 1:
        raise ConfigurationError(f"record_stride must be >= 1, got {record_stride}")
    if n_steps % record_stride != 0:
        raise ConfigurationError(
            f"n_steps={n_steps} is not a multiple of record_stride={record_stride}"
        )
    snapshots = [psi0]
    if n_steps == 0:
        return Trajectory.from_snapshots(snapshots, dt, method, potential, record_stride)
    if dt == 0.0:
        raise ConfigurationError("dt must be nonzero when n_steps > 0")
    stepper = _make_stepper(method, potential, psi0.constants, dt)
    values = psi0.psi.values
    dv = psi0.grid.volume_element
    time = psi0.time
    for step in range(1, n_steps + 1):
        values = stepper.step(values)
        time = psi0.time + step * dt
        if inject_scale_at is not None and step == inject_scale_at:
            values = values * inject_scale
        nrm = np.sqrt(np.sum(np.abs(values) ** 2) * dv)
        if abs(nrm - 1.0) > norm_drift_tol:
            raise NumericalError(
                f"norm drift |{nrm} - 1| > {norm_drift_tol} at step {step} (t={time})"
            )
        if step % record_stride == 0:
            snapshots.append(psi0.with_values(values, time=time, norm_check=False))
    return Trajectory.from_snapshots(snapshots, dt, method, potential, record_stride)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Observables:
    """Norm, mean energy, and first/second position-momentum moments."""

    norm: float
    energy: float
    energy_imag: float
    mean_x: tuple
    mean_p: tuple
    sigma_x: tuple


def observables(psi: Wavefunction, potential: Optional[Potential] = None,
                method: str = "spectral") -> Observables:
    """<E> = int psi* (-h^2/2m lap + V) psi, <p> = int P grad S, moments of x.

    The momentum density is evaluated in the node-regular current form
    hbar * Im(psi* grad psi).
    """
    grid = psi.grid
    hbar, m = psi.constants.hbar, psi.constants.mass
    vals = psi.psi.values
    dv = grid.volume_element
    p = (vals * vals.conj()).real
    norm = float(np.sqrt(np.sum(p) * dv))
    v = potential.profile.values if potential is not None else 0.0
    h_psi = -(hbar ** 2) / (2.0 * m) * laplacian(psi.psi, method).values + v * vals
    e_cplx = np.sum(vals.conj() * h_psi) * dv
    grad_psi = gradient(psi.psi, method).values
    mean_p = tuple(
        float(hbar * np.sum((vals.conj() * grad_psi[ax]).imag) * dv)
        for ax in range(grid.dims)
    )
    coords = grid.meshgrid()
    mean_x = tuple(float(np.sum(p * x) * dv) for x in coords)
    sigma_x = tuple(
        float(np.sqrt(max(np.sum(p * x * x) * dv - mx * mx, 0.0)))
        for x, mx in zip(coords, mean_x)
    )
    return Observables(
        norm=norm,
        energy=float(e_cplx.real),
        energy_imag=float(e_cplx.imag),
        mean_x=mean_x,
        mean_p=mean_p,
        sigma_x=sigma_x,
    )


def default_timestep(psi0: Wavefunction, potential: Potential) -> float:
    """min(0.1/omega_char, 0.25 m dx^2 / hbar) with omega_char = <E>/hbar."""
    energy = observables(psi0, potential).energy
    hbar, m = psi0.constants.hbar, psi0.constants.mass
    if not energy > 0:
        raise ConfigurationError(
            f"characteristic frequency needs <E> > 0, got {energy}; shift V by a constant"
        )
    omega = energy / hbar
    dx_min = min(psi0.grid.dx)
    return min(0.1 / omega, 0.25 * m * dx_min * dx_min / hbar)
