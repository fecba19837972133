"""Periodic grids, scalar/vector fields, and differential/integral operators.

Everything downstream (decomposition, propagation, balance checks, walkers)
consumes the types and operators defined here.  Grids are periodic and
uniform; two derivative backends are provided, "spectral" (FFT, exact for
band-limited fields) and "central" (2nd-order central differences), so every
differential identity can be cross-validated against both.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, InvalidStateError

Method = str  # "spectral" or "central" ("central-difference" accepted)

MIN_POINTS = 8


def _normalize_method(method: Method) -> str:
    if method in ("spectral",):
        return "spectral"
    if method in ("central", "central-difference"):
        return "central"
    raise ConfigurationError(f"unknown derivative method {method!r}")


def _as_tuple(value, dims: int, kind) -> tuple:
    if np.isscalar(value):
        return tuple(kind(value) for _ in range(dims))
    out = tuple(kind(v) for v in value)
    if len(out) != dims:
        raise ConfigurationError(f"expected {dims} per-axis values, got {len(out)}")
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid in 1 or 2 dimensions.

    Coordinates along each axis are x_j = -extent/2 + j*dx, j = 0..points-1;
    the right edge +extent/2 is the periodic image of the left one.
    """

    dims: int
    extent: tuple[float, ...]
    points: tuple[int, ...]
    dx: tuple[float, ...]

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ConfigurationError(f"dims must be 1 or 2, got {self.dims}")
        for L, n, d in zip(self.extent, self.points, self.dx):
            if not (L > 0 and np.isfinite(L)):
                raise ConfigurationError(f"extent must be positive, got {L}")
            if n < MIN_POINTS:
                raise ConfigurationError(f"points per axis must be >= {MIN_POINTS}, got {n}")
            if not d > 0:
                raise ConfigurationError(f"grid spacing must be positive, got {d}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def volume_element(self) -> float:
        return float(np.prod(self.dx))

    def axes(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays."""
        return tuple(
            -L / 2.0 + d * np.arange(n)
            for L, n, d in zip(self.extent, self.points, self.dx)
        )

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to the full grid shape ('ij' indexing)."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis angular wavenumbers in FFT order."""
        return tuple(
            2.0 * np.pi * np.fft.fftfreq(n, d=d)
            for n, d in zip(self.points, self.dx)
        )

    def is_power_of_two(self) -> bool:
        return all(n > 0 and (n & (n - 1)) == 0 for n in self.points)

    def require_spectral(self) -> None:
        if not self.is_power_of_two():
            raise ConfigurationError(
                f"spectral operators require power-of-two points, got {self.points}"
            )


def build_grid(extent, points) -> Grid:
    """Build a validated grid; scalars give 1D, sequences give one axis each."""
    if np.isscalar(extent) != np.isscalar(points):
        raise ConfigurationError("extent and points must both be scalars or both sequences")
    dims = 1 if np.isscalar(extent) else len(tuple(extent))
    ext = _as_tuple(extent, dims, float)
    pts = _as_tuple(points, dims, int)
    dx = tuple(L / n for L, n in zip(ext, pts))
    return Grid(dims=dims, extent=ext, points=pts, dx=dx)


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.array(values, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RealField:
    """Real scalar field sampled on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise InvalidStateError(
                f"field shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "values", _freeze(vals))


@dataclass(frozen=True)
class ComplexField:
    """Complex scalar field sampled on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise InvalidStateError(
                f"field shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "values", _freeze(vals))


@dataclass(frozen=True)
class VectorField:
    """Vector field with one component per grid dimension.

    values has shape (dims, *grid.shape); components may be real or complex.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype not in (np.float64, np.complex128):
            vals = vals.astype(np.complex128 if np.iscomplexobj(vals) else np.float64)
        expected = (self.grid.dims,) + self.grid.shape
        if vals.shape != expected:
            raise InvalidStateError(
                f"vector field shape {vals.shape} does not match {expected}"
            )
        object.__setattr__(self, "values", _freeze(vals))

    def component(self, axis: int) -> np.ndarray:
        return self.values[axis]


ScalarField = Union[RealField, ComplexField]


@dataclass(frozen=True)
class PhysicalConstants:
    """Reduced action quantum and particle mass (dimensionless defaults)."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ConfigurationError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise ConfigurationError(f"mass must be positive, got {self.mass}")


def _check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise InvalidStateError("fields live on different grids")


def _wrap_like(f: ScalarField, values: np.ndarray):
    if np.iscomplexobj(values):
        return ComplexField(f.grid, values)
    return RealField(f.grid, values)


# ---------------------------------------------------------------------------
# derivative kernels
#
# Spectral gradients zero the Nyquist mode of the ik multiplier (even point
# counts) so the derivative matrix stays antisymmetric: real fields map to
# real fields and discrete integration by parts is exact.  The Laplacian
# keeps -k^2 at Nyquist (symmetric multiplier, no such constraint).
# ---------------------------------------------------------------------------

def _spectral_axis_multiplier(grid: Grid, axis: int) -> np.ndarray:
    k = grid.wavenumbers()[axis]
    ik = 1j * k
    n = grid.points[axis]
    if n % 2 == 0:
        ik = ik.copy()
        ik[n // 2] = 0.0
    shape = [1] * grid.dims
    shape[axis] = n
    return ik.reshape(shape)


def _spectral_partial(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    spec = np.fft.fft(values, axis=axis)
    spec *= _spectral_axis_multiplier(grid, axis)
    out = np.fft.ifft(spec, axis=axis)
    if not np.iscomplexobj(values):
        out = out.real
    return out


def _central_partial(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    d = grid.dx[axis]
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * d)


def _partial(values: np.ndarray, grid: Grid, axis: int, method: str) -> np.ndarray:
    if method == "spectral":
        return _spectral_partial(values, grid, axis)
    return _central_partial(values, grid, axis)


def gradient(f: ScalarField, method: Method = "spectral") -> VectorField:
    """Componentwise partial derivatives of a scalar field."""
    method = _normalize_method(method)
    if method == "spectral":
        f.grid.require_spectral()
    parts = [_partial(f.values, f.grid, ax, method) for ax in range(f.grid.dims)]
    return VectorField(f.grid, np.stack(parts))


def laplacian(f: ScalarField, method: Method = "spectral") -> ScalarField:
    """Sum of unmixed second partials; same field kind as the input."""
    method = _normalize_method(method)
    grid = f.grid
    if method == "spectral":
        grid.require_spectral()
        spec = np.fft.fftn(f.values)
        k2 = np.zeros(grid.shape)
        for ax, k in enumerate(grid.wavenumbers()):
            shape = [1] * grid.dims
            shape[ax] = grid.points[ax]
            k2 = k2 + (k ** 2).reshape(shape)
        out = np.fft.ifftn(spec * (-k2))
        if not np.iscomplexobj(f.values):
            out = out.real
    else:
        out = np.zeros_like(f.values)
        for ax in range(grid.dims):
            d = grid.dx[ax]
            out = out + (
                np.roll(f.values, -1, axis=ax)
                - 2.0 * f.values
                + np.roll(f.values, 1, axis=ax)
            ) / (d * d)
    return _wrap_like(f, out)


def divergence(v: VectorField, method: Method = "spectral") -> RealField:
    """Divergence of a vector field (real input expected)."""
    method = _normalize_method(method)
    if method == "spectral":
        v.grid.require_spectral()
    out = np.zeros(v.grid.shape, dtype=v.values.dtype)
    for ax in range(v.grid.dims):
        out = out + _partial(v.values[ax], v.grid, ax, method)
    if np.iscomplexobj(out):
        return RealField(v.grid, out.real)
    return RealField(v.grid, out)


def integrate(f: ScalarField):
    """Riemann sum over the periodic cell, sum(f) * dx^dims.

    Exact for periodic band-limited integrands; uses numpy's pairwise
    summation so the result is independent of any internal chunking.
    """
    total = np.sum(f.values) * f.grid.volume_element
    if np.iscomplexobj(f.values):
        return complex(total)
    return float(total)


def dot(a: VectorField, b: VectorField) -> np.ndarray:
    """Pointwise inner product of two vector fields (raw array)."""
    _check_same_grid(a, b)
    return np.sum(a.values * b.values, axis=0)
