"""Periodic-box spectral field algebra.

Fields are plain numpy arrays sampled on a uniform grid over the centered box
[-L/2, L/2)^dim.  Scalars have shape ``grid.shape``; a velocity field stacks
``dim`` components in front, a director field stacks 3 components regardless
of dim.  All transforms are real FFTs (last axis halved in spectral layout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as _sfft

FFT_WORKERS = -1


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the origin-centered box.

    Wavenumbers are 2*pi/L * m with integer m in [-N/2, N/2) per axis.  The
    dealias mask zeroes every mode with any |m| > dealias_fraction * N/2.
    """

    dim: int
    n: int
    length: float
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise SpectralError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n <= 0 or self.n % 2 != 0:
            raise SpectralError(f"points per axis must be even and positive, got {self.n}")
        if self.length <= 0:
            raise SpectralError("box length must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise SpectralError("dealias_fraction must lie in (0, 1]")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def _axis_modes(self, axis: int) -> np.ndarray:
        # integer mode numbers m along `axis`, shaped for broadcasting
        if axis == self.dim - 1:
            m = np.arange(self.n // 2 + 1, dtype=float)
        else:
            m = _sfft.fftfreq(self.n) * self.n
        shape = [1] * self.dim
        shape[axis] = m.size
        return m.reshape(shape)

    @cached_property
    def k_full(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumber along each axis, broadcastable to spectral shape."""
        return tuple((2 * np.pi / self.length) * self._axis_modes(a) for a in range(self.dim))

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """First-derivative wavenumbers: Nyquist modes zeroed.

        The +-N/2 mode of a real field has no well-defined first derivative on
        the grid; zeroing it keeps gradient, divergence and projection exactly
        consistent for arbitrary (not necessarily dealiased) input.
        """
        out = []
        for a in range(self.dim):
            ka = self.k_full[a].copy()
            ka[np.abs(self._axis_modes(a)) == self.n // 2] = 0.0
            out.append(ka)
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        """Full Laplacian symbol (Nyquist modes included)."""
        out = np.zeros(self.spectral_shape)
        for a in range(self.dim):
            out = out + self.k_full[a] ** 2
        return out

    @cached_property
    def inv_k2_deriv(self) -> np.ndarray:
        """1 / |k|^2 with the derivative wavenumbers; zero where that vanishes."""
        k2d = np.zeros(self.spectral_shape)
        for a in range(self.dim):
            k2d = k2d + self.k[a] ** 2
        out = np.zeros_like(k2d)
        nz = k2d > 0
        out[nz] = 1.0 / k2d[nz]
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cutoff = self.dealias_fraction * self.n / 2
        keep = np.ones(self.spectral_shape)
        for a in range(self.dim):
            keep = keep * (np.abs(self._axis_modes(a)) <= cutoff)
        return keep

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        """Centered coordinates along each axis, broadcastable to grid shape."""
        coords = []
        for a in range(self.dim):
            c = (np.arange(self.n) - self.n // 2) * self.dx
            shape = [1] * self.dim
            shape[a] = self.n
            coords.append(c.reshape(shape))
        return tuple(coords)

    @cached_property
    def r(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for a in range(self.dim):
            out = out + self.x[a] ** 2
        return np.sqrt(out)

    @cached_property
    def omega(self) -> tuple[np.ndarray, ...]:
        """Unit radial direction x/r, zero at the origin."""
        r = self.r.copy()
        r[r == 0] = 1.0
        return tuple(np.where(self.r > 0, self.x[a] / r, 0.0) for a in range(self.dim))

    @cached_property
    def boundary_shell(self) -> np.ndarray:
        """Mask of the detection shell near the inscribed-sphere boundary."""
        width = max(2 * self.dx, self.length / 32.0)
        return self.r >= (self.length / 2.0 - width)


def to_spectral(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Real-to-complex transform over the trailing grid axes (stacks allowed)."""
    axes = tuple(range(-grid.dim, 0))
    if f.ndim == grid.dim:
        return _sfft.rfftn(f, axes=axes, workers=FFT_WORKERS)
    lead = f.shape[: f.ndim - grid.dim]
    out = np.empty(lead + grid.spectral_shape, dtype=complex)
    for idx in np.ndindex(lead):
        out[idx] = _sfft.rfftn(f[idx], axes=axes, workers=FFT_WORKERS)
    return out


def to_physical(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_spectral`."""
    axes = tuple(range(-grid.dim, 0))
    if fh.ndim == grid.dim:
        return _sfft.irfftn(fh, s=grid.shape, axes=axes, workers=FFT_WORKERS)
    lead = fh.shape[: fh.ndim - grid.dim]
    out = np.empty(lead + grid.shape)
    for idx in np.ndindex(lead):
        out[idx] = _sfft.irfftn(fh[idx], s=grid.shape, axes=axes, workers=FFT_WORKERS)
    return out


def spectral_derivative(grid: Grid, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """Exact Fourier derivative d^order/dx_axis^order of a physical field."""
    if not 0 <= axis < grid.dim:
        raise SpectralError(f"axis {axis} out of range for dim {grid.dim}")
    if order < 1:
        raise SpectralError("derivative order must be >= 1")
    fh = to_spectral(grid, f)
    # even orders act through the full (Nyquist-complete) Laplacian symbol
    mult = (-(grid.k_full[axis] ** 2)) ** (order // 2)
    if order % 2:
        mult = mult * (1j * grid.k[axis])
    return to_physical(grid, mult * fh)


def gradient(grid: Grid, f: np.ndarray) -> np.ndarray:
    """All first derivatives; derivative axis is prepended to f's shape."""
    fh = to_spectral(grid, f)
    return np.stack([to_physical(grid, 1j * grid.k[a] * fh) for a in range(grid.dim)])


def divergence(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Spectral divergence of a (dim, ...) component stack."""
    vh = to_spectral(grid, v)
    out = np.zeros(grid.spectral_shape, dtype=complex)
    for a in range(grid.dim):
        out += 1j * grid.k[a] * vh[a]
    return to_physical(grid, out)


def leray_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """Modewise divergence-free projection in spectral space."""
    if grid.dim < 2:
        raise SpectralError("Leray projection is degenerate in one dimension")
    kdotv = np.zeros(grid.spectral_shape, dtype=complex)
    for a in range(grid.dim):
        kdotv += grid.k[a] * vh[a]
    kdotv *= grid.inv_k2_deriv
    out = np.empty_like(vh)
    for a in range(grid.dim):
        out[a] = vh[a] - grid.k[a] * kdotv
    return out


def leray_project(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Project a velocity field onto its divergence-free part (zero mode kept)."""
    return to_physical(grid, leray_hat(grid, to_spectral(grid, v)))


def dealias_truncate(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Zero every mode outside the dealias mask; idempotent."""
    return to_physical(grid, grid.dealias_mask * to_spectral(grid, f))


def curl(grid: Grid, a: np.ndarray) -> np.ndarray:
    """Spectral curl of a 3-component potential on a 3D grid."""
    if grid.dim != 3:
        raise SpectralError("curl requires dim = 3")
    ah = to_spectral(grid, a)
    k = grid.k
    out = np.empty_like(ah)
    out[0] = 1j * (k[1] * ah[2] - k[2] * ah[1])
    out[1] = 1j * (k[2] * ah[0] - k[0] * ah[2])
    out[2] = 1j * (k[0] * ah[1] - k[1] * ah[0])
    return to_physical(grid, out)


def perp_gradient(grid: Grid, psi: np.ndarray) -> np.ndarray:
    """2D stream-function velocity (-d_2 psi, d_1 psi)."""
    if grid.dim != 2:
        raise SpectralError("perp_gradient requires dim = 2")
    ph = to_spectral(grid, psi)
    return np.stack(
        [to_physical(grid, -1j * grid.k[1] * ph), to_physical(grid, 1j * grid.k[0] * ph)]
    )


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    """L2 norm over the box, summing any leading component axes."""
    return math.sqrt(grid.cell_volume * float(np.sum(f * f)))


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    return grid.cell_volume * float(np.sum(f * g))


def parseval_weights(grid: Grid) -> np.ndarray:
    """Mode multiplicities turning half-spectrum sums into full Parseval sums."""
    w = np.full(grid.spectral_shape, 2.0)
    sl0 = (slice(None),) * (grid.dim - 1) + (0,)
    w[sl0] = 1.0
    if grid.n % 2 == 0:
        sln = (slice(None),) * (grid.dim - 1) + (grid.n // 2,)
        w[sln] = 1.0
    return w


def spectral_l2_norm(grid: Grid, fh: np.ndarray) -> float:
    """L2 norm computed from half-spectrum coefficients (Parseval)."""
    total = float(np.sum(parseval_weights(grid) * np.abs(fh) ** 2))
    return math.sqrt(total * grid.cell_volume / grid.n**grid.dim)


def max_relative_divergence(grid: Grid, v: np.ndarray) -> float:
    """max |div v| / max |v|, zero for the zero field."""
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(divergence(grid, v)))) / scale


def sigma_weight(s: np.ndarray | float):
    """Japanese bracket sqrt(1 + s^2)."""
    return np.sqrt(1.0 + np.square(s))
