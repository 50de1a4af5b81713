"""Uniform periodic grid and FFT-based differential operators.

The domain is the torus [0, 2*pi)^dim sampled on a uniform grid, so
wavenumbers are integers, the lowest nonzero wavenumber is 1, and the
Poincare constant for mean-zero fields is exactly 1.  Scalar fields are
float arrays of shape ``grid.shape``; vector fields (and any stack of
scalars) carry extra leading axes.

All operations are pure: input arrays are never mutated.  Fields may be
shared freely across threads for reading.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * np.pi


class SpectralError(ValueError):
    """Base class for errors raised by grid operations."""


class MeanNotZero(SpectralError):
    """Source passed to a mean-zero elliptic solve has a nonzero mean."""


class Norms(NamedTuple):
    l2: float
    h1: float
    linf_grid: float


class Grid:
    """Uniform grid on [0, 2*pi)^dim with cached Fourier symbols.

    Nyquist modes are zeroed in every differential operator (the odd
    derivative of the Nyquist mode is not representable on the grid), and
    the mean-zero Poisson solve inverts only the modes the derivative
    operators act on, so div(grad(.)), laplacian(.) and the elliptic solve
    are mutually consistent to round-off.
    """

    def __init__(self, dim: int, points_per_axis: int):
        if dim not in (1, 2, 3):
            raise SpectralError(f"dim must be 1, 2 or 3, got {dim}")
        n = int(points_per_axis)
        if n < 8 or n % 2 != 0:
            raise SpectralError(
                f"points_per_axis must be even and >= 8, got {points_per_axis}"
            )
        self.dim = dim
        self.n = n
        self.dx = TWO_PI / n
        self.shape = (n,) * dim
        self.volume = TWO_PI**dim
        self.cell_volume = self.dx**dim

        k = np.fft.fftfreq(n, d=1.0 / n)  # integer wavenumbers as floats
        k_deriv = k.copy()
        k_deriv[n // 2] = 0.0  # Nyquist removed from derivatives

        def along(axis: int, arr: np.ndarray) -> np.ndarray:
            shape = [1] * dim
            shape[axis] = n
            return arr.reshape(shape)

        self._ik = [1j * along(a, k_deriv) for a in range(dim)]
        self._k2 = sum(along(a, k_deriv) ** 2 for a in range(dim))
        # -1/|k|^2 on the modes the derivatives act on, 0 elsewhere
        self._inv_neg_k2 = np.where(
            self._k2 > 0.0, -1.0 / np.where(self._k2 > 0.0, self._k2, 1.0), 0.0
        )
        cutoff = n / 3.0
        keep = np.ones((), dtype=bool)
        for a in range(dim):
            keep = keep & (np.abs(along(a, k)) <= cutoff)
        self._dealias_keep = keep
        # derivative with the 2/3-rule truncation folded in (diagonal ops commute)
        self._ik_dealias = [ik * keep for ik in self._ik]

    # -- basic geometry -------------------------------------------------

    def coords(self) -> list[np.ndarray]:
        """Meshgrid coordinate arrays (ij indexing), one per axis."""
        x = np.arange(self.n) * self.dx
        if self.dim == 1:
            return [x]
        return list(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def zeros_vector(self) -> np.ndarray:
        return np.zeros((self.dim,) + self.shape)

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def integral(self, f: np.ndarray) -> float:
        return float(np.mean(f)) * self.volume

    # -- transforms -----------------------------------------------------

    def _fft(self, f: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return np.fft.fft(f, axis=-1)
        return np.fft.fftn(f, axes=tuple(range(-self.dim, 0)))

    def _ifft(self, fhat: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return np.fft.ifft(fhat, axis=-1).real
        return np.fft.ifftn(fhat, axes=tuple(range(-self.dim, 0))).real

    # -- differential operators ------------------------------------------

    def ddx(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Spectral partial derivative along a grid axis (Nyquist zeroed)."""
        if not 0 <= axis < self.dim:
            raise SpectralError(f"axis {axis} out of range for dim {self.dim}")
        return self._ifft(self._fft(f) * self._ik[axis])

    def gradient(self, f: np.ndarray) -> np.ndarray:
        fhat = self._fft(f)
        return np.stack([self._ifft(fhat * self._ik[a]) for a in range(self.dim)])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        out = self._ifft(self._fft(v[0]) * self._ik[0])
        for a in range(1, self.dim):
            out += self._ifft(self._fft(v[a]) * self._ik[a])
        return out

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self._ifft(self._fft(f) * (-self._k2))

    def vector_laplacian(self, v: np.ndarray) -> np.ndarray:
        return self._ifft(self._fft(v) * (-self._k2))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """2/3-rule truncation: zero modes with any |k_axis| > n/3."""
        return self._ifft(self._fft(f) * self._dealias_keep)

    # -- elliptic solves --------------------------------------------------

    def poisson_mean_zero(self, f: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        """Solve laplacian(phi) = f - mean(f) with mean(phi) = 0.

        Requires |mean(f)| <= tol * rms(f); a violation signals that the
        caller passed a source outside the operator's range.
        """
        rms = float(np.sqrt(np.mean(f * f)))
        if abs(float(np.mean(f))) > tol * rms:
            raise MeanNotZero(
                f"source mean {np.mean(f):.3e} exceeds {tol:g} * rms {rms:.3e}"
            )
        return self._ifft(self._fft(f) * self._inv_neg_k2)

    def bogovskii(self, f: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        """Vector field with divergence f - mean(f), realized as grad(phi)."""
        return self.gradient(self.poisson_mean_zero(f, tol))

    # -- norms ------------------------------------------------------------

    def norms(self, f: np.ndarray) -> Norms:
        """L2 and H1 norms (quadrature == Parseval) and the grid max.

        Accepts a scalar field or a stack of components; components of a
        stack are summed in quadrature, and linf_grid is the grid max of
        the euclidean magnitude.
        """
        if f.shape == self.shape:
            comps = f[None]
        else:
            comps = f.reshape((-1,) + self.shape)
        l2sq = sum(self.integral(c * c) for c in comps)
        gradsq = 0.0
        for c in comps:
            g = self.gradient(c)
            gradsq += sum(self.integral(g[a] * g[a]) for a in range(self.dim))
        linf = float(np.max(np.sqrt(np.sum(comps * comps, axis=0))))
        return Norms(float(np.sqrt(l2sq)), float(np.sqrt(l2sq + gradsq)), linf)


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    kmax: int | None = None,
    mean_zero: bool = True,
) -> np.ndarray:
    """Random real field supported on modes with every |k_axis| <= kmax.

    Defaults to the dealias cutoff so products of two such fields stay
    representable.  Used by the property suites and the self-test command.
    """
    if kmax is None:
        kmax = grid.n // 3
    white = rng.standard_normal(grid.shape)
    what = grid._fft(white)
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    keep = np.ones((), dtype=bool)
    for a in range(grid.dim):
        shape = [1] * grid.dim
        shape[a] = grid.n
        keep = keep & (np.abs(k.reshape(shape)) <= kmax)
    f = grid._ifft(what * keep)
    if mean_zero:
        f = f - np.mean(f)
    scale = float(np.max(np.abs(f)))
    return f / scale if scale > 0 else f


def empirical_bogovskii_constant(
    grid: Grid, n_fields: int = 50, seed: int = 0
) -> float:
    """Empirical sup of ||grad(phi)||_H1 / ||f||_L2 over probe fields.

    Includes the lowest-wavenumber pure mode, which attains the sup
    (sqrt(2) on the unit-wavenumber torus), alongside random band-limited
    fields.
    """
    rng = np.random.default_rng(seed)
    x = grid.coords()[0]
    probes = [np.cos(x)]
    probes += [random_band_limited(grid, rng) for _ in range(n_fields)]
    best = 0.0
    for f in probes:
        ratio = grid.norms(grid.bogovskii(f)).h1 / grid.norms(f).l2
        best = max(best, ratio)
    return best
