"""Fourier-space kernels on the 2-D periodic torus [0, 2*pi]^2.

Conventions
-----------
* Collocation points x_j = 2*pi*j/n per axis; wavenumbers are the integers
  k in {-n/2+1, ..., n/2}^2.  The shared Nyquist index carries the label
  +n/2.
* Coefficients are true Fourier-series coefficients: the forward transform
  divides by n^2, so f(x) = sum_k f_k exp(i k.x) and
  ||f||_{L2}^2 = 4*pi^2 * sum_k |f_k|^2.
* Real fields stay exactly Hermitian (coeff(-k) == conj(coeff(k))): the
  forward transform goes through rfft2 plus an explicit Hermitian
  extension, so the symmetry holds bit-for-bit, not merely to round-off.
* Quadratic terms use the 2/3 rule: both factors are truncated to
  |k1|, |k2| <= n/3 before the physical product and the result is
  truncated again, which makes the product equal to the exact truncated
  convolution on the retained modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError, GevreyOverflowError

FOUR_PI_SQ = 4.0 * np.pi**2
TWO_PI = 2.0 * np.pi

# log of the largest finite double; guard threshold for Gevrey weights
_MAX_EXP = float(np.log(np.finfo(np.float64).max))


class SpectralGrid:
    """Wavenumber lattice and dealiasing mask for an n-by-n grid.

    Parameters
    ----------
    n : int
        Grid points per axis; must be even and >= 8.

    Attributes
    ----------
    kx, ky : (n, n) int arrays, first/second wavenumber component.
    k2 : (n, n) float array, |k|^2.
    kmag : (n, n) float array, |k|.
    dealias_mask : (n, n) bool array, True iff |k1|, |k2| <= n/3.
    x1, x2 : (n, n) float arrays of collocation coordinates.
    """

    __slots__ = ("n", "kx", "ky", "k2", "kmag", "dealias_mask",
                 "x1", "x2", "_k2_safe", "_kmag_safe")

    def __init__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            raise ConfigError("grid size must be an integer", key_path="n")
        if n < 8 or n % 2 != 0:
            raise ConfigError("grid size must be even and >= 8", key_path="n")
        self.n = int(n)
        k1d = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        k1d[self.n // 2] = self.n // 2  # label the shared Nyquist mode +n/2
        self.kx = np.broadcast_to(k1d[:, None], (self.n, self.n)).copy()
        self.ky = np.broadcast_to(k1d[None, :], (self.n, self.n)).copy()
        self.k2 = (self.kx**2 + self.ky**2).astype(np.float64)
        self.kmag = np.sqrt(self.k2)
        cut = self.n / 3.0
        self.dealias_mask = (np.abs(self.kx) <= cut) & (np.abs(self.ky) <= cut)
        x = TWO_PI * np.arange(self.n) / self.n
        self.x1 = np.broadcast_to(x[:, None], (self.n, self.n)).copy()
        self.x2 = np.broadcast_to(x[None, :], (self.n, self.n)).copy()
        # safe variants: 1.0 at the origin so divisions stay finite
        self._k2_safe = self.k2.copy()
        self._k2_safe[0, 0] = 1.0
        self._kmag_safe = self.kmag.copy()
        self._kmag_safe[0, 0] = 1.0
        for a in (self.kx, self.ky, self.k2, self.kmag, self.dealias_mask,
                  self.x1, self.x2, self._k2_safe, self._kmag_safe):
            a.setflags(write=False)

    def __eq__(self, other):
        return isinstance(other, SpectralGrid) and other.n == self.n

    def __hash__(self):
        return hash(("SpectralGrid", self.n))

    def __repr__(self):
        return f"SpectralGrid(n={self.n})"


@lru_cache(maxsize=None)
def make_grid(n: int) -> SpectralGrid:
    """Shared-grid factory; grids are immutable so caching is safe."""
    return SpectralGrid(n)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Scalar field stored as Fourier coefficients on a SpectralGrid.

    Instances are immutable; every operation returns a new field.
    """

    grid: SpectralGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.shape != (self.grid.n, self.grid.n):
            raise ConfigError(
                f"coefficient shape {c.shape} does not match grid n={self.grid.n}")
        if c.dtype != np.complex128 or not c.flags.c_contiguous:
            c = np.ascontiguousarray(c, dtype=np.complex128)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def mean(self) -> complex:
        """Spatial average = coefficient of the k = (0, 0) mode."""
        return complex(self.coeffs[0, 0])

    def is_mean_zero(self, rel_tol: float = 1e-12) -> bool:
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0 or not np.isfinite(scale):
            # non-finite fields pass vacuously; the stepper's divergence
            # check owns that failure mode
            return True
        return abs(self.coeffs[0, 0]) <= rel_tol * scale

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Pair of scalar fields sharing one grid (a velocity or a gradient)."""

    x: SpectralField
    y: SpectralField

    def __post_init__(self):
        _check_same_grid(self.x, self.y)

    @property
    def grid(self) -> SpectralGrid:
        return self.x.grid

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.x - other.x, self.y - other.y)

    def __mul__(self, scalar) -> "VectorField":
        return VectorField(self.x * scalar, self.y * scalar)

    __rmul__ = __mul__


def _check_same_grid(a, b) -> None:
    if a.grid.n != b.grid.n:
        raise ConfigError(
            f"fields live on different grids (n={a.grid.n} vs n={b.grid.n})")


def zero_field(grid: SpectralGrid) -> SpectralField:
    return SpectralField(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))


def constant_field(grid: SpectralGrid, value: float) -> SpectralField:
    c = np.zeros((grid.n, grid.n), dtype=np.complex128)
    c[0, 0] = value
    return SpectralField(grid, c)


# ---------------------------------------------------------------------------
# transforms


def _hermitian_extend(half: np.ndarray, n: int) -> np.ndarray:
    """Build the full n x n coefficient array from an rfft2 half-spectrum.

    The k2 = 0 and k2 = n/2 columns are symmetrized explicitly so the
    result satisfies coeff(-k) == conj(coeff(k)) bit-for-bit.
    """
    m = n // 2
    full = np.empty((n, n), dtype=np.complex128)
    full[:, :m + 1] = half
    full[0, m + 1:] = np.conj(half[0, 1:m][::-1])
    full[1:, m + 1:] = np.conj(half[1:, 1:m][::-1, ::-1])
    for j in (0, m):
        col = full[:, j]
        full[:, j] = 0.5 * (col + np.conj(np.roll(col[::-1], 1)))
    return full


def to_spectral(grid: SpectralGrid, values: np.ndarray) -> SpectralField:
    """Forward transform of real grid values to Fourier coefficients."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n, grid.n):
        raise ConfigError(
            f"value array shape {values.shape} does not match grid n={grid.n}")
    half = np.fft.rfft2(values) / grid.n**2
    return SpectralField(grid, _hermitian_extend(half, grid.n))


def to_physical(f: SpectralField) -> np.ndarray:
    """Inverse transform to real values on the collocation grid."""
    n = f.grid.n
    half = f.coeffs[:, :n // 2 + 1] * n**2
    return np.fft.irfft2(half, s=(n, n))


def conjugate_reflection(coeffs: np.ndarray) -> np.ndarray:
    """Array of conj(coeff(-k)); equals coeffs itself for a real field."""
    return np.conj(np.roll(coeffs[::-1, ::-1], (1, 1), axis=(0, 1)))


def hermitian_defect(f: SpectralField) -> float:
    """Max |coeff(-k) - conj(coeff(k))| relative to the largest coefficient."""
    scale = np.max(np.abs(f.coeffs))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(f.coeffs - conjugate_reflection(f.coeffs))) / scale)


# ---------------------------------------------------------------------------
# Fourier multipliers


def frac_laplacian(f: SpectralField, s: float) -> SpectralField:
    """Apply |k|^s on the mean-free part (zero mode mapped to 0).

    Negative s requires a mean-zero input.
    """
    if s < 0 and not f.is_mean_zero():
        raise DomainError("frac_laplacian with s < 0 requires a mean-zero field")
    out = f.coeffs * _kmag_power(f.grid, s)
    out[0, 0] = 0.0
    return SpectralField(f.grid, out)


def _kmag_power(grid: SpectralGrid, s: float) -> np.ndarray:
    """|k|^s with the origin entry left at 1 (callers zero it as needed)."""
    if s == 1.0:
        return grid._kmag_safe
    if s == 2.0:
        return grid._k2_safe
    return grid._kmag_safe**s


def gevrey_weight(grid: SpectralGrid, tau: float, s: float = 1.0) -> np.ndarray:
    """exp(tau*|k|^s) with an overflow guard naming the offending mode."""
    if tau < 0:
        raise DomainError("gevrey weight requires tau >= 0")
    if s <= 0:
        raise DomainError("gevrey weight requires s > 0")
    kmax = float(np.max(grid.kmag))
    if tau * kmax**s > _MAX_EXP:
        i = int(np.argmax(grid.kmag))
        mode = (int(grid.kx.flat[i]), int(grid.ky.flat[i]))
        raise GevreyOverflowError(
            f"exp(tau*|k|^s) overflows at mode {mode}: "
            f"tau*|k|^s = {tau * kmax**s:.3g} > {_MAX_EXP:.1f}", mode=mode)
    w = grid.kmag**s  # 0 at the origin, so the zero mode is unchanged
    return np.exp(tau * w)


def gevrey_filter(f: SpectralField, tau: float, s: float = 1.0) -> SpectralField:
    """Multiply coefficients by exp(tau*|k|^s); zero mode unchanged."""
    return SpectralField(f.grid, f.coeffs * gevrey_weight(f.grid, tau, s))


def solve_poisson(rho: SpectralField) -> SpectralField:
    """Solve -Laplace(phi) = rho with zero-mean phi: phi_k = rho_k / |k|^2."""
    out = rho.coeffs / rho.grid._k2_safe
    out[0, 0] = 0.0
    return SpectralField(rho.grid, out)


def _ddx(f: SpectralField) -> np.ndarray:
    out = 1j * f.grid.kx * f.coeffs
    out[f.grid.n // 2, :] = 0.0  # ik is ill-defined at the shared Nyquist mode
    return out


def _ddy(f: SpectralField) -> np.ndarray:
    out = 1j * f.grid.ky * f.coeffs
    out[:, f.grid.n // 2] = 0.0
    return out


def gradient(f: SpectralField, mode: str = "grad") -> VectorField:
    """Spectral gradient; mode "perp" gives (-d2 f, d1 f)."""
    if mode == "grad":
        return VectorField(SpectralField(f.grid, _ddx(f)),
                           SpectralField(f.grid, _ddy(f)))
    if mode == "perp":
        return VectorField(SpectralField(f.grid, -_ddy(f)),
                           SpectralField(f.grid, _ddx(f)))
    raise ConfigError(f"unknown gradient mode {mode!r}")


def divergence(v: VectorField) -> SpectralField:
    return SpectralField(v.grid, _ddx(v.x) + _ddy(v.y))


def curl(v: VectorField) -> SpectralField:
    """Scalar curl perp(grad).v = -d2 v_x + d1 v_y."""
    return SpectralField(v.grid, _ddx(v.y) - _ddy(v.x))


def leray_project(v: VectorField) -> VectorField:
    """Remove the gradient part: (Pv)_k = v_k - (v_k.k) k / |k|^2.

    The zero mode is dropped, so the output has zero spatial mean.
    """
    g = v.grid
    dot = (g.kx * v.x.coeffs + g.ky * v.y.coeffs) / g._k2_safe
    px = v.x.coeffs - dot * g.kx
    py = v.y.coeffs - dot * g.ky
    px[0, 0] = 0.0
    py[0, 0] = 0.0
    return VectorField(SpectralField(g, px), SpectralField(g, py))


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def multiply_dealiased(f: SpectralField, g: SpectralField) -> SpectralField:
    """2/3-rule product: truncate, multiply on the grid, truncate again."""
    _check_same_grid(f, g)
    fa = to_physical(dealias(f))
    ga = to_physical(dealias(g))
    return dealias(to_spectral(f.grid, fa * ga))


# ---------------------------------------------------------------------------
# norms and inner products


def norm_l2(f: SpectralField) -> float:
    """||f||_{L2} = 2*pi * sqrt(sum |f_k|^2) (Plancherel)."""
    return TWO_PI * float(np.linalg.norm(f.coeffs))


def norm_linf(f: SpectralField) -> float:
    return float(np.max(np.abs(to_physical(f))))


def norm_l4(f: SpectralField) -> float:
    vals = to_physical(f)
    return float((FOUR_PI_SQ / f.grid.n**2 * np.sum(vals**4))**0.25)


def norm_hm(f: SpectralField, m: float) -> float:
    """Inhomogeneous Sobolev norm with weight (1 + |k|^m)^2; weight 1 at k=0."""
    w = 1.0 + f.grid.kmag**m
    return TWO_PI * float(np.linalg.norm(w * f.coeffs))


def norm_gevrey(f: SpectralField, tau: float, m: float) -> float:
    """||e^{tau*Lambda} Lambda^m f||_{L2}; tau = 0 gives the H^m seminorm."""
    w = gevrey_weight(f.grid, tau) * _kmag_power(f.grid, m)
    if m != 0.0:
        w[0, 0] = 0.0  # Lambda^m drops the mean; Lambda^0 keeps it
    return TWO_PI * float(np.linalg.norm(w * f.coeffs))


def norm(f: SpectralField, kind: str, **params) -> float:
    """Dispatch by name: L2, Linf, L4, Hm (m=), Gevrey (tau=, m=)."""
    if kind == "L2":
        return norm_l2(f)
    if kind == "Linf":
        return norm_linf(f)
    if kind == "L4":
        return norm_l4(f)
    if kind == "Hm":
        return norm_hm(f, params["m"])
    if kind == "Gevrey":
        return norm_gevrey(f, params["tau"], params.get("m", 0.0))
    raise ConfigError(f"unknown norm kind {kind!r}")


def inner_l2(f: SpectralField, g: SpectralField) -> float:
    """(f, g)_{L2} = 4*pi^2 * sum Re(f_k conj(g_k))."""
    _check_same_grid(f, g)
    return FOUR_PI_SQ * float(np.real(np.vdot(g.coeffs, f.coeffs)))


def norm_l2_vec(v: VectorField) -> float:
    return float(np.hypot(norm_l2(v.x), norm_l2(v.y)))


def norm_linf_vec(v: VectorField) -> float:
    """Max over the grid of the pointwise Euclidean magnitude."""
    vx = to_physical(v.x)
    vy = to_physical(v.y)
    return float(np.max(np.hypot(vx, vy)))


def norm_gevrey_vec(v: VectorField, tau: float, m: float) -> float:
    return float(np.hypot(norm_gevrey(v.x, tau, m), norm_gevrey(v.y, tau, m)))
