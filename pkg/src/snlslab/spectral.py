"""Truncated Fourier fields on the 3-torus and the Fourier multipliers acting on them.

Conventions
-----------
The torus is [-pi, pi)^3 with the normalized measure (2 pi)^{-3} dx.  A field is
stored as its coefficients f_hat(n) on the cube |n_i| <= K, laid out as a
(2K+1, 2K+1, 2K+1) array in lexicographic order of (n1, n2, n3), index n_i + K.
Collocation points are x_j = 2 pi j / M (one period of the torus), and

    f_hat(n) = M^{-3} sum_j f(x_j) exp(-i n.x_j),

so that M^{-3} sum_j |f(x_j)|^2 = sum_n |f_hat(n)|^2 with no extra weights.

All array-level helpers accept leading batch axes; the last three axes are the
lattice (or grid) axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, LatticeMismatchError


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def is_dyadic(N) -> bool:
    try:
        n = int(N)
    except (TypeError, ValueError):
        return False
    return n == N and n >= 1 and (n & (n - 1)) == 0


def check_dyadic(N) -> int:
    if not is_dyadic(N):
        raise ConfigError(f"expected a dyadic integer N >= 1, got {N!r}")
    return int(N)


@dataclass(frozen=True)
class FrequencyLattice:
    """Modes n in Z^3 with |n_i| <= K, plus the grid sizes used to sample them.

    ``M`` is the collocation grid used for norms (defaults to 4K, at least
    2K+1); ``M_pad`` is the grid used for the quintic nonlinearity and the
    sextic energy density (defaults to the next power of two >= 6K+1).
    """

    K: int
    M: int | None = None
    M_pad: int | None = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 0:
            raise ConfigError(f"cutoff K must be a nonnegative integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))
        if self.M is None:
            object.__setattr__(self, "M", max(4 * self.K, 2 * self.K + 1, 2))
        if self.M_pad is None:
            object.__setattr__(self, "M_pad", next_pow2(6 * self.K + 1))
        if self.M < 2 * self.K + 1:
            raise ConfigError(f"grid size M={self.M} cannot represent K={self.K} (need M >= 2K+1)")
        if self.M_pad < 2 * self.K + 1:
            raise ConfigError(f"padded size M_pad={self.M_pad} cannot represent K={self.K}")

    @property
    def side(self) -> int:
        return 2 * self.K + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.side,) * 3

    @property
    def size(self) -> int:
        return self.side**3

    @property
    def dealiased(self) -> bool:
        return self.M_pad >= 6 * self.K + 1

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(self.axis, self.axis, self.axis, indexing="ij"))

    @cached_property
    def n_squared(self) -> np.ndarray:
        """|n|^2 as an integer array on the lattice."""
        n1, n2, n3 = self.modes
        return n1 * n1 + n2 * n2 + n3 * n3

    @cached_property
    def n_abs(self) -> np.ndarray:
        return np.sqrt(self.n_squared.astype(float))

    def japanese(self, s: float) -> np.ndarray:
        """<n>^s = (1 + |n|^2)^{s/2}."""
        return (1.0 + self.n_squared) ** (0.5 * s)

    def dyadic_blocks(self) -> list[int]:
        """Dyadic N = 1, 2, 4, ... up to the first N with N >= max |n|.

        With this range the blocks sum to one on every lattice point.
        """
        top = np.sqrt(3.0) * self.K
        out = [1]
        while out[-1] < top:
            out.append(out[-1] * 2)
        return out

    def index_of(self, n) -> tuple[int, int, int]:
        n = tuple(int(c) for c in n)
        if any(abs(c) > self.K for c in n):
            raise ValueError(f"mode {n} outside lattice K={self.K}")
        return tuple(c + self.K for c in n)

    def with_grid(self, M: int | None = None, M_pad: int | None = None) -> "FrequencyLattice":
        return FrequencyLattice(self.K, M if M is not None else self.M, M_pad if M_pad is not None else self.M_pad)


# ---------------------------------------------------------------------------
# array-level transforms


def _wrap_index(K: int, M: int) -> np.ndarray:
    return np.arange(-K, K + 1) % M


def modes_to_grid(coeffs: np.ndarray, M: int) -> np.ndarray:
    """Evaluate f(x_j) = sum_n f_hat(n) exp(i n.x_j) on the M^3 grid.

    The transform runs one axis at a time and skips the all-zero lines of the
    padded spectrum.
    """
    side = coeffs.shape[-1]
    K = (side - 1) // 2
    if M < side:
        raise ConfigError(f"grid size {M} too small for K={K}")
    idx = _wrap_index(K, M)
    lead = coeffs.shape[:-3]
    buf = np.zeros(lead + (side, side, M), dtype=complex)
    buf[..., idx] = coeffs
    a = sfft.ifft(buf, axis=-1, norm="forward")
    buf = np.zeros(lead + (side, M, M), dtype=complex)
    buf[..., idx, :] = a
    a = sfft.ifft(buf, axis=-2, norm="forward")
    buf = np.zeros(lead + (M, M, M), dtype=complex)
    buf[..., idx, :, :] = a
    return sfft.ifft(buf, axis=-3, norm="forward", overwrite_x=True)


def grid_to_modes(grid: np.ndarray, K: int) -> np.ndarray:
    """Forward transform with M^{-3} normalization, truncated to |n_i| <= K."""
    M = grid.shape[-1]
    if grid.shape[-3:] != (M, M, M):
        raise LatticeMismatchError(f"grid must be cubic, got shape {grid.shape[-3:]}")
    if M < 2 * K + 1:
        raise ConfigError(f"grid size {M} too small for K={K}")
    idx = _wrap_index(K, M)
    a = sfft.fft(grid, axis=-3, norm="forward")[..., idx, :, :]
    a = sfft.fft(a, axis=-2, norm="forward")[..., idx, :]
    return sfft.fft(a, axis=-1, norm="forward")[..., idx]


def resize_modes(coeffs: np.ndarray, K_new: int) -> np.ndarray:
    """Zero-pad or truncate a coefficient array to cutoff K_new."""
    K = (coeffs.shape[-1] - 1) // 2
    if K_new == K:
        return coeffs.copy()
    if K_new > K:
        out = np.zeros(coeffs.shape[:-3] + (2 * K_new + 1,) * 3, dtype=complex)
        d = K_new - K
        out[..., d : d + 2 * K + 1, d : d + 2 * K + 1, d : d + 2 * K + 1] = coeffs
        return out
    d = K - K_new
    return coeffs[..., d : d + 2 * K_new + 1, d : d + 2 * K_new + 1, d : d + 2 * K_new + 1].copy()


def quintic_coeffs(coeffs: np.ndarray, M_pad: int) -> np.ndarray:
    """Galerkin-truncated |f|^4 f evaluated on the padded grid."""
    K = (coeffs.shape[-1] - 1) // 2
    if M_pad < 6 * K + 1:
        raise ConfigError(f"quintic product needs M_pad >= 6K+1 = {6 * K + 1}, got {M_pad}")
    g = modes_to_grid(coeffs, M_pad)
    a2 = g.real * g.real + g.imag * g.imag
    return grid_to_modes(a2 * a2 * g, K)


# ---------------------------------------------------------------------------
# the bump and the Littlewood-Paley symbols


def _g(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def bump(s) -> np.ndarray:
    """psi: 1 on |s| <= 1, 0 on |s| >= 2, C-infinity transition in between."""
    a = np.abs(np.asarray(s, dtype=float))
    out = np.where(a <= 1.0, 1.0, 0.0)
    mid = (a > 1.0) & (a < 2.0)
    if np.any(mid):
        x = a[mid]
        num = _g(2.0 - x)
        out[mid] = num / (num + _g(x - 1.0))
    return out


def lp_symbol(n_abs, N: int) -> np.ndarray:
    N = check_dyadic(N)
    n_abs = np.asarray(n_abs, dtype=float)
    if N == 1:
        return bump(n_abs)
    return bump(n_abs / N) - bump(2.0 * n_abs / N)


# ---------------------------------------------------------------------------
# fields


@dataclass
class TorusField:
    lattice: FrequencyLattice
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.lattice.shape:
            raise LatticeMismatchError(
                f"coefficient array shape {c.shape} does not match lattice shape {self.lattice.shape}"
            )
        self.coeffs = c

    # constructors
    @classmethod
    def zeros(cls, lattice: FrequencyLattice) -> "TorusField":
        return cls(lattice, np.zeros(lattice.shape, dtype=complex))

    @classmethod
    def single_mode(cls, lattice: FrequencyLattice, n, amplitude: complex = 1.0) -> "TorusField":
        f = cls.zeros(lattice)
        f.coeffs[lattice.index_of(n)] = amplitude
        return f

    @classmethod
    def constant(cls, lattice: FrequencyLattice, c: complex) -> "TorusField":
        return cls.single_mode(lattice, (0, 0, 0), c)

    @classmethod
    def from_grid(cls, lattice: FrequencyLattice, grid: np.ndarray) -> "TorusField":
        grid = np.asarray(grid)
        if grid.ndim != 3:
            raise LatticeMismatchError(f"expected a 3-D grid, got shape {grid.shape}")
        return cls(lattice, grid_to_modes(grid, lattice.K))

    @classmethod
    def random(cls, lattice: FrequencyLattice, rng: np.random.Generator, decay: float = 0.0) -> "TorusField":
        """Complex Gaussian coefficients weighted by <n>^{-decay}."""
        z = rng.standard_normal(lattice.shape) + 1j * rng.standard_normal(lattice.shape)
        return cls(lattice, z * lattice.japanese(-decay) / np.sqrt(2.0))

    def to_grid(self, M: int | None = None) -> np.ndarray:
        return modes_to_grid(self.coeffs, M or self.lattice.M)

    def copy(self) -> "TorusField":
        return TorusField(self.lattice, self.coeffs.copy())

    def _check(self, other: "TorusField"):
        if other.lattice.K != self.lattice.K:
            raise LatticeMismatchError(f"lattice K={self.lattice.K} vs K={other.lattice.K}")

    def __add__(self, other):
        self._check(other)
        return TorusField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return TorusField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return TorusField(self.lattice, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self):
        return TorusField(self.lattice, -self.coeffs)

    def l2_squared(self) -> float:
        c = self.coeffs
        return float(np.sum(c.real**2 + c.imag**2))

    def hs_norm(self, s: float) -> float:
        w = self.lattice.japanese(2 * s)
        c = self.coeffs
        return float(np.sqrt(np.sum(w * (c.real**2 + c.imag**2))))


def to_modes(lattice: FrequencyLattice, grid: np.ndarray) -> TorusField:
    return TorusField.from_grid(lattice, grid)


def to_grid(f: TorusField, M: int | None = None) -> np.ndarray:
    return f.to_grid(M)


def lp_project(f: TorusField, N: int) -> TorusField:
    """Smooth projection P_N onto frequencies |n| ~ N."""
    return TorusField(f.lattice, f.coeffs * lp_symbol(f.lattice.n_abs, N))


@dataclass(frozen=True)
class CubeSpec:
    """Axis-aligned cube of integer frequencies ``corner_i <= n_i < corner_i + side``.

    ``center`` is the lattice point ``corner + side // 2``.
    """

    center: tuple[int, int, int]
    side: int
    orientation: str = "axis"

    def __post_init__(self):
        if self.orientation != "axis":
            raise ValueError("only axis-aligned cubes are supported")
        check_dyadic(self.side)
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def corner(self) -> tuple[int, int, int]:
        h = self.side // 2
        return tuple(c - h for c in self.center)

    def contains(self, n1, n2, n3) -> np.ndarray:
        lo = self.corner
        hi = tuple(c + self.side for c in lo)
        return (
            (n1 >= lo[0]) & (n1 < hi[0]) & (n2 >= lo[1]) & (n2 < hi[1]) & (n3 >= lo[2]) & (n3 < hi[2])
        )

    def mask(self, lattice: FrequencyLattice) -> np.ndarray:
        return self.contains(*lattice.modes)


def cube_project(f: TorusField, C: CubeSpec) -> TorusField:
    return TorusField(f.lattice, np.where(C.mask(f.lattice), f.coeffs, 0.0))


def bessel_multiplier(f: TorusField, s: float) -> TorusField:
    return TorusField(f.lattice, f.coeffs * f.lattice.japanese(s))


def free_phase(lattice: FrequencyLattice, t: float) -> np.ndarray:
    """Symbol of S(t) = exp(it Delta): exp(-i t |n|^2)."""
    return np.exp(-1j * t * lattice.n_squared)


def free_evolve(f: TorusField, t: float) -> TorusField:
    return TorusField(f.lattice, f.coeffs * free_phase(f.lattice, t))


def quintic_nonlinearity(f: TorusField) -> TorusField:
    """Alias-free |f|^4 f projected back onto the lattice."""
    return TorusField(f.lattice, quintic_coeffs(f.coeffs, f.lattice.M_pad))
