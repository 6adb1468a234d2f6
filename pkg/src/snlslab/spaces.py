"""Discrete versions of the space and space-time norms used for the quintic SNLS.

Spatial integrals use the normalized measure, discretized as the grid mean.
Time integrals use the composite trapezoid rule on the sample grid; exponent
``inf`` in time or space means the maximum over samples.

Two norms here are surrogates rather than exact values:

* ``y_norm`` evaluates the Y^s norm of a sampled path extended by a jump to
  zero after the last sample.  Restricted to the samples this can only miss
  partitions, so it is a lower bound that refines toward the continuum value.
* ``m_norm`` needs an upper bound for the X^1 norm, which callers supply from
  an atomic decomposition; the result is then an upper bound for M(I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LatticeMismatchError
from .spectral import FrequencyLattice, TorusField, lp_symbol, modes_to_grid

P0 = 4.0 + 1.0 / 10.0
P1 = 100.0
Z_EXPONENT = 2.0 * P0 / (P0 - 4.0)  # = 82


@dataclass(frozen=True)
class NormValue:
    value: float
    kind: str
    params: dict = field(default_factory=dict)
    bound: str = "exact"  # "exact", "upper" or "lower" relative to the continuum quantity

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise ValueError(f"{self.kind} norm evaluated to NaN")
        if v < 0:
            raise ValueError(f"{self.kind} norm is negative ({v})")
        if self.bound not in ("exact", "upper", "lower"):
            raise ValueError(f"unknown bound direction {self.bound!r}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "bound": self.bound, "params": dict(self.params)}


@dataclass
class SpaceTimePath:
    """Samples of a field at strictly increasing times; coeffs has shape (n, 2K+1, 2K+1, 2K+1)."""

    lattice: FrequencyLattice
    times: np.ndarray
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("a path needs at least one sample time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("path times must be strictly increasing")
        if self.coeffs.shape != (self.times.size,) + self.lattice.shape:
            raise LatticeMismatchError(
                f"frames shape {self.coeffs.shape} does not match "
                f"{(self.times.size,) + self.lattice.shape}"
            )

    @classmethod
    def from_frames(cls, times, frames: list[TorusField]) -> "SpaceTimePath":
        if not frames:
            raise ValueError("empty path")
        lat = frames[0].lattice
        for f in frames:
            if f.lattice.K != lat.K:
                raise LatticeMismatchError("all frames must share one lattice")
        return cls(lat, times, np.stack([f.coeffs for f in frames]))

    @classmethod
    def free_solution(cls, f: TorusField, times) -> "SpaceTimePath":
        times = np.asarray(times, dtype=float)
        phase = np.exp(-1j * times[:, None, None, None] * f.lattice.n_squared)
        return cls(f.lattice, times, phase * f.coeffs)

    @classmethod
    def constant(cls, f: TorusField, times) -> "SpaceTimePath":
        times = np.asarray(times, dtype=float)
        return cls(f.lattice, times, np.broadcast_to(f.coeffs, (times.size,) + f.lattice.shape).copy())

    def __len__(self):
        return self.times.size

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @property
    def length(self) -> float:
        return float(self.times[-1] - self.times[0])

    def frame(self, k: int) -> TorusField:
        return TorusField(self.lattice, self.coeffs[k])

    @property
    def frames(self) -> list[TorusField]:
        return [self.frame(k) for k in range(len(self))]

    def restrict(self, i0: int, i1: int) -> "SpaceTimePath":
        """Samples i0..i1 inclusive."""
        return SpaceTimePath(self.lattice, self.times[i0 : i1 + 1], self.coeffs[i0 : i1 + 1])

    def map_coeffs(self, fn) -> "SpaceTimePath":
        return SpaceTimePath(self.lattice, self.times, fn(self.coeffs))

    def scaled(self, c) -> "SpaceTimePath":
        return self.map_coeffs(lambda a: a * c)

    def __add__(self, other: "SpaceTimePath") -> "SpaceTimePath":
        _check_compatible(self, other)
        return SpaceTimePath(self.lattice, self.times, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpaceTimePath") -> "SpaceTimePath":
        _check_compatible(self, other)
        return SpaceTimePath(self.lattice, self.times, self.coeffs - other.coeffs)

    def interaction_picture(self) -> np.ndarray:
        """exp(i t |n|^2) u_hat(t)(n), the per-mode profiles."""
        phase = np.exp(1j * self.times[:, None, None, None] * self.lattice.n_squared)
        return phase * self.coeffs

    def project(self, N: int) -> "SpaceTimePath":
        return self.map_coeffs(lambda a: a * lp_symbol(self.lattice.n_abs, N))


def _check_compatible(a: SpaceTimePath, b: SpaceTimePath):
    if a.lattice.K != b.lattice.K:
        raise LatticeMismatchError(f"lattice K={a.lattice.K} vs K={b.lattice.K}")
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise LatticeMismatchError("paths are sampled on different time grids")


@dataclass
class ScalarPath:
    times: np.ndarray
    values: np.ndarray
    terminal_zero: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.shape != self.values.shape[:1]:
            raise ValueError("times and values must have the same length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


# ---------------------------------------------------------------------------
# low-level reductions


def _power_mean(a: np.ndarray, r: float, axis) -> np.ndarray:
    """(mean a^r)^{1/r} for a >= 0, scaled to survive large r."""
    if math.isinf(r):
        return np.max(a, axis=axis)
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    inner = np.mean((a / safe) ** r, axis=axis)
    return np.squeeze(m, axis=axis) * inner ** (1.0 / r)


def _time_lq(values: np.ndarray, times: np.ndarray, q: float) -> float:
    """(trapezoid integral of values^q over times)^{1/q}; values >= 0."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty path")
    if math.isinf(q):
        return float(np.max(values))
    if values.size == 1:
        return 0.0
    m = float(np.max(values))
    if m == 0.0:
        return 0.0
    integral = np.trapezoid((values / m) ** q, times)
    return m * float(integral) ** (1.0 / q)


def _check_exponent(q: float, name: str = "q", lo: float = 1.0):
    if not (q >= lo):
        raise ConfigError(f"exponent {name}={q} must be >= {lo}")


def lr_norms(coeffs: np.ndarray, r: float, M: int) -> np.ndarray:
    """Spatial L^r norms (normalized measure) for a stack of coefficient frames."""
    g = np.abs(modes_to_grid(coeffs, M))
    return _power_mean(g, r, axis=(-3, -2, -1))


def _frame_w_norms(coeffs: np.ndarray, lattice: FrequencyLattice, s: float, r: float) -> np.ndarray:
    if s != 0:
        coeffs = coeffs * lattice.japanese(s)
    if r == 2:
        return np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=(-3, -2, -1)))
    return lr_norms(coeffs, r, lattice.M)


def spacetime_lp(u: SpaceTimePath, p: float) -> float:
    """||u||_{L^p_{t,x}} over the sampled interval."""
    return _time_lq(lr_norms(u.coeffs, p, u.lattice.M), u.times, p)


# ---------------------------------------------------------------------------
# spatial norms


def sobolev_norm(f: TorusField, s: float, q: float = 2.0) -> NormValue:
    _check_exponent(q)
    g = np.abs(modes_to_grid(f.coeffs * f.lattice.japanese(s), f.lattice.M))
    return NormValue(float(_power_mean(g, q, axis=(0, 1, 2))), "sobolev", {"s": s, "q": q})


def sobolev_norm_coeff(f: TorusField, s: float) -> float:
    """H^s norm straight from the coefficients."""
    return f.hs_norm(s)


def square_function_norm(f: TorusField, s: float, q: float) -> NormValue:
    if not (1.0 < q < math.inf):
        raise ConfigError(f"square function norm needs 1 < q < inf, got {q}")
    lat = f.lattice
    acc = np.zeros((lat.M,) * 3)
    for N in lat.dyadic_blocks():
        g = modes_to_grid(f.coeffs * lp_symbol(lat.n_abs, N), lat.M)
        acc += float(N) ** (2 * s) * (g.real**2 + g.imag**2)
    val = float(_power_mean(np.sqrt(acc), q, axis=(0, 1, 2)))
    return NormValue(val, "square_function", {"s": s, "q": q})


# ---------------------------------------------------------------------------
# space-time norms


def mixed_norm(u: SpaceTimePath, q: float, s: float, r: float) -> NormValue:
    """||u||_{L^q_t W^{s,r}_x}."""
    _check_exponent(q)
    _check_exponent(r, "r")
    per_t = _frame_w_norms(u.coeffs, u.lattice, s, r)
    return NormValue(_time_lq(per_t, u.times, q), "mixed", {"q": q, "s": s, "r": r})


def l2_mixed_norm(u: SpaceTimePath, q: float, s: float, r: float) -> NormValue:
    """(sum_N N^{2s} ||P_N u||^2_{L^q_t L^r_x})^{1/2}."""
    _check_exponent(q)
    _check_exponent(r, "r")
    lat = u.lattice
    total = 0.0
    for N in lat.dyadic_blocks():
        sym = lp_symbol(lat.n_abs, N)
        if not np.any(sym):
            continue
        block = u.coeffs * sym
        if not np.any(block):
            continue
        per_t = _frame_w_norms(block, lat, 0.0, r)
        total += float(N) ** (2 * s) * _time_lq(per_t, u.times, q) ** 2
    return NormValue(math.sqrt(total), "l2_mixed", {"q": q, "s": s, "r": r})


def z_norm(u: SpaceTimePath) -> NormValue:
    if u.length > 1.0 + 1e-12:
        raise ConfigError(f"Z norm is defined on intervals of length <= 1, got {u.length}")
    v = l2_mixed_norm(u, Z_EXPONENT, 1.0, Z_EXPONENT)
    return NormValue(v.value, "Z", {"q": Z_EXPONENT, "r": Z_EXPONENT, "s": 1.0})


def xtilde_terms(u: SpaceTimePath, s: float, exponents=(P0, P1)) -> dict[float, float]:
    """Each summand (sum_N N^{5+(s-3/2)p} ||P_N u||^p_{L^p_{t,x}})^{1/p} of the weak norm."""
    lat = u.lattice
    out = {}
    blocks = [N for N in lat.dyadic_blocks() if np.any(lp_symbol(lat.n_abs, N))]
    block_paths = {N: u.coeffs * lp_symbol(lat.n_abs, N) for N in blocks}
    for p in exponents:
        logs = []
        for N, c in block_paths.items():
            if not np.any(c):
                continue
            norm = _time_lq(lr_norms(c, p, lat.M), u.times, p)
            if norm == 0.0:
                continue
            logs.append((5.0 + (s - 1.5) * p) * math.log(N) + p * math.log(norm))
        if not logs:
            out[p] = 0.0
            continue
        top = max(logs)
        out[p] = math.exp((top + math.log(sum(math.exp(x - top) for x in logs))) / p)
    return out


def xtilde_norm(u: SpaceTimePath, s: float) -> NormValue:
    """Weak norm with exponents 4.1 and 100.

    The sup over subintervals J of I is attained at J = I since every summand
    grows with the interval, so it is evaluated on the full sample range.
    """
    if u.length > 1.0 + 1e-12:
        raise ConfigError(f"the weak norm is defined here for |I| <= 1, got {u.length}")
    terms = xtilde_terms(u, s)
    return NormValue(sum(terms.values()), "xtilde", {"s": s, "terms": {str(k): v for k, v in terms.items()}})


def m_norm(u: SpaceTimePath, x1_upper) -> NormValue:
    """sqrt(||u||_{X~^1} * B) where B is a caller-certified upper bound for ||u||_{X^1}."""
    b = float(x1_upper)
    if b < 0 or math.isnan(b):
        raise ValueError(f"X^1 bound must be nonnegative, got {b}")
    xt = xtilde_norm(u, 1.0).value
    return NormValue(math.sqrt(xt * b), "M", {"xtilde": xt, "x1_upper": b}, bound="upper")


# ---------------------------------------------------------------------------
# p-variation


def pvar_power(values: np.ndarray, p: float) -> np.ndarray:
    """sup over sample subsets of sum |v(t_k) - v(t_{k-1})|^p.

    ``values`` has time on axis 0; any trailing axes are independent paths.
    Dynamic program best[j] = max_{i<j} best[i] + |v_j - v_i|^p, O(n^2).
    """
    v = np.asarray(values)
    n = v.shape[0]
    best = np.zeros(v.shape, dtype=float)
    for j in range(1, n):
        jump = np.abs(v[j] - v[:j]) ** p
        best[j] = np.max(best[:j] + jump, axis=0)
    return np.max(best, axis=0)


def p_variation(v: ScalarPath, p: float) -> NormValue:
    _check_exponent(p, "p")
    vals = v.values
    if v.terminal_zero:
        vals = np.append(vals, 0.0)
    return NormValue(float(pvar_power(vals, p)) ** (1.0 / p), "p_variation", {"p": p})


def _drop_repeats(w: np.ndarray, rtol: float = 1e-13) -> np.ndarray:
    """Remove samples equal to their predecessor (they never change a variation sum)."""
    if w.shape[0] <= 1:
        return w
    scale = np.max(np.abs(w))
    if scale == 0:
        return w[:1]
    keep = [0]
    for k in range(1, w.shape[0]):
        if np.max(np.abs(w[k] - w[keep[-1]])) > rtol * scale:
            keep.append(k)
    return w[keep]


def mode_variations(u: SpaceTimePath, p: float = 2.0, leading_zero: bool = False) -> np.ndarray:
    """Per-mode V^p norms (p-th power) of the interaction-picture profiles, terminal zero appended."""
    return profile_variations(u.interaction_picture().reshape(len(u), -1), p, leading_zero).reshape(
        u.lattice.shape
    )


def profile_variations(w: np.ndarray, p: float = 2.0, leading_zero: bool = False) -> np.ndarray:
    """Columnwise V^p (p-th power) of profiles w[time, mode] with the jump to zero at the end."""
    out = np.zeros(w.shape[1])
    active = np.any(w != 0, axis=0)
    if not np.any(active):
        return out
    wa = _drop_repeats(w[:, active])
    zero = np.zeros((1, wa.shape[1]), dtype=complex)
    wa = np.concatenate([zero, wa, zero] if leading_zero else [wa, zero])
    out[active] = pvar_power(wa, p)
    return out


def y_norm(u: SpaceTimePath, s: float, leading_zero: bool = False) -> NormValue:
    """Y^s norm of the sampled path extended by a jump to zero after the last sample.

    With ``leading_zero`` the path is also taken to start from zero, which is
    the value forced on right-continuous extensions vanishing at -infinity.
    Sampling only discards partitions, so the value is a lower bound for the
    continuum restriction norm and converges to it under refinement.
    """
    var2 = mode_variations(u, 2.0, leading_zero)
    val = math.sqrt(float(np.sum(u.lattice.japanese(2 * s) * var2)))
    return NormValue(val, "Y", {"s": s, "leading_zero": leading_zero}, bound="lower")
