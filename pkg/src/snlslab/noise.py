"""Smoothed cylindrical Wiener noise and exact-in-law sampling of the stochastic convolution.

The noise operator is Fourier diagonal, phi(e_n) = lambda_n e_n.  Complex
Brownian motions follow beta = (beta_re + i beta_im) / sqrt(2), so that
E|beta(t)|^2 = t.  The stochastic convolution

    Psi(t) = -i int_0^t S(t - t') phi dW(t')

has independent modes, each an exact Gaussian recursion on any time grid:

    Psi_hat(t_{k+1})(n) = exp(-i d_k |n|^2) Psi_hat(t_k)(n) - i lambda_n zeta_{n,k},

with zeta_{n,k} centred complex Gaussian of variance d_k = t_{k+1} - t_k.  The
rotation kernel has modulus one, so by circular symmetry the Ito integral over
a step has exactly this law.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .spaces import SpaceTimePath, l2_mixed_norm, mixed_norm
from .spectral import FrequencyLattice

NOISE_FAMILIES = ("power_law", "bandlimited", "single_mode", "custom")
MIN_ENSEMBLE = 100


@dataclass
class NoiseOperator:
    lattice: FrequencyLattice
    symbol: np.ndarray = field(repr=False)
    s: float = 1.0
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.symbol, dtype=float)
        if lam.shape != self.lattice.shape:
            raise ConfigError(f"symbol shape {lam.shape} does not match lattice {self.lattice.shape}")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ConfigError("noise symbol must be finite and nonnegative")
        self.symbol = lam

    def hs_norm(self, s: float | None = None) -> float:
        """||phi||_{HS(L^2; H^s)} on the truncated lattice."""
        s = self.s if s is None else s
        return math.sqrt(float(np.sum(self.symbol**2 * self.lattice.japanese(2 * s))))

    def scaled(self, c: float) -> "NoiseOperator":
        return NoiseOperator(self.lattice, self.symbol * c, self.s, self.family, {**self.params, "scale": c})

    @property
    def is_zero(self) -> bool:
        return not np.any(self.symbol)


def build_noise_operator(family: str, lattice: FrequencyLattice, s: float = 1.0, **params) -> NoiseOperator:
    """Named symbol families.

    power_law:   lambda_n = c <n>^{-alpha}            (params c, alpha)
    bandlimited: lambda_n = c for |n| <= radius      (params c, radius)
    single_mode: lambda_n = c at n = mode, else 0    (params c, mode)
    custom:      lambda_n = table                    (param table, lattice-shaped)
    """
    if family == "power_law":
        c, alpha = float(params.get("c", 1.0)), float(params.get("alpha", 2.0))
        lam = c * lattice.japanese(-alpha)
    elif family == "bandlimited":
        c, radius = float(params.get("c", 1.0)), float(params.get("radius", lattice.K))
        lam = np.where(lattice.n_abs <= radius, c, 0.0)
    elif family == "single_mode":
        c = float(params.get("c", 1.0))
        lam = np.zeros(lattice.shape)
        lam[lattice.index_of(params.get("mode", (0, 0, 0)))] = c
    elif family == "custom":
        if "table" not in params:
            raise ConfigError("custom noise family needs a 'table' parameter")
        lam = np.asarray(params["table"], dtype=float)
        params = {}
    else:
        raise ConfigError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")
    if np.any(np.asarray(lam) < 0):
        raise ConfigError("noise symbol coefficients must be nonnegative")
    return NoiseOperator(lattice, lam, s, family, dict(params))


class NoiseStream:
    """Reproducible complex Gaussian increments, one counter-addressed substream per time step.

    The step index selects a disjoint Philox counter block under a key derived
    from (seed, path), so the increment for step k never depends on which
    other steps, paths or threads were drawn before it.
    """

    def __init__(self, seed: int, path: int = 0):
        self.seed = int(seed)
        self.path = int(path)
        self._key = np.random.SeedSequence([self.seed, self.path]).generate_state(2, dtype=np.uint64)

    def normals(self, step: int, shape) -> np.ndarray:
        bitgen = np.random.Philox(key=self._key, counter=[0, int(step), 0, 0])
        return np.random.Generator(bitgen).standard_normal((2,) + tuple(shape))

    def increment(self, step: int, delta: float, shape) -> np.ndarray:
        """zeta with E zeta = 0, E|zeta|^2 = delta, real and imaginary parts independent."""
        z = self.normals(step, shape)
        return math.sqrt(0.5 * delta) * (z[0] + 1j * z[1])

    def for_path(self, path: int) -> "NoiseStream":
        return NoiseStream(self.seed, path)


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ConfigError("need at least one sample time")
    if np.any(np.diff(times) <= 0):
        raise ConfigError("sample times must be strictly increasing")
    return times


def sample_psi(
    phi: NoiseOperator,
    times,
    stream: NoiseStream,
    start_step: int = 0,
    psi0: np.ndarray | None = None,
) -> SpaceTimePath:
    """Stochastic convolution at the given times, exact in law.

    ``start_step`` is the global index of the first step (so a restart draws the
    same increments as a single run) and ``psi0`` the state at ``times[0]``;
    by default the path starts from Psi(0) = 0 and times must start at 0.
    """
    times = _check_times(times)
    lat = phi.lattice
    if psi0 is None:
        if times[0] != 0.0:
            raise ConfigError("the stochastic convolution starts at t = 0")
        state = np.zeros(lat.shape, dtype=complex)
    else:
        state = np.array(psi0, dtype=complex)
    out = np.empty((times.size,) + lat.shape, dtype=complex)
    out[0] = state
    lam = phi.symbol
    for k in range(times.size - 1):
        d = times[k + 1] - times[k]
        zeta = stream.increment(start_step + k, d, lat.shape)
        state = np.exp(-1j * d * lat.n_squared) * state - 1j * lam * zeta
        out[k + 1] = state
    return SpaceTimePath(lat, times, out)


# ---------------------------------------------------------------------------
# Monte Carlo reports


@dataclass
class MomentReport:
    quantity: str
    mean: float
    variance: float
    ci_low: float
    ci_high: float
    n: int
    params: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, quantity: str, params: dict | None = None) -> "MomentReport":
        x = np.asarray(samples, dtype=float)
        if x.size < MIN_ENSEMBLE:
            raise ConfigError(f"ensemble of {x.size} is too small for a confidence interval (need >= {MIN_ENSEMBLE})")
        mean = float(np.mean(x))
        var = float(np.var(x, ddof=1))
        half = 1.96 * math.sqrt(var / x.size)
        return cls(quantity, mean, var, mean - half, mean + half, int(x.size), dict(params or {}))

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n)

    def contains(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "mean": self.mean,
            "variance": self.variance,
            "ci95": [self.ci_low, self.ci_high],
            "n": self.n,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def _regularity_sample(psi: SpaceTimePath, s: float, p: float, q: float, r: float) -> tuple[float, float, float]:
    hs = np.sqrt(np.sum(psi.lattice.japanese(2 * s) * np.abs(psi.coeffs) ** 2, axis=(1, 2, 3)))
    sup = float(np.max(hs)) ** p
    lq = mixed_norm(psi, q, s, r).value ** p
    l2 = l2_mixed_norm(psi, q, s, r).value ** p
    return sup, lq, l2


def psi_regularity_stats(
    phi: NoiseOperator,
    s: float = 1.0,
    p: float = 2.0,
    q: float = 6.0,
    r: float = 6.0,
    T: float = 1.0,
    ensemble: int = 200,
    n_steps: int = 20,
    seed: int = 0,
    scales=(1.0, 2.0, 4.0),
) -> dict[str, MomentReport]:
    """Moments of sup_t ||Psi||_{H^s}^p, ||Psi||^p_{L^q W^{s,r}} and the dyadic l^2 variant.

    Each quantity is estimated for every scaling c * phi using the same seeds,
    and the ratio of the estimate to ||c phi||^p_HS is recorded per scale.
    The reports keyed by quantity name describe the unscaled operator.
    """
    if ensemble < MIN_ENSEMBLE:
        raise ConfigError(f"ensemble of {ensemble} is too small for a confidence interval (need >= {MIN_ENSEMBLE})")
    times = np.linspace(0.0, T, n_steps + 1)
    names = ("sup_Hs", "LqWsr", "l2LqWsr")
    per_scale = {}
    for c in scales:
        op = phi.scaled(c)
        rows = np.array(
            [_regularity_sample(sample_psi(op, times, NoiseStream(seed, k)), s, p, q, r) for k in range(ensemble)]
        )
        per_scale[c] = rows
    base = scales[0]
    reports = {}
    for j, name in enumerate(names):
        ratios = {}
        for c, rows in per_scale.items():
            hs = phi.scaled(c).hs_norm(s)
            ratios[str(c)] = float(np.mean(rows[:, j]) / hs**p) if hs > 0 else 0.0
        params = {
            "s": s, "p": p, "q": q, "r": r, "T": T, "n_steps": n_steps, "seed": seed,
            "scale": base, "hs_norm": phi.scaled(base).hs_norm(s), "ratio_to_hs_p": ratios,
        }
        reports[name] = MomentReport.from_samples(per_scale[base][:, j], name, params)
    return reports
