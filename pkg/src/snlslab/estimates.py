"""Randomized checks of the linear, trilinear and quintic estimates.

Every check draws test functions whose norms on the right-hand side are
either computed exactly or bounded from above by a certificate, evaluates the
left-hand side by quadrature, and fits the growth of the worst ratio against
log N (or log |I|).  A fit never passes or fails by itself; callers compare
the slope with the predicted exponent.

Atoms.  A step function t -> f_k on [t_{k-1}, t_k) pushed along the free flow
has constant per-mode profiles on each piece, so for every mode the U^2 norm
is at most (sum_k |f_k(n)|^2)^{1/2}.  Summing over modes gives the X^s
certificate (sum_k ||f_k||^2_{H^s})^{1/2}, and the Y^s norm is computed
exactly from the piece values with zero at both ends.

Randomness.  Each (check, N, trial) pair owns a generator seeded from the
tuple (seed, check tag, N, trial), so trials can run in any order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.fft import next_fast_len
from scipy.integrate import cumulative_trapezoid

from .errors import ConfigError, LatticeMismatchError
from .noise import NoiseStream, build_noise_operator, sample_psi
from .spaces import (
    SpaceTimePath,
    _power_mean,
    _time_lq,
    m_norm,
    profile_variations,
    spacetime_lp,
    z_norm,
)
from .spectral import (
    CubeSpec,
    FrequencyLattice,
    TorusField,
    check_dyadic,
    grid_to_modes,
    lp_symbol,
    modes_to_grid,
    quintic_coeffs,
)

Q0 = 4.5
RAW_COLUMNS = ("N", "trial", "lhs", "rhs", "ratio")
KINDS = ("free", "atom", "cube", "block")

# Factor tags.  Right-hand-side factors must be "exact" or "upper".
EXACT, UPPER, LOWER, QUAD = "exact", "upper", "lower", "quadrature"


def _rng(seed: int, tag: int, N, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(tag), int(N), int(trial)])


def _gaussian(lat: FrequencyLattice, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)) / math.sqrt(2.0)


def _check_interval(length: float):
    if not (0 < length <= 1.0 + 1e-12):
        raise ConfigError(f"interval length must lie in (0, 1], got {length}")


def block_lattice(N: int, k_cap: int = 16) -> FrequencyLattice:
    """Smallest lattice holding the support N/2 < |n| < 2N of P_N, capped at k_cap."""
    N = check_dyadic(N)
    return FrequencyLattice(max(1, min(2 * N - 1, k_cap)))


# ---------------------------------------------------------------------------
# test functions


@dataclass
class AtomicTestFunction:
    """u(t) = S(t) f_k on [t_{k-1}, t_k), with breakpoints t_0 < ... < t_K."""

    breakpoints: np.ndarray
    pieces: list[TorusField]

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        if len(self.pieces) < 1 or self.breakpoints.size != len(self.pieces) + 1:
            raise ConfigError("need K >= 1 pieces and K + 1 breakpoints")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ConfigError("breakpoints must be strictly increasing")
        K = self.pieces[0].lattice.K
        if any(f.lattice.K != K for f in self.pieces):
            raise LatticeMismatchError("all pieces must share one lattice")

    @property
    def lattice(self) -> FrequencyLattice:
        return self.pieces[0].lattice

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def stack(self) -> np.ndarray:
        return np.stack([f.coeffs for f in self.pieces])

    def normalization(self) -> float:
        """sum_k ||f_k||_{L^2}^2."""
        c = self.stack
        return float(np.sum(c.real**2 + c.imag**2))

    def certificate(self, s: float) -> float:
        """Upper bound (sum_k ||f_k||^2_{H^s})^{1/2} for the X^s norm."""
        c = self.stack
        return math.sqrt(float(np.sum(self.lattice.japanese(2 * s) * (c.real**2 + c.imag**2))))

    def y_norm(self, s: float) -> float:
        """Exact Y^s norm: per-mode 2-variation of 0, f_1, ..., f_K, 0."""
        prof = self.stack.reshape(len(self.pieces), -1)
        var2 = profile_variations(prof, 2.0, leading_zero=True).reshape(self.lattice.shape)
        return math.sqrt(float(np.sum(self.lattice.japanese(2 * s) * var2)))

    def path(self, times) -> SpaceTimePath:
        times = np.asarray(times, dtype=float)
        a, b = self.interval
        if times[0] < a - 1e-12 or times[-1] > b + 1e-12:
            raise ConfigError(f"sample times leave the atom's interval [{a}, {b}]")
        k = np.clip(np.searchsorted(self.breakpoints, times, side="right") - 1, 0, len(self.pieces) - 1)
        phase = np.exp(-1j * times[:, None, None, None] * self.lattice.n_squared)
        return SpaceTimePath(self.lattice, times, phase * self.stack[k])

    def map_pieces(self, fn) -> "AtomicTestFunction":
        return AtomicTestFunction(self.breakpoints, [TorusField(f.lattice, fn(f.coeffs)) for f in self.pieces])

    def scaled(self, c: float) -> "AtomicTestFunction":
        return self.map_pieces(lambda a: a * c)

    def project(self, N: int) -> "AtomicTestFunction":
        sym = lp_symbol(self.lattice.n_abs, N)
        return self.map_pieces(lambda a: a * sym)


def combination_certificate(lambdas, atoms: list[AtomicTestFunction], s: float) -> float:
    """X^s bound sum_j |lambda_j| cert_j for a linear combination of atoms."""
    if len(lambdas) != len(atoms):
        raise ConfigError("one coefficient per atom")
    return float(sum(abs(l) * a.certificate(s) for l, a in zip(lambdas, atoms)))


def _support(kind: str, lat: FrequencyLattice, N=None, cube: CubeSpec | None = None) -> np.ndarray:
    if kind in ("free", "atom"):
        return np.ones(lat.shape)
    if kind == "cube":
        if cube is None:
            raise ConfigError("kind='cube' needs a CubeSpec")
        return cube.mask(lat).astype(float)
    if kind == "block":
        if N is None:
            raise ConfigError("kind='block' needs a dyadic N")
        return lp_symbol(lat.n_abs, N)
    raise ConfigError(f"unknown test-field kind {kind!r}; expected one of {KINDS}")


def random_test_field(
    kind: str,
    lattice: FrequencyLattice,
    rng: np.random.Generator,
    *,
    N: int | None = None,
    cube: CubeSpec | None = None,
    s: float = 0.0,
    decay: float = 0.0,
    pieces: int = 2,
    interval: tuple[float, float] = (0.0, 1.0),
    base: str = "free",
):
    """Gaussian coefficients localized as requested and normalized in H^s.

    ``free`` and ``atom`` return an AtomicTestFunction (one piece for free,
    ``pieces`` pieces with random breakpoints for atom); ``base`` restricts
    their frequencies ("free", "block" or "cube").  ``cube`` and ``block``
    return a TorusField.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown test-field kind {kind!r}; expected one of {KINDS}")
    weight_kind = kind if kind in ("cube", "block") else base
    weight = _support(weight_kind, lattice, N, cube) * lattice.japanese(-decay)
    if not np.any(weight):
        raise ConfigError("the requested frequency set is empty on this lattice")
    sob = lattice.japanese(2 * s)

    if kind in ("cube", "block"):
        c = _gaussian(lattice, rng) * weight
        return TorusField(lattice, c / math.sqrt(float(np.sum(sob * np.abs(c) ** 2))))

    a, b = interval
    _check_interval(b - a)
    n = 1 if kind == "free" else int(pieces)
    if n < 1:
        raise ConfigError("an atom needs at least one piece")
    inner = np.sort(rng.uniform(a, b, n - 1)) if n > 1 else np.array([])
    bps = np.concatenate([[a], inner, [b]])
    stack = np.stack([_gaussian(lattice, rng) * weight for _ in range(n)])
    stack /= math.sqrt(float(np.sum(sob * np.abs(stack) ** 2)))
    return AtomicTestFunction(bps, [TorusField(lattice, c) for c in stack])


# ---------------------------------------------------------------------------
# fits and reports


@dataclass
class FitReport:
    name: str
    abscissae: list[float]
    ordinates: list[float]
    slope: float
    intercept: float
    residual_rms: float
    trials: int = 0
    predicted: float | None = None
    raw: list[dict] = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.slope):
            raise ConfigError("fitted slope is not finite")

    @property
    def max_ratio(self) -> float:
        return max((r["ratio"] for r in self.raw), default=math.nan)

    def refit(self) -> "FitReport":
        """Recompute the fit from the retained per-point maxima of the raw rows."""
        by_n: dict[float, float] = {}
        for r in self.raw:
            by_n[r["N"]] = max(by_n.get(r["N"], -math.inf), r["ratio"])
        xs = sorted(by_n)
        fit = fit_exponent([(math.log(x), math.log(by_n[x])) for x in xs])
        return FitReport(
            self.name, fit.abscissae, fit.ordinates, fit.slope, fit.intercept, fit.residual_rms,
            self.trials, self.predicted, self.raw, self.bounds, self.params,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FitReport":
        return cls(**d)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RAW_COLUMNS)
        for r in self.raw:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in RAW_COLUMNS])
        return buf.getvalue()


def fit_exponent(points) -> FitReport:
    """Least-squares line through (x, y) points; at least three, two distinct abscissae."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ConfigError(f"a fit needs at least 3 points, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ConfigError("fit points must be finite")
    if np.ptp(x) == 0:
        raise ConfigError("degenerate abscissae: all x values coincide")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((y - A @ np.array([slope, intercept])) ** 2)))
    return FitReport("fit", x.tolist(), y.tolist(), float(slope), float(intercept), rms)


def _fit_rows(name, rows, trials, predicted, bounds, params, key="N") -> FitReport:
    by_x: dict[float, float] = {}
    for r in rows:
        by_x[r[key]] = max(by_x.get(r[key], -math.inf), r["ratio"])
    xs = sorted(by_x)
    if any(by_x[x] <= 0 for x in xs):
        raise ConfigError(f"{name}: a point has zero worst-case ratio, the log fit is undefined")
    fit = fit_exponent([(math.log(x), math.log(by_x[x])) for x in xs])
    return FitReport(
        name, fit.abscissae, fit.ordinates, fit.slope, fit.intercept, fit.residual_rms,
        trials, predicted, rows, bounds, params,
    )


# ---------------------------------------------------------------------------
# quadrature helpers


def _time_grid(length: float, omega: float, oversample: float, min_samples: int = 16) -> np.ndarray:
    n = max(int(math.ceil(oversample * omega * length)), min_samples)
    return np.linspace(0.0, length, n + 1)


def _exact_product(a: SpaceTimePath, b: SpaceTimePath) -> SpaceTimePath:
    """Coefficients of the pointwise product on the lattice K_a + K_b, without aliasing."""
    K = a.lattice.K + b.lattice.K
    M = next_fast_len(2 * K + 1)
    g = modes_to_grid(a.coeffs, M) * modes_to_grid(b.coeffs, M)
    return SpaceTimePath(FrequencyLattice(K), a.times, grid_to_modes(g, K))


def _product_l2(paths: list[SpaceTimePath], chunk: int = 32) -> float:
    """||prod_j u_j||_{L^2(I x T^3)} on a grid fine enough to integrate |prod|^2 exactly in x.

    All factors after the first are multiplied out in frequency space first,
    which is exact and cheap when they live on small lattices.
    """
    if len(paths) > 2:
        rest = paths[1]
        for p in paths[2:]:
            rest = _exact_product(rest, p)
        paths = [paths[0], rest]
    times = paths[0].times
    M = next_fast_len(2 * sum(p.lattice.K for p in paths) + 1)
    per_t = np.empty(times.size)
    for a in range(0, times.size, chunk):
        g = modes_to_grid(paths[0].coeffs[a : a + chunk], M)
        for p in paths[1:]:
            g *= modes_to_grid(p.coeffs[a : a + chunk], M)
        per_t[a : a + chunk] = np.sqrt(np.mean(g.real**2 + g.imag**2, axis=(-3, -2, -1)))
    return _time_lq(per_t, times, 2.0)


def _duhamel_profile(u: SpaceTimePath, forcing: np.ndarray) -> np.ndarray:
    """Interaction-picture profile of -i int_{t_0}^t S(t - s) F(s) ds, by the cumulative trapezoid."""
    phase = np.exp(1j * u.times[:, None, None, None] * u.lattice.n_squared)
    return cumulative_trapezoid(-1j * phase * forcing, u.times, axis=0, initial=0.0)


def duhamel_y_norm(u: SpaceTimePath, forcing: np.ndarray, s: float = 1.0) -> float:
    """Y^s norm of the sampled Duhamel integral; a lower bound for the N^s norm of the forcing."""
    w = _duhamel_profile(u, forcing)
    var2 = profile_variations(w.reshape(len(u), -1), 2.0).reshape(u.lattice.shape)
    return math.sqrt(float(np.sum(u.lattice.japanese(2 * s) * var2)))


# ---------------------------------------------------------------------------
# Strichartz on cubes


def strichartz_scan(
    ps,
    N_list=(1, 2, 4, 8, 16),
    trials: int = 50,
    seed: int = 0,
    interval: float = 1.0,
    family: str = "mixed",
    oversample: float = 2.0,
    scale: float = 1.0,
    chunk: int = 32,
) -> dict[float, FitReport]:
    """Worst ratio ||P_C u||_{L^p(I x T^3)} / ||P_C u(0)||_{L^2} over free solutions, per p.

    Cubes are axis-aligned, of side N and centred at the origin.  ``family``
    selects Gaussian data ("gaussian"), packets that focus at a random point
    and time inside I ("coherent"), or alternates the two ("mixed").
    """
    ps = [float(p) for p in ps]
    for p in ps:
        if not p > 4:
            raise ConfigError(f"the cube Strichartz estimate needs p > 4, got {p}")
    if family not in ("mixed", "gaussian", "coherent"):
        raise ConfigError(f"unknown family {family!r}")
    _check_interval(interval)
    if trials < 1:
        raise ConfigError("need at least one trial")
    N_list = [check_dyadic(N) for N in N_list]
    rows = {p: [] for p in ps}
    for N in N_list:
        lat = FrequencyLattice(max(N // 2, 1))
        mask = CubeSpec((0, 0, 0), N).mask(lat)
        nsq = lat.n_squared
        times = _time_grid(interval, float(np.max(nsq[mask])), oversample)
        for trial in range(trials):
            rng = _rng(seed, 1, N, trial)
            coherent = family == "coherent" or (family == "mixed" and trial % 2 == 1)
            if coherent:
                x0 = rng.uniform(0.0, 2 * np.pi, 3)
                t0 = rng.uniform(0.0, interval)
                n1, n2, n3 = lat.modes
                c = np.exp(-1j * (x0[0] * n1 + x0[1] * n2 + x0[2] * n3) + 1j * t0 * nsq) * mask
            else:
                c = _gaussian(lat, rng) * mask
            c = c * (scale / math.sqrt(float(np.sum(np.abs(c) ** 2))))
            per_t = {p: np.empty(times.size) for p in ps}
            for a in range(0, times.size, chunk):
                ph = np.exp(-1j * times[a : a + chunk, None, None, None] * nsq)
                g = np.abs(modes_to_grid(ph * c, lat.M))
                for p in ps:
                    per_t[p][a : a + chunk] = _power_mean(g, p, axis=(-3, -2, -1))
            rhs = math.sqrt(float(np.sum(np.abs(c) ** 2)))
            for p in ps:
                lhs = _time_lq(per_t[p], times, p)
                rows[p].append({"N": N, "trial": trial, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    bounds = {"lhs": QUAD, "U^p_Delta L^2": UPPER}
    out = {}
    for p in ps:
        params = {"p": p, "N_list": N_list, "seed": seed, "interval": interval, "family": family,
                  "oversample": oversample}
        out[p] = _fit_rows(f"strichartz_p{p:g}", rows[p], trials, 1.5 - 5.0 / p, bounds, params)
    return out


def strichartz_check(p: float, N_list=(1, 2, 4, 8, 16), trials: int = 50, seed: int = 0, **kw) -> FitReport:
    return strichartz_scan([p], N_list, trials, seed, **kw)[float(p)]


# ---------------------------------------------------------------------------
# trilinear estimates


def _random_atom(lat, N, rng, interval, pieces, scale) -> AtomicTestFunction:
    atom = random_test_field("atom", lat, rng, N=N, base="block", pieces=pieces, interval=(0.0, interval))
    return atom.scaled(scale).project(N)


def trilinear_uuu_check(
    N1_list=(2, 4, 8, 16),
    N2: int = 2,
    N3: int = 2,
    trials: int = 50,
    seed: int = 0,
    interval: float = 0.25,
    k_cap: int = 16,
    pieces: int = 2,
    oversample: float = 0.5,
    scale: float = 1.0,
) -> FitReport:
    """Worst ratio ||prod P_Nj u_j||_{L^2} / (||P_N1 u_1||_Y0 ||P_N2 u_2||_M ||P_N3 u_3||_M) against N_1.

    The u_j are random atoms with block-localized pieces; Y^0 is exact and the
    M norms use the atoms' X^1 certificates.
    """
    _check_interval(interval)
    N2, N3 = check_dyadic(N2), check_dyadic(N3)
    N1_list = [check_dyadic(N) for N in N1_list]
    if N2 < N3 or any(N < N2 for N in N1_list):
        raise ConfigError("need N1 >= N2 >= N3")
    rows = []
    lat2, lat3 = block_lattice(N2, k_cap), block_lattice(N3, k_cap)
    for N1 in N1_list:
        lat1 = block_lattice(N1, k_cap)
        omega = float(sum(3 * l.K**2 for l in (lat1, lat2, lat3)))
        times = _time_grid(interval, omega, oversample)
        for trial in range(trials):
            rng = _rng(seed, 2, N1, trial)
            u1 = _random_atom(lat1, N1, rng, interval, pieces, scale)
            u2 = _random_atom(lat2, N2, rng, interval, pieces, scale)
            u3 = _random_atom(lat3, N3, rng, interval, pieces, scale)
            p2, p3 = u2.path(times), u3.path(times)
            lhs = _product_l2([u1.path(times), p2, p3])
            rhs = u1.y_norm(0.0) * m_norm(p2, u2.certificate(1.0)).value * m_norm(p3, u3.certificate(1.0)).value
            rows.append({"N": N1, "trial": trial, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    bounds = {"lhs": QUAD, "Y0(u1)": EXACT, "M(u2)": UPPER, "M(u3)": UPPER}
    params = {"N2": N2, "N3": N3, "seed": seed, "interval": interval, "k_cap": k_cap, "pieces": pieces}
    return _fit_rows("trilinear_uuu", rows, trials, 0.0, bounds, params)


def _psi_block(lat, N, times, seed, path, scale, alpha) -> SpaceTimePath:
    phi = build_noise_operator("power_law", lat, s=1.0, c=scale, alpha=alpha)
    return sample_psi(phi, times, NoiseStream(seed, path)).project(N)


def trilinear_uff_check(
    variant: str,
    p: float = Q0,
    N_list=(1, 2, 4, 8),
    trials: int = 50,
    seed: int = 0,
    interval: float = 0.25,
    k_cap: int = 8,
    pieces: int = 2,
    noise_alpha: float = 1.0,
    oversample: float = 1.0,
    scale: float = 1.0,
) -> FitReport:
    """Worst ratio of the stochastic trilinear bounds without their N_2 factor, against N_2.

    Frequencies are N_1 = N_2 = N and N_3 = 1.  The f factors are Littlewood-Paley
    pieces of sampled stochastic convolutions.
      uff: u at N_1, f at N_2 and N_3, RHS Y0(u) ||f||_{L^a} ||f||_{L^a}, a = 4p/(p-2).
      uuf: f at N_1, u at N_2 and N_3, RHS ||f||_{L^b} Y0(u) Y0(u), b = 2p/(p-4);
           Y0 bounds the Y0 + X~0 norm of the higher-frequency u from above.
    """
    if variant not in ("uff", "uuf"):
        raise ConfigError(f"variant must be 'uff' or 'uuf', got {variant!r}")
    if not p > 4:
        raise ConfigError(f"the stochastic trilinear estimates need p > 4, got {p}")
    _check_interval(interval)
    N_list = [check_dyadic(N) for N in N_list]
    lat_lo = block_lattice(1, k_cap)
    rows = []
    for N in N_list:
        lat = block_lattice(N, k_cap)
        omega = 2 * 3 * lat.K**2 + 3 * lat_lo.K**2
        times = _time_grid(interval, float(omega), oversample)
        for trial in range(trials):
            rng = _rng(seed, 3 if variant == "uff" else 4, N, trial)
            path_id = 2 * (N * 100_003 + trial)
            if variant == "uff":
                a = 4 * p / (p - 2)
                u = _random_atom(lat, N, rng, interval, pieces, scale)
                f2 = _psi_block(lat, N, times, seed, path_id, scale, noise_alpha)
                f3 = _psi_block(lat_lo, 1, times, seed, path_id + 1, scale, noise_alpha)
                lhs = _product_l2([u.path(times), f2, f3])
                rhs = u.y_norm(0.0) * spacetime_lp(f2, a) * spacetime_lp(f3, a)
            else:
                b = 2 * p / (p - 4)
                f1 = _psi_block(lat, N, times, seed, path_id, scale, noise_alpha)
                u2 = _random_atom(lat, N, rng, interval, pieces, scale)
                u3 = _random_atom(lat_lo, 1, rng, interval, pieces, scale)
                lhs = _product_l2([f1, u2.path(times), u3.path(times)])
                rhs = spacetime_lp(f1, b) * u2.y_norm(0.0) * u3.y_norm(0.0)
            rows.append({"N": N, "trial": trial, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0})
    # the f factors are the sampled fields themselves, so their norms are computed, not bounded
    if variant == "uff":
        predicted = 1.5 - 5.0 / p
        bounds = {"lhs": QUAD, "Y0(u)": EXACT, "L^a(f2)": EXACT, "L^a(f3)": EXACT}
    else:
        predicted = 3.0 - 10.0 / p
        bounds = {"lhs": QUAD, "L^b(f)": EXACT, "Y0(u_low)": EXACT, "Y0+X~0(u_high)": UPPER}
    params = {"variant": variant, "p": p, "seed": seed, "interval": interval, "k_cap": k_cap,
              "noise_alpha": noise_alpha, "N3": 1}
    return _fit_rows(f"trilinear_{variant}", rows, trials, predicted, bounds, params)


# ---------------------------------------------------------------------------
# the quintic estimate


@dataclass
class QuinticEstimateReport:
    """Worst ratios of the quintic estimate and fitted |I| exponents.

    ``ratio_v`` is N(v) against ||v||_X1 ||v||_M^4, ``ratio_full`` the whole
    nonlinearity against the right-hand side with |I|^theta replaced by 1 (a
    consequence of the estimate for |I| <= 1).  ``pure_f`` fits the v = 0 term
    against |I| and ``crossing`` fits the mixed terms, estimating theta.
    """

    ratio_v: float
    ratio_full: float
    pure_f: FitReport
    crossing: FitReport
    trials: int
    bounds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _rhs_bracket(X, M, Z) -> float:
    """The |I|^theta bracket of the quintic estimate."""
    return X**2 * sum(M ** (3 - k) * Z**k for k in (1, 2, 3)) + X * Z**4 + Z**5


def quintic_estimate_check(
    lengths=(1.0, 0.5, 0.25),
    trials: int = 100,
    seed: int = 0,
    K: int = 1,
    pieces: int = 2,
    steps_per_unit: int = 256,
    noise_alpha: float = 2.0,
    v_scale: float = 1.0,
    f_scale: float = 1.0,
    scale: float = 1.0,
) -> QuinticEstimateReport:
    """LHS is the Y^1 norm of the Duhamel integral of each nonlinear piece.

    For every |I| in ``lengths`` and every trial, v is a random atom on
    I = [0, |I|] and f the sampled stochastic convolution restricted to I.
    """
    lengths = sorted((float(x) for x in lengths), reverse=True)
    for L in lengths:
        _check_interval(L)
    if trials < 1:
        raise ConfigError("need at least one trial")
    lat = FrequencyLattice(K)
    phi = build_noise_operator("power_law", lat, s=1.0, c=f_scale * scale, alpha=noise_alpha)
    M_pad = lat.M_pad
    pure_rows, cross_rows = [], []
    worst_v = worst_full = 0.0
    for trial in range(trials):
        full_times = np.linspace(0.0, lengths[0], int(round(lengths[0] * steps_per_unit)) + 1)
        psi_full = sample_psi(phi, full_times, NoiseStream(seed, 7_000_000 + trial))
        for L in lengths:
            n = int(round(L * steps_per_unit))
            f = psi_full.restrict(0, n)
            times = f.times
            rng = _rng(seed, 5, int(round(1e6 * L)), trial)
            v = random_test_field("atom", lat, rng, s=1.0, pieces=pieces, interval=(0.0, L)).scaled(v_scale * scale)
            vp = v.path(times)
            X = v.certificate(1.0)
            Mv = m_norm(vp, X).value
            Z = z_norm(f).value
            Nv = quintic_coeffs(vp.coeffs, M_pad)
            Nf = quintic_coeffs(f.coeffs, M_pad)
            Nu = quintic_coeffs(vp.coeffs + f.coeffs, M_pad)
            y_v = duhamel_y_norm(vp, Nv)
            y_f = duhamel_y_norm(f, Nf)
            y_full = duhamel_y_norm(vp, Nu)
            y_cross = duhamel_y_norm(vp, Nu - Nv - Nf)
            main = X * Mv**4
            bracket = _rhs_bracket(X, Mv, Z)
            worst_v = max(worst_v, y_v / main)
            worst_full = max(worst_full, y_full / (main + bracket))
            pure_rows.append({"N": L, "trial": trial, "lhs": y_f, "rhs": Z**5, "ratio": y_f / Z**5})
            cross_rows.append({"N": L, "trial": trial, "lhs": y_cross, "rhs": bracket, "ratio": y_cross / bracket})
    bounds = {"lhs": LOWER, "X1(v)": UPPER, "M(v)": UPPER, "Z(f)": EXACT}
    params = {"lengths": lengths, "seed": seed, "K": K, "steps_per_unit": steps_per_unit,
              "noise_alpha": noise_alpha, "v_scale": v_scale, "f_scale": f_scale}
    pure = _fit_rows("quintic_pure_f", pure_rows, trials, 1.0 - 5.0 * (4.1 - 4.0) / (2 * 4.1), bounds, params)
    cross = _fit_rows("quintic_crossing", cross_rows, trials, None, bounds, params)
    return QuinticEstimateReport(worst_v, worst_full, pure, cross, trials, bounds)
