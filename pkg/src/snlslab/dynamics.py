"""Time stepping for the defocusing quintic NLS/SNLS on the 3-torus.

The deterministic step is Strang (or Lie) splitting between the free flow,
applied exactly as a Fourier multiplier, and the nonlinear flow
i u_t = |u|^4 u, which keeps |u(x)| fixed and is therefore the exact rotation
u(x) -> u(x) exp(-i dt |u(x)|^4).  The rotation is applied on the padded grid
and projected back onto the lattice.

For the stochastic equation each step ends with the additive kick
u_hat(n) -> u_hat(n) - i lambda_n zeta_{n,k}, using the same increments that
advance the stochastic convolution, so v = u - Psi is available losslessly.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, LatticeMismatchError, NumericalAbort
from .noise import MIN_ENSEMBLE, MomentReport, NoiseOperator, NoiseStream
from .spaces import SpaceTimePath, xtilde_norm, z_norm
from .spectral import FrequencyLattice, TorusField, grid_to_modes, modes_to_grid, quintic_coeffs

log = logging.getLogger(__name__)

SCHEMES = ("strang", "lie")
BLOWUP_THRESHOLD = 1e12


@dataclass
class SimConfig:
    lattice: FrequencyLattice
    dt: float
    T: float
    scheme: str = "strang"
    seed: int = 0
    noise: NoiseOperator | None = None
    stride: int = 1
    nonlinear: bool = True

    def __post_init__(self):
        errors = []
        if not (self.dt > 0):
            errors.append(f"dt must be positive (got {self.dt})")
        if not (self.T > 0):
            errors.append(f"T must be positive (got {self.T})")
        elif self.dt > self.T:
            errors.append(f"dt={self.dt} exceeds the horizon T={self.T}")
        if self.scheme not in SCHEMES:
            errors.append(f"scheme must be one of {SCHEMES} (got {self.scheme!r})")
        if int(self.stride) != self.stride or self.stride < 1:
            errors.append(f"stride must be a positive integer (got {self.stride})")
        if not self.lattice.dealiased:
            errors.append(f"M_pad={self.lattice.M_pad} < 6K+1={6 * self.lattice.K + 1}")
        if self.noise is not None and self.noise.lattice.K != self.lattice.K:
            errors.append("noise operator lives on a different lattice")
        if not errors and abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * max(1.0, self.T / self.dt):
            errors.append(f"T={self.T} is not an integer multiple of dt={self.dt}")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class EnergyLedger:
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    h1: np.ndarray

    COLUMNS = ("t", "mass", "energy", "h1")

    def rows(self):
        for row in zip(self.times, self.mass, self.energy, self.h1):
            yield tuple(float(x) for x in row)

    def __len__(self):
        return len(self.times)

    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])))

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))


# ---------------------------------------------------------------------------
# functionals


def _mass(c: np.ndarray) -> np.ndarray:
    return np.sum(c.real**2 + c.imag**2, axis=(-3, -2, -1))


def _energy(c: np.ndarray, lat: FrequencyLattice) -> np.ndarray:
    kinetic = 0.5 * np.sum(lat.n_squared * (c.real**2 + c.imag**2), axis=(-3, -2, -1))
    g = modes_to_grid(c, lat.M_pad)
    a2 = g.real**2 + g.imag**2
    return kinetic + np.mean(a2 * a2 * a2, axis=(-3, -2, -1)) / 6.0


def _h1(c: np.ndarray, lat: FrequencyLattice) -> np.ndarray:
    return np.sqrt(np.sum((1.0 + lat.n_squared) * (c.real**2 + c.imag**2), axis=(-3, -2, -1)))


def mass(f: TorusField) -> float:
    """||f||_{L^2}^2 with the normalized measure."""
    return float(_mass(f.coeffs))


def energy(f: TorusField) -> float:
    """1/2 ||grad f||^2 + 1/6 ||f||_{L^6}^6, the sextic term on the padded grid."""
    if not f.lattice.dealiased:
        raise ConfigError("energy needs M_pad >= 6K+1 for an exact sextic quadrature")
    return float(_energy(f.coeffs, f.lattice))


# ---------------------------------------------------------------------------
# stepping kernel (batched over leading axes)


class _Stepper:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        lat = cfg.lattice
        self.lat = lat
        self.full = np.exp(-1j * cfg.dt * lat.n_squared)
        self.half = np.exp(-0.5j * cfg.dt * lat.n_squared)

    def rotate(self, c: np.ndarray) -> np.ndarray:
        g = modes_to_grid(c, self.lat.M_pad)
        a2 = g.real**2 + g.imag**2
        a2 *= a2
        a2 *= -self.cfg.dt
        g *= np.exp(1j * a2)
        return grid_to_modes(g, self.lat.K)

    def deterministic(self, c: np.ndarray) -> np.ndarray:
        if self.cfg.scheme == "strang":
            c = self.half * c
            if self.cfg.nonlinear:
                c = self.rotate(c)
            return self.half * c
        c = self.full * c
        return self.rotate(c) if self.cfg.nonlinear else c


def _check_state(c: np.ndarray, step: int, t: float):
    bad = ~np.isfinite(c)
    if np.any(bad) or np.max(np.abs(c)) > BLOWUP_THRESHOLD:
        raise NumericalAbort(f"non-finite or exploding state at step {step} (t={t:.6g})", step=step, time=t)


def _integrate(u0: TorusField, cfg: SimConfig, stream: NoiseStream | None, start_step: int, t0: float, psi0):
    lat = cfg.lattice
    if u0.lattice.K != lat.K:
        raise LatticeMismatchError(f"initial data K={u0.lattice.K} vs config K={lat.K}")
    stepper = _Stepper(cfg)
    noise = cfg.noise if stream is not None else None
    lam = noise.symbol if noise is not None else None
    c = u0.coeffs.copy()
    psi = np.zeros(lat.shape, dtype=complex) if psi0 is None else np.array(psi0, dtype=complex)
    _check_state(c, 0, t0)
    keep_t, keep_u, keep_psi = [t0], [c.copy()], [psi.copy()]
    n = cfg.n_steps
    for k in range(n):
        c = stepper.deterministic(c)
        if noise is not None:
            zeta = stream.increment(start_step + k, cfg.dt, lat.shape)
            kick = -1j * lam * zeta
            c = c + kick
            psi = stepper.full * psi + kick
        t = t0 + (k + 1) * cfg.dt
        _check_state(c, k + 1, t)
        if (k + 1) % cfg.stride == 0 or k + 1 == n:
            keep_t.append(t)
            keep_u.append(c.copy())
            keep_psi.append(psi.copy())
    u_coeffs = np.stack(keep_u)
    ledger = EnergyLedger(
        np.array(keep_t), _mass(u_coeffs), _energy(u_coeffs, lat), _h1(u_coeffs, lat)
    )
    if not (np.all(np.isfinite(ledger.energy)) and np.all(np.isfinite(ledger.mass))):
        raise NumericalAbort("non-finite ledger entry")
    return SpaceTimePath(lat, keep_t, u_coeffs), SpaceTimePath(lat, keep_t, np.stack(keep_psi)), ledger


def nls_solve(u0: TorusField, cfg: SimConfig, t0: float = 0.0) -> tuple[SpaceTimePath, EnergyLedger]:
    """Deterministic quintic NLS from u0 over [t0, t0 + T]."""
    u, _, ledger = _integrate(u0, cfg, None, 0, t0, None)
    return u, ledger


def snls_solve(
    u0: TorusField,
    cfg: SimConfig,
    stream: NoiseStream | None = None,
    start_step: int = 0,
    psi0: np.ndarray | None = None,
    t0: float | None = None,
) -> tuple[SpaceTimePath, SpaceTimePath, EnergyLedger]:
    """SNLS with additive noise; returns (u, Psi, ledger).

    ``start_step`` and ``psi0`` let a run be continued window by window with
    exactly the increments a single run would use.
    """
    if cfg.noise is None:
        raise ConfigError("snls_solve needs a noise operator in the config")
    stream = stream if stream is not None else NoiseStream(cfg.seed)
    t0 = start_step * cfg.dt if t0 is None else t0
    return _integrate(u0, cfg, stream, start_step, t0, psi0)


# ---------------------------------------------------------------------------
# first-order expansion


def perturbation_term(v: TorusField, psi: TorusField) -> TorusField:
    """e = |v + Psi|^4 (v + Psi) - |v|^4 v, both products dealiased."""
    if v.lattice.K != psi.lattice.K:
        raise LatticeMismatchError(f"lattice K={v.lattice.K} vs K={psi.lattice.K}")
    M_pad = v.lattice.M_pad
    return TorusField(v.lattice, quintic_coeffs(v.coeffs + psi.coeffs, M_pad) - quintic_coeffs(v.coeffs, M_pad))


def first_order_decompose(u: SpaceTimePath, psi: SpaceTimePath) -> SpaceTimePath:
    """v = u - Psi, frame by frame."""
    return u - psi


def snls2_residual(v: SpaceTimePath, psi: SpaceTimePath) -> float:
    """Max over steps of the L^2 norm of the discrete residual of i v_t + Lap v = |v+Psi|^4 (v+Psi).

    In the interaction picture w = exp(it|n|^2) v_hat the equation reads
    w' = -i exp(it|n|^2) N(u)_hat; the residual compares the difference
    quotient of w with the trapezoid average of the right-hand side.
    """
    u = v + psi
    lat = v.lattice
    w = v.interaction_picture()
    phase = np.exp(1j * v.times[:, None, None, None] * lat.n_squared)
    rhs = -1j * phase * quintic_coeffs(u.coeffs, lat.M_pad)
    dt = np.diff(v.times)[:, None, None, None]
    res = (w[1:] - w[:-1]) / dt - 0.5 * (rhs[1:] + rhs[:-1])
    return float(np.max(np.sqrt(_mass(res))))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MassIdentityResult:
    times: np.ndarray
    expected: np.ndarray
    mass_reports: list[MomentReport]
    sup_mass_energy: MomentReport
    blowup_fraction: float
    n_paths: int

    def max_relative_error(self) -> float:
        errs = [abs(r.mean - e) / e for r, e in zip(self.mass_reports, self.expected) if e > 0]
        return max(errs) if errs else 0.0

    def to_records(self) -> list[dict]:
        out = []
        for t, e, r in zip(self.times, self.expected, self.mass_reports):
            d = r.to_dict()
            d["params"] = {**d["params"], "t": float(t), "expected": float(e)}
            out.append(d)
        d = self.sup_mass_energy.to_dict()
        d["params"] = {**d["params"], "blowup_fraction": self.blowup_fraction}
        out.append(d)
        return out


def ensemble_solve(u0: TorusField, cfg: SimConfig, paths: range, batch: int = 64):
    """Run independent SNLS paths batched over a leading axis.

    Yields (path_index, mass per stored time, energy per stored time) or
    (path_index, None, None) for paths that hit the blow-up policy.
    """
    lat = cfg.lattice
    stepper = _Stepper(cfg)
    lam = cfg.noise.symbol if cfg.noise is not None else np.zeros(lat.shape)
    n = cfg.n_steps
    paths = list(paths)
    for b0 in range(0, len(paths), batch):
        ids = paths[b0 : b0 + batch]
        streams = [NoiseStream(cfg.seed, p) for p in ids]
        c = np.broadcast_to(u0.coeffs, (len(ids),) + lat.shape).copy()
        alive = np.ones(len(ids), dtype=bool)
        stored = [c.copy()]
        for k in range(n):
            c = stepper.deterministic(c)
            zeta = np.stack([s.increment(k, cfg.dt, lat.shape) for s in streams])
            c = c - 1j * lam * zeta
            bad = ~np.all(np.isfinite(c), axis=(1, 2, 3)) | (np.max(np.abs(c), axis=(1, 2, 3)) > BLOWUP_THRESHOLD)
            if np.any(bad):
                alive &= ~bad
                c[bad] = 0.0
            if (k + 1) % cfg.stride == 0 or k + 1 == n:
                stored.append(c.copy())
        stored = np.stack(stored, axis=1)
        m = _mass(stored)
        e = _energy(stored, lat)
        for j, p in enumerate(ids):
            yield (p, m[j], e[j]) if alive[j] else (p, None, None)


def mass_identity_mc(
    u0: TorusField,
    phi: NoiseOperator,
    T: float,
    ensemble: int,
    dt: float = 0.01,
    seed: int = 0,
    stride: int = 1,
    nonlinear: bool = True,
    batch: int = 64,
) -> MassIdentityResult:
    """Monte Carlo check of E||u(t)||^2 = ||u0||^2 + t ||phi||^2_{HS(L^2;L^2)}."""
    if ensemble < MIN_ENSEMBLE:
        raise ConfigError(f"ensemble of {ensemble} is too small (need >= {MIN_ENSEMBLE})")
    cfg = SimConfig(u0.lattice, dt, T, seed=seed, noise=phi, stride=stride, nonlinear=nonlinear)
    masses, sups, blown = [], [], 0
    for _, m, e in ensemble_solve(u0, cfg, range(ensemble), batch):
        if m is None:
            blown += 1
            continue
        masses.append(m)
        sups.append(np.max(m + e))
    masses = np.array(masses)
    times = np.concatenate([[0.0], dt * np.arange(1, cfg.n_steps + 1)])
    keep = [0] + [k + 1 for k in range(cfg.n_steps) if (k + 1) % stride == 0 or k + 1 == cfg.n_steps]
    times = times[keep]
    m0 = mass(u0)
    hs0 = phi.hs_norm(0.0) ** 2
    expected = m0 + times * hs0
    params = {"T": T, "dt": dt, "seed": seed, "K": u0.lattice.K, "nonlinear": nonlinear}
    reports = [
        MomentReport.from_samples(masses[:, j], "mass", {**params, "t": float(t)}) for j, t in enumerate(times)
    ]
    sup_rep = MomentReport.from_samples(sups, "sup_mass_plus_energy", params)
    return MassIdentityResult(times, expected, reports, sup_rep, blown / ensemble, ensemble)


# ---------------------------------------------------------------------------
# interval splitting


@dataclass
class Window:
    t_start: float
    t_end: float
    i_start: int
    i_end: int
    z_psi: float
    xtilde_free: float
    minimal: bool = False


@dataclass
class WindowPlan:
    eta: float
    windows: list[Window] = field(default_factory=list)

    @property
    def J(self) -> int:
        return len(self.windows)

    @property
    def breakpoints(self) -> list[int]:
        return [w.i_start for w in self.windows] + ([self.windows[-1].i_end] if self.windows else [])

    def to_json(self) -> str:
        return json.dumps({"eta": self.eta, "J": self.J, "windows": [asdict(w) for w in self.windows]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "WindowPlan":
        d = json.loads(text)
        return cls(d["eta"], [Window(**w) for w in d["windows"]])


def _window_diagnostics(psi: SpaceTimePath, data_at, i: int, j: int) -> tuple[float, float]:
    z = z_norm(psi.restrict(i, j)).value
    times = psi.times[i : j + 1]
    free = SpaceTimePath.free_solution(data_at(i), times - times[0])
    free = SpaceTimePath(free.lattice, times, free.coeffs)
    return z, xtilde_norm(free, 1.0).value


def interval_partition(
    psi: SpaceTimePath,
    w0: TorusField,
    T: float,
    eta: float = 0.1,
    w_path: SpaceTimePath | None = None,
    max_length: float = 1.0,
) -> WindowPlan:
    """Greedy left-to-right split of [0, T] into windows where both the Z norm of
    Psi and the weak norm of the free evolution of the left-endpoint data are <= eta.

    The left-endpoint data is ``w_path`` at the window start when given (for
    instance a deterministic NLS solution), otherwise S(t) w0.  Windows that
    fail at a single sample step are kept and flagged ``minimal``.
    """
    if not (eta > 0):
        raise ConfigError(f"eta must be positive (got {eta})")
    if max_length > 1.0:
        raise ConfigError("windows may not be longer than 1")
    times = psi.times
    if abs(times[-1] - T) > 1e-9 * max(1.0, T):
        raise ConfigError(f"Psi is sampled up to t={times[-1]}, not T={T}")
    if w_path is not None and not np.array_equal(w_path.times, times):
        raise LatticeMismatchError("w_path and Psi must share a time grid")

    def data_at(i: int) -> TorusField:
        if w_path is not None:
            return w_path.frame(i)
        return TorusField(w0.lattice, w0.coeffs * np.exp(-1j * times[i] * w0.lattice.n_squared))

    def ok(i, j):
        z, x = _window_diagnostics(psi, data_at, i, j)
        return z <= eta and x <= eta, z, x

    plan = WindowPlan(eta)
    n = len(times) - 1
    i = 0
    while i < n:
        j_cap = int(np.searchsorted(times, times[i] + max_length + 1e-12, side="right")) - 1
        j_cap = max(min(j_cap, n), i + 1)
        good, z, x = ok(i, i + 1)
        if not good:
            warnings.warn(
                f"eta={eta} not attainable on [{times[i]:.4g}, {times[i + 1]:.4g}] at this resolution "
                f"(Z={z:.3g}, weak={x:.3g}); emitting a minimal-width window",
                RuntimeWarning,
                stacklevel=2,
            )
            plan.windows.append(Window(float(times[i]), float(times[i + 1]), i, i + 1, z, x, True))
            i += 1
            continue
        # exponential search then bisection on the monotone criterion
        lo, lo_diag = i + 1, (z, x)
        step = 1
        hi = None
        while True:
            cand = min(i + 2 * step, j_cap)
            if cand <= lo:
                break
            good, z, x = ok(i, cand)
            if good:
                lo, lo_diag = cand, (z, x)
                if cand == j_cap:
                    break
                step *= 2
            else:
                hi = cand
                break
        if hi is not None:
            while hi - lo > 1:
                mid = (lo + hi) // 2
                good, z, x = ok(i, mid)
                if good:
                    lo, lo_diag = mid, (z, x)
                else:
                    hi = mid
        plan.windows.append(Window(float(times[i]), float(times[lo]), i, lo, lo_diag[0], lo_diag[1], False))
        i = lo
    log.info("interval_partition: J=%d windows at eta=%g", plan.J, eta)
    return plan


def windowed_snls_solve(u0: TorusField, cfg: SimConfig, breakpoints: list[int], stream: NoiseStream | None = None):
    """Solve window by window, restarting at the given step indices.

    Returns (u, Psi) on the full step grid (stride 1).
    """
    if cfg.stride != 1:
        raise ConfigError("windowed continuation works on the full step grid (stride 1)")
    stream = stream if stream is not None else NoiseStream(cfg.seed)
    if breakpoints[0] != 0 or breakpoints[-1] != cfg.n_steps:
        raise ConfigError("breakpoints must start at 0 and end at n_steps")
    us, psis, ts = [], [], []
    u, psi = u0, None
    for a, b in zip(breakpoints, breakpoints[1:]):
        sub = SimConfig(cfg.lattice, cfg.dt, (b - a) * cfg.dt, cfg.scheme, cfg.seed, cfg.noise, 1, cfg.nonlinear)
        if sub.n_steps != b - a:
            raise ConfigError("window length is not a whole number of steps")
        if cfg.noise is None:
            up, lp = nls_solve(u, sub, t0=a * cfg.dt)
            pp = SpaceTimePath(up.lattice, up.times, np.zeros_like(up.coeffs))
        else:
            up, pp, _ = snls_solve(u, sub, stream, start_step=a, psi0=psi)
        first = 0 if not us else 1
        us.append(up.coeffs[first:])
        psis.append(pp.coeffs[first:])
        ts.append(a * cfg.dt + cfg.dt * np.arange(first, b - a + 1))
        u, psi = up.frame(len(up) - 1), pp.coeffs[-1]
    lat = cfg.lattice
    times = np.concatenate(ts)
    return SpaceTimePath(lat, times, np.concatenate(us)), SpaceTimePath(lat, times, np.concatenate(psis))
