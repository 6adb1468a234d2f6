"""Experiment dispatch, result serialization and the run manifest.

A run writes into a fresh temporary directory next to the target and renames
it into place only after every output and the final manifest are on disk, so
an interrupted or failed run leaves nothing behind.  Output files never carry
timestamps; the wall-clock lives in the manifest alone, so reruns of one
config reproduce every output checksum.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..dynamics import (
    EnergyLedger,
    MassIdentityResult,
    SimConfig,
    WindowPlan,
    energy,
    interval_partition,
    mass,
    mass_identity_mc,
    nls_solve,
    snls_solve,
    windowed_snls_solve,
)
from ..errors import ConfigError
from ..estimates import (
    FitReport,
    QuinticEstimateReport,
    quintic_estimate_check,
    strichartz_scan,
    trilinear_uff_check,
    trilinear_uuu_check,
)
from ..noise import MomentReport, NoiseOperator, NoiseStream, build_noise_operator, psi_regularity_stats, sample_psi
from ..spaces import NormValue, SpaceTimePath, sobolev_norm, xtilde_norm, y_norm, z_norm
from ..spectral import FrequencyLattice, TorusField
from .config import ExperimentConfig

SCHEMA_VERSION = 1
# Bumped whenever a change reorders floating-point work and so alters output bits.
EVALUATION_ORDER = "1"
MANIFEST = "manifest.json"


# ---------------------------------------------------------------------------
# records


def _clean(x):
    """JSON-safe copy: numpy scalars and arrays become Python values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def to_record(obj) -> dict:
    """One JSONL record with a fixed leading layout: schema, type, payload."""
    if isinstance(obj, MomentReport):
        kind, body = "moment", obj.to_dict()
    elif isinstance(obj, FitReport):
        kind, body = "fit", {k: v for k, v in obj.to_dict().items() if k != "raw"}
        body["n_raw"] = len(obj.raw)
    elif isinstance(obj, QuinticEstimateReport):
        kind = "quintic"
        body = {
            "ratio_v": obj.ratio_v,
            "ratio_full": obj.ratio_full,
            "trials": obj.trials,
            "bounds": obj.bounds,
            "pure_f": to_record(obj.pure_f)["data"],
            "crossing": to_record(obj.crossing)["data"],
        }
    elif isinstance(obj, EnergyLedger):
        kind = "ledger"
        body = {
            "n": len(obj),
            "t_end": float(obj.times[-1]),
            "mass_drift": obj.mass_drift(),
            "energy_drift": obj.energy_drift(),
            "columns": list(EnergyLedger.COLUMNS),
        }
    elif isinstance(obj, WindowPlan):
        kind, body = "window_plan", json.loads(obj.to_json())
    elif isinstance(obj, NormValue):
        kind, body = "norm", obj.to_dict()
    elif isinstance(obj, MassIdentityResult):
        kind = "mass_identity"
        body = {
            "n_paths": obj.n_paths,
            "blowup_fraction": obj.blowup_fraction,
            "max_relative_error": obj.max_relative_error(),
            "records": obj.to_records(),
        }
    elif isinstance(obj, dict):
        kind, body = obj.get("type", "summary"), {k: v for k, v in obj.items() if k != "type"}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return {"schema_version": SCHEMA_VERSION, "type": kind, "data": _clean(body)}


def _tables(obj) -> list[tuple[str, list[str], list[list]]]:
    """Tabular blocks carried by a report: (table name, columns, rows)."""
    if isinstance(obj, FitReport):
        cols = ["report", "N", "trial", "lhs", "rhs", "ratio"]
        return [("raw", cols, [[obj.name] + [r[c] for c in cols[1:]] for r in obj.raw])]
    if isinstance(obj, QuinticEstimateReport):
        return _tables(obj.pure_f) + _tables(obj.crossing)
    if isinstance(obj, EnergyLedger):
        return [("ledger", list(EnergyLedger.COLUMNS), [list(r) for r in obj.rows()])]
    return []


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(reports, directory, stem: str = "results") -> list[Path]:
    """Write ``<stem>.jsonl`` plus one ``<stem>_<table>.csv`` per tabular block kind.

    Raises ConfigError on an empty batch without touching the directory.
    """
    reports = list(reports)
    if not reports:
        raise ConfigError("nothing to emit: the report batch is empty")
    records = [to_record(r) for r in reports]
    tables: dict[str, tuple[list[str], list[list]]] = {}
    for r in reports:
        for name, cols, rows in _tables(r):
            tables.setdefault(name, (cols, []))[1].extend(rows)
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        path = directory / f"{stem}.jsonl"
        with open(path, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec, allow_nan=True) + "\n")
        written.append(path)
        for name, (cols, rows) in tables.items():
            path = directory / f"{stem}_{name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(cols)
                w.writerows([[_fmt(v) for v in row] for row in rows])
            written.append(path)
    except OSError as exc:
        raise ConfigError(f"cannot write results to {directory}: {exc}") from exc
    return written


# ---------------------------------------------------------------------------
# manifest


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    kind: str
    version: str = __version__
    schema_version: int = SCHEMA_VERSION
    evaluation_order: str = EVALUATION_ORDER
    environment: dict = field(default_factory=dict)
    status: str = "running"
    started: float = 0.0
    wall_clock: float | None = None
    outputs: dict = field(default_factory=dict)
    exit_code: int | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, directory: Path):
        (Path(directory) / MANIFEST).write_text(self.to_json())


def _environment() -> dict:
    return {"python": sys.version.split()[0], "numpy": np.__version__, "scipy": scipy.__version__}


# ---------------------------------------------------------------------------
# building blocks from config sections


def lattice_of(cfg: ExperimentConfig) -> FrequencyLattice:
    return FrequencyLattice(cfg.sim.K, cfg.sim.M, cfg.sim.M_pad)


def noise_of(cfg: ExperimentConfig, lat: FrequencyLattice) -> NoiseOperator | None:
    n = cfg.noise
    if n.family is None:
        return None
    params = {"c": n.c}
    if n.family == "power_law":
        params["alpha"] = n.alpha
    elif n.family == "bandlimited":
        params["radius"] = lat.K if n.radius is None else n.radius
    elif n.family == "single_mode":
        params["mode"] = tuple(n.mode)
    else:
        raise ConfigError(f"noise.family {n.family!r} cannot be built from a config file")
    return build_noise_operator(n.family, lat, s=n.s, **params)


def initial_of(cfg: ExperimentConfig, lat: FrequencyLattice) -> TorusField:
    ini = cfg.initial
    if ini.kind == "zero":
        return TorusField.zeros(lat)
    if ini.kind == "constant":
        f = TorusField.constant(lat, 1.0)
    elif ini.kind == "single_mode":
        f = TorusField.single_mode(lat, tuple(ini.mode), 1.0)
    else:
        seed = cfg.seed if ini.seed is None else ini.seed
        f = TorusField.random(lat, np.random.default_rng([seed, 99]), decay=ini.decay)
    size = f.hs_norm(1.0) if ini.norm == "H1" else math.sqrt(f.l2_squared())
    return f * (ini.amplitude / size)


def sim_config_of(cfg: ExperimentConfig, lat, noise) -> SimConfig:
    s = cfg.sim
    return SimConfig(lat, s.dt, s.T, s.scheme, cfg.seed, noise, s.stride, s.nonlinear)


def _path_table(u: SpaceTimePath) -> tuple[str, list[str], list[list]]:
    n1, n2, n3 = (m.ravel() for m in u.lattice.modes)
    rows = []
    for t, c in zip(u.times, u.coeffs):
        c = c.ravel()
        rows.extend([float(t), int(a), int(b), int(d), float(z.real), float(z.imag)] for a, b, d, z in zip(n1, n2, n3, c))
    return "path", ["t", "n1", "n2", "n3", "re", "im"], rows


class _PathReport:
    """Wrapper so a stored path goes to its own CSV block."""

    def __init__(self, u: SpaceTimePath):
        self.u = u


# ---------------------------------------------------------------------------
# experiments


def _simulate(cfg: ExperimentConfig, out: Path):
    lat = lattice_of(cfg)
    noise = noise_of(cfg, lat)
    sim = sim_config_of(cfg, lat, noise)
    u0 = initial_of(cfg, lat)
    if noise is None:
        u, ledger = nls_solve(u0, sim)
    else:
        u, _, ledger = snls_solve(u0, sim, NoiseStream(cfg.seed))
    summary = {
        "type": "simulation",
        "K": lat.K,
        "dt": sim.dt,
        "T": sim.T,
        "noise": cfg.noise.family,
        "mass0": mass(u0),
        "energy0": energy(u0),
        "final_h1": float(ledger.h1[-1]),
    }
    reports = [summary, ledger]
    emit_results(reports, out)
    if cfg.sim.save_path:
        name, cols, rows = _path_table(u)
        with open(out / "path.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerows([[_fmt(v) for v in r] for r in rows])


def _noise_stats(cfg: ExperimentConfig, out: Path):
    lat = lattice_of(cfg)
    phi = noise_of(cfg, lat)
    ns = cfg.noise_stats
    reps = psi_regularity_stats(
        phi, s=ns.s, p=ns.p, q=ns.q, r=ns.r, T=ns.T, ensemble=ns.ensemble, n_steps=ns.n_steps,
        seed=cfg.seed, scales=tuple(ns.scales),
    )
    reports: list = list(reps.values())
    if ns.mass_ensemble > 0:
        u0 = initial_of(cfg, lat)
        reports.append(mass_identity_mc(u0, phi, ns.mass_T, ns.mass_ensemble, dt=ns.mass_dt, seed=cfg.seed))
    emit_results(reports, out)


def _verdict(report: FitReport, bound: float) -> dict:
    return {"type": "verdict", "report": report.name, "slope": report.slope, "bound": bound,
            "pass": bool(report.slope <= bound)}


def _verify_estimates(cfg: ExperimentConfig, out: Path):
    e = cfg.estimates
    kw = {}
    if e.N_list is not None:
        kw["N_list"] = tuple(e.N_list)
    if e.interval is not None:
        kw["interval"] = e.interval
    if e.k_cap is not None and e.check != "strichartz":
        kw["k_cap"] = e.k_cap
    reports: list = []
    if e.check == "strichartz":
        for p, rep in strichartz_scan(e.p, trials=e.trials, seed=cfg.seed, **kw).items():
            reports += [rep, _verdict(rep, rep.predicted + e.slack)]
    elif e.check == "uuu":
        if "N_list" in kw:
            kw["N1_list"] = kw.pop("N_list")
        rep = trilinear_uuu_check(trials=e.trials, seed=cfg.seed, **kw)
        reports += [rep, _verdict(rep, 0.05)]
    elif e.check in ("uff", "uuf"):
        rep = trilinear_uff_check(e.check, p=e.p[0], trials=e.trials, seed=cfg.seed, **kw)
        reports += [rep, _verdict(rep, rep.predicted + e.slack)]
    else:
        rep = quintic_estimate_check(lengths=tuple(e.lengths), trials=e.trials, seed=cfg.seed)
        ok = abs(rep.pure_f.slope - rep.pure_f.predicted) <= e.slack
        reports += [rep, {"type": "verdict", "report": rep.pure_f.name, "slope": rep.pure_f.slope,
                          "bound": [rep.pure_f.predicted - e.slack, rep.pure_f.predicted + e.slack], "pass": ok}]
    emit_results(reports, out)


def _norms(cfg: ExperimentConfig, out: Path):
    lat = lattice_of(cfg)
    u0 = initial_of(cfg, lat)
    s = cfg.norms.s
    reports: list = [sobolev_norm(u0, s, q) for q in cfg.norms.q]
    T = min(cfg.sim.T, 1.0)
    n = max(int(round(T / cfg.sim.dt)), 1)
    times = np.linspace(0.0, T, n + 1)
    free = SpaceTimePath.free_solution(u0, times)
    reports += [y_norm(free, s), xtilde_norm(free, s)]
    phi = noise_of(cfg, lat)
    if phi is not None:
        reports.append(z_norm(sample_psi(phi, times, NoiseStream(cfg.seed))))
    emit_results(reports, out)


def _windows(cfg: ExperimentConfig, out: Path):
    lat = lattice_of(cfg)
    phi = noise_of(cfg, lat)
    sim = sim_config_of(cfg, lat, phi)
    if sim.stride != 1:
        raise ConfigError("windows: sim.stride must be 1")
    u0 = initial_of(cfg, lat)
    times = sim.dt * np.arange(sim.n_steps + 1)
    psi = sample_psi(phi, times, NoiseStream(cfg.seed))
    plan = interval_partition(psi, u0, times[-1], eta=cfg.windows.eta, max_length=cfg.windows.max_length)
    (out / "windows.json").write_text(plan.to_json() + "\n")
    reports: list = [plan]
    if cfg.windows.solve:
        u, psi_u, _ = snls_solve(u0, sim)
        uw, _ = windowed_snls_solve(u0, sim, plan.breakpoints)
        reports.append({"type": "continuation", "J": plan.J,
                        "max_abs_difference": float(np.max(np.abs(u.coeffs - uw.coeffs)))})
    emit_results(reports, out)


EXPERIMENT_FUNCS = {
    "simulate": _simulate,
    "noise-stats": _noise_stats,
    "verify-estimates": _verify_estimates,
    "norms": _norms,
    "windows": _windows,
}


# ---------------------------------------------------------------------------
# run


def run(cfg: ExperimentConfig, out_dir=None, force: bool = False) -> RunManifest:
    """Run one experiment and move its outputs into ``out_dir`` atomically."""
    cfg.validate()
    target = Path(out_dir if out_dir is not None else cfg.out_dir)
    if target.exists() and any(target.iterdir()) and not force:
        raise ConfigError(f"output directory {target} exists and is not empty (use force to replace it)")
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    manifest = RunManifest(cfg.config_hash(), cfg.kind, environment=_environment(), started=time.time())
    try:
        (tmp / "config.json").write_text(cfg.to_json())
        manifest.write(tmp)
        t0 = time.perf_counter()
        EXPERIMENT_FUNCS[cfg.kind](cfg, tmp)
        manifest.wall_clock = time.perf_counter() - t0
        manifest.outputs = {
            p.name: sha256_file(p) for p in sorted(tmp.iterdir()) if p.is_file() and p.name != MANIFEST
        }
        manifest.status = "complete"
        manifest.exit_code = 0
        manifest.write(tmp)
        if target.exists():
            shutil.rmtree(target)
        tmp.rename(target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return manifest
