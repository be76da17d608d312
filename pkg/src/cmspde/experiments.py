"""Figure reproductions, stability sweep, strong-tracking harness and persistence."""
import dataclasses
import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, reduced_models as rm
from ._accel import default_backend
from .resonance_lab import estimate_long_time_stats, theoretical_diffusion
from .exp_filters import stationary_z_covariance
from .spde_sim import Grid, SpdeParams, mode_field, run_spde_ensemble, simulate_spde
from .stochastic_core import InvalidParameterError, ensemble_increments

SCHEMA_VERSION = 1
KINDS = ("fig1", "fig2", "fig3", "fig4", "fig5", "sweep", "resonance", "track")

# Parameters copied from the figure captions; anything the captions leave
# open (horizon, initial amplitude, ensemble size) is our choice.
DEFAULTS = {
    "fig1": dict(model="spde", gamma=0.0, sigma=[1.0], dt=0.01, dx=math.pi / 16, horizon=3.0,
                 modes=[1, 2, 3, 4, 5, 6, 7], ensemble=1, a0=0.5, keep_fields=True),
    "fig2": dict(model="normal_form", gamma=-0.03, sigma=[0.5, 2.0], dt=0.1, horizon=30.0,
                 ensemble=1, a0=0.5),
    "fig3": dict(model="spde", gamma=-0.03, sigma=[0.5], dt=0.05, dx=math.pi / 8, horizon=30.0,
                 modes=[2], ensemble=32, a0=0.5),
    "fig4": dict(model="spde", gamma=-0.03, sigma=[2.0], dt=0.05, dx=math.pi / 8, horizon=30.0,
                 modes=[2], ensemble=32, a0=0.5),
    "fig5": dict(model="weak", gamma=-0.03, sigma=[0.5, 2.0], dt=1.0, horizon=300.0,
                 ensemble=1, a0=0.5),
    "sweep": dict(model="weak", gamma=-0.03, sigma=[0.0, 0.5, 1.0, 1.5, 2.0, 2.5], dt=0.1,
                  horizon=200.0, ensemble=1000, a0=1e-6),
    "resonance": dict(dt=0.005, horizon=50.0, ensemble=10000, beta1=3.0, beta2=8.0),
    "track": dict(gamma=0.0, sigma=[0.1, 0.05], dt=0.0025, dx=math.pi / 32, horizon=10.0,
                  ensemble=4, a0=0.2),
}


class ConfigError(InvalidParameterError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    ensemble: int = None
    dt: float = None
    dx: float = None
    gamma: float = None
    sigma: list = None
    horizon: float = None
    a0: float = None
    modes: list = None
    model: str = None
    beta1: float = None
    beta2: float = None
    psi_form: str = "combined"
    record_interval: float = None
    keep_fields: bool = None
    out: str = "out"
    format: str = "csv"

    def resolved(self):
        """Copy with every unset field filled from the kind's defaults, validated."""
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        values = dataclasses.asdict(self)
        for key, val in DEFAULTS[self.kind].items():
            if values.get(key) is None:
                values[key] = val
        if values["keep_fields"] is None:
            values["keep_fields"] = False
        cfg = ExperimentConfig(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.ensemble is not None and self.ensemble < 1:
            raise ConfigError("ensemble must be at least 1")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.sigma is not None:
            if not isinstance(self.sigma, list):
                self.sigma = [self.sigma]
            self.sigma = [float(s) for s in self.sigma]
            if any(s < 0 for s in self.sigma):
                raise ConfigError("sigma must be non-negative")
        if self.dx is not None:
            Grid.from_dx(self.dx)
        if self.psi_form not in ("combined", "component"):
            raise ConfigError("psi_form must be combined or component")
        if self.model is not None and self.model not in ("spde", "naive", "normal_form", "weak"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.kind == "sweep" and self.ensemble < 100:
            raise ConfigError("the stability sweep needs an ensemble of at least 100")
        if self.record_interval is not None:
            ratio = self.record_interval / self.dt
            if self.record_interval <= 0 or abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError("record_interval must be a positive multiple of dt")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "config" in d and "schema_version" in d:
            d = d["config"]
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def parse_length(text):
    """Parse ``0.19635``, ``pi/16`` or ``3.14159/8`` into a float."""
    if isinstance(text, (int, float)):
        return float(text)
    m = re.fullmatch(r"\s*(pi|[0-9.eE+-]+)\s*(?:/\s*([0-9.eE+-]+))?\s*", str(text))
    if not m:
        raise ConfigError(f"cannot parse length {text!r}")
    num = math.pi if m.group(1) == "pi" else float(m.group(1))
    return num / float(m.group(2)) if m.group(2) else num


# ---------------------------------------------------------------- persistence

def _cell(v):
    v = float(v)
    return repr(v) if math.isfinite(v) else "NaN"


def write_series(path, columns, rows, fmt="csv"):
    """Write a table; non-finite values become the token ``NaN``."""
    path = Path(f"{path}.{fmt}")
    rows = np.asarray(rows, dtype=float)
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(_cell(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
    else:
        data = [[float(v) if math.isfinite(v) else None for v in row] for row in rows]
        path.write_text(json.dumps({"columns": list(columns), "rows": data}) + "\n")
    return path


def read_series(path):
    """Read a CSV written by ``write_series``; returns ``(columns, array)``."""
    lines = Path(path).read_text().splitlines()
    columns = lines[0].split(",")
    rows = [[float(c) for c in line.split(",")] for line in lines[1:]]
    return columns, np.array(rows, dtype=float).reshape(len(rows), len(columns))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _versions():
    try:
        import numba
        nb = numba.__version__
    except ImportError:  # pragma: no cover
        nb = None
    return {"cmspde": __version__, "numpy": np.__version__, "numba": nb,
            "backend": default_backend()}


@dataclass
class RunRecord:
    config: dict
    summary: dict
    files: list = field(default_factory=list)
    blowups: list = field(default_factory=list)
    wall_clock_s: float = 0.0
    all_blew_up: bool = False

    def to_dict(self):
        return _jsonable({"schema_version": SCHEMA_VERSION, "config": self.config,
                          "summary": self.summary, "files": self.files, "blowups": self.blowups,
                          "wall_clock_s": self.wall_clock_s, "versions": _versions()})


# ------------------------------------------------------------------- runners

def _record_every(cfg):
    if cfg.record_interval is None:
        return 1
    return int(round(cfg.record_interval / cfg.dt))


def _tag(sigma):
    return f"sigma{sigma:g}"


def _finite_stat(func, values):
    values = values[np.isfinite(values)]
    return float(func(values)) if values.size else math.nan


def _median_abs_at(t, a, when):
    i = int(np.argmin(np.abs(t - when)))
    return _finite_stat(np.median, np.abs(a[:, i]))


def _simulate_amplitudes(cfg, sigma):
    """Ensemble of amplitude series for one sigma; returns ``(t, a, blow_times, fields)``."""
    every = _record_every(cfg)
    if cfg.model == "spde":
        grid = Grid.from_dx(cfg.dx)
        params = SpdeParams(cfg.gamma, sigma, tuple(cfg.modes), cfg.dt)
        ens = run_spde_ensemble(params, grid, mode_field(grid, {1: cfg.a0}), cfg.seed,
                                cfg.ensemble, cfg.horizon, every, keep_fields=cfg.keep_fields)
        return ens.t, ens.a, ens.blow_times, ens.fields
    params = rm.ModelParams(cfg.gamma, sigma)
    if cfg.model == "weak":
        ens = rm.run_weak_ensemble(params, cfg.a0, cfg.seed, cfg.ensemble, cfg.horizon, cfg.dt,
                                   every, cfg.psi_form)
    else:
        ens = rm.run_strong_ensemble(params, cfg.model, cfg.a0, cfg.seed, cfg.ensemble,
                                     cfg.horizon, cfg.dt, every)
    return ens.t, ens.a, ens.blow_times, None


def run_figure(cfg):
    """Run one of the figure experiments and write its data files."""
    if not cfg.kind.startswith("fig"):
        raise ConfigError(f"{cfg.kind!r} is not a figure experiment")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files, blowups, per_sigma = [], [], {}
    n_total = n_blown = 0
    for sigma in cfg.sigma:
        t, a, blow_times, fields = _simulate_amplitudes(cfg, sigma)
        for k in range(a.shape[0]):
            name = f"{cfg.kind}_{_tag(sigma)}_m{k:03d}"
            files.append(write_series(out / name, ["t", "a"], np.column_stack([t, a[k]]),
                                      cfg.format).name)
            if fields is not None:
                grid = Grid.from_dx(cfg.dx)
                cols = ["t"] + [f"u{i}" for i in range(1, grid.n_interior + 1)]
                files.append(write_series(out / (name + "_field"), cols,
                                          np.column_stack([t, fields[k]]), cfg.format).name)
            if np.isfinite(blow_times[k]):
                blowups.append({"sigma": sigma, "member": k, "time": float(blow_times[k])})
        n_total += a.shape[0]
        n_blown += int(np.sum(np.isfinite(blow_times)))
        per_sigma[_tag(sigma)] = {
            "median_abs_a_final": _finite_stat(np.median, np.abs(a[:, -1])),
            "median_abs_a_t5": _median_abs_at(t, a, 5.0),
            "mean_a_final": _finite_stat(np.mean, a[:, -1]),
            "deterministic_equilibrium": rm.deterministic_equilibrium(cfg.gamma),
            "weak_linear_rate": rm.weak_linear_rate(rm.ModelParams(cfg.gamma, sigma)),
            "n_blowups": int(np.sum(np.isfinite(blow_times))),
        }
    return RunRecord(cfg.to_dict(), {"model": cfg.model, "per_sigma": per_sigma}, files, blowups,
                     all_blew_up=n_total > 0 and n_blown == n_total)


@dataclass
class SweepReport:
    gamma: float
    rows: list  # one dict per sigma
    threshold_sigma_predicted: float
    threshold_sigma_observed: float

    def to_dict(self):
        return _jsonable(dataclasses.asdict(self))


def stability_sweep(sigmas, gamma, N, T, dt=0.1, seed=0, a0=1e-6, psi_form="combined",
                    backend=None):
    """Lyapunov exponent of the weak model at ``a = 0`` for each noise level.

    The exponent is the ensemble mean of ``ln|a(T)/a(0)| / T`` from a tiny
    ``a(0)``, so the cubic term never matters; the prediction is
    ``-(gamma + sigma^2/88)``.
    """
    if N < 100:
        raise InvalidParameterError("the stability sweep needs N >= 100")
    rows = []
    for sigma in sigmas:
        params = rm.ModelParams(gamma, sigma)
        ens = rm.run_weak_ensemble(params, a0, seed, N, T, dt, int(round(T / dt)), psi_form,
                                   backend=backend)
        ok = np.isfinite(ens.a[:, -1]) & (ens.a[:, -1] != 0)
        growth = np.log(np.abs(ens.a[ok, -1] / a0)) / ens.t[-1]
        lam = float(growth.mean())
        se = float(growth.std(ddof=1) / np.sqrt(growth.size)) if growth.size > 1 else math.nan
        rows.append({
            "sigma": float(sigma),
            "lyapunov": lam,
            "stderr": se,
            "predicted": rm.weak_linear_rate(params),
            "threshold_gamma": 0.0 - sigma ** 2 / 88.0,
            "predicted_stable": bool(gamma > -sigma ** 2 / 88.0),
            "observed_stable": bool(lam < 0),
            "n_blowups": ens.n_blowups,
        })
    predicted = math.sqrt(-88.0 * gamma) if gamma < 0 else 0.0
    return SweepReport(float(gamma), rows, predicted, _zero_crossing(rows))


def _zero_crossing(rows):
    s = np.array([r["sigma"] for r in rows])
    lam = np.array([r["lyapunov"] for r in rows])
    order = np.argsort(s)
    s, lam = s[order], lam[order]
    for i in range(len(s) - 1):
        if lam[i] > 0 >= lam[i + 1]:
            return float(s[i] + (s[i + 1] - s[i]) * lam[i] / (lam[i] - lam[i + 1]))
    return math.nan


@dataclass
class TrackingReport:
    gamma: float
    a0: float
    horizon: float
    dt: float
    dx: float
    n_paths: int
    rows: list  # per sigma, largest first
    baseline_max_gap: float
    ratio: float  # max gap at sigma[0] over max gap at sigma[1]
    ratio_noise_induced: float
    ratio_mapped: float
    ratio_naive: float
    scaling_exponent: float

    def to_dict(self):
        return _jsonable(dataclasses.asdict(self))


def compare_strong(seed=0, gamma=0.0, sigmas=(0.1, 0.05), horizon=10.0, dt=0.0025,
                   dx=math.pi / 32, a0=0.2, n_paths=4, backend=None):
    """Drive the SPDE and the strong models with one shared ``phi2`` path and compare amplitudes.

    For each sigma the report holds, averaged over ``n_paths`` paths:

    * ``max_gap`` / ``rms_gap`` -- SPDE ``sin x`` amplitude against the
      normal-form ``a``;
    * ``noise_induced_gap`` -- the same after subtracting the sigma = 0
      discrepancy path (pure discretisation and truncation error);
    * ``mapped_gap`` -- against the normal-form amplitude mapped back to the
      ``sin x`` coefficient, noise-induced part;
    * ``naive_gap`` -- against the naive model, noise-induced part.

    The SPDE starts on the slow manifold, ``a0 sin x - a0^2/6 sin 2x``.
    """
    grid = Grid.from_dx(dx)
    steps = int(round(horizon / dt))
    dW = ensemble_increments(seed, range(n_paths), steps, dt)

    def discrepancies(sigma):
        params = rm.ModelParams(gamma, sigma)
        u0 = rm.reconstruct_field(a0, rm.StrongModelState(a0), params, grid)
        t, fields, spde_blow = simulate_spde(SpdeParams(gamma, sigma, (2,), dt), grid, u0, dW,
                                             backend=backend)
        a_spde = (2.0 / np.pi) * grid.dx * (fields @ np.sin(grid.x))
        nf = rm.simulate_strong(params, "normal_form", a0, dW[:, :, 0], dt, backend=backend)
        nv = rm.simulate_strong(params, "naive", a0, dW[:, :, 0], dt, backend=backend)
        mapped = rm.normal_form_sinx_amplitude(nf.a, nf.z, params)
        return a_spde - nf.a, a_spde - mapped, a_spde - nv.a

    def max_gap(d):
        return float(np.mean(np.max(np.abs(d), axis=1)))

    base = discrepancies(0.0)
    rows = []
    for sigma in sigmas:
        d_nf, d_map, d_nv = discrepancies(sigma)
        rows.append({
            "sigma": float(sigma),
            "max_gap": max_gap(d_nf),
            "rms_gap": float(np.mean(np.sqrt(np.mean(d_nf ** 2, axis=1)))),
            "noise_induced_gap": max_gap(d_nf - base[0]),
            "mapped_gap": max_gap(d_map - base[1]),
            "naive_gap": max_gap(d_nv - base[2]),
        })

    def ratio(key):
        if len(rows) < 2 or rows[1][key] == 0:
            return math.nan
        return rows[0][key] / rows[1][key]

    r = ratio("max_gap")
    sig_ratio = sigmas[0] / sigmas[1] if len(sigmas) > 1 else math.nan
    exponent = math.log(r) / math.log(sig_ratio) if len(rows) > 1 and r > 0 else math.nan
    return TrackingReport(gamma, a0, horizon, dt, dx, n_paths, rows, max_gap(base[0]), r,
                          ratio("noise_induced_gap"), ratio("mapped_gap"), ratio("naive_gap"),
                          exponent)


def run_resonance(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    every = _record_every(cfg) if cfg.record_interval else max(int(round(0.05 / cfg.dt)), 1)
    est = estimate_long_time_stats(cfg.seed, cfg.ensemble, cfg.horizon, cfg.dt, cfg.beta1,
                                   cfg.beta2, sample_every=every)
    files = []
    if est.sample_path is not None:
        files.append(write_series(out / "resonance_sample_m000", ["t", "y1", "y2", "z1", "z2"],
                                  est.sample_path, cfg.format).name)
    summary = {
        "estimate": est.to_dict(),
        "theoretical_drift": [0.5, 0.0],
        "theoretical_diffusion": theoretical_diffusion(cfg.beta1, cfg.beta2),
        "theoretical_z_covariance": stationary_z_covariance(cfg.beta1, cfg.beta2),
        "diffusion_relative_error": est.diffusion / theoretical_diffusion(cfg.beta1, cfg.beta2) - 1,
    }
    return RunRecord(cfg.to_dict(), summary, files, all_blew_up=est.ensemble_size == 0)


def run_sweep(cfg):
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    rep = stability_sweep(cfg.sigma, cfg.gamma, cfg.ensemble, cfg.horizon, cfg.dt, cfg.seed,
                          cfg.a0, cfg.psi_form)
    rows = [[r["sigma"], r["lyapunov"], r["stderr"], r["predicted"]] for r in rep.rows]
    name = write_series(Path(cfg.out) / "sweep", ["sigma", "lyapunov", "stderr", "predicted"],
                        rows, cfg.format).name
    return RunRecord(cfg.to_dict(), rep.to_dict(), [name])


def run_track(cfg):
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    rep = compare_strong(cfg.seed, cfg.gamma, tuple(cfg.sigma), cfg.horizon, cfg.dt, cfg.dx,
                         cfg.a0, cfg.ensemble)
    keys = ["sigma", "max_gap", "rms_gap", "noise_induced_gap", "mapped_gap", "naive_gap"]
    name = write_series(Path(cfg.out) / "track", keys,
                        [[r[k] for k in keys] for r in rep.rows], cfg.format).name
    return RunRecord(cfg.to_dict(), rep.to_dict(), [name])


def run_experiment(cfg):
    """Resolve, run and persist ``cfg``; returns the ``RunRecord`` (summary JSON written)."""
    cfg = cfg.resolved()
    start = time.perf_counter()
    if cfg.kind.startswith("fig"):
        record = run_figure(cfg)
    else:
        record = {"sweep": run_sweep, "resonance": run_resonance, "track": run_track}[cfg.kind](cfg)
    record.wall_clock_s = time.perf_counter() - start
    path = Path(cfg.out) / f"{cfg.kind}_summary.json"
    path.write_text(json.dumps(record.to_dict(), indent=2) + "\n")
    return record
