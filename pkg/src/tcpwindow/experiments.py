"""Declarative experiments: one function per named experiment.

An :class:`ExperimentConfig` is resolved against the experiment's own
defaults, simulated, and turned into an :class:`ExperimentResult` holding
CSV tables and :class:`~tcpwindow.bounds.BoundReport` objects. Writing files
and the manifest is left to :func:`run_experiment`.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import __version__, bounds, coupling, embedded, metrics, pdmp, toy
from .bounds import BoundReport
from .io import canonical_json, write_csv, write_json
from .laws import Dirac, law_from_dict

# sub-simulations inside one experiment use disjoint stream index ranges
_OFFSET = 1 << 32


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    rate_model: str | None = None
    jump_law: dict | None = None
    a: float | None = None
    lam: float | None = None
    x0: float | None = None
    y0: float | None = None
    n_replicas: int | None = None
    time_grid: tuple[float, ...] | None = None
    step_grid: tuple[int, ...] | None = None
    root_seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out["lambda" if f.name == "lam" else f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {("lambda" if f.name == "lam" else f.name): f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown key")
        if "experiment" not in data:
            raise ConfigError("experiment", "missing required key")
        kw = {known[k]: v for k, v in data.items()}
        for name in ("time_grid", "step_grid"):
            if kw.get(name) is not None:
                if not isinstance(kw[name], (list, tuple)):
                    raise ConfigError(name, "must be a list")
                kw[name] = tuple(kw[name])
        if "options" in kw and not isinstance(kw["options"], dict):
            raise ConfigError("options", "must be an object")
        return cls(**kw)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass
class ExperimentResult:
    reports: list[BoundReport]
    tables: dict[str, tuple[list[str], list[tuple]]]

    @property
    def passed(self) -> bool:
        return all(r.satisfied for r in self.reports)


@dataclass(frozen=True)
class _Experiment:
    run: Callable[[ExperimentConfig], ExperimentResult]
    defaults: dict[str, Any]
    options: dict[str, Any]
    check: Callable[[ExperimentConfig], None] | None = None
    description: str = ""


REGISTRY: dict[str, _Experiment] = {}


def _register(name, defaults, options=None, check=None, description=""):
    def deco(fn):
        REGISTRY[name] = _Experiment(fn, defaults, options or {}, check, description)
        return fn

    return deco


def list_experiments() -> list[str]:
    return list(REGISTRY)


def resolve(config: ExperimentConfig) -> ExperimentConfig:
    """Fill unset fields from the experiment defaults and validate everything."""
    if config.experiment not in REGISTRY:
        raise ConfigError("experiment", f"unknown experiment {config.experiment!r}; choose from {list_experiments()}")
    exp = REGISTRY[config.experiment]
    kw = {}
    for name, default in exp.defaults.items():
        if getattr(config, name) is None:
            kw[name] = tuple(default) if isinstance(default, list) else default
    for key in config.options:
        if key not in exp.options:
            raise ConfigError(f"options.{key}", f"unknown option for {config.experiment}")
    kw["options"] = {**exp.options, **config.options}
    cfg = replace(config, **kw)
    _validate_common(cfg)
    if exp.check is not None:
        exp.check(cfg)
    return cfg


def _validate_common(cfg: ExperimentConfig) -> None:
    if cfg.rate_model is not None and cfg.rate_model not in ("linear", "shifted", "constant"):
        raise ConfigError("rate_model", f"unknown rate model {cfg.rate_model!r}")
    if cfg.jump_law is not None:
        try:
            law_from_dict(cfg.jump_law)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError("jump_law", str(exc)) from None
    if cfg.n_replicas is not None and (not isinstance(cfg.n_replicas, int) or cfg.n_replicas < 2):
        raise ConfigError("n_replicas", "must be an integer >= 2")
    if not isinstance(cfg.root_seed, int) or cfg.root_seed < 0:
        raise ConfigError("root_seed", "must be a nonnegative integer")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        raise ConfigError("workers", "must be an integer >= 1")
    if cfg.time_grid is not None:
        tg = np.asarray(cfg.time_grid, dtype=float)
        if tg.size == 0 or np.any(tg < 0) or np.any(np.diff(tg) <= 0):
            raise ConfigError("time_grid", "must be a non-empty increasing list of nonnegative times")
    if cfg.step_grid is not None:
        if not cfg.step_grid or any(not isinstance(k, int) or k < 0 for k in cfg.step_grid):
            raise ConfigError("step_grid", "must be a non-empty list of nonnegative integers")
    for name in ("x0", "y0"):
        v = getattr(cfg, name)
        if v is not None and not v >= 0:
            raise ConfigError(name, "must be nonnegative")
    if cfg.a is not None and not cfg.a >= 0:
        raise ConfigError("a", "must be nonnegative")
    if cfg.lam is not None and not cfg.lam > 0:
        raise ConfigError("lambda", "must be positive")


def _need(cfg: ExperimentConfig, **expected) -> None:
    for name, value in expected.items():
        if getattr(cfg, name) != value:
            key = "lambda" if name == "lam" else name
            raise ConfigError(key, f"{cfg.experiment} requires {key} = {value!r}")


def _need_dirac(cfg: ExperimentConfig) -> Dirac:
    law = law_from_dict(cfg.jump_law)
    if not isinstance(law, Dirac) or not 0 < law.delta < 1:
        raise ConfigError("jump_law", f"{cfg.experiment} requires a Dirac law with delta in (0, 1)")
    return law


def _mean_se(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=float)
    return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


_DIRAC_HALF = {"kind": "dirac", "delta": 0.5}


# --------------------------------------------------------------------------
# figure-comp


def _check_figure(cfg):
    _need(cfg, rate_model="linear")
    _need_dirac(cfg)


@_register(
    "figure-comp",
    dict(rate_model="linear", jump_law=_DIRAC_HALF, x0=2.0, y0=1.0, n_replicas=100_000,
         time_grid=[0.25 * k for k in range(41)]),
    dict(n_boot=200),
    _check_figure,
    "bound >= coupled mean distance >= empirical W1 for the TCP process",
)
def figure_comp(cfg: ExperimentConfig) -> ExperimentResult:
    law = _need_dirac(cfg)
    times = np.asarray(cfg.time_grid, dtype=float)
    n, seed, w = cfg.n_replicas, cfg.root_seed, cfg.workers
    spec = pdmp.ProcessSpec(pdmp.Linear(), law)
    cg = coupling.coupled_grid(cfg.x0, cfg.y0, 0.0, law, times, n, seed, 0, workers=w)
    c_mean, c_se = _mean_se(cg.distance)
    xs = pdmp.marginal_grid(spec, cfg.x0, times, n, seed, _OFFSET, workers=w)
    ys = pdmp.marginal_grid(spec, cfg.y0, times, n, seed, 2 * _OFFSET, workers=w)
    d0 = abs(cfg.x0 - cfg.y0)
    rows, reports = [], []
    for j, t in enumerate(times):
        a_cloud = metrics.EmpiricalDistribution(xs[:, j])
        b_cloud = metrics.EmpiricalDistribution(ys[:, j])
        w1 = metrics.wasserstein_p(a_cloud, b_cloud, 1)
        w1_se = metrics.bootstrap_w1_stderr(a_cloud, b_cloud, cfg.options["n_boot"], seed=seed + j)
        bound = bounds.real_tcp_bound(law.delta, d0, t)
        rows.append((t, bound, c_mean[j], c_se[j], w1, w1_se))
        reports.append(BoundReport("figure-comp: coupled <= bound", {"t": float(t)}, bound, c_mean[j], c_se[j]))
        # the coupled mean is itself random, so both errors enter the slack
        reports.append(BoundReport(
            "figure-comp: W1 <= coupled", {"t": float(t)}, float(c_mean[j]), w1,
            math.hypot(c_se[j], w1_se),
        ))
    header = ["t", "bound", "coupled_mean", "coupled_stderr", "w1_hat", "w1_stderr"]
    return ExperimentResult(reports, {"figure_comp": (header, rows)})


# --------------------------------------------------------------------------
# embedded-contraction


@_register(
    "embedded-contraction",
    dict(jump_law=_DIRAC_HALF, x0=2.0, y0=1.0, n_replicas=100_000, step_grid=list(range(13))),
    dict(p=1.0, n_boot=200),
    description="W_p of the coupled embedded chains against E(Q^p)^(n/p) W_p(x, y)",
)
def embedded_contraction(cfg: ExperimentConfig) -> ExperimentResult:
    law = law_from_dict(cfg.jump_law)
    p = float(cfg.options["p"])
    if p < 1:
        raise ConfigError("options.p", "must be >= 1")
    steps = list(cfg.step_grid)
    dist = coupling.embedded_distance_grid(cfg.x0, cfg.y0, max(steps), law, cfg.n_replicas, cfg.root_seed,
                                           workers=cfg.workers)[:, steps]
    powered = dist**p
    m = powered.mean(axis=0)
    m_se = metrics.bootstrap_mean_stderr(powered, cfg.options["n_boot"], seed=cfg.root_seed)
    est = m ** (1.0 / p)
    # delta method for m -> m^(1/p)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(m > 0, m_se * m ** (1.0 / p - 1.0) / p, 0.0)
    w0 = abs(cfg.x0 - cfg.y0)
    rows, reports = [], []
    for k, e, s in zip(steps, est, se):
        b = bounds.embedded_contraction_bound(p, k, law, w0)
        rows.append((k, e, s, b))
        reports.append(BoundReport("embedded-contraction", {"n": k, "p": p}, b, float(e), float(s)))
    return ExperimentResult(reports, {"embedded_contraction": (["n", "Wp_hat", "stderr", "bound"], rows)})


# --------------------------------------------------------------------------
# continuous-decay


def _check_shifted(cfg):
    _need(cfg, rate_model="shifted")
    if not cfg.a > 0:
        raise ConfigError("a", "shifted rate needs a > 0")


@_register(
    "continuous-decay",
    dict(rate_model="shifted", a=1.0, jump_law=_DIRAC_HALF, x0=2.0, y0=1.0, n_replicas=100_000,
         time_grid=[0.5, 1.0, 2.0, 4.0]),
    check=_check_shifted,
    description="coupled mean distance against exp(-a kappa1 t) |x - y|",
)
def continuous_decay(cfg: ExperimentConfig) -> ExperimentResult:
    law = law_from_dict(cfg.jump_law)
    k1 = 1.0 - law.moment(1)
    times = np.asarray(cfg.time_grid, dtype=float)
    cg = coupling.coupled_grid(cfg.x0, cfg.y0, cfg.a, law, times, cfg.n_replicas, cfg.root_seed,
                               workers=cfg.workers)
    mean, se = _mean_se(cg.distance)
    w0 = abs(cfg.x0 - cfg.y0)
    rows, reports = [], []
    for j, t in enumerate(times):
        b = bounds.continuous_decay_bound(cfg.a, k1, t, w0)
        rows.append((t, mean[j], se[j], b))
        reports.append(BoundReport("continuous-decay", {"t": float(t), "a": cfg.a}, b, mean[j], se[j]))
    return ExperimentResult(reports, {"continuous_decay": (["t", "coupled_mean", "stderr", "bound"], rows)})


# --------------------------------------------------------------------------
# strong-ergodicity


@_register(
    "strong-ergodicity",
    dict(rate_model="shifted", a=1.0, jump_law=_DIRAC_HALF, n_replicas=100_000, time_grid=[0.5, 1.0, 2.0]),
    dict(s=1.0, t=2.0, starts=[1.0, 10.0, 100.0, 1000.0], mean_starts=[0.0, 1.0, 10.0, 100.0]),
    _check_shifted,
    "distance from (0, N) at time t, uniformly in N, plus the Riccati mean bound",
)
def strong_ergodicity(cfg: ExperimentConfig) -> ExperimentResult:
    law = law_from_dict(cfg.jump_law)
    k1 = 1.0 - law.moment(1)
    s, t = float(cfg.options["s"]), float(cfg.options["t"])
    bound = bounds.strong_ergodicity_bound(cfg.a, k1, s, t)
    n, seed, w = cfg.n_replicas, cfg.root_seed, cfg.workers
    rows, reports = [], []
    for i, big in enumerate(cfg.options["starts"]):
        cg = coupling.coupled_grid(0.0, big, cfg.a, law, [t], n, seed, i * _OFFSET, workers=w)
        mean, se = _mean_se(cg.distance[:, 0])
        rows.append((big, t, mean, se, bound))
        reports.append(BoundReport("strong-ergodicity", {"N": big, "s": s, "t": t}, bound, mean, se))
    spec = pdmp.ProcessSpec(pdmp.Shifted(cfg.a), law)
    times = np.asarray(cfg.time_grid, dtype=float)
    mean_rows = []
    base = len(cfg.options["starts"])
    for i, x in enumerate(cfg.options["mean_starts"]):
        grid = pdmp.marginal_grid(spec, x, times, n, seed, (base + i) * _OFFSET, workers=w)
        mean, se = _mean_se(grid)
        for j, tt in enumerate(times):
            b = bounds.mean_bound(k1, tt)
            mean_rows.append((x, tt, mean[j], se[j], b))
            reports.append(BoundReport("mean-bound", {"x": x, "t": float(tt)}, b, mean[j], se[j]))
    return ExperimentResult(reports, {
        "strong_ergodicity": (["N", "t", "coupled_mean", "stderr", "bound"], rows),
        "mean_bound": (["x", "t", "mean", "stderr", "bound"], mean_rows),
    })


# --------------------------------------------------------------------------
# real-tcp


def _check_real(cfg):
    _need(cfg, rate_model="linear")
    _need_dirac(cfg)


@_register(
    "real-tcp",
    dict(rate_model="linear", jump_law=_DIRAC_HALF, x0=2.0, y0=1.0, n_replicas=100_000,
         time_grid=[1.0, 2.0, 5.0, 10.0, 20.0]),
    dict(slope_times=[1.0, 5.0], fd_step=0.05),
    _check_real,
    "coupled distance against d0 / (1 + (1 + h) d0 t) and the Gronwall slope inequality",
)
def real_tcp(cfg: ExperimentConfig) -> ExperimentResult:
    law = _need_dirac(cfg)
    h = law.delta
    d0 = abs(cfg.x0 - cfg.y0)
    fd = float(cfg.options["fd_step"])
    slope_t = [float(v) for v in cfg.options["slope_times"]]
    if any(v - fd <= 0 for v in slope_t):
        raise ConfigError("options.fd_step", "central differences need t - fd_step > 0")
    times = np.asarray(cfg.time_grid, dtype=float)
    extra = [v + k * fd for v in slope_t for k in (-1, 0, 1)]
    grid = np.unique(np.concatenate([times, extra]))
    cg = coupling.coupled_grid(cfg.x0, cfg.y0, 0.0, law, grid, cfg.n_replicas, cfg.root_seed,
                               workers=cfg.workers)
    d = cg.distance
    col = {float(v): j for j, v in enumerate(grid)}
    rows, reports = [], []
    for t in times:
        mean, se = _mean_se(d[:, col[float(t)]])
        b = bounds.real_tcp_bound(h, d0, t)
        rows.append((t, mean, se, b))
        reports.append(BoundReport("real-tcp", {"t": float(t)}, b, mean, se))
    slope_rows = []
    for t in slope_t:
        lo, mid, hi = (d[:, col[t + k * fd]] for k in (-1, 0, 1))
        slope = (hi - lo) / (2 * fd)
        second = (1.0 + h) * mid**2
        # per-replica statistic: its mean is 0 up to O(fd^2) when the identity holds with equality
        g = slope + second
        g_mean, g_se = _mean_se(g)
        slope_rows.append((t, float(slope.mean()), float(-second.mean()), g_mean, g_se))
        reports.append(BoundReport(
            "real-tcp: d/dt E|D| <= -(1+h) E D^2", {"t": t, "fd_step": fd}, 0.0, g_mean, g_se,
        ))
    return ExperimentResult(reports, {
        "real_tcp": (["t", "coupled_mean", "stderr", "bound"], rows),
        "gronwall_slope": (["t", "fd_slope", "minus_(1+h)_second_moment", "gap", "gap_stderr"], slope_rows),
    })


# --------------------------------------------------------------------------
# constant-rate


def _check_constant(cfg):
    _need(cfg, rate_model="constant")


@_register(
    "constant-rate",
    dict(rate_model="constant", lam=1.0, jump_law=_DIRAC_HALF, x0=0.0, y0=1.0, n_replicas=1_000_000,
         time_grid=[1.0, 2.0, 5.0]),
    dict(decay_grid=[0.5 * k for k in range(17)], decay_replicas=100_000, ode_tolerance=1e-9),
    _check_constant,
    "transient moments against the closed form and the W1 decay rate theta_1",
)
def constant_rate(cfg: ExperimentConfig) -> ExperimentResult:
    law = law_from_dict(cfg.jump_law)
    lam, x = cfg.lam, cfg.x0
    spec = pdmp.ProcessSpec(pdmp.Constant(lam), law)
    times = np.asarray(cfg.time_grid, dtype=float)
    grid = pdmp.marginal_grid(spec, x, times, cfg.n_replicas, cfg.root_seed, workers=cfg.workers)
    rows, reports = [], []
    for k in (1, 2):
        mean, se = _mean_se(grid**k)
        for j, t in enumerate(times):
            exact = bounds.moments_constant_rate(k, x, lam, law, t)
            rows.append((k, t, mean[j], se[j], exact))
            reports.append(BoundReport("constant-rate moment", {"n": k, "t": float(t)}, exact, mean[j], se[j],
                                       relation="match"))
    # first moment solves m' = 1 - theta_1 m, m(0) = x
    th1 = bounds.theta(1, lam, law)
    for t in times:
        ode = 1.0 / th1 + (x - 1.0 / th1) * math.exp(-th1 * t)
        reports.append(BoundReport("constant-rate ODE oracle", {"t": float(t)},
                                   ode, bounds.moments_constant_rate(1, x, lam, law, t), 0.0,
                                   relation="match", tolerance=cfg.options["ode_tolerance"]))
    dg = np.asarray(cfg.options["decay_grid"], dtype=float)
    # an independent cloud per time keeps the regression residuals independent;
    # the shared-clock coupling keeps the pair ordered, so E|X - Y| is exactly W1
    w1, w1_se = np.empty(dg.size), np.empty(dg.size)
    for j, t in enumerate(dg):
        dist = coupling.constant_rate_grid(cfg.x0, cfg.y0, lam, law, [t], cfg.options["decay_replicas"],
                                           cfg.root_seed, (1 + j) * _OFFSET, workers=cfg.workers)
        w1[j], w1_se[j] = _mean_se(dist[:, 0])
    fit = stats.linregress(dg, np.log(w1))
    reports.append(BoundReport("constant-rate W1 decay slope", {"lambda": lam}, -th1, fit.slope, fit.stderr,
                               relation="match"))
    decay_rows = [(t, m, s, abs(cfg.x0 - cfg.y0) * math.exp(-th1 * t)) for t, m, s in zip(dg, w1, w1_se)]
    return ExperimentResult(reports, {
        "constant_rate_moments": (["n", "t", "mc_moment", "stderr", "closed_form"], rows),
        "constant_rate_decay": (["t", "W1_hat", "stderr", "exp(-theta1_t)_w0"], decay_rows),
    })


# --------------------------------------------------------------------------
# invariant-law


@_register(
    "invariant-law",
    dict(jump_law=_DIRAC_HALF, n_replicas=1_000_000),
    dict(mgf_points=[0.25, 0.5, 1.0], divergent_point=2.01, ks_threshold=0.002, integral_tolerance=1e-8),
    lambda cfg: _need_dirac(cfg),
    "series density, sampler and moment generating function cross-checks",
)
def invariant_law(cfg: ExperimentConfig) -> ExperimentResult:
    law = _need_dirac(cfg)
    delta = law.delta
    reports = []
    mass = embedded.density_integral(delta)
    reports.append(BoundReport("density integral", {"delta": delta}, 1.0, mass, 0.0, relation="match",
                               tolerance=cfg.options["integral_tolerance"]))
    draws = embedded.invariant_draws(embedded.InvariantLawSpec(law), cfg.n_replicas, cfg.root_seed,
                                     workers=cfg.workers)
    ks = stats.ks_1samp(draws, lambda v: embedded.invariant_cdf(v, delta)).statistic
    reports.append(BoundReport("KS(sampler, quadrature CDF)", {"n": cfg.n_replicas}, cfg.options["ks_threshold"],
                               float(ks), 0.0))
    mgf_rows = []
    for s in cfg.options["mgf_points"]:
        exact, _ = embedded.mgf_invariant(s, law)
        vals = np.exp(s * draws**2)
        mc, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))
        mgf_rows.append((s, exact, mc, se))
        reports.append(BoundReport("MGF product vs sampler", {"s": s}, exact, mc, se, relation="match"))
    s_bad = cfg.options["divergent_point"]
    try:
        embedded.mgf_invariant(s_bad, law)
        raised = 0.0
    except embedded.DivergentMGF:
        raised = 1.0
    reports.append(BoundReport("MGF divergence detected", {"s": s_bad}, 1.0, raised, 0.0, relation="match"))
    xs = np.linspace(0.0, 4.0 / delta, 401)
    dens = embedded.invariant_density(xs, delta, strict=False)
    cdf = embedded.invariant_cdf(xs, delta)
    emp = np.searchsorted(np.sort(draws), xs, side="right") / draws.size
    return ExperimentResult(reports, {
        "invariant_law": (["x", "density", "cdf", "empirical_cdf"], list(zip(xs, dens, cdf, emp))),
        "invariant_mgf": (["s", "product", "mc", "stderr"], mgf_rows),
    })


# --------------------------------------------------------------------------
# concentration


def _identity(y):
    return y


@_register(
    "concentration",
    dict(jump_law=_DIRAC_HALF, x0=1.0, n_replicas=1000, step_grid=[10_000]),
    dict(u_grid=[0.02, 0.05, 0.1], reference_draws=1_000_000),
    lambda cfg: _need_dirac(cfg),
    "deviation frequencies of ergodic averages of f(y) = y against the Gaussian bound",
)
def concentration(cfg: ExperimentConfig) -> ExperimentResult:
    law = _need_dirac(cfg)
    delta = law.delta
    n_steps = int(cfg.step_grid[0])
    runs = embedded.ergodic_runs(_identity, cfg.x0, n_steps, law, cfg.n_replicas, cfg.root_seed,
                                 workers=cfg.workers)
    center = embedded.invariant_expectation(lambda v: v, delta)
    ref = embedded.invariant_draws(embedded.InvariantLawSpec(law), cfg.options["reference_draws"],
                                   cfg.root_seed, _OFFSET, workers=cfg.workers)
    offset = delta / (1.0 - delta) * metrics.w1_to_dirac(cfg.x0, ref)
    u_grid = [float(u) for u in cfg.options["u_grid"]]
    freqs = metrics.deviation_frequency(runs, center, offset, u_grid)
    rows, reports = [], []
    for u, fr in zip(u_grid, freqs):
        b = bounds.concentration_bound(delta, n_steps, u)
        sigma = math.sqrt(b * (1.0 - b) / cfg.n_replicas)
        rows.append((u, fr, b, sigma))
        reports.append(BoundReport("concentration", {"u": u, "n": n_steps}, b, fr, sigma))
    return ExperimentResult(reports, {
        "concentration": (["u", "frequency", "bound", "binomial_sigma"], rows),
    })


# --------------------------------------------------------------------------
# gross-tails


@_register(
    "gross-tails",
    dict(jump_law=_DIRAC_HALF, n_replicas=1_000_000),
    dict(anchor=1.0, radii=[1.5, 2.0, 2.5]),
    lambda cfg: _need_dirac(cfg),
    "log tail of the invariant law against the sub-Gaussian slope of its Gross constant",
)
def gross_tails(cfg: ExperimentConfig) -> ExperimentResult:
    law = _need_dirac(cfg)
    delta = law.delta
    _, c_nu = bounds.gross_constants(delta, 1)
    draws = np.sort(embedded.invariant_draws(embedded.InvariantLawSpec(law), cfg.n_replicas, cfg.root_seed,
                                             workers=cfg.workers))
    n = draws.size

    def log_tail(r):
        k = n - np.searchsorted(draws, r, side="right")
        p = k / n
        # delta-method stderr of log p
        return (math.log(p) if k else -math.inf), (math.sqrt((1 - p) / k) if k else math.inf)

    r0 = float(cfg.options["anchor"])
    l0, _ = log_tail(r0)
    C = l0 + r0**2 / c_nu
    rows, reports = [(r0, l0, 0.0, l0)], []
    for r in cfg.options["radii"]:
        lt, se = log_tail(r)
        b = C - r**2 / c_nu
        rows.append((r, lt, se, b))
        if math.isfinite(lt):
            reports.append(BoundReport("gross-tails", {"r": r, "gross_constant": c_nu}, b, lt, se))
        else:
            # no sample beyond r: the empirical log tail is -inf, below any bound
            reports.append(BoundReport("gross-tails", {"r": r, "gross_constant": c_nu}, b, -1e300, 0.0))
    return ExperimentResult(reports, {"gross_tails": (["r", "log_tail", "stderr", "bound"], rows)})


# --------------------------------------------------------------------------
# toy-chain


@_register(
    "toy-chain",
    dict(step_grid=list(range(201))),
    dict(residual_tolerance=1e-13),
    description="exact moments of the dyadic toy chain",
)
def toy_chain(cfg: ExperimentConfig) -> ExperimentResult:
    steps = list(cfg.step_grid)
    n_max = max(steps)
    reports = []
    worst = max(abs(toy.recursion_residual(k)) for k in range(n_max))
    reports.append(BoundReport("toy recursion residual", {"n_max": n_max}, 0.0, float(worst), 0.0,
                               relation="match", tolerance=cfg.options["residual_tolerance"]))
    reports.append(BoundReport("toy E(X_1)", {}, 0.75, float(toy.toy_moment_exact(1, 1)), 0.0,
                               relation="match"))
    # exact comparison: the largest excess over the bound, as a rational
    excess = max(toy.toy_moment_exact(k, 1) - toy.decay_bound(k) for k in range(1, n_max + 1))
    reports.append(BoundReport("toy decay bound (max excess)", {"n_max": n_max}, 0.0, float(excess), 0.0))
    rows = [r for r in toy.moment_table(n_max) if r[0] in set(steps)]
    return ExperimentResult(reports, {"toy_chain": (["n", "E_Xn", "E_Xn2", "bound_(6/7)(7/8)^n"], rows)})


# --------------------------------------------------------------------------


def default_config(name: str, **overrides) -> ExperimentConfig:
    return resolve(ExperimentConfig(experiment=name, **overrides))


def execute(config: ExperimentConfig) -> ExperimentResult:
    cfg = resolve(config)
    return REGISTRY[cfg.experiment].run(cfg)


def run_experiment(config: ExperimentConfig, output_dir: str | Path | None = None) -> tuple[ExperimentResult, Path]:
    """Run, then write ``<table>.csv``, ``reports.json`` and ``manifest.json``.

    Everything except the wall time in the manifest depends only on the
    config, so reruns reproduce the CSV and report bytes exactly.
    """
    cfg = resolve(config)
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    start = time.perf_counter()
    result = REGISTRY[cfg.experiment].run(cfg)
    wall = time.perf_counter() - start
    files = []
    for name, (header, rows) in result.tables.items():
        write_csv(out / f"{name}.csv", header, rows)
        files.append(f"{name}.csv")
    write_json(out / "reports.json", [r.to_dict() for r in result.reports])
    files.append("reports.json")
    write_json(out / "manifest.json", {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "root_seed": cfg.root_seed,
        "version": __version__,
        "wall_time_s": round(wall, 3),
        "files": files,
        "all_satisfied": result.passed,
    })
    return result, out
