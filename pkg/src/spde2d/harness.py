"""Seeded Monte Carlo orchestration of the simulate -> estimate pipeline.

One replication simulates a field, computes the squared-increment
statistic on the interior thinning, fits (scale, kappa, eta) by minimum
contrast, reconstructs the (1,1) and (1,2) coordinate paths on the coarse
time grid, and applies the plug-in for the configured noise case.
Replication ``r`` draws its noise from streams keyed by ``(seed, r)``, so
records are reproducible bit-for-bit whatever the executor schedule, and
summaries aggregate records in replication order.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .contrast import ContrastConfig, MinimumContrastFit, minimize_contrast
from .errors import ConfigError, GridMismatchError
from .increments import build_space_thinning, squared_increment_field
from .model import DerivedRatios, Mode, ModelParams, NoiseKind
from .plugins import (PluginEstimates, q1_plugin, q2_known_plugin,
                      q2_unknown_plugin)
from .reconstruct import approx_coordinate, build_time_thinning, realized_qv
from .simulate import (FieldSample, RngSeed, SpaceTimeGrid, TruncationSpec,
                       simulate_field)


@dataclass(frozen=True)
class ThinningConfig:
    mbar1: int = 6
    mbar2: int = 6
    delta: float = 0.05
    n: int = 100


@dataclass(frozen=True)
class Exponents:
    """Rate exponents used only for the reported diagnostic ratios."""

    rho: float = 0.47
    gamma: float = 0.26
    epsilon: float = 0.499


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    kind: NoiseKind
    grid: SpaceTimeGrid
    trunc: TruncationSpec
    thinning: ThinningConfig
    contrast: ContrastConfig
    replications: int
    seed: RngSeed
    exponents: Exponents = Exponents()

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(
                f"replications must be >= 1, got {self.replications}")
        if self.kind.is_q2 and self.params.mu0 is None:
            raise ConfigError("Q2 noise requires params.mu0")

    def to_dict(self) -> dict:
        return {
            "params": {
                "theta0": self.params.theta0, "theta1": self.params.theta1,
                "eta1": self.params.eta1, "theta2": self.params.theta2,
                "sigma": self.params.sigma, "alpha": self.params.alpha,
                "mu0": self.params.mu0,
            },
            "kind": self.kind.value,
            "grid": {"N": self.grid.N, "M1": self.grid.M1, "M2": self.grid.M2},
            "truncation": {"K": self.trunc.K, "L": self.trunc.L},
            "thinning": asdict(self.thinning),
            "contrast": {
                "scale_box": list(self.contrast.scale_box),
                "kappa_box": list(self.contrast.kappa_box),
                "eta_box": list(self.contrast.eta_box),
                "init_grid": self.contrast.init_grid,
                "max_iter": self.contrast.max_iter,
                "grad_tol": self.contrast.grad_tol,
                "step_tol": self.contrast.step_tol,
            },
            "replications": self.replications,
            "seed": self.seed.master,
            "exponents": asdict(self.exponents),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            p = dict(d.get("params", {}))
            params = ModelParams(
                theta0=float(p.get("theta0", 0.0)),
                theta1=float(p.get("theta1", 0.2)),
                eta1=float(p.get("eta1", 0.2)),
                theta2=float(p.get("theta2", 0.2)),
                sigma=float(p.get("sigma", 1.0)),
                alpha=float(p.get("alpha", 0.5)),
                mu0=None if p.get("mu0") is None else float(p["mu0"]),
            )
            kind = NoiseKind(d.get("kind", "q1"))
            g = dict(d.get("grid", {}))
            grid = SpaceTimeGrid(N=int(g.get("N", 1000)),
                                 M1=int(g.get("M1", 50)),
                                 M2=int(g.get("M2", 50)))
            t = dict(d.get("truncation", {}))
            trunc = TruncationSpec(K=int(t.get("K", 256)), L=int(t.get("L", 256)))
            th = dict(d.get("thinning", {}))
            thinning = ThinningConfig(
                mbar1=int(th.get("mbar1", 6)), mbar2=int(th.get("mbar2", 6)),
                delta=float(th.get("delta", 0.05)), n=int(th.get("n", 100)))
            cc = dict(d.get("contrast", {}))
            contrast = ContrastConfig(
                scale_box=tuple(cc.get("scale_box", (1e-3, 1e3))),
                kappa_box=tuple(cc.get("kappa_box", (-20.0, 20.0))),
                eta_box=tuple(cc.get("eta_box", (-20.0, 20.0))),
                init_grid=int(cc.get("init_grid", 5)),
                max_iter=int(cc.get("max_iter", 200)),
                grad_tol=float(cc.get("grad_tol", 1e-10)),
                step_tol=float(cc.get("step_tol", 1e-12)))
            ex = dict(d.get("exponents", {}))
            exponents = Exponents(rho=float(ex.get("rho", 0.47)),
                                  gamma=float(ex.get("gamma", 0.26)),
                                  epsilon=float(ex.get("epsilon", 0.499)))
            return cls(params=params, kind=kind, grid=grid, trunc=trunc,
                       thinning=thinning, contrast=contrast,
                       replications=int(d.get("replications", 25)),
                       seed=RngSeed(int(d.get("seed", 1))),
                       exponents=exponents)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment configuration: {exc}") from exc


def default_config() -> ExperimentConfig:
    """Desk-scale default: N=1000, M1=M2=50, K=L=256, five interior points
    per axis, coarse time count 100, 25 replications."""
    return ExperimentConfig.from_dict({})


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


@dataclass(frozen=True)
class ReplicationRecord:
    rep_index: int
    fit: MinimumContrastFit
    qv11: float
    qv12: float
    estimates: PluginEstimates
    degenerate_input: bool

    def to_dict(self) -> dict:
        d = {
            "rep_index": self.rep_index,
            "scale_hat": self.fit.scale,
            "kappa_hat": self.fit.kappa_hat,
            "eta_hat": self.fit.eta_hat,
            "contrast": self.fit.contrast,
            "converged": self.fit.converged,
            "n_restarts_used": self.fit.n_restarts_used,
            "qv11": self.qv11,
            "qv12": self.qv12,
            "degenerate_input": self.degenerate_input,
        }
        d.update(self.estimates.to_dict())
        return d


def estimate_field(config: ExperimentConfig, field_sample: FieldSample,
                   rep_index: int = 0) -> ReplicationRecord:
    """Run the estimation pipeline on an existing field."""
    grid = field_sample.grid
    if (grid.N, grid.M1, grid.M2) != (config.grid.N, config.grid.M1,
                                      config.grid.M2):
        raise GridMismatchError(
            f"field grid ({grid.N}, {grid.M1}, {grid.M2}) does not match "
            f"config grid ({config.grid.N}, {config.grid.M1}, {config.grid.M2})")
    thin = build_space_thinning(grid.M1, grid.M2, config.thinning.mbar1,
                                config.thinning.mbar2, config.thinning.delta)
    zfield = squared_increment_field(field_sample, thin, config.params.alpha)
    degenerate = bool(np.all(zfield.values == 0.0))
    fit = minimize_contrast(zfield, thin, config.params.alpha, config.contrast)
    tt = build_time_thinning(grid.N, config.thinning.n)
    path11 = approx_coordinate(field_sample, Mode(1, 1), fit.kappa_hat,
                               fit.eta_hat, tt)
    path12 = approx_coordinate(field_sample, Mode(1, 2), fit.kappa_hat,
                               fit.eta_hat, tt)
    qv11 = realized_qv(path11).value
    qv12 = realized_qv(path12).value
    alpha = config.params.alpha
    if config.kind is NoiseKind.Q1:
        est = q1_plugin(fit.scale, fit.kappa_hat, fit.eta_hat, qv11, qv12,
                        alpha)
    elif config.kind is NoiseKind.Q2_KNOWN_MU0:
        est = q2_known_plugin(fit.scale, fit.kappa_hat, fit.eta_hat, qv11,
                              config.params.require_mu0(), alpha)
    else:
        est = q2_unknown_plugin(fit.scale, fit.kappa_hat, fit.eta_hat, qv11,
                                qv12, alpha)
    return ReplicationRecord(rep_index=rep_index, fit=fit, qv11=qv11,
                             qv12=qv12, estimates=est,
                             degenerate_input=degenerate)


def run_replication(config: ExperimentConfig, rep_index: int
                    ) -> ReplicationRecord:
    """Simulate and estimate one replication; deterministic in
    (seed, rep_index)."""
    field_sample = simulate_field(config.params, config.kind, config.grid,
                                  config.trunc, seed=config.seed,
                                  rep=rep_index)
    return estimate_field(config, field_sample, rep_index)


def _true_values(config: ExperimentConfig) -> dict[str, float]:
    p = config.params
    ratios = DerivedRatios.from_params(p)
    out = {"kappa": ratios.kappa, "eta": ratios.eta,
           "theta1": p.theta1, "eta1": p.eta1, "theta2": p.theta2,
           "sigma2": p.sigma ** 2}
    if config.kind is NoiseKind.Q1:
        out["s"] = ratios.s
        out["theta0"] = p.theta0
    else:
        out["S"] = ratios.S
        if config.kind is NoiseKind.Q2_UNKNOWN_MU0:
            out["mu0"] = p.require_mu0()
    return out


def _parameter_order(kind: NoiseKind) -> list[str]:
    if kind is NoiseKind.Q1:
        return ["s", "kappa", "eta", "theta0", "theta1", "eta1", "theta2",
                "sigma2"]
    if kind is NoiseKind.Q2_KNOWN_MU0:
        return ["S", "kappa", "eta", "theta1", "eta1", "theta2", "sigma2"]
    return ["S", "kappa", "eta", "mu0", "theta1", "eta1", "theta2", "sigma2"]


def _record_value(record: ReplicationRecord, name: str) -> float | None:
    if name in ("s", "S"):
        return record.fit.scale
    if name == "kappa":
        return record.fit.kappa_hat
    if name == "eta":
        return record.fit.eta_hat
    return getattr(record.estimates, name)


def diagnostics(config: ExperimentConfig) -> dict[str, float]:
    """Realized values of the rate conditions linking n, m, N, M."""
    a = config.params.alpha
    g = config.exponents.gamma
    eps = config.exponents.epsilon
    n = config.thinning.n
    thin = build_space_thinning(config.grid.M1, config.grid.M2,
                                config.thinning.mbar1, config.thinning.mbar2,
                                config.thinning.delta)
    m = thin.m
    nn = config.grid.N
    mmin = min(config.grid.M1, config.grid.M2)
    return {
        "n^(1-alpha)/(m N^(2 gamma))": n ** (1.0 - a) / (m * nn ** (2.0 * g)),
        "n^(2-alpha)/(m N^(2 gamma))": n ** (2.0 - a) / (m * nn ** (2.0 * g)),
        "n^(1-alpha+eps)/(min(M1,M2)^(2 eps))":
            n ** (1.0 - a + eps) / mmin ** (2.0 * eps),
        "n^(2-alpha+eps)/(min(M1,M2)^(2 eps))":
            n ** (2.0 - a + eps) / mmin ** (2.0 * eps),
    }


@dataclass(frozen=True)
class SummaryTable:
    """Per-parameter means and standard deviations over the non-failing
    replications, with failure accounting and the full record list."""

    kind: NoiseKind
    replications: int
    rows: list
    diagnostics: dict
    records: list
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["parameter,true,mean,sd,fail_count"]
        for row in self.rows:
            mean = "" if row["mean"] is None else repr(row["mean"])
            sd = "" if row["sd"] is None else repr(row["sd"])
            lines.append(f"{row['parameter']},{row['true']!r},"
                         f"{mean},{sd},{row['fail_count']}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "kind": self.kind.value,
            "replications": self.replications,
            "rows": self.rows,
            "diagnostics": self.diagnostics,
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def records_json(self) -> str:
        payload = {
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _summarize(config: ExperimentConfig, records: list) -> SummaryTable:
    truth = _true_values(config)
    rows = []
    for name in _parameter_order(config.kind):
        values = []
        for rec in records:
            v = _record_value(rec, name)
            if v is not None:
                values.append(float(v))
        n_ok = len(values)
        mean = math.fsum(values) / n_ok if n_ok else None
        if n_ok >= 2:
            sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values)
                           / (n_ok - 1))
        else:
            sd = None
        rows.append({"parameter": name, "true": truth[name], "mean": mean,
                     "sd": sd, "fail_count": len(records) - n_ok})
    return SummaryTable(kind=config.kind, replications=config.replications,
                        rows=rows, diagnostics=diagnostics(config),
                        records=records, config=config.to_dict())


def run_monte_carlo(config: ExperimentConfig, threads: int = 1
                    ) -> SummaryTable:
    """Run all replications, optionally across worker processes, and
    aggregate.  Replications are deterministic in (seed, rep_index) and
    records are sorted before summarizing, so the output is byte-identical
    whatever the worker count.  Worker processes sidestep the interpreter
    lock; pin the BLAS pool to one thread per process when using several.
    """
    indices = list(range(config.replications))
    if threads <= 1:
        records = [run_replication(config, r) for r in indices]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_replication,
                                    [config] * len(indices), indices))
    records.sort(key=lambda rec: rec.rep_index)
    return _summarize(config, records)


@dataclass(frozen=True)
class CrossSection:
    """2-D slice of a field sample at a fixed coordinate, plot-ready."""

    axis: str
    level: float
    names: tuple[str, str]
    coords1: np.ndarray
    coords2: np.ndarray
    values: np.ndarray

    def rows(self):
        for i, a in enumerate(self.coords1):
            for j, b in enumerate(self.coords2):
                yield (float(a), float(b)), float(self.values[i, j])

    def to_csv(self) -> str:
        lines = [f"{self.names[0]},{self.names[1]},value"]
        for (a, b), v in self.rows():
            lines.append(f"{a!r},{b!r},{v!r}")
        return "\n".join(lines) + "\n"


def _grid_index(coords: np.ndarray, level: float, what: str) -> int:
    hits = np.nonzero(coords == level)[0]
    if hits.size == 0:
        raise ConfigError(f"level {level!r} is not a grid node of the {what} axis")
    return int(hits[0])


def cross_section_dump(field_sample: FieldSample, axis: str,
                       level: float) -> CrossSection:
    """Slice the field at an exact grid node of the chosen axis."""
    grid = field_sample.grid
    if axis == "t":
        i = _grid_index(grid.times(), level, "time")
        return CrossSection(axis=axis, level=level, names=("y", "z"),
                            coords1=grid.ys(), coords2=grid.zs(),
                            values=field_sample.values[i])
    if axis == "y":
        j = _grid_index(grid.ys(), level, "y")
        return CrossSection(axis=axis, level=level, names=("t", "z"),
                            coords1=grid.times(), coords2=grid.zs(),
                            values=field_sample.values[:, j, :])
    if axis == "z":
        j = _grid_index(grid.zs(), level, "z")
        return CrossSection(axis=axis, level=level, names=("t", "y"),
                            coords1=grid.times(), coords2=grid.ys(),
                            values=field_sample.values[:, :, j])
    raise ConfigError(f"axis must be one of t, y, z, got {axis!r}")
