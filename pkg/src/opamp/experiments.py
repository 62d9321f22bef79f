"""Monte-Carlo experiment harness: configs, trial orchestration, CSV output.

A run draws one ground-truth signal and one initialization from the master
seed, shares them across all trials and protocols, and gives every trial its
own noise matrix (and, for random protocols, its own mask stream) through
documented seed derivation.  Aggregation is a plain mean/sd over trials, so
results are identical for any worker count; OPAMP_WORKERS controls the pool.

CSV schema (``run``): header ``iter,protocol,se_corr,emp_corr_mean,
emp_corr_sd,eff_mults``, numbers printed with 9 significant digits.  The
correlation columns hold the normalized correlation <signal, estimate> /
(||signal|| ||estimate||), whose predictor is rho_t / sqrt(sigma2_t).
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import se as se_mod
from ._validation import check_dimension, rng_from_key
from .denoise import BayesDenoiser, DiscretePrior, SphereDenoiser
from .engine import run_projection_amp
from .models import build_spiked, sample_goe, sample_rademacher
from .schedules import full_matrix, random_update, round_robin

RUN_HEADER = "iter,protocol,se_corr,emp_corr_mean,emp_corr_sd,eff_mults"
SE_HEADER = "iter,protocol,se_corr"
FIGURE_MULTS_HEADER = "eff_mults,protocol,se_corr,emp_corr_mean,emp_corr_sd,iter"

# substream tags for seed derivation: (master_seed, tag, ...)
_SIGNAL_STREAM = 0
_INIT_STREAM = 1
_NOISE_STREAM = 2
_MASK_STREAM = 3


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ProtocolSpec:
    name: str
    gamma: float | None = None
    n_blocks: int | None = None

    def label(self):
        if self.name == "random":
            return f"random({self.gamma:g})"
        if self.name == "round_robin":
            return f"round_robin({self.n_blocks})"
        return "full"

    def build(self, n, seed=0):
        if self.name == "full":
            return full_matrix(n)
        if self.name == "random":
            return random_update(n, self.gamma, seed)
        if self.name == "round_robin":
            return round_robin(n, self.n_blocks)
        raise ConfigError(f"unknown protocol {self.name!r}")


def _parse_protocol(raw):
    if isinstance(raw, str):
        raw = {"name": raw}
    name = raw.get("name")
    if name == "full":
        return ProtocolSpec("full")
    if name == "random":
        if "gamma" not in raw:
            raise ConfigError("random protocol needs 'gamma'")
        gamma = float(raw["gamma"])
        if not 0.0 < gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {gamma}")
        return ProtocolSpec("random", gamma=gamma)
    if name == "round_robin":
        if "J" not in raw:
            raise ConfigError("round_robin protocol needs 'J'")
        return ProtocolSpec("round_robin", n_blocks=int(raw["J"]))
    raise ConfigError(f"unknown protocol {name!r}")


@dataclass
class ExperimentConfig:
    n: int
    signal_strength: float
    protocols: list
    denoiser: str
    horizon: int
    trials: int
    master_seed: int
    rho0: float
    output_path: str | None = None
    prior: DiscretePrior = field(default_factory=DiscretePrior.rademacher)
    debias_mode: str = "empirical"
    se_mode: str = "asymptotic"
    order: int = 61

    def __post_init__(self):
        self.n = check_dimension(self.n)
        if self.signal_strength < 0:
            raise ConfigError("lambda must be >= 0")
        if self.horizon < 1:
            raise ConfigError("T must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0.0 < self.rho0 <= 1.0:
            raise ConfigError("rho0 must be in (0, 1]")
        if self.denoiser not in ("sphere", "bayes"):
            raise ConfigError(f"unknown denoiser {self.denoiser!r}")
        if self.se_mode not in ("asymptotic", "finite"):
            raise ConfigError(f"unknown se_mode {self.se_mode!r}")
        if not self.protocols:
            raise ConfigError("at least one protocol is required")
        labels = [p.label() for p in self.protocols]
        if len(set(labels)) != len(labels):
            raise ConfigError("protocol labels must be unique")
        for protocol in self.protocols:
            try:
                protocol.build(self.n)
            except ValueError as err:
                raise ConfigError(str(err)) from None

    @classmethod
    def from_dict(cls, raw):
        try:
            protocols_raw = raw.get("protocols")
            if protocols_raw is None:
                protocols_raw = [raw["protocol"]]
            prior = raw.get("prior")
            return cls(
                n=raw["n"],
                signal_strength=float(raw["lambda"]),
                protocols=[_parse_protocol(p) for p in protocols_raw],
                denoiser=raw.get("denoiser", "sphere"),
                horizon=int(raw["T"]),
                trials=int(raw.get("trials", 1)),
                master_seed=int(raw.get("master_seed", 0)),
                rho0=float(raw["rho0"]),
                output_path=raw.get("output_path"),
                prior=DiscretePrior.from_json(prior) if prior is not None
                else DiscretePrior.rademacher(),
                debias_mode=raw.get("debias_mode", "empirical"),
                se_mode=raw.get("se_mode", "asymptotic"),
                order=int(raw.get("order", 61)),
            )
        except KeyError as missing:
            raise ConfigError(f"missing config key {missing}") from None

    @classmethod
    def from_json(cls, path):
        with open(path) as handle:
            try:
                raw = json.load(handle)
            except json.JSONDecodeError as err:
                raise ConfigError(f"config is not valid JSON: {err}") from None
        return cls.from_dict(raw)


def make_signal_and_init(n, rho0, master_seed):
    """Shared ground truth and initialization for one experiment.

    The signal has iid +-1 entries.  The initialization mixes the signal with
    a random direction orthogonalized against it and scaled to the sphere:
    init = rho0 * signal + sqrt(1 - rho0^2) * g, so <signal, init>/n = rho0
    and ||init||^2/n = 1 up to roundoff.
    """
    signal = sample_rademacher(n, (master_seed, _SIGNAL_STREAM))
    rng = rng_from_key(master_seed, _INIT_STREAM)
    g = rng.standard_normal(n)
    g -= (g @ signal) / (signal @ signal) * signal
    g *= np.sqrt(n) / np.linalg.norm(g)
    init = rho0 * signal + np.sqrt(1.0 - rho0**2) * g
    return signal, init


def se_curve(config, protocol):
    """Deterministic correlation predictor for one protocol, t = 0..T."""
    schedule = protocol.build(config.n)
    kernel = "power" if config.denoiser == "sphere" else "bayes"
    traj = se_mod.predict_trajectory(
        schedule, kernel, config.signal_strength, config.rho0, config.horizon,
        prior=config.prior, order=config.order)
    return traj


def _run_single_trial(config, protocol, proto_index, signal, init, trial, se_traj):
    n = config.n
    noise = sample_goe(n, (config.master_seed, _NOISE_STREAM, trial))
    instance = build_spiked(config.signal_strength, signal, noise)
    mask_seed = (config.master_seed, _MASK_STREAM, trial, proto_index)
    schedule = protocol.build(n, seed=mask_seed)
    if config.denoiser == "sphere":
        history = run_projection_amp(
            instance.matrix, init, schedule, SphereDenoiser(), config.horizon,
            signal=signal)
    else:
        if config.se_mode == "finite":
            r0 = signal @ init / n
            q0 = init @ init / n
            traj = se_mod.finite_size_se(
                schedule, signal, "bayes", config.signal_strength, q0, r0,
                config.horizon, prior=config.prior, order=config.order)
        else:
            traj = se_traj
        history = run_projection_amp(
            instance.matrix, init, schedule, BayesDenoiser(config.prior),
            config.horizon, signal_strength=config.signal_strength,
            se_trajectory=traj, signal=signal, debias_mode=config.debias_mode,
            prior=config.prior, order=config.order)
    # the predictors describe the absolute correlation: the recovered sign is
    # arbitrary (the estimand is a direction), so fold it out per trial
    return np.abs(history.corr), history.eff_mults


def _trial_worker(args):
    return _run_single_trial(*args)


def _n_workers():
    raw = os.environ.get("OPAMP_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"OPAMP_WORKERS must be an integer, got {raw!r}") from None
    return max(1, workers)


@dataclass
class ResultTable:
    """Per-(protocol, step) results with deterministic CSV serialization."""

    horizon: int
    frames: dict  # label -> {"se_corr", "emp_corr_mean", "emp_corr_sd", "eff_mults"}
    labels: list

    def rows(self):
        for label in self.labels:
            frame = self.frames[label]
            for t in range(self.horizon + 1):
                yield t, label, frame

    def to_csv(self, header=RUN_HEADER):
        lines = [header]
        for t, label, frame in self.rows():
            lines.append(",".join([
                str(t), label,
                _fmt(frame["se_corr"][t]),
                _fmt(frame["emp_corr_mean"][t]),
                _fmt(frame["emp_corr_sd"][t]),
                _fmt(frame["eff_mults"][t]),
            ]))
        return "\n".join(lines) + "\n"

    def to_se_csv(self):
        lines = [SE_HEADER]
        for t, label, frame in self.rows():
            lines.append(",".join([str(t), label, _fmt(frame["se_corr"][t])]))
        return "\n".join(lines) + "\n"

    def to_figure_csv(self, axis):
        if axis == "iterations":
            return self.to_csv()
        if axis != "multiplications":
            raise ConfigError(f"unknown axis {axis!r}")
        lines = [FIGURE_MULTS_HEADER]
        for t, label, frame in self.rows():
            lines.append(",".join([
                _fmt(frame["eff_mults"][t]), label,
                _fmt(frame["se_corr"][t]),
                _fmt(frame["emp_corr_mean"][t]),
                _fmt(frame["emp_corr_sd"][t]),
                str(t),
            ]))
        return "\n".join(lines) + "\n"


def _fmt(x):
    return f"{float(x):.9g}"


def run_experiment(config, with_trials=True):
    """Execute the Monte-Carlo loop (or just the predictors) for a config."""
    signal, init = make_signal_and_init(config.n, config.rho0, config.master_seed)
    frames = {}
    labels = []
    workers = _n_workers()
    for proto_index, protocol in enumerate(config.protocols):
        label = protocol.label()
        labels.append(label)
        traj = se_curve(config, protocol)
        frame = {
            "se_corr": np.asarray(traj.corr),
            "emp_corr_mean": np.full(config.horizon + 1, np.nan),
            "emp_corr_sd": np.full(config.horizon + 1, np.nan),
            "eff_mults": np.full(config.horizon + 1, np.nan),
        }
        if with_trials:
            tasks = [(config, protocol, proto_index, signal, init, trial, traj)
                     for trial in range(config.trials)]
            if workers > 1 and config.trials > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(_trial_worker, tasks))
            else:
                results = [_trial_worker(task) for task in tasks]
            corr = np.stack([r[0] for r in results])
            eff = np.stack([r[1] for r in results])
            frame["emp_corr_mean"] = corr.mean(axis=0)
            frame["emp_corr_sd"] = (corr.std(axis=0, ddof=1) if config.trials > 1
                                    else np.zeros(config.horizon + 1))
            frame["eff_mults"] = eff.mean(axis=0)
        else:
            # predictor-only tables still report the deterministic cost axis
            schedule = protocol.build(config.n)
            eff = np.zeros(config.horizon + 1)
            for t in range(config.horizon):
                eff[t + 1] = eff[t] + schedule.mask(t).sum() / config.n
            frame["eff_mults"] = eff
        frames[label] = frame
    return ResultTable(horizon=config.horizon, frames=frames, labels=labels)
