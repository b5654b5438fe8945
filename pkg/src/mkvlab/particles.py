"""Euler-Maruyama solver for the N-particle mean-field approximation.

Each step freezes the ensemble's empirical measure, evaluates the measure
functionals B and Sigma for every particle against that frozen measure, and
applies the explicit update

    X_j <- X_j + B[t, X_j, emp] dt + Sigma[t, X_j, emp] dW_j.

Wiener increments come from a counter-based stream indexed by
(particle, step, coordinate), so runs are reproducible for any thread count
and coupled runs can share a driving path exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from . import rng
from ._summation import ensemble_cov, ensemble_mean, ensemble_second_moment
from .errors import BlowUpError, ScenarioError
from .kernels import KernelSpec, diffusion_functional_batch, drift_functional_batch
from .measure import EmpiricalMeasure

__all__ = [
    "InitialLaw",
    "SolverConfig",
    "Ensemble",
    "TrajectoryRecord",
    "DifferenceTrace",
    "initial_law_variance",
    "sample_initial",
    "step_euler",
    "simulate",
    "simulate_coupled",
]


@dataclass(frozen=True)
class InitialLaw:
    """Named sampler for the time-zero law: delta, normal or uniform_box."""

    name: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.name not in ("delta", "normal", "uniform_box"):
            raise ScenarioError(
                f"unknown initial law {self.name!r}; known: delta, normal, uniform_box"
            )
        expected = {"delta": 1, "normal": 2, "uniform_box": 2}[self.name]
        if len(self.params) != expected:
            raise ScenarioError(
                f"initial law {self.name!r} takes {expected} parameter(s), "
                f"got {len(self.params)}"
            )
        if self.name == "normal" and self.params[1] < 0:
            raise ScenarioError("normal initial law needs a nonnegative scale")
        if self.name == "uniform_box" and self.params[1] <= self.params[0]:
            raise ScenarioError("uniform_box initial law needs lo < hi")

    def shifted(self, delta: float) -> "InitialLaw":
        """The same law translated by delta (used by coupling perturbations)."""
        if self.name == "delta":
            return InitialLaw("delta", (self.params[0] + delta,))
        if self.name == "normal":
            return InitialLaw("normal", (self.params[0] + delta, self.params[1]))
        return InitialLaw(
            "uniform_box", (self.params[0] + delta, self.params[1] + delta)
        )

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map (n, d) uniforms to samples; shared uniforms couple two laws
        comonotonically, so a pure shift of the law shifts every sample."""
        if self.name == "delta":
            return np.full_like(u, self.params[0])
        if self.name == "normal":
            mean, scale = self.params
            return mean + scale * ndtri(u)
        lo, hi = self.params
        return lo + (hi - lo) * u

    def variance(self) -> float:
        if self.name == "delta":
            return 0.0
        if self.name == "normal":
            return self.params[1] ** 2
        lo, hi = self.params
        return (hi - lo) ** 2 / 12.0


def initial_law_variance(law: InitialLaw) -> float:
    return law.variance()


@dataclass(frozen=True)
class SolverConfig:
    n_particles: int
    dt: float
    horizon: float
    seed: int
    initial_law: InitialLaw = InitialLaw("delta", (0.0,))

    def __post_init__(self):
        if self.n_particles < 1:
            raise ScenarioError("n_particles must be >= 1")
        if self.dt <= 0 or self.horizon <= 0:
            raise ScenarioError("dt and horizon must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ScenarioError("horizon/dt not integral")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class Ensemble:
    """Particle states at one time level; time == step_index * dt."""

    time: float
    states: np.ndarray
    step_index: int


@dataclass(frozen=True)
class TrajectoryRecord:
    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    second_moments: np.ndarray
    final_states: np.ndarray
    seed: int
    config: SolverConfig
    paths: np.ndarray | None = None

    @property
    def n_particles(self) -> int:
        return self.final_states.shape[0]

    @property
    def dim(self) -> int:
        return self.final_states.shape[1]

    def terminal_variance(self) -> float:
        """Scalar ensemble variance at the horizon (trace of the covariance)."""
        return float(np.trace(self.covs[-1]))


@dataclass(frozen=True)
class DifferenceTrace:
    """mean_j |X^A_j - X^B_j|^2 along a coupled pair of runs."""

    times: np.ndarray
    values: np.ndarray
    perturbation: dict = field(default_factory=dict)

    def terminal(self) -> float:
        return float(self.values[-1])


def sample_initial(config: SolverConfig, d: int, seed: int | None = None) -> Ensemble:
    """N i.i.d. draws from the initial law on the seed's dedicated substream."""
    use_seed = config.seed if seed is None else seed
    u = rng.step_uniforms(use_seed, rng.STREAM_INITIAL, 0, config.n_particles, d)
    states = config.initial_law.from_uniforms(u)
    return Ensemble(time=0.0, states=states, step_index=0)


def step_noise(seed: int, step: int, n: int, d1: int, dt: float) -> np.ndarray:
    """The (n, d1) Wiener increments for one step: N(0, dt) entries."""
    return math.sqrt(dt) * rng.step_normals(seed, rng.STREAM_INCREMENTS, step, n, d1)


def step_euler(ens: Ensemble, spec: KernelSpec, noise: np.ndarray, dt: float) -> Ensemble:
    """One synchronous Euler-Maruyama update against the frozen measure."""
    states = ens.states
    n = states.shape[0]
    if noise.shape != (n, spec.d1):
        raise ValueError(f"noise shape {noise.shape}, expected {(n, spec.d1)}")
    mu = EmpiricalMeasure(states)
    b = drift_functional_batch(spec, ens.time, states, mu)
    sig = diffusion_functional_batch(spec, ens.time, states, mu)
    # Finiteness is checked on the result; silence the intermediate overflow.
    with np.errstate(over="ignore", invalid="ignore"):
        new_states = states + b * dt + np.einsum("jkl,jl->jk", sig, noise)
    if not np.all(np.isfinite(new_states)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(new_states), axis=1))[0])
        raise BlowUpError(f"blow-up at step {ens.step_index}, particle {bad}")
    return Ensemble(
        time=(ens.step_index + 1) * dt, states=new_states, step_index=ens.step_index + 1
    )


def _summarize(states: np.ndarray):
    return ensemble_mean(states), ensemble_cov(states), ensemble_second_moment(states)


def simulate(
    spec: KernelSpec,
    config: SolverConfig,
    *,
    record_paths: bool = False,
    initial_states: np.ndarray | None = None,
    step_offset: int = 0,
) -> TrajectoryRecord:
    """Run the full particle trajectory and record per-step summaries.

    ``initial_states`` and ``step_offset`` restart the solver mid-stream
    (block iteration): the noise counters continue from ``step_offset``, so
    consecutive blocks consume the same increments a single long run would.
    """
    n, d = config.n_particles, spec.d
    steps = config.n_steps
    if initial_states is not None:
        states0 = np.asarray(initial_states, dtype=np.float64).reshape(n, d)
        ens = Ensemble(time=step_offset * config.dt, states=states0, step_index=step_offset)
    else:
        ens = sample_initial(config, d)

    times = np.empty(steps + 1)
    means = np.empty((steps + 1, d))
    covs = np.empty((steps + 1, d, d))
    m2 = np.empty(steps + 1)
    paths = np.empty((steps + 1, n, d)) if record_paths else None

    times[0] = ens.time
    means[0], covs[0], m2[0] = _summarize(ens.states)
    if paths is not None:
        paths[0] = ens.states

    for k in range(steps):
        noise = step_noise(config.seed, step_offset + k, n, spec.d1, config.dt)
        ens = step_euler(ens, spec, noise, config.dt)
        times[k + 1] = ens.time
        means[k + 1], covs[k + 1], m2[k + 1] = _summarize(ens.states)
        if paths is not None:
            paths[k + 1] = ens.states

    return TrajectoryRecord(
        times=times,
        means=means,
        covs=covs,
        second_moments=m2,
        final_states=ens.states,
        seed=config.seed,
        config=config,
        paths=paths,
    )


def _pair_gap(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return ensemble_second_moment(diff)


def simulate_coupled(
    spec_a: KernelSpec,
    config_a: SolverConfig,
    spec_b: KernelSpec,
    config_b: SolverConfig,
    shared_seed: int | None = None,
    *,
    record_paths: bool = False,
    initial_states: tuple[np.ndarray, np.ndarray] | None = None,
    step_offset: int = 0,
    perturbation: dict | None = None,
) -> tuple[TrajectoryRecord, TrajectoryRecord, DifferenceTrace]:
    """Run two solutions on the same Wiener path and record their gap.

    Initial draws use one shared block of uniforms mapped through each run's
    law, so identical laws give identical states and a shifted law gives
    states shifted by exactly the perturbation size.
    """
    if (config_a.n_particles, config_a.dt, config_a.horizon) != (
        config_b.n_particles,
        config_b.dt,
        config_b.horizon,
    ):
        raise ScenarioError("coupled runs need identical N, dt, horizon")
    if (spec_a.d, spec_a.d1) != (spec_b.d, spec_b.d1):
        raise ScenarioError("coupled runs need identical dimensions")
    seed = config_a.seed if shared_seed is None else shared_seed
    n, d, d1 = config_a.n_particles, spec_a.d, spec_a.d1
    steps = config_a.n_steps

    if initial_states is not None:
        sa = np.asarray(initial_states[0], dtype=np.float64).reshape(n, d)
        sb = np.asarray(initial_states[1], dtype=np.float64).reshape(n, d)
    else:
        u = rng.step_uniforms(seed, rng.STREAM_INITIAL, 0, n, d)
        sa = config_a.initial_law.from_uniforms(u)
        sb = config_b.initial_law.from_uniforms(u)
    t0 = step_offset * config_a.dt
    ens_a = Ensemble(time=t0, states=sa, step_index=step_offset)
    ens_b = Ensemble(time=t0, states=sb, step_index=step_offset)

    times = np.empty(steps + 1)
    gaps = np.empty(steps + 1)
    rec = {name: {"means": np.empty((steps + 1, d)), "covs": np.empty((steps + 1, d, d)),
                  "m2": np.empty(steps + 1)} for name in ("a", "b")}
    paths_a = np.empty((steps + 1, n, d)) if record_paths else None
    paths_b = np.empty((steps + 1, n, d)) if record_paths else None

    def record(k, ea, eb):
        times[k] = ea.time
        gaps[k] = _pair_gap(ea.states, eb.states)
        rec["a"]["means"][k], rec["a"]["covs"][k], rec["a"]["m2"][k] = _summarize(ea.states)
        rec["b"]["means"][k], rec["b"]["covs"][k], rec["b"]["m2"][k] = _summarize(eb.states)
        if paths_a is not None:
            paths_a[k] = ea.states
            paths_b[k] = eb.states

    record(0, ens_a, ens_b)
    for k in range(steps):
        noise = step_noise(seed, step_offset + k, n, d1, config_a.dt)
        ens_a = step_euler(ens_a, spec_a, noise, config_a.dt)
        ens_b = step_euler(ens_b, spec_b, noise, config_b.dt)
        record(k + 1, ens_a, ens_b)

    def make_record(name, ens, paths, config):
        return TrajectoryRecord(
            times=times.copy(),
            means=rec[name]["means"],
            covs=rec[name]["covs"],
            second_moments=rec[name]["m2"],
            final_states=ens.states,
            seed=seed,
            config=config,
            paths=paths,
        )

    trace = DifferenceTrace(
        times=times.copy(), values=gaps, perturbation=dict(perturbation or {})
    )
    return (
        make_record("a", ens_a, paths_a, config_a),
        make_record("b", ens_b, paths_b, config_b),
        trace,
    )
