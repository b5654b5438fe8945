"""Scenario files: the single JSON schema shared by every subcommand.

The schema is fail-closed: unknown keys are rejected naming the offending
field, so a typo in an experiment config cannot silently fall back to a
default.  ``load_scenario`` fills defaults and validates; ``resolve`` turns
the normalized document into the runtime objects (kernel spec, solver
config, grid, experiment parameters).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ScenarioError
from .kernels import KernelSpec, builtin_kernel
from .particles import InitialLaw, SolverConfig
from .uniqueness import DEFAULT_DT_LADDER, Perturbation
from .zvonkin import PdeGrid

__all__ = ["Scenario", "Experiment", "load_scenario", "scenario_from_dict"]

DEFAULT_N_LADDER = (50, 100, 200, 400, 800, 1600, 3200)

_TOP_KEYS = {"kernel", "d", "d1", "solver", "pde", "experiment"}
_KERNEL_KEYS = {"name", "params", "table"}
_SOLVER_KEYS = {"n_particles", "dt", "horizon", "seed", "initial_law", "record_paths"}
_LAW_KEYS = {"name", "params"}
_PDE_KEYS = {"R", "h", "dt"}
_EXPERIMENT_KEYS = {
    "perturbation",
    "dt_ladder",
    "n_ladder",
    "seeds",
    "t_block",
    "n_blocks",
    "allow_refuted_hypotheses",
}
_PERTURBATION_KEYS = {"kind", "size"}


def _require_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be a JSON object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"unknown key {unknown[0]!r} in {where}")


def _number(obj: dict, key: str, where: str, default=None, integer=False):
    if key not in obj:
        if default is None:
            raise ScenarioError(f"missing required field {where}.{key}")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}.{key} must be a number")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ScenarioError(f"{where}.{key} must be an integer")
        return int(value)
    return float(value)


def _number_list(obj: dict, key: str, where: str, default):
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, list) or not value:
        raise ScenarioError(f"{where}.{key} must be a nonempty list of numbers")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{where}.{key}[{i}] must be a number")
        out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class Experiment:
    perturbation: Perturbation
    dt_ladder: tuple[float, ...]
    n_ladder: tuple[int, ...]
    n_seeds: int
    t_block: float | None
    n_blocks: int | None
    allow_refuted_hypotheses: bool

    def seeds(self, base_seed: int) -> list[int]:
        return [base_seed + i for i in range(self.n_seeds)]


@dataclass(frozen=True)
class Scenario:
    """A validated, defaults-filled scenario document."""

    kernel_name: str
    kernel_params: tuple[float, ...]
    table_path: Path | None
    d: int
    d1: int
    solver: SolverConfig
    record_paths: bool
    pde: PdeGrid
    experiment: Experiment
    normalized: dict

    @property
    def scenario_hash(self) -> str:
        canonical = json.dumps(self.normalized, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def kernel_spec(self) -> KernelSpec:
        if self.table_path is not None:
            from .tables import load_table_kernel

            spec = load_table_kernel(self.table_path)
            if spec.d != self.d or spec.d1 != self.d1:
                raise ScenarioError(
                    f"table kernel has (d, d1) = ({spec.d}, {spec.d1}) but the "
                    f"scenario declares ({self.d}, {self.d1})"
                )
            return spec
        return builtin_kernel(
            self.kernel_name, self.kernel_params, d=self.d, d1=self.d1
        )

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace

        normalized = json.loads(json.dumps(self.normalized))
        normalized["solver"]["seed"] = int(seed)
        return replace(
            self,
            solver=replace(self.solver, seed=int(seed)),
            normalized=normalized,
        )


def _parse_law(obj, where: str) -> InitialLaw:
    obj = _require_mapping(obj, where)
    _reject_unknown(obj, _LAW_KEYS, where)
    if "name" not in obj:
        raise ScenarioError(f"missing required field {where}.name")
    name = obj["name"]
    if not isinstance(name, str):
        raise ScenarioError(f"{where}.name must be a string")
    params = _number_list(obj, "params", where, default=())
    return InitialLaw(name, params)


def _parse_perturbation(obj, where: str) -> Perturbation:
    obj = _require_mapping(obj, where)
    _reject_unknown(obj, _PERTURBATION_KEYS, where)
    kind = obj.get("kind", "initial_shift")
    if not isinstance(kind, str):
        raise ScenarioError(f"{where}.kind must be a string")
    size = _number(obj, "size", where, default=1e-3)
    return Perturbation(kind=kind, size=size)


def scenario_from_dict(obj: dict, base_dir: Path | None = None) -> Scenario:
    obj = _require_mapping(obj, "scenario")
    _reject_unknown(obj, _TOP_KEYS, "scenario")
    if "kernel" not in obj:
        raise ScenarioError("missing required field scenario.kernel")
    if "solver" not in obj:
        raise ScenarioError("missing required field scenario.solver")

    kernel = _require_mapping(obj["kernel"], "kernel")
    _reject_unknown(kernel, _KERNEL_KEYS, "kernel")
    table_path = None
    if "table" in kernel:
        if not isinstance(kernel["table"], str):
            raise ScenarioError("kernel.table must be a path string")
        table_path = Path(kernel["table"])
        if base_dir is not None and not table_path.is_absolute():
            table_path = base_dir / table_path
        kernel_name = kernel.get("name", f"table:{table_path.stem}")
        if "params" in kernel:
            raise ScenarioError("kernel.params is not allowed with kernel.table")
        kernel_params = ()
    else:
        if "name" not in kernel:
            raise ScenarioError("missing required field kernel.name")
        kernel_name = kernel["name"]
        kernel_params = _number_list(kernel, "params", "kernel", default=())
    if not isinstance(kernel_name, str):
        raise ScenarioError("kernel.name must be a string")

    d = _number(obj, "d", "scenario", default=1, integer=True)
    d1 = _number(obj, "d1", "scenario", default=d, integer=True)

    solver = _require_mapping(obj["solver"], "solver")
    _reject_unknown(solver, _SOLVER_KEYS, "solver")
    n_particles = _number(solver, "n_particles", "solver", integer=True)
    dt = _number(solver, "dt", "solver")
    horizon = _number(solver, "horizon", "solver")
    seed = _number(solver, "seed", "solver", integer=True)
    law = (
        _parse_law(solver["initial_law"], "solver.initial_law")
        if "initial_law" in solver
        else InitialLaw("delta", (0.0,))
    )
    record_paths = solver.get("record_paths", False)
    if not isinstance(record_paths, bool):
        raise ScenarioError("solver.record_paths must be a boolean")
    config = SolverConfig(
        n_particles=n_particles, dt=dt, horizon=horizon, seed=seed, initial_law=law
    )

    pde_obj = _require_mapping(obj.get("pde", {}), "pde")
    _reject_unknown(pde_obj, _PDE_KEYS, "pde")
    pde = PdeGrid(
        R=_number(pde_obj, "R", "pde", default=6.0),
        h=_number(pde_obj, "h", "pde", default=0.04),
        dt=_number(pde_obj, "dt", "pde", default=dt),
    )

    exp_obj = _require_mapping(obj.get("experiment", {}), "experiment")
    _reject_unknown(exp_obj, _EXPERIMENT_KEYS, "experiment")
    pert = (
        _parse_perturbation(exp_obj["perturbation"], "experiment.perturbation")
        if "perturbation" in exp_obj
        else Perturbation()
    )
    dt_ladder = _number_list(exp_obj, "dt_ladder", "experiment", DEFAULT_DT_LADDER)
    n_ladder_f = _number_list(
        exp_obj, "n_ladder", "experiment", tuple(float(n) for n in DEFAULT_N_LADDER)
    )
    n_ladder = tuple(int(n) for n in n_ladder_f)
    if any(float(n) != f for n, f in zip(n_ladder, n_ladder_f)):
        raise ScenarioError("experiment.n_ladder entries must be integers")
    n_seeds = _number(exp_obj, "seeds", "experiment", default=16, integer=True)
    if n_seeds < 1:
        raise ScenarioError("experiment.seeds must be >= 1")
    t_block = None
    n_blocks = None
    if "t_block" in exp_obj or "n_blocks" in exp_obj:
        t_block = _number(exp_obj, "t_block", "experiment")
        n_blocks = _number(exp_obj, "n_blocks", "experiment", integer=True)
    allow = exp_obj.get("allow_refuted_hypotheses", False)
    if not isinstance(allow, bool):
        raise ScenarioError("experiment.allow_refuted_hypotheses must be a boolean")
    experiment = Experiment(
        perturbation=pert,
        dt_ladder=dt_ladder,
        n_ladder=n_ladder,
        n_seeds=n_seeds,
        t_block=t_block,
        n_blocks=n_blocks,
        allow_refuted_hypotheses=allow,
    )

    normalized = {
        "kernel": {"name": kernel_name, "params": list(kernel_params)},
        "d": d,
        "d1": d1,
        "solver": {
            "n_particles": n_particles,
            "dt": dt,
            "horizon": horizon,
            "seed": seed,
            "initial_law": {"name": law.name, "params": list(law.params)},
            "record_paths": record_paths,
        },
        "pde": {"R": pde.R, "h": pde.h, "dt": pde.dt},
        "experiment": {
            "perturbation": pert.as_dict(),
            "dt_ladder": list(dt_ladder),
            "n_ladder": list(n_ladder),
            "seeds": n_seeds,
            "t_block": t_block,
            "n_blocks": n_blocks,
            "allow_refuted_hypotheses": allow,
        },
    }
    if table_path is not None:
        normalized["kernel"]["table"] = str(table_path)

    scenario = Scenario(
        kernel_name=kernel_name,
        kernel_params=kernel_params,
        table_path=table_path,
        d=d,
        d1=d1,
        solver=config,
        record_paths=record_paths,
        pde=pde,
        experiment=experiment,
        normalized=normalized,
    )
    scenario.kernel_spec()  # fail fast on unknown kernels / bad tables
    return scenario


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file, filling defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario {path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from None
    return scenario_from_dict(obj, base_dir=path.parent)
