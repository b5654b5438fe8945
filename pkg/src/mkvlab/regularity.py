"""Numerical regularity estimates feeding the hypothesis report.

The suprema in the underlying conditions range over all (t, x, measure)
triples and are not computable, so every estimator here probes randomly and
reports an extremum.  That direction is conservative for refutation only: a
probed modulus or Lipschitz quotient is a certified lower bound, a probed
ellipticity floor is a certified upper bound.  Verdicts are therefore
phrased "refuted" / "not refuted" rather than proved.

Probe randomness is counter-indexed by absolute probe number, so probe p
sees the same numbers no matter how many probes a plan requests; extrema
over growing plans are monotone and any degree of parallelism gives
identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import isotonic_regression

from . import rng
from .kernels import KernelSpec, diffusion_functional, drift_functional
from .measure import EmpiricalMeasure, second_moment
from .particles import InitialLaw, SolverConfig, sample_initial

__all__ = [
    "ProbePlan",
    "ModulusTable",
    "DiniResult",
    "ConditionCheck",
    "HypothesisReport",
    "default_radii",
    "estimate_modulus",
    "dini_integral",
    "ellipticity_floor",
    "lipschitz_estimate",
    "check_hypotheses",
]

_DINI_TOL = 1e-3
_DINI_WINDOW = 10


@dataclass(frozen=True)
class ProbePlan:
    """How to randomize (t, x, mu) probes.

    Atoms of the probe measures and the x anchors stay inside the box
    [-box_half, box_half]^d, which must sit inside any validity box the
    kernel declares for its bounds.
    """

    n_probes: int = 128
    t_max: float = 1.0
    box_half: float = 4.0
    max_atoms: int = 64

    def __post_init__(self):
        if self.n_probes < 1:
            raise ValueError("a probe plan needs at least one probe")
        if self.max_atoms < 1 or self.box_half <= 0 or self.t_max <= 0:
            raise ValueError("probe plan parameters must be positive")


@dataclass(frozen=True)
class ModulusTable:
    """Probed modulus of continuity of B in x, nondecreasing in r."""

    radii: np.ndarray
    values: np.ndarray
    n_probes: int
    seed: int
    raw_values: np.ndarray | None = None

    def rho(self, r) -> np.ndarray:
        """Piecewise-linear interpolation of the table in log r."""
        r = np.asarray(r, dtype=float)
        return np.interp(np.log(r), np.log(self.radii), self.values)


class DiniResult(NamedTuple):
    value: float
    divergent: bool
    extrapolated: bool


def default_radii(k_max: int = 40, per_octave: int = 1) -> np.ndarray:
    """Dyadic radius ladder 2^0 .. 2^-k_max, optionally refined."""
    exps = np.arange(k_max * per_octave + 1, dtype=float) / per_octave
    return np.sort(2.0 ** (-exps))


def _probe_layout(d: int, max_atoms: int):
    # slots: t, atom count, x anchor, log-scale, direction, atoms
    n_slots = 2 + d + 1 + d + max_atoms * d
    return n_slots


def _unpack_probe(u: np.ndarray, p: int, plan: ProbePlan, d: int):
    """One probe's (t, x, direction, measure) from its uniform slots."""
    t = float(u[0]) * plan.t_max
    size = 1 + int(u[1] * plan.max_atoms)
    size = min(size, plan.max_atoms)
    pos = 2
    x_raw = plan.box_half * (2.0 * u[pos : pos + d] - 1.0)
    pos += d
    log_scale = u[pos]
    pos += 1
    direction = 2.0 * u[pos : pos + d] - 1.0
    pos += d
    norm = float(np.sqrt(np.sum(direction * direction)))
    if norm == 0.0:
        direction = np.zeros(d)
        direction[0] = 1.0
    else:
        direction = direction / norm
    # Anchor mixture: box center, uniform in the box, and log-uniform
    # distance from the center.  The center and near-center anchors catch
    # moduli whose steep increments sit at one point.
    mode = p % 3
    if mode == 0:
        x = np.zeros(d)
    elif mode == 1:
        x = x_raw
    else:
        scale = math.exp(
            math.log(1e-8)
            + float(log_scale) * (math.log(plan.box_half / 2.0) - math.log(1e-8))
        )
        x = scale * direction
    atoms = plan.box_half * (2.0 * u[pos : pos + size * d] - 1.0)
    mu = EmpiricalMeasure(atoms.reshape(size, d))
    return t, x, direction, mu


def estimate_modulus(
    spec: KernelSpec, radii, plan: ProbePlan | None = None, seed: int = 0
) -> ModulusTable:
    """Probe sup |B[t,x,mu] - B[t,x',mu]| over |x - x'| <= r for each r.

    The per-radius maxima are isotonic-regressed so the reported table is
    nondecreasing in r like a true modulus.
    """
    plan = plan or ProbePlan()
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii[0] <= 0 or radii[-1] > 1 + 1e-12:
        raise ValueError("radii must lie in (0, 1]")
    d = spec.d
    n_slots = _probe_layout(d, plan.max_atoms)
    raw = np.zeros(len(radii))
    probe_ids = np.arange(plan.n_probes)
    for ri, r in enumerate(radii):
        us = rng.probe_uniforms(seed, rng.STREAM_MODULUS, probe_ids, n_slots, step=ri)
        best = 0.0
        for p in range(plan.n_probes):
            t, x, direction, mu = _unpack_probe(us[p], p, plan, d)
            x2 = x + r * direction
            b1 = drift_functional(spec, t, x, mu)
            b2 = drift_functional(spec, t, x2, mu)
            gap = float(np.sqrt(np.sum((b1 - b2) ** 2)))
            if gap > best:
                best = gap
        raw[ri] = best
    iso = isotonic_regression(raw, increasing=True).x
    return ModulusTable(
        radii=radii, values=iso, n_probes=plan.n_probes, seed=seed, raw_values=raw
    )


def _tail_slope(table: ModulusTable) -> float:
    """Log-log slope of rho over the table's smallest decade (for the tail)."""
    radii, values = table.radii, table.values
    r_lo = radii[0]
    mask = (radii <= 10.0 * r_lo) & (values > 0)
    if mask.sum() < 2 or values[0] <= 0:
        return 0.0
    lr = np.log(radii[mask])
    lv = np.log(values[mask])
    return float(np.polyfit(lr, lv, 1)[0])


def dini_integral(table: ModulusTable, r_min: float) -> DiniResult:
    """integral of rho(r)/r dr from r_min to 1, with a divergence verdict.

    The integrand is rho interpolated linearly in log r; below the table's
    coverage rho is extrapolated by the last decade's log-log slope and the
    result is flagged.  Divergence is declared when the partial integrals
    over the geometric ladder r = 2^-k stop shrinking: none of the last
    _DINI_WINDOW octave increments falls below _DINI_TOL.
    """
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    radii = table.radii
    values = table.values
    if radii[-1] < 1.0:
        # extend the table flat to r = 1 so the integral's upper limit exists
        radii = np.concatenate([radii, [1.0]])
        values = np.concatenate([values, [values[-1]]])

    s_min = math.log(r_min)
    s_table_lo = math.log(radii[0])
    extrapolated = s_min < s_table_lo - 1e-12
    slope = _tail_slope(table) if extrapolated else 0.0
    rho_lo = float(table.values[0])

    # Integration nodes: table breakpoints plus the octave ladder, so the
    # piecewise-linear integrand is integrated exactly between breakpoints.
    k_max = max(1, int(math.ceil(-math.log(r_min, 2.0))))
    ladder_s = -np.arange(k_max + 1, dtype=float) * math.log(2.0)
    ladder_s = np.maximum(ladder_s, s_min)
    nodes = np.union1d(np.log(radii), ladder_s)
    nodes = nodes[(nodes >= s_min - 1e-12) & (nodes <= 0.0 + 1e-12)]
    nodes = np.union1d(nodes, [s_min, 0.0])

    covered = nodes >= s_table_lo - 1e-12
    integrand = np.empty_like(nodes)
    integrand[covered] = np.interp(nodes[covered], np.log(radii), values)
    if not np.all(covered):
        if rho_lo <= 0.0:
            integrand[~covered] = 0.0
        else:
            integrand[~covered] = rho_lo * np.exp(slope * (nodes[~covered] - s_table_lo))

    # cumulative integral from the right end (r = 1) downward
    seg = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(nodes)
    cum_from_top = np.concatenate([[0.0], np.cumsum(seg[::-1])])[::-1]

    ladder_vals = np.interp(np.maximum(ladder_s, s_min), nodes, cum_from_top)
    increments = ladder_vals[1:] - ladder_vals[:-1]
    window = increments[-min(_DINI_WINDOW, len(increments)) :]
    divergent = len(window) >= _DINI_WINDOW and bool(np.min(window) >= _DINI_TOL)

    value = float(cum_from_top[0])
    return DiniResult(value=value, divergent=divergent, extrapolated=bool(extrapolated))


def ellipticity_floor(
    spec: KernelSpec, plan: ProbePlan | None = None, seed: int = 0
) -> float:
    """Probed minimum eigenvalue of Sigma Sigma^T over (t, x, mu) draws."""
    plan = plan or ProbePlan(n_probes=1024)
    d = spec.d
    n_slots = _probe_layout(d, plan.max_atoms)
    us = rng.probe_uniforms(
        seed, rng.STREAM_ELLIPTICITY, np.arange(plan.n_probes), n_slots
    )
    floor = math.inf
    for p in range(plan.n_probes):
        t, x, _, mu = _unpack_probe(us[p], p, plan, d)
        sig = diffusion_functional(spec, t, x, mu)
        a = sig @ sig.T
        lam = float(np.linalg.eigvalsh(a)[0])
        if lam < floor:
            floor = lam
    return max(floor, 0.0)


_LIPSCHITZ_AXES = ("x-of-sigma", "y-of-b", "y-of-sigma")


class LipschitzEstimate(NamedTuple):
    constant: float
    diverging: bool


def lipschitz_estimate(
    spec: KernelSpec, axis: str, plan: ProbePlan | None = None, seed: int = 0
) -> LipschitzEstimate:
    """Max probed difference quotient along one argument of the kernels.

    Offsets span six decades; ``diverging`` is set when quotients at the
    smallest offsets dwarf those at order-one offsets, the numeric signature
    of a non-Lipschitz function.
    """
    if axis not in _LIPSCHITZ_AXES:
        raise ValueError(f"axis must be one of {_LIPSCHITZ_AXES}")
    plan = plan or ProbePlan()
    d = spec.d
    n_slots = _probe_layout(d, plan.max_atoms)
    stream_offset = _LIPSCHITZ_AXES.index(axis)
    us = rng.probe_uniforms(
        seed, rng.STREAM_LIPSCHITZ, np.arange(plan.n_probes), n_slots, step=stream_offset
    )
    quots = np.zeros(plan.n_probes)
    offs = np.zeros(plan.n_probes)
    for p in range(plan.n_probes):
        t, x, direction, mu = _unpack_probe(us[p], p, plan, d)
        h = math.exp(
            math.log(1e-6)
            + float(us[p][2 + d]) * (math.log(plan.box_half / 2.0) - math.log(1e-6))
        )
        y = mu.points[0]
        if axis == "y-of-b":
            f1 = np.asarray(spec.drift_kernel(t, x, y), dtype=float)
            f2 = np.asarray(spec.drift_kernel(t, x, y + h * direction), dtype=float)
        elif axis == "y-of-sigma":
            f1 = np.asarray(spec.diffusion_kernel(t, x, y), dtype=float)
            f2 = np.asarray(spec.diffusion_kernel(t, x, y + h * direction), dtype=float)
        else:
            f1 = diffusion_functional(spec, t, x, mu)
            f2 = diffusion_functional(spec, t, x + h * direction, mu)
        quots[p] = float(np.sqrt(np.sum((f1 - f2) ** 2))) / h
        offs[p] = h
    small = quots[offs <= 1e-4]
    large = quots[offs >= 1e-2]
    diverging = bool(
        small.size and large.size and small.max() > 50.0 * max(large.max(), 1e-12)
        and small.max() > 1e3
    )
    return LipschitzEstimate(constant=float(quots.max()), diverging=diverging)


def continuity_modulus(
    spec: KernelSpec, plan: ProbePlan | None = None, seed: int = 0, delta: float = 1e-3
) -> float:
    """Largest probed increment of A = Sigma Sigma^T over (t, x) moves of
    size delta, with the measure held fixed; reported as a statistic only."""
    plan = plan or ProbePlan()
    d = spec.d
    n_slots = _probe_layout(d, plan.max_atoms)
    us = rng.probe_uniforms(seed, rng.STREAM_CONTINUITY, np.arange(plan.n_probes), n_slots)
    worst = 0.0
    for p in range(plan.n_probes):
        t, x, direction, mu = _unpack_probe(us[p], p, plan, d)
        s1 = diffusion_functional(spec, t, x, mu)
        t2 = min(t + delta, plan.t_max)
        s2 = diffusion_functional(spec, t2, x + delta * direction, mu)
        a1 = s1 @ s1.T
        a2 = s2 @ s2.T
        gap = float(np.sqrt(np.sum((a1 - a2) ** 2)))
        if gap > worst:
            worst = gap
    return worst


@dataclass(frozen=True)
class ConditionCheck:
    condition: str
    verdict: str  # "not refuted" | "refuted"
    statistic: float
    probes: int
    seed: int

    @property
    def refuted(self) -> bool:
        return self.verdict == "refuted"

    def as_json(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "statistic": self.statistic,
            "probes": self.probes,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class HypothesisReport:
    conditions: tuple[ConditionCheck, ...]
    second_moment: float
    lipschitz_y: float
    sigma_lipschitz_x: float
    ellipticity: float
    dini: DiniResult
    warnings: tuple[str, ...] = ()

    @property
    def overall_pass(self) -> bool:
        return not any(c.refuted for c in self.conditions)

    def condition(self, name: str) -> ConditionCheck:
        for c in self.conditions:
            if c.condition == name:
                return c
        raise KeyError(name)

    def as_json(self) -> list[dict]:
        return [c.as_json() for c in self.conditions]


def _bounds_statistic(spec: KernelSpec, plan: ProbePlan, seed: int):
    """Largest probed |b| and |sigma| relative to the declared bounds."""
    n_slots = _probe_layout(spec.d, plan.max_atoms)
    us = rng.probe_uniforms(seed, rng.STREAM_BOUNDS, np.arange(plan.n_probes), n_slots)
    worst_b = 0.0
    worst_s = 0.0
    for p in range(plan.n_probes):
        t, x, _, mu = _unpack_probe(us[p], p, plan, spec.d)
        y = mu.points[0]
        b = np.asarray(spec.drift_kernel(t, x, y), dtype=float)
        s = np.asarray(spec.diffusion_kernel(t, x, y), dtype=float)
        worst_b = max(worst_b, float(np.sqrt(np.sum(b * b))))
        worst_s = max(worst_s, float(np.sqrt(np.sum(s * s))))
    return worst_b, worst_s


def check_hypotheses(
    spec: KernelSpec,
    initial_law: InitialLaw | None = None,
    *,
    seed: int = 0,
    plan: ProbePlan | None = None,
    n_initial: int = 10_000,
    dini_r_min: float = 2.0**-40,
) -> HypothesisReport:
    """Evaluate the five solvability conditions numerically.

    (i) initial law has a finite second moment; (ii) kernels bounded and
    Lipschitz in y; (iii) diffusion square uniformly nondegenerate;
    (iv) diffusion Lipschitz in x; (v) the drift's x-modulus satisfies the
    Dini integral test.
    """
    if plan is None:
        box = spec.declared_bounds.valid_box_half
        plan = ProbePlan(box_half=min(4.0, box) if math.isfinite(box) else 4.0)
    law = initial_law or InitialLaw("delta", (0.0,))
    warnings: list[str] = []

    cfg = SolverConfig(n_initial, 1.0, 1.0, seed=seed, initial_law=law)
    m2 = second_moment(EmpiricalMeasure(sample_initial(cfg, spec.d).states))
    cond_i = ConditionCheck(
        condition="i",
        verdict="not refuted" if math.isfinite(m2) else "refuted",
        statistic=float(m2),
        probes=n_initial,
        seed=seed,
    )

    worst_b, worst_s = _bounds_statistic(spec, plan, seed)
    lip_y_b = lipschitz_estimate(spec, "y-of-b", plan, seed)
    lip_y_s = lipschitz_estimate(spec, "y-of-sigma", plan, seed)
    bound_scale = max(spec.declared_bounds.drift, spec.declared_bounds.diffusion, 1e-12)
    if worst_b > spec.declared_bounds.drift * 1.001 + 1e-12:
        warnings.append(
            f"observed |b| = {worst_b:.6g} exceeds declared bound "
            f"{spec.declared_bounds.drift:.6g}"
        )
    if worst_s > spec.declared_bounds.diffusion * 1.001 + 1e-12:
        warnings.append(
            f"observed |sigma| = {worst_s:.6g} exceeds declared bound "
            f"{spec.declared_bounds.diffusion:.6g}"
        )
    if lip_y_b.constant > spec.declared_lipschitz_y * 1.1 + 1e-9:
        warnings.append(
            f"probed y-Lipschitz quotient {lip_y_b.constant:.6g} exceeds declared "
            f"{spec.declared_lipschitz_y:.6g}"
        )
    if not spec.declared_bounds.global_in_x:
        warnings.append(
            "declared bounds are box-effective (valid for |x|, |y| <= "
            f"{spec.declared_bounds.valid_box_half:g}); probes stayed inside"
        )
    cond_ii_refuted = lip_y_b.diverging or lip_y_s.diverging
    cond_ii = ConditionCheck(
        condition="ii",
        verdict="refuted" if cond_ii_refuted else "not refuted",
        statistic=max(lip_y_b.constant, lip_y_s.constant),
        probes=plan.n_probes,
        seed=seed,
    )

    ell_plan = ProbePlan(
        n_probes=max(plan.n_probes, 1024),
        t_max=plan.t_max,
        box_half=plan.box_half,
        max_atoms=plan.max_atoms,
    )
    floor = ellipticity_floor(spec, ell_plan, seed)
    cond_iii = ConditionCheck(
        condition="iii",
        verdict="not refuted" if floor > 1e-12 else "refuted",
        statistic=floor,
        probes=ell_plan.n_probes,
        seed=seed,
    )

    lip_x = lipschitz_estimate(spec, "x-of-sigma", plan, seed)
    if lip_x.constant > spec.declared_lipschitz_x_sigma * 1.1 + 1e-9:
        warnings.append(
            f"probed x-Lipschitz quotient of sigma {lip_x.constant:.6g} exceeds "
            f"declared {spec.declared_lipschitz_x_sigma:.6g}"
        )
    cond_iv = ConditionCheck(
        condition="iv",
        verdict="refuted" if lip_x.diverging else "not refuted",
        statistic=lip_x.constant,
        probes=plan.n_probes,
        seed=seed,
    )

    table = estimate_modulus(spec, default_radii(), plan, seed)
    dini = dini_integral(table, dini_r_min)
    cond_v = ConditionCheck(
        condition="v",
        verdict="refuted" if dini.divergent else "not refuted",
        statistic=float("inf") if dini.divergent else dini.value,
        probes=plan.n_probes * len(table.radii),
        seed=seed,
    )

    return HypothesisReport(
        conditions=(cond_i, cond_ii, cond_iii, cond_iv, cond_v),
        second_moment=float(m2),
        lipschitz_y=lip_y_b.constant,
        sigma_lipschitz_x=lip_x.constant,
        ellipticity=floor,
        dini=dini,
        warnings=tuple(warnings),
    )
