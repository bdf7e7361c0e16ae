"""Moments, tail indicators and per-trajectory bound checks.

All moment sums use compensated accumulation in ascending size order so
that monotonicity comparisons at the 1e-9 level reflect the dynamics,
not the summation scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .numerics import composite_simpson, kahan_sum
from .reports import ExperimentReport
from .system import RhsEvaluator, SizeDistribution, mass_leak_rate
from .weights import ConvexWeight, evaluate as weight_eval

if TYPE_CHECKING:  # pragma: no cover
    from .integrator import Trajectory
    from .kernels import CoagulationKernel


def moment(state: SizeDistribution, m: float) -> float:
    """Weighted sum M_m = sum_i i**m xi_i over the truncated state."""
    if m < 0:
        raise ValueError(f"moment order must be nonnegative, got {m}")
    sizes = np.arange(1, state.truncation_k + 1, dtype=float)
    return kahan_sum(sizes**m * state.values)


def g_moment(state: SizeDistribution, weight: ConvexWeight) -> float:
    """Weighted sum sum_i G(i) xi_i for a convex weight G."""
    sizes = np.arange(1, state.truncation_k + 1, dtype=float)
    return kahan_sum(np.asarray(weight_eval(weight, sizes)) * state.values)


@dataclass
class DiagnosticsRecord:
    """Per-sample scalar observables."""

    moment_0: float
    moment_1: float
    moment_m: dict[float, float] = field(default_factory=dict)
    g_moments: dict[str, float] = field(default_factory=dict)
    tail_mass_fraction: float = 0.0
    rhs_sup: float = 0.0
    mass_leak_rate: float = 0.0


def compute_record(
    state: SizeDistribution,
    kernel: "CoagulationKernel",
    orders=(0.0, 1.0, 2.0),
    weights: dict[str, ConvexWeight] | None = None,
    evaluator: RhsEvaluator | None = None,
) -> DiagnosticsRecord:
    """Evaluate the standard observables at one sample.

    ``tail_mass_fraction`` is the mass share sitting above size k/2, the
    early-warning indicator that the truncation boundary is active.
    """
    k = state.truncation_k
    sizes = np.arange(1, k + 1, dtype=float)
    m0 = kahan_sum(state.values)
    m1 = kahan_sum(sizes * state.values)
    extra = {float(m): moment(state, float(m)) for m in orders if float(m) not in (0.0, 1.0)}
    gm = {name: g_moment(state, w) for name, w in (weights or {}).items()}
    half = k // 2
    tail = kahan_sum((sizes * state.values)[half:])
    tail_fraction = tail / m1 if m1 > 0 else 0.0
    f = evaluator if evaluator is not None else RhsEvaluator(kernel, k)
    deriv = f(state.values)
    return DiagnosticsRecord(
        moment_0=m0,
        moment_1=m1,
        moment_m=extra,
        g_moments=gm,
        tail_mass_fraction=float(tail_fraction),
        rhs_sup=float(np.max(np.abs(deriv))),
        mass_leak_rate=mass_leak_rate(state, kernel),
    )


def mass_defect(traj: "Trajectory") -> float:
    """Mass lost through the truncation boundary over the whole run.

    Integrates the recorded boundary-leak rate with composite Simpson.
    This equals M1(0) - M1(t_end) analytically but stays meaningful when
    the leak is far below the floating-point resolution of M1 itself
    (a k=64 run can leak ~1e-45 while M1 - M1 rounds to exactly 0).
    """
    times = np.array([s.time for s in traj.samples])
    leaks = np.array([d.mass_leak_rate for d in traj.diagnostics])
    return composite_simpson(times, leaks)


def mass_defect_endpoint(traj: "Trajectory") -> float:
    """The literal difference M1(first) - M1(last); resolution ~1e-16 * M1."""
    return traj.diagnostics[0].moment_1 - traj.diagnostics[-1].moment_1


def check_moment_propagation(
    traj: "Trajectory",
    weight: ConvexWeight,
    kernel: "CoagulationKernel",
    growth_constant: float | None = None,
) -> ExperimentReport:
    """Verify the exponential envelope on the G-weighted moment.

    Along the truncated dynamics sum G(i) xi_i(t) may grow, but no faster
    than exp(C t) with C determined by the kernel growth constant and the
    initial mass. The safe constant used here is C = 4 * A * M1(0), an
    upper envelope of the admissible readings of the underlying estimate;
    the observed growth rate is reported alongside so a tighter constant
    can be re-audited from the report alone.
    """
    if not traj.samples:
        raise ValueError("trajectory is empty")
    mg = np.array([g_moment(s, weight) for s in traj.samples])
    times = np.array([s.time for s in traj.samples])
    m1_0 = traj.diagnostics[0].moment_1
    c_safe = growth_constant if growth_constant is not None else 4.0 * kernel.growth_constant_A * m1_0

    metrics: dict[str, float] = {"c_safe": c_safe, "g_moment_initial": float(mg[0])}
    if mg[0] == 0.0:
        # the envelope degenerates: a zero start must stay zero
        metrics["max_ratio"] = 0.0 if np.all(mg == 0.0) else np.inf
        metrics["observed_growth_rate"] = 0.0
    else:
        envelope = mg[0] * np.exp(c_safe * times)
        metrics["max_ratio"] = float(np.max(mg / envelope))
        positive = times > 0
        if positive.any():
            with np.errstate(divide="ignore"):
                rates = np.log(np.maximum(mg[positive], 1e-300) / mg[0]) / times[positive]
            metrics["observed_growth_rate"] = float(rates.max())
        else:
            metrics["observed_growth_rate"] = 0.0
    return ExperimentReport.build(
        name="moment_propagation",
        metrics=metrics,
        thresholds={"max_ratio": 1.0},
        config_echo={
            "weight": weight.name,
            "kernel": kernel.name,
            "t_end": float(times[-1]),
            "n_samples": int(times.size),
        },
    )
