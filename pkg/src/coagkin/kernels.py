"""Coagulation rate kernels and their admissibility checks.

A kernel assigns a nonnegative symmetric collision rate to every pair of
positive integer cluster sizes. Each kernel declares the constants of the
growth hypotheses it claims to satisfy:

* ``growth_constant_A``: rate(i, j) <= A * (i + j) everywhere,
* ``power_delta`` (optional): rate(i, j) <= A * (i**delta + j**delta),
* ``lower_bound_zeta`` (optional): rate(i, j) >= zeta everywhere.

Declared constants are user inputs; ``check_admissibility`` validates them
exhaustively on a finite grid rather than inferring them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .reports import ExperimentReport

RateRule = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Relative slack applied to growth-bound comparisons so that floating-point
# rules (e.g. fractional powers) are not flagged on rounding alone.
GROWTH_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class CoagulationKernel:
    """Symmetric nonnegative collision-rate table/rule on positive sizes.

    ``rule`` must accept integer arrays and evaluate elementwise. When the
    rate has the separable form a * (i**d + j**d) the ``separable`` pair
    (a, d) is set, which unlocks an O(k) right-hand-side fast path.
    Tabulated kernels store a dense lower-triangular matrix and mirror it
    on read, making symmetry structural.
    """

    name: str
    rule: RateRule
    growth_constant_A: float
    power_delta: float | None = None
    lower_bound_zeta: float | None = None
    separable: tuple[float, float] | None = None
    table: np.ndarray | None = None

    def __post_init__(self):
        if not self.growth_constant_A > 0:
            raise ValueError(f"growth_constant_A must be positive, got {self.growth_constant_A}")
        if self.power_delta is not None and not 0.0 <= self.power_delta <= 1.0:
            raise ValueError(f"power_delta must lie in [0, 1], got {self.power_delta}")
        if self.lower_bound_zeta is not None and not self.lower_bound_zeta > 0:
            raise ValueError(f"lower_bound_zeta must be positive, got {self.lower_bound_zeta}")

    def evaluate(self, i: int, j: int) -> float:
        """Rate for one (i, j) pair of positive integer sizes."""
        ii, jj = int(i), int(j)
        if ii != i or jj != j or ii < 1 or jj < 1:
            raise ValueError(f"cluster sizes must be integers >= 1, got ({i}, {j})")
        out = self.rule(np.array([ii]), np.array([jj]))
        return float(np.asarray(out).reshape(-1)[0])

    def rate_matrix(self, k: int) -> np.ndarray:
        """Dense (k, k) rate matrix for sizes 1..k."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        idx = np.arange(1, k + 1)
        ii, jj = np.meshgrid(idx, idx, indexing="ij")
        return np.asarray(self.rule(ii, jj), dtype=float)

    @property
    def max_table_size(self) -> int | None:
        return None if self.table is None else self.table.shape[0]


def constant(c: float = 1.0, name: str | None = None) -> CoagulationKernel:
    """Constant kernel: rate(i, j) = c."""
    if not c > 0:
        raise ValueError(f"constant rate must be positive, got {c}")
    cc = float(c)
    return CoagulationKernel(
        name=name or f"constant({cc:g})",
        rule=lambda i, j: np.full(np.broadcast(i, j).shape, cc),
        growth_constant_A=cc,          # c <= c*(i+j) since i+j >= 2
        power_delta=0.0,               # c <= c*(i^0 + j^0)
        lower_bound_zeta=cc,
        separable=(cc / 2.0, 0.0),
    )


def additive(a: float = 1.0, name: str | None = None) -> CoagulationKernel:
    """Additive kernel: rate(i, j) = a * (i + j), the borderline growth case."""
    if not a > 0:
        raise ValueError(f"additive coefficient must be positive, got {a}")
    aa = float(a)
    return CoagulationKernel(
        name=name or f"additive({aa:g})",
        rule=lambda i, j: aa * (np.asarray(i, dtype=float) + np.asarray(j, dtype=float)),
        growth_constant_A=aa,
        power_delta=1.0,
        lower_bound_zeta=2.0 * aa,
        separable=(aa, 1.0),
    )


def power_sum(a: float = 1.0, exponent: float = 0.5, name: str | None = None) -> CoagulationKernel:
    """Power-sum kernel: rate(i, j) = a * (i**d + j**d) with d in [0, 1]."""
    if not a > 0:
        raise ValueError(f"power-sum coefficient must be positive, got {a}")
    if not 0.0 <= exponent <= 1.0:
        raise ValueError(f"power-sum exponent must lie in [0, 1], got {exponent}")
    aa, d = float(a), float(exponent)
    return CoagulationKernel(
        name=name or f"power({aa:g},{d:g})",
        rule=lambda i, j: aa * (np.asarray(i, dtype=float) ** d + np.asarray(j, dtype=float) ** d),
        growth_constant_A=aa,          # i**d <= i for i >= 1, d <= 1
        power_delta=d,
        lower_bound_zeta=2.0 * aa,
        separable=(aa, d),
    )


def tabulated(
    values: np.ndarray,
    growth_constant_A: float,
    power_delta: float | None = None,
    lower_bound_zeta: float | None = None,
    name: str = "table",
) -> CoagulationKernel:
    """Kernel backed by an explicit rate matrix for sizes 1..n.

    Only the lower triangle of ``values`` is stored; reads mirror it, so
    the kernel is symmetric by construction. Evaluation beyond the table
    is a domain error.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
        raise ValueError(f"table must be a square matrix, got shape {vals.shape}")
    low = np.tril(vals)
    n = low.shape[0]

    def rule(i, j, _low=low, _n=n):
        i = np.asarray(i)
        j = np.asarray(j)
        if i.max() > _n or j.max() > _n:
            raise ValueError(f"tabulated kernel covers sizes 1..{_n}, got sizes up to {max(i.max(), j.max())}")
        hi = np.maximum(i, j) - 1
        lo = np.minimum(i, j) - 1
        return _low[hi, lo]

    return CoagulationKernel(
        name=name,
        rule=rule,
        growth_constant_A=growth_constant_A,
        power_delta=power_delta,
        lower_bound_zeta=lower_bound_zeta,
        table=low,
    )


def tabulated_from_csv(
    path: str,
    growth_constant_A: float,
    power_delta: float | None = None,
    lower_bound_zeta: float | None = None,
    name: str | None = None,
) -> CoagulationKernel:
    """Load a tabulated kernel from CSV rows ``i,j,gamma`` with i >= j.

    Missing pairs default to rate 0; a header row is permitted.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if lineno == 1 and not parts[0].lstrip("-").isdigit():
                continue  # header
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i,j,gamma', got {line!r}")
            i, j, g = int(parts[0]), int(parts[1]), float(parts[2])
            if i < 1 or j < 1:
                raise ValueError(f"{path}:{lineno}: sizes must be >= 1")
            if j > i:
                raise ValueError(f"{path}:{lineno}: rows must satisfy i >= j")
            rows.append((i, j, g))
    if not rows:
        raise ValueError(f"{path}: no kernel entries found")
    n = max(r[0] for r in rows)
    mat = np.zeros((n, n))
    for i, j, g in rows:
        mat[i - 1, j - 1] = g
    return tabulated(
        mat,
        growth_constant_A,
        power_delta=power_delta,
        lower_bound_zeta=lower_bound_zeta,
        name=name or f"table({path})",
    )


def from_rule(
    name: str,
    fn: Callable[[int, int], float],
    growth_constant_A: float,
    power_delta: float | None = None,
    lower_bound_zeta: float | None = None,
    vectorized: bool = False,
) -> CoagulationKernel:
    """Wrap an arbitrary scalar (or vectorized) rate function.

    The function must already be symmetric in its arguments; symmetry is
    verified by ``check_admissibility``, not assumed.
    """
    rule = fn if vectorized else np.vectorize(fn, otypes=[float])
    return CoagulationKernel(
        name=name,
        rule=rule,
        growth_constant_A=growth_constant_A,
        power_delta=power_delta,
        lower_bound_zeta=lower_bound_zeta,
    )


def demo_table(n: int = 64) -> CoagulationKernel:
    """Built-in tabulated example: rate(i, j) = 2 / (i + j) on sizes 1..n."""
    idx = np.arange(1, n + 1)
    mat = 2.0 / (idx[:, None] + idx[None, :])
    return tabulated(mat, growth_constant_A=0.5, power_delta=0.0,
                     lower_bound_zeta=1.0 / n, name=f"demo_table({n})")


def catalog(table_size: int = 64) -> dict[str, CoagulationKernel]:
    """The built-in kernel catalog: constant, additive, power-sum, tabulated."""
    return {
        "constant": constant(1.0),
        "additive": additive(1.0),
        "power": power_sum(1.0, 0.5),
        "table": demo_table(table_size),
    }


def check_admissibility(kernel: CoagulationKernel, max_size: int) -> ExperimentReport:
    """Exhaustively verify kernel hypotheses on the grid 1 <= i, j <= max_size.

    Checks nonnegativity, exact symmetry, the linear growth bound with
    declared A, and (when declared) the power-delta bound and the zeta
    lower bound. The first violation in row-major scan order (i outer,
    j inner) is reported in the metrics. Violations are report content,
    not exceptions.
    """
    if max_size < 2:
        raise ValueError(f"max_size must be >= 2, got {max_size}")
    n = int(max_size)
    if kernel.max_table_size is not None and n > kernel.max_table_size:
        n = kernel.max_table_size
    idx = np.arange(1, n + 1)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    g = np.asarray(kernel.rule(ii, jj), dtype=float)

    a = kernel.growth_constant_A
    lin_bound = a * (ii + jj)
    neg = g < 0
    asym = g != g.T
    growth = g > lin_bound * (1.0 + GROWTH_SLACK)
    if kernel.power_delta is not None:
        d = kernel.power_delta
        delta_bound = a * (ii.astype(float) ** d + jj.astype(float) ** d)
        delta_viol = g > delta_bound * (1.0 + GROWTH_SLACK)
    else:
        delta_viol = np.zeros_like(neg)
    if kernel.lower_bound_zeta is not None:
        zeta_viol = g < kernel.lower_bound_zeta * (1.0 - GROWTH_SLACK)
    else:
        zeta_viol = np.zeros_like(neg)

    metrics = {
        "negativity_violations": float(neg.sum()),
        "symmetry_violations": float(asym.sum()),
        "growth_violations": float(growth.sum()),
        "delta_violations": float(delta_viol.sum()),
        "zeta_violations": float(zeta_viol.sum()),
        "max_growth_ratio": float((g / lin_bound).max()),
    }
    thresholds = {
        "negativity_violations": 0.0,
        "symmetry_violations": 0.0,
        "growth_violations": 0.0,
        "delta_violations": 0.0,
        "zeta_violations": 0.0,
    }

    union = neg | asym | growth | delta_viol | zeta_viol
    if union.any():
        flat = int(np.argmax(union.reshape(-1)))  # row-major: first i, then j
        vi, vj = divmod(flat, n)
        metrics["first_violation_i"] = float(vi + 1)
        metrics["first_violation_j"] = float(vj + 1)
        metrics["first_violation_rate"] = float(g[vi, vj])

    return ExperimentReport.build(
        name="admissibility",
        metrics=metrics,
        thresholds=thresholds,
        config_echo={
            "kernel": kernel.name,
            "max_size": n,
            "A": kernel.growth_constant_A,
            "delta": kernel.power_delta,
            "zeta": kernel.lower_bound_zeta,
        },
    )


def from_config(block: dict) -> CoagulationKernel:
    """Build a kernel from a run-config specification block.

    Expected shape::

        {"name": ..., "type": "constant"|"additive"|"power"|"table",
         "params": {...}, "A": ..., "delta": ..., "zeta": ...}

    For built-in types the declared constants default to the tight ones;
    explicit ``A``/``delta``/``zeta`` entries override them.
    """
    from .errors import ConfigError

    ktype = block.get("type")
    params = dict(block.get("params", {}))
    name = block.get("name")
    try:
        if ktype == "constant":
            kern = constant(params.get("c", 1.0), name=name)
        elif ktype == "additive":
            kern = additive(params.get("a", 1.0), name=name)
        elif ktype == "power":
            kern = power_sum(params.get("a", 1.0), params.get("exponent", 0.5), name=name)
        elif ktype == "table":
            path = params.get("path")
            if path is None:
                raise ConfigError("kernel.params.path", "tabulated kernel needs a CSV path")
            if "A" not in block:
                raise ConfigError("kernel.A", "tabulated kernel needs a declared growth constant")
            kern = tabulated_from_csv(
                path,
                growth_constant_A=block["A"],
                power_delta=block.get("delta"),
                lower_bound_zeta=block.get("zeta"),
                name=name,
            )
            return kern
        else:
            raise ConfigError("kernel.type", f"unknown kernel type {ktype!r}")
    except ValueError as exc:
        raise ConfigError("kernel", str(exc)) from exc

    overrides = {}
    if "A" in block:
        overrides["growth_constant_A"] = float(block["A"])
    if "delta" in block:
        overrides["delta"] = block["delta"]
    if "zeta" in block:
        overrides["zeta"] = block["zeta"]
    if overrides:
        kern = CoagulationKernel(
            name=kern.name,
            rule=kern.rule,
            growth_constant_A=overrides.get("growth_constant_A", kern.growth_constant_A),
            power_delta=overrides.get("delta", kern.power_delta),
            lower_bound_zeta=overrides.get("zeta", kern.lower_bound_zeta),
            separable=kern.separable,
            table=kern.table,
        )
    return kern
