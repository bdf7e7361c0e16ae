"""The truncated splash-coagulation system and its summation identities.

State is a vector (xi_1, ..., xi_k) of cluster concentrations. When an
i-mer collides with a j-mer (j <= i) the j-mer splashes into j monomers
which the i-mer absorbs one step at a time, so the evolution of xi_i is

    dxi_i/dt =   xi_{i-1} * sum_{j=1}^{i-1} j * rate(i-1, j) * xi_j
               - xi_i     * sum_{j=1}^{i}   j * rate(i, j)   * xi_j
               - xi_i     * sum_{j=i}^{k}       rate(i, j)   * xi_j

with the first sum empty at i = 1. The diagonal j = i appears in both
loss sums; that is part of the model, not double counting.

Two rearranged forms of the same dynamics are provided for cross
checking: ``weak_form_rate`` (the full-length test-vector identity) and
``finite_identity_rate`` (the truncated-range identity with boundary
flux). Both are independent summation routes and must agree with the
inner product of the test vector against ``rhs`` to rounding accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .kernels import CoagulationKernel


@dataclass
class SizeDistribution:
    """Truncated concentration vector with a timestamp."""

    values: np.ndarray
    truncation_k: int
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.truncation_k = int(self.truncation_k)

    def validate(self) -> None:
        if self.truncation_k < 2:
            raise ValueError(f"truncation_k must be >= 2, got {self.truncation_k}")
        if self.values.ndim != 1 or self.values.size != self.truncation_k:
            raise ValueError(
                f"values must have length truncation_k={self.truncation_k}, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise NumericError("state contains non-finite entries", time=self.time)
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")
        if np.any(self.values < 0):
            worst = int(np.argmin(self.values))
            raise ValueError(
                f"negative concentration xi_{worst + 1} = {self.values[worst]:.3e}"
            )

    @property
    def sizes(self) -> np.ndarray:
        return np.arange(1, self.truncation_k + 1)

    @property
    def number(self) -> float:
        return float(self.values.sum())

    @property
    def mass(self) -> float:
        return float(np.dot(self.sizes, self.values))

    def copy(self) -> "SizeDistribution":
        return SizeDistribution(self.values.copy(), self.truncation_k, self.time)


def monomer(k: int, scale: float = 1.0, time: float = 0.0) -> SizeDistribution:
    """All mass in monomers: xi_1 = scale, rest zero."""
    v = np.zeros(k)
    v[0] = scale
    return SizeDistribution(v, k, time)


def geometric(k: int, ratio: float, scale: float = 1.0, time: float = 0.0) -> SizeDistribution:
    """Geometric tail xi_i = scale * ratio**i for i = 1..k."""
    if not 0 < ratio < 1:
        raise ValueError(f"geometric ratio must lie in (0, 1), got {ratio}")
    i = np.arange(1, k + 1)
    return SizeDistribution(scale * ratio**i, k, time)


@dataclass
class TestSequence:
    """Weights psi_1..psi_q paired with optional polynomial-growth metadata.

    The metadata (|psi_i| <= growth_C * i**growth_p) is recorded, not
    enforced pointwise; it documents which identities the sequence may
    legitimately be fed into.
    """

    __test__ = False  # math test vectors, not a pytest case

    values: np.ndarray
    length_q: int
    growth_C: float | None = None
    growth_p: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.length_q = int(self.length_q)
        if self.values.size != self.length_q:
            raise ValueError(
                f"values must have length length_q={self.length_q}, got {self.values.size}"
            )

    @classmethod
    def ones(cls, q: int):
        return cls(np.ones(q), q, growth_C=1.0, growth_p=0.0)

    @classmethod
    def sizes(cls, q: int):
        return cls(np.arange(1, q + 1, dtype=float), q, growth_C=1.0, growth_p=1.0)

    @classmethod
    def size_power(cls, q: int, p: float):
        return cls(np.arange(1, q + 1, dtype=float) ** p, q, growth_C=1.0, growth_p=p)

    @classmethod
    def alternating(cls, q: int):
        return cls((-1.0) ** np.arange(q), q, growth_C=1.0, growth_p=0.0)


def _as_weights(psi, q: int, what: str) -> np.ndarray:
    if isinstance(psi, TestSequence):
        arr = psi.values
    else:
        arr = np.asarray(psi, dtype=float)
    if arr.size != q:
        raise ValueError(f"{what} must have length {q}, got {arr.size}")
    return arr


class RhsEvaluator:
    """Precomputed right-hand-side apparatus for one (kernel, k) pair.

    Separable kernels rate = a * (i**d + j**d) use O(k) prefix/suffix
    sums; everything else goes through cached lower/upper triangular rate
    matrices and two matrix-vector products (O(k^2), fixed summation
    order). Pure and reusable across calls.
    """

    def __init__(self, kernel: CoagulationKernel, k: int):
        if k < 2:
            raise ValueError(f"truncation size must be >= 2, got {k}")
        self.kernel = kernel
        self.k = int(k)
        self.sizes = np.arange(1, k + 1, dtype=float)
        self.n_evals = 0
        if kernel.separable is not None:
            a, d = kernel.separable
            self._a = float(a)
            self._ipow = self.sizes**d
            self._ipow1 = self.sizes ** (1.0 + d)
            self._gamma_low = None
            self._gamma_up = None
        else:
            g = kernel.rate_matrix(k)
            self._gamma_low = np.tril(g)
            self._gamma_up = np.triu(g)
            self._a = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite state entries passed to rhs")
        self.n_evals += 1
        sizes = self.sizes
        if self._a is not None:
            a = self._a
            w = sizes * x
            # S_i = sum_{j<=i} j*rate(i,j)*xi_j ; T_i = sum_{j>=i} rate(i,j)*xi_j
            S = a * (self._ipow * np.cumsum(w) + np.cumsum(self._ipow1 * x))
            T = a * (self._ipow * np.cumsum(x[::-1])[::-1]
                     + np.cumsum((self._ipow * x)[::-1])[::-1])
        else:
            S = self._gamma_low @ (sizes * x)
            T = self._gamma_up @ x
        out = np.empty_like(x)
        out[0] = 0.0
        out[1:] = x[:-1] * S[:-1]
        out -= x * (S + T)
        return out


def rhs(state: SizeDistribution, kernel: CoagulationKernel) -> np.ndarray:
    """Time derivative of every component of the truncated system."""
    state.validate()
    return RhsEvaluator(kernel, state.truncation_k)(state.values)


def _triangular_terms(kernel: CoagulationKernel, x: np.ndarray):
    k = x.size
    g = kernel.rate_matrix(k)
    X = np.outer(x, x)
    lower = np.tril(np.ones((k, k), dtype=bool))
    return g * X * lower  # entry (i, j) = rate(i,j) xi_i xi_j for j <= i, else 0


def weak_form_rate(psi, state: SizeDistribution, kernel: CoagulationKernel) -> float:
    """Rearranged time derivative of sum_i psi_i xi_i over the full state.

    Computes

        sum_{i=1}^{k-1} sum_{j=1}^{i} j psi_{i+1} rate(i,j) xi_i xi_j
      - sum_{i=1}^{k}   sum_{j=1}^{i} (j psi_i + psi_j) rate(i,j) xi_i xi_j

    which equals <psi, rhs(state)> as an algebraic identity.
    """
    state.validate()
    k = state.truncation_k
    p = _as_weights(psi, k, "psi")
    W = _triangular_terms(kernel, state.values)
    jv = np.arange(1, k + 1, dtype=float)
    gain = float(np.sum(p[1:, None] * (jv[None, :] * W[:-1, :])))
    loss = float(np.sum((jv[None, :] * p[:, None] + p[None, :]) * W))
    return gain - loss


def finite_identity_rate(phi, state: SizeDistribution, kernel: CoagulationKernel, q: int) -> float:
    """Time derivative of the partial sum sum_{i<=q} phi_i xi_i, q < k.

    Three index blocks contribute:

        P1 = {1 <= i <= q-1, 1 <= j <= i}:  + j phi_{i+1} rate(i,j) xi_i xi_j
        P2 = {1 <= i <= q,   1 <= j <= i}:  - (j phi_i + phi_j) rate(i,j) xi_i xi_j
        P3 = {q+1 <= i <= k, 1 <= j <= q}:  - phi_j rate(i,j) xi_i xi_j

    The P3 block runs to infinity for the untruncated system; components
    above k are identically zero here, so cutting it at k is exact.
    """
    state.validate()
    k = state.truncation_k
    q = int(q)
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if q >= k:
        raise ValueError(f"q must be < truncation_k={k}, got {q}")
    f = _as_weights(phi, q, "phi")
    x = state.values
    g = kernel.rate_matrix(k)
    X = np.outer(x, x)
    jv = np.arange(1, k + 1, dtype=float)
    lower = np.tril(np.ones((q, q), dtype=bool))

    gX = g * X
    p1 = float(np.sum((f[1:, None] * (jv[None, :q] * gX[: q - 1, :q])) * lower[: q - 1, :]))
    p2 = float(np.sum(((jv[None, :q] * f[:, None] + f[None, :]) * gX[:q, :q]) * lower))
    p3 = float(np.sum(f[None, :] * gX[q:, :q]))
    return p1 - p2 - p3


def mass_leak_rate(state: SizeDistribution, kernel: CoagulationKernel) -> float:
    """Instantaneous mass outflow through the truncation boundary.

    Setting psi_i = i in the weak form telescopes to

        d/dt sum i xi_i = -(k+1) * xi_k * sum_{j=1}^{k} j rate(k,j) xi_j

    so this returns the nonnegative leak (k+1) * xi_k * S_k. It is the
    exact rate at which the truncated system loses mass, measurable far
    below the floating-point resolution of the mass itself.
    """
    k = state.truncation_k
    x = state.values
    if x[-1] == 0.0:
        return 0.0
    jv = np.arange(1, k + 1, dtype=float)
    row = np.asarray(kernel.rule(np.full(k, k), np.arange(1, k + 1)), dtype=float)
    s_k = float(np.dot(jv, row * x))
    return (k + 1.0) * float(x[-1]) * s_k
