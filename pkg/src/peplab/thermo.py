"""Closed-form thermodynamics of the product measures.

The single-site marginal at fugacity ``lam`` puts weight

    w_m = lam**m / (c!(m) * d!(kappa - m)),   m in {0..kappa},

on occupancy ``m``, where ``c!(m) = c(1) c(2) ... c(m)`` (empty product = 1).
Everything downstream (fugacity inversion, compressibility, expectations of
local functions and their density derivatives, macroscopic coefficients) is
computed from that weight vector, always for the normalized rate family so
that fugacities are in the canonical parametrization c(kappa) = d(kappa).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, NonGradientError
from .model import RateSpec

__all__ = [
    "LocalFunction",
    "ThermoProfile",
    "Coefficients",
    "partition_function",
    "log_partition_function",
    "marginal_pmf",
    "mean_occupancy",
    "occupancy_variance",
    "solve_lambda",
    "compressibility",
    "phi",
    "phi_derivatives",
    "coefficients",
    "einstein_residual",
]

# Enumeration over {0..kappa}^k: hard caps on support width and state count.
MAX_SUPPORT_WIDTH = 8
MAX_PHI_STATES = 2_000_000

# Switch the partition sum to shifted log-domain arithmetic beyond this.
_LOG_DOMAIN_THRESHOLD = 200.0


def _log_weights(spec: RateSpec, lam: float) -> np.ndarray:
    """log w_m for m = 0..kappa (unnormalized single-site log-weights)."""
    if lam <= 0.0:
        raise ValueError("fugacity must be > 0")
    k = spec.kappa
    logc = np.concatenate(([0.0], np.cumsum(np.log(spec.c[1:]))))
    logd = np.concatenate(([0.0], np.cumsum(np.log(spec.d[1:]))))
    m = np.arange(k + 1)
    return m * math.log(lam) - logc - logd[k - m]


def log_partition_function(spec: RateSpec, lam: float) -> float:
    lw = _log_weights(spec, lam)
    top = lw.max()
    return float(top + math.log(np.exp(lw - top).sum()))


def partition_function(spec: RateSpec, lam: float) -> float:
    """Z_lam = sum_m lam^m / (c!(m) d!(kappa-m)).

    Evaluated in shifted log-domain once kappa*|log lam| is large, so the
    sum itself never overflows; the returned value is inf only if Z truly
    exceeds the double range.
    """
    k = spec.kappa
    if abs(k * math.log(lam)) > _LOG_DOMAIN_THRESHOLD:
        return math.exp(log_partition_function(spec, lam))
    lw = _log_weights(spec, lam)
    return float(np.exp(lw).sum())


def marginal_pmf(spec: RateSpec, lam: float) -> np.ndarray:
    """Single-site occupancy distribution under the product measure."""
    lw = _log_weights(spec, lam)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def mean_occupancy(spec: RateSpec, lam: float) -> float:
    p = marginal_pmf(spec, lam)
    return float(p @ np.arange(spec.kappa + 1))


def occupancy_variance(spec: RateSpec, lam: float) -> float:
    p = marginal_pmf(spec, lam)
    m = np.arange(spec.kappa + 1)
    mu = p @ m
    return float(p @ (m - mu) ** 2)


def solve_lambda(spec: RateSpec, rho: float, tol: float = 1e-12) -> float:
    """Invert the strictly increasing map lam -> E[eta_0] at density rho.

    Geometric bracket expansion from lam = 1, bisection to localize, then
    Newton polish using d(mean)/d(lam) = Var / lam.
    """
    kappa = spec.kappa
    if not (0.0 < rho < kappa):
        raise ValueError(f"rho must lie strictly inside (0, {kappa})")
    spec = spec.normalize()
    lo = hi = 1.0
    for _ in range(400):
        if mean_occupancy(spec, lo) < rho:
            break
        lo /= 8.0
    for _ in range(400):
        if mean_occupancy(spec, hi) > rho:
            break
        hi *= 8.0
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if mean_occupancy(spec, mid) < rho:
            lo = mid
        else:
            hi = mid
    lam = math.sqrt(lo * hi)
    for _ in range(50):
        err = mean_occupancy(spec, lam) - rho
        if abs(err) <= tol:
            return lam
        var = occupancy_variance(spec, lam)
        step = err * lam / var
        nxt = lam - step
        if not (lo <= nxt <= hi):
            nxt = math.sqrt(lo * hi)
        if mean_occupancy(spec, nxt) < rho:
            lo = nxt
        else:
            hi = nxt
        lam = nxt
    return lam


def compressibility(spec: RateSpec, rho: float) -> float:
    """chi(rho) = Var[eta_0] under the product measure at density rho."""
    spec = spec.normalize()
    return occupancy_variance(spec, solve_lambda(spec, rho))


class LocalFunction:
    """Function of finitely many consecutive occupancies, stored as a table.

    ``table[m_0, ..., m_{k-1}]`` holds the value on occupancies
    ``(eta_0, ..., eta_{k-1})``; estimators evaluate it by fancy indexing.
    """

    __slots__ = ("kappa", "width", "table")

    def __init__(self, kappa: int, table: np.ndarray):
        table = np.asarray(table, dtype=float)
        if table.ndim < 1 or any(s != kappa + 1 for s in table.shape):
            raise ValueError("table must have shape (kappa+1,) * width")
        self.kappa = kappa
        self.width = table.ndim
        self.table = table
        self.table.setflags(write=False)

    @classmethod
    def from_callable(cls, kappa: int, width: int, fn) -> "LocalFunction":
        shape = (kappa + 1,) * width
        grids = np.indices(shape)
        vec = np.vectorize(fn, otypes=[float])
        return cls(kappa, vec(*grids))

    @classmethod
    def eta0(cls, kappa: int) -> "LocalFunction":
        return cls(kappa, np.arange(kappa + 1, dtype=float))

    @classmethod
    def of_c(cls, spec: RateSpec) -> "LocalFunction":
        return cls(spec.kappa, spec.c.copy())

    @classmethod
    def of_rate(cls, spec: RateSpec) -> "LocalFunction":
        """f(eta_0, eta_1) = r(eta_0, eta_1)."""
        return cls(spec.kappa, spec.table.copy())

    @classmethod
    def of_symmetric_rate(cls, spec: RateSpec) -> "LocalFunction":
        """f = (r(eta_0, eta_1) + r(eta_1, eta_0)) / 2."""
        return cls(spec.kappa, 0.5 * (spec.table + spec.table.T))

    def __call__(self, *occupancies) -> float:
        return float(self.table[tuple(occupancies)])

    def shift_by_constant(self, value: float) -> "LocalFunction":
        return LocalFunction(self.kappa, self.table - value)

    def __repr__(self) -> str:
        return f"LocalFunction(kappa={self.kappa}, width={self.width})"


def _check_support(kappa: int, width: int) -> None:
    if width > MAX_SUPPORT_WIDTH:
        raise BudgetExceededError(
            f"support width {width} exceeds cap {MAX_SUPPORT_WIDTH}"
        )
    if (kappa + 1) ** width > MAX_PHI_STATES:
        raise BudgetExceededError(
            f"(kappa+1)^width = {(kappa + 1) ** width} exceeds "
            f"enumeration budget {MAX_PHI_STATES}"
        )


def _weight_tensor(pmf: np.ndarray, width: int) -> np.ndarray:
    w = pmf
    for _ in range(width - 1):
        w = np.multiply.outer(w, pmf)
    return w


def phi(spec: RateSpec, f: LocalFunction, rho: float) -> float:
    """Phi_f(rho) = E[f] under the product measure, by exact enumeration."""
    spec = spec.normalize()
    _check_support(spec.kappa, f.width)
    pmf = marginal_pmf(spec, solve_lambda(spec, rho))
    return float((f.table * _weight_tensor(pmf, f.width)).sum())


def phi_prime(spec: RateSpec, f: LocalFunction, rho: float) -> float:
    """d/drho E[f] via the exponential-family identity Cov(f, N_k) / chi.

    N_k is the total particle number on the support of f.
    """
    spec = spec.normalize()
    _check_support(spec.kappa, f.width)
    lam = solve_lambda(spec, rho)
    pmf = marginal_pmf(spec, lam)
    w = _weight_tensor(pmf, f.width)
    total = np.indices(f.table.shape).sum(axis=0)
    mean_f = float((f.table * w).sum())
    cov = float((f.table * total * w).sum()) - mean_f * f.width * rho
    m = np.arange(spec.kappa + 1)
    chi = float(pmf @ (m - rho) ** 2)
    return cov / chi


def phi_second(spec: RateSpec, f: LocalFunction, rho: float, h: float = 1e-4) -> float:
    """d^2/drho^2 E[f]: Richardson-extrapolated central difference of the
    analytic first derivative."""
    kappa = spec.kappa
    h = min(h, rho / 4.0, (kappa - rho) / 4.0)

    def diff(step: float) -> float:
        return (phi_prime(spec, f, rho + step) - phi_prime(spec, f, rho - step)) / (
            2.0 * step
        )

    return (4.0 * diff(h / 2.0) - diff(h)) / 3.0


def phi_derivatives(spec: RateSpec, f: LocalFunction, rho: float) -> tuple[float, float]:
    return phi_prime(spec, f, rho), phi_second(spec, f, rho)


@dataclass(frozen=True)
class Coefficients:
    """Macroscopic coefficients of the hydrodynamic and fluctuation limits."""

    rho: float
    chi: float
    phi_c: float
    phi_r: float
    D: float
    Lambda: float
    v_tilde: float
    v_n: float
    qv_limit: float


def _require_gradient(spec: RateSpec) -> RateSpec:
    from .gradient import check_gradient_closed_form

    spec = spec.normalize()
    ok, _ = check_gradient_closed_form(spec)
    if not ok:
        raise NonGradientError(
            "macroscopic coefficients are defined only for gradient rate "
            "families (d(kappa-m) = c(kappa) - c(m))"
        )
    return spec


def coefficients(
    spec: RateSpec,
    rho: float,
    alpha: float,
    n: int,
    alpha0: float | None = None,
) -> Coefficients:
    """All limit coefficients at density rho.

    D = c(kappa) Phi_c'(rho) / 2, Lambda = (alpha/2) Phi_r''(rho),
    v_tilde = alpha0 Phi_r(rho), v_n = alpha n^{3/2} Phi_r'(rho) and the
    martingale quadratic-variation rate Phi_r(rho), with
    Phi_r = Phi_c (c(kappa) - Phi_c) for gradient families.
    """
    spec = _require_gradient(spec)
    if alpha0 is None:
        alpha0 = alpha
    fc = LocalFunction.of_c(spec)
    fr = LocalFunction.of_rate(spec)
    ck = float(spec.c[spec.kappa])
    chi = compressibility(spec, rho)
    phi_c = phi(spec, fc, rho)
    phi_r = phi(spec, fr, rho)
    d_coeff = 0.5 * ck * phi_prime(spec, fc, rho)
    lam_coeff = 0.5 * alpha * phi_second(spec, fr, rho)
    phi_r_prime = phi_prime(spec, fr, rho)
    return Coefficients(
        rho=rho,
        chi=chi,
        phi_c=phi_c,
        phi_r=phi_r,
        D=d_coeff,
        Lambda=lam_coeff,
        v_tilde=alpha0 * phi_r,
        v_n=alpha * n**1.5 * phi_r_prime,
        qv_limit=phi_r,
    )


def einstein_residual(spec: RateSpec, rho: float, allow_nongradient: bool = False) -> float:
    """2 chi(rho) D(rho) - Phi_r(rho) with D = c(kappa) Phi_c'(rho) / 2.

    Vanishes identically for gradient families; ``allow_nongradient`` exists
    so the failure of the identity off the gradient class can be exhibited.
    """
    spec = spec.normalize() if allow_nongradient else _require_gradient(spec)
    fc = LocalFunction.of_c(spec)
    fr = LocalFunction.of_rate(spec)
    ck = float(spec.c[spec.kappa])
    chi = compressibility(spec, rho)
    d_coeff = 0.5 * ck * phi_prime(spec, fc, rho)
    return 2.0 * chi * d_coeff - phi(spec, fr, rho)


class ThermoProfile:
    """Evaluator bundle for one rate family, with fugacity caching."""

    def __init__(self, spec: RateSpec):
        self.spec = spec.normalize()
        self._lam_cache: dict[float, float] = {}

    def Z(self, lam: float) -> float:
        return partition_function(self.spec, lam)

    def rho_of_lambda(self, lam: float) -> float:
        return mean_occupancy(self.spec, lam)

    def lambda_of_rho(self, rho: float) -> float:
        lam = self._lam_cache.get(rho)
        if lam is None:
            lam = solve_lambda(self.spec, rho)
            self._lam_cache[rho] = lam
        return lam

    def chi(self, rho: float) -> float:
        return occupancy_variance(self.spec, self.lambda_of_rho(rho))

    def pmf(self, rho: float) -> np.ndarray:
        return marginal_pmf(self.spec, self.lambda_of_rho(rho))

    def phi(self, f: LocalFunction, rho: float) -> float:
        return phi(self.spec, f, rho)

    def phi_prime(self, f: LocalFunction, rho: float) -> float:
        return phi_prime(self.spec, f, rho)

    def phi_second(self, f: LocalFunction, rho: float) -> float:
        return phi_second(self.spec, f, rho)

    def coefficients(self, rho, alpha, n, alpha0=None) -> Coefficients:
        return coefficients(self.spec, rho, alpha, n, alpha0)
