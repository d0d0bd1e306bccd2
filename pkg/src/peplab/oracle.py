"""Brute-force ground truth on small finite rings and segments.

Everything here enumerates state spaces exactly: generator matrices with
zero row sums, stationarity residuals of the candidate product measure,
canonical (fixed particle number) measures, equivalence-of-ensembles
residuals, and spectral gaps of the symmetrized dynamics.  Deliberately
small-scale; a state budget guards every entry point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceededError
from .model import AsymmetryParams, RateSpec
from .thermo import LocalFunction, compressibility, phi, phi_second, solve_lambda

__all__ = [
    "SectorIndex",
    "enumerate_states",
    "sector_count",
    "build_generator",
    "stationarity_residual",
    "detailed_balance_residual",
    "exact_phi",
    "canonical_weights",
    "canonical_expectation",
    "eoe_residual",
    "spectral_gap",
]

DEFAULT_STATE_BUDGET = 2_000_000


def _check_budget(kappa: int, L: int, budget: int) -> int:
    size = (kappa + 1) ** L
    if size > budget:
        raise BudgetExceededError(
            f"(kappa+1)^L = {size} exceeds state budget {budget}"
        )
    return size


def enumerate_states(kappa: int, L: int, budget: int = DEFAULT_STATE_BUDGET) -> np.ndarray:
    """All occupancy vectors in {0..kappa}^L, row i encoding integer i in
    base kappa+1 (site 0 is the least-significant digit)."""
    size = _check_budget(kappa, L, budget)
    ids = np.arange(size)
    states = np.empty((size, L), dtype=np.int64)
    base = kappa + 1
    for x in range(L):
        states[:, x] = (ids // base**x) % base
    return states


def sector_count(kappa: int, L: int, K: int) -> int:
    """Number of states with K particles: coefficient of z^K in
    (1 + z + ... + z^kappa)^L."""
    poly = np.ones(kappa + 1, dtype=object)
    acc = np.ones(1, dtype=object)
    for _ in range(L):
        acc = np.convolve(acc, poly)
    return int(acc[K]) if 0 <= K < acc.shape[0] else 0


def _site_weights(spec: RateSpec) -> np.ndarray:
    """g(m) = 1 / (c!(m) d!(kappa - m)); the lambda^K factor is constant on
    a sector and drops out of every normalized quantity."""
    kappa = spec.kappa
    cfact = np.concatenate(([1.0], np.cumprod(spec.c[1:])))
    dfact = np.concatenate(([1.0], np.cumprod(spec.d[1:])))
    return 1.0 / (cfact * dfact[::-1])


@dataclass(frozen=True)
class SectorIndex:
    """All states of the canonical sector with K particles on L sites."""

    L: int
    K: int
    states: np.ndarray

    @classmethod
    def build(
        cls, kappa: int, L: int, K: int, budget: int = DEFAULT_STATE_BUDGET
    ) -> "SectorIndex":
        states = enumerate_states(kappa, L, budget)
        sel = states[states.sum(axis=1) == K]
        return cls(L=L, K=K, states=sel)

    @property
    def size(self) -> int:
        return self.states.shape[0]


def build_generator(
    spec: RateSpec,
    asym: AsymmetryParams,
    L: int,
    budget: int = DEFAULT_STATE_BUDGET,
) -> sp.csr_matrix:
    """Generator of the ring dynamics on the full state space (kappa+1)^L.

    Off-diagonal entry (i, j) is the total rate from state i to state j:
    p r(eta_x, eta_{x+1}) for right jumps and q r(eta_x, eta_{x-1}) for left
    jumps, periodic in x.  Time is unscaled (n^2 = 1): stationarity and
    gap * L^2 statements are invariant under the time rescaling.
    """
    spec = spec.normalize()
    kappa = spec.kappa
    base = kappa + 1
    states = enumerate_states(kappa, L, budget)
    size = states.shape[0]
    ids = np.arange(size)

    rows, cols, vals = [], [], []
    for x in range(L):
        for step, prob in ((1, asym.p), (-1, asym.q)):
            if prob == 0.0:
                continue
            y = (x + step) % L
            a = states[:, x]
            b = states[:, y]
            ok = (a > 0) & (b < kappa)
            rate = prob * spec.table[a[ok], b[ok]]
            target = ids[ok] - base**x + base**y
            rows.append(ids[ok])
            cols.append(target)
            vals.append(rate)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    gen = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    gen.setdiag(gen.diagonal() - np.asarray(gen.sum(axis=1)).ravel())
    return gen


def _sector_ids(kappa: int, L: int, budget: int) -> tuple[np.ndarray, np.ndarray]:
    states = enumerate_states(kappa, L, budget)
    return states, states.sum(axis=1)


def stationarity_residual(
    spec: RateSpec,
    asym: AsymmetryParams,
    L: int,
    budget: int = DEFAULT_STATE_BUDGET,
) -> dict[int, float]:
    """Per-sector residual of nu^T Q = 0 for the candidate product measure.

    nu restricted to a sector is the sector's canonical weight vector; the
    residual is max |nu^T Q| over the sector divided by the largest weight.
    """
    spec = spec.normalize()
    gen = build_generator(spec, asym, L, budget)
    states, totals = _sector_ids(spec.kappa, L, budget)
    g = _site_weights(spec)
    weights = np.prod(g[states], axis=1)
    out: dict[int, float] = {}
    for K in range(spec.kappa * L + 1):
        ix = np.nonzero(totals == K)[0]
        nu = np.zeros(states.shape[0])
        nu[ix] = weights[ix]
        row = nu @ gen
        out[K] = float(np.abs(row).max() / weights[ix].max())
    return out


def detailed_balance_residual(
    spec: RateSpec,
    L: int,
    budget: int = DEFAULT_STATE_BUDGET,
) -> float:
    """Entrywise detailed-balance defect of the symmetric (p = q) ring
    dynamics with respect to the canonical weights, relative to the largest
    probability flux.  Holds for every decomposable family, gradient or not.
    """
    spec = spec.normalize()
    gen = build_generator(spec, AsymmetryParams.symmetric(), L, budget).tocoo()
    states, _ = _sector_ids(spec.kappa, L, budget)
    g = _site_weights(spec)
    weights = np.prod(g[states], axis=1)
    off = gen.row != gen.col
    flux = sp.coo_matrix(
        (weights[gen.row[off]] * gen.data[off], (gen.row[off], gen.col[off])),
        shape=gen.shape,
    ).tocsr()
    defect = np.abs(flux - flux.T).max()
    return float(defect / flux.max())


def exact_phi(
    spec: RateSpec,
    f: LocalFunction,
    rho: float,
    budget: int = DEFAULT_STATE_BUDGET,
) -> float:
    """Independent route to E[f] under the product measure: plain iteration
    over support tuples with explicitly normalized marginal weights."""
    spec = spec.normalize()
    if f.width > 6:
        raise BudgetExceededError("exact_phi supports widths up to 6")
    _check_budget(spec.kappa, f.width, budget)
    lam = solve_lambda(spec, rho)
    g = _site_weights(spec)
    w = g * lam ** np.arange(spec.kappa + 1)
    w = w / w.sum()
    total = 0.0
    for occ in itertools.product(range(spec.kappa + 1), repeat=f.width):
        prob = 1.0
        for m in occ:
            prob *= w[m]
        total += prob * f.table[occ]
    return total


def canonical_weights(
    spec: RateSpec,
    ell: int,
    K: int,
    budget: int = DEFAULT_STATE_BUDGET,
) -> tuple[np.ndarray, np.ndarray]:
    """States of the (ell, K) sector and their normalized canonical weights."""
    spec = spec.normalize()
    sector = SectorIndex.build(spec.kappa, ell, K, budget)
    if sector.size == 0:
        raise ValueError(f"empty sector: K={K} on {ell} sites with kappa={spec.kappa}")
    g = _site_weights(spec)
    w = np.prod(g[sector.states], axis=1)
    return sector.states, w / w.sum()


def canonical_expectation(
    spec: RateSpec,
    f: LocalFunction,
    ell: int,
    K: int,
    budget: int = DEFAULT_STATE_BUDGET,
) -> float:
    """E[f] under the canonical measure nu_{ell,K}."""
    if f.width > ell:
        raise ValueError("support of f exceeds the box")
    states, w = canonical_weights(spec, ell, K, budget)
    vals = f.table[tuple(states[:, i] for i in range(f.width))]
    return float(w @ vals)


def eoe_residual(
    spec: RateSpec,
    f: LocalFunction,
    ell: int,
    rho_min: float | None = None,
    rho_max: float | None = None,
    budget: int = DEFAULT_STATE_BUDGET,
) -> float:
    """Worst-case equivalence-of-ensembles defect over interior sectors:

        sup_K | E_{nu_{ell,K}}[f] - Phi_f(K/ell) + chi(K/ell) Phi_f''(K/ell) / (2 ell) |

    restricted to K/ell in [rho_min, rho_max].  The defect decays like
    ell^{-2}; boundary sectors are excluded because the fugacity inversion
    degenerates there.
    """
    spec = spec.normalize()
    kappa = spec.kappa
    if rho_min is None:
        rho_min = 0.2 * kappa
    if rho_max is None:
        rho_max = 0.8 * kappa
    worst = 0.0
    for K in range(kappa * ell + 1):
        rho_bar = K / ell
        if not (rho_min <= rho_bar <= rho_max):
            continue
        e_can = canonical_expectation(spec, f, ell, K, budget)
        grand = phi(spec, f, rho_bar)
        correction = -compressibility(spec, rho_bar) * phi_second(spec, f, rho_bar) / (
            2.0 * ell
        )
        worst = max(worst, abs(e_can - grand - correction))
    return worst


def spectral_gap(
    spec: RateSpec,
    ell: int,
    K: int,
    budget: int = DEFAULT_STATE_BUDGET,
) -> float:
    """Smallest nonzero eigenvalue of -S on the (ell, K) sector.

    S is the p = q = 1/2 generator on an open segment of ell sites (bonds
    0..ell-2, no wrap-around), self-adjoint in L^2 of the canonical measure;
    it is symmetrized by the square-root weight similarity transform before
    the dense eigensolve.
    """
    spec = spec.normalize()
    kappa = spec.kappa
    states, w = canonical_weights(spec, ell, K, budget)
    size = states.shape[0]
    if size == 1:
        return math.inf
    index = {tuple(s): i for i, s in enumerate(states)}
    S = np.zeros((size, size))
    for i, s in enumerate(states):
        for x in range(ell - 1):
            for src, dst in ((x, x + 1), (x + 1, x)):
                if s[src] > 0 and s[dst] < kappa:
                    rate = 0.5 * spec.table[s[src], s[dst]]
                    t = s.copy()
                    t[src] -= 1
                    t[dst] += 1
                    j = index[tuple(t)]
                    S[i, j] += rate
                    S[i, i] -= rate
    sq = np.sqrt(w)
    sym = (sq[:, None] / sq[None, :]) * S
    asym_defect = np.abs(sym - sym.T).max()
    if asym_defect > 1e-8 * max(1.0, np.abs(sym).max()):
        raise AssertionError(
            f"symmetrized generator is not symmetric (defect {asym_defect:.3e})"
        )
    eigs = np.linalg.eigvalsh(0.5 * (sym + sym.T))
    return float(-eigs[-2])
