"""Rate families, lattice configurations and elementary generator quantities.

A partial exclusion process is parametrized by a maximal occupancy ``kappa``
and two functions ``c, d: {0..kappa} -> [0, inf)`` with ``c(0) = d(0) = 0``
and strictly positive interior values.  A particle hops from a site holding
``a`` particles onto a neighbor holding ``b`` particles at rate

    r(a, b) = c(a) * d(kappa - b)

so ``r`` vanishes exactly when the departure site is empty or the target
site is full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RateSpecError

__all__ = [
    "RateSpec",
    "AsymmetryParams",
    "Configuration",
    "jump_rate",
    "currents",
    "ellipticity_bounds",
    "normalize",
]


class RateSpec:
    """Immutable decomposable rate family ``r(a, b) = c(a) d(kappa - b)``.

    The full ``(kappa+1) x (kappa+1)`` rate table is precomputed at
    construction; simulation inner loops only ever do table lookups.
    """

    __slots__ = ("kappa", "c", "d", "table")

    def __init__(self, kappa: int, c, d):
        kappa = int(kappa)
        if kappa < 1:
            raise RateSpecError("kappa must be >= 1")
        c = np.asarray(c, dtype=float)
        d = np.asarray(d, dtype=float)
        if c.shape != (kappa + 1,) or d.shape != (kappa + 1,):
            raise RateSpecError(
                f"c and d must have length kappa+1 = {kappa + 1}, "
                f"got {c.shape[0]} and {d.shape[0]}"
            )
        if c[0] != 0.0 or d[0] != 0.0:
            raise RateSpecError("c(0) and d(0) must both be 0")
        if np.any(c[1:] <= 0.0) or np.any(d[1:] <= 0.0):
            raise RateSpecError("c(m) and d(m) must be > 0 for all m >= 1")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
            raise RateSpecError("rates must be finite")
        self.kappa = kappa
        self.c = c
        self.d = d
        # table[a, b] = c(a) * d(kappa - b)
        self.table = np.outer(c, d[::-1])
        self.c.setflags(write=False)
        self.d.setflags(write=False)
        self.table.setflags(write=False)

    # -- constructors for the named families ---------------------------------

    @classmethod
    def sep(cls, kappa: int) -> "RateSpec":
        """SEP(kappa): c(m) = d(m) = m."""
        m = np.arange(kappa + 1, dtype=float)
        return cls(kappa, m, m)

    @classmethod
    def indicator(cls, kappa: int) -> "RateSpec":
        """c(m) = d(m) = 1 for m > 0 (non-gradient for kappa >= 2)."""
        m = (np.arange(kappa + 1) > 0).astype(float)
        return cls(kappa, m, m)

    @classmethod
    def interpolated(cls, kappa: int, theta: float) -> "RateSpec":
        """c(m) = d(m) = (1-theta)*1_{m>0} + theta*m, theta in [0, 1]."""
        m = np.arange(kappa + 1, dtype=float)
        vals = (1.0 - theta) * (m > 0) + theta * m
        return cls(kappa, vals, vals)

    @classmethod
    def gradient_from_c(cls, c) -> "RateSpec":
        """Build the gradient family d(kappa-m) = c(kappa) - c(m).

        Requires c strictly increasing with c(0) = 0, so that the derived d
        is positive on {1..kappa}.
        """
        c = np.asarray(c, dtype=float)
        kappa = c.shape[0] - 1
        d = (c[kappa] - c)[::-1].copy()
        return cls(kappa, c, d)

    # -- operations -----------------------------------------------------------

    def rate(self, a: int, b: int) -> float:
        """Jump rate r(a, b) = c(a) d(kappa - b)."""
        return float(self.table[a, b])

    @property
    def is_normalized(self) -> bool:
        return self.c[self.kappa] == self.d[self.kappa]

    def normalize(self) -> "RateSpec":
        """Rescale (c, d) so that c(kappa) = d(kappa) without changing r.

        c -> c * sqrt(d(kappa)/c(kappa)) and d -> d * sqrt(c(kappa)/d(kappa)).
        The common endpoint becomes sqrt(c(kappa) d(kappa)).
        """
        ck = self.c[self.kappa]
        dk = self.d[self.kappa]
        if ck <= 0.0 or dk <= 0.0:
            raise RateSpecError("cannot normalize: c(kappa) or d(kappa) is 0")
        if ck == dk:
            return self
        s = math.sqrt(dk / ck)
        return RateSpec(self.kappa, self.c * s, self.d / s)

    def hole_dual(self) -> "RateSpec":
        """Rate family (d, c) driving the dynamics of holes kappa - eta."""
        return RateSpec(self.kappa, self.d.copy(), self.c.copy())

    def __repr__(self) -> str:
        c = ", ".join(f"{v:g}" for v in self.c)
        d = ", ".join(f"{v:g}" for v in self.d)
        return f"RateSpec(kappa={self.kappa}, c=[{c}], d=[{d}])"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RateSpec)
            and self.kappa == other.kappa
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.d, other.d)
        )

    def __hash__(self):
        return hash((self.kappa, self.c.tobytes(), self.d.tobytes()))


@dataclass(frozen=True)
class AsymmetryParams:
    """Jump direction probabilities p + q = 1 and the scaling parameter n.

    ``alpha`` records the weak-asymmetry strength used to build p - q; it is
    carried along so macroscopic coefficients can be reported next to the
    microscopic parameters that produced them.
    """

    n: int
    alpha: float
    p: float
    q: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError("p and q must lie in [0, 1]")
        if abs(self.p + self.q - 1.0) > 1e-15:
            raise ValueError("p + q must equal 1")

    @classmethod
    def sbe(cls, n: int, alpha: float) -> "AsymmetryParams":
        """Critical weak asymmetry p - q = alpha / sqrt(n)."""
        drift = alpha / math.sqrt(n)
        if abs(drift) > 1.0:
            raise ValueError("alpha / sqrt(n) must lie in [-1, 1]")
        return cls(n=n, alpha=alpha, p=(1.0 + drift) / 2.0, q=(1.0 - drift) / 2.0)

    @classmethod
    def symmetric(cls, n: int = 1) -> "AsymmetryParams":
        return cls(n=n, alpha=0.0, p=0.5, q=0.5)

    @classmethod
    def from_pq(cls, n: int, p: float, q: float) -> "AsymmetryParams":
        alpha = (p - q) * math.sqrt(n)
        return cls(n=n, alpha=alpha, p=p, q=q)

    @property
    def drift(self) -> float:
        return self.p - self.q


class Configuration:
    """Occupancies on a periodic ring of N sites, each in {0..kappa}.

    Mutable and single-owner: one simulation replica owns one Configuration.
    """

    __slots__ = ("kappa", "sites")

    def __init__(self, kappa: int, sites):
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim != 1 or sites.shape[0] < 2:
            raise ValueError("need a 1-d ring of at least 2 sites")
        if np.any(sites < 0) or np.any(sites > kappa):
            raise ValueError(f"occupancies must lie in 0..{kappa}")
        self.kappa = kappa
        self.sites = sites

    @property
    def N(self) -> int:
        return self.sites.shape[0]

    @property
    def particles(self) -> int:
        return int(self.sites.sum())

    def apply_jump(self, x: int, y: int) -> None:
        """Move one particle from site x to site y (periodic neighbors)."""
        n = self.N
        x %= n
        y %= n
        if self.sites[x] == 0:
            raise ValueError(f"site {x} is empty")
        if self.sites[y] == self.kappa:
            raise ValueError(f"site {y} is full")
        self.sites[x] -= 1
        self.sites[y] += 1

    def copy(self) -> "Configuration":
        return Configuration(self.kappa, self.sites.copy())


def normalize(spec: RateSpec) -> RateSpec:
    return spec.normalize()


def jump_rate(spec: RateSpec, a: int, b: int) -> float:
    return spec.rate(a, b)


def currents(spec: RateSpec, a: int, b: int, asym: AsymmetryParams) -> tuple[float, float]:
    """Symmetric and anti-symmetric instantaneous currents across a bond.

    wS = (r(a,b) - r(b,a)) / 2 and wA = (p - q)(r(a,b) + r(b,a)) / 2.
    """
    rab = spec.table[a, b]
    rba = spec.table[b, a]
    ws = 0.5 * (rab - rba)
    wa = 0.5 * (asym.p - asym.q) * (rab + rba)
    return float(ws), float(wa)


def ellipticity_bounds(spec: RateSpec) -> tuple[float, float]:
    """(min, max) of r(a, b) over admissible pairs a > 0, b < kappa."""
    sub = spec.table[1:, :-1]
    return float(sub.min()), float(sub.max())
