"""Event-driven simulation of the process on a periodic ring.

Rates carry the diffusive factor n^2 (folded into the jump rates, not into
a time change), so plan times are macroscopic times.  Replicas are fully
determined by (seed, replica_id): the initial configuration and every jump
come from one xoshiro256** stream, making trajectories bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import FrozenStateError
from .model import AsymmetryParams, RateSpec
from .thermo import marginal_pmf, solve_lambda

__all__ = ["SimulationPlan", "Trajectory", "SimState", "sample_initial", "run"]


@dataclass(frozen=True)
class SimulationPlan:
    """Everything a replica needs; equal plans give identical trajectories."""

    spec: RateSpec
    asym: AsymmetryParams
    N: int
    rho: float
    T: float
    observation_times: tuple[float, ...]
    seed: int
    replica_id: int = 0
    log_jumps: bool = False
    record_configs: bool = True

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not (0.0 < self.rho < self.spec.kappa):
            raise ValueError("rho must lie strictly inside (0, kappa)")
        if self.T < 0.0:
            raise ValueError("T must be >= 0")
        times = tuple(float(t) for t in self.observation_times)
        if any(t < 0.0 or t > self.T for t in times):
            raise ValueError("observation times must lie in [0, T]")
        if list(times) != sorted(times):
            raise ValueError("observation times must be sorted")
        object.__setattr__(self, "observation_times", times)

    def with_replica(self, replica_id: int) -> "SimulationPlan":
        return replace(self, replica_id=replica_id)


@dataclass
class Trajectory:
    """Frames at the plan's observation times plus the optional jump log."""

    plan: SimulationPlan
    times: np.ndarray
    frames: np.ndarray | None
    initial: np.ndarray
    final: np.ndarray
    n_events: int
    frozen: bool
    jump_times: np.ndarray | None = None
    jump_bonds: np.ndarray | None = None
    jump_dirs: np.ndarray | None = None

    @property
    def has_jump_log(self) -> bool:
        return self.jump_times is not None


def _scaled_tables(spec: RateSpec, asym: AsymmetryParams) -> tuple[np.ndarray, np.ndarray]:
    n2 = float(asym.n) ** 2
    return n2 * asym.p * spec.table, n2 * asym.q * spec.table


def sample_initial(
    spec: RateSpec, rho: float, N: int, seed: int, replica_id: int = 0
) -> np.ndarray:
    """i.i.d. sites from the single-site marginal at lambda(rho).

    Inverse-CDF sampling on the replica's stream; run() consumes exactly the
    same N uniforms first, so this reproduces a run's initial condition.
    """
    rng = _kernels.xoshiro_init(seed, replica_id)
    return _sample_initial_stream(spec, rho, N, rng)


def _sample_initial_stream(spec: RateSpec, rho: float, N: int, rng) -> np.ndarray:
    spec = spec.normalize()
    pmf = marginal_pmf(spec, solve_lambda(spec, rho))
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    u = _kernels.draw_uniforms(rng, N)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def run(plan: SimulationPlan) -> Trajectory:
    """Simulate one replica, capturing the configuration in force at each
    observation time (paths are right-continuous and piecewise constant)."""
    spec = plan.spec.normalize()
    rate_r, rate_l = _scaled_tables(spec, plan.asym)
    rng = _kernels.xoshiro_init(plan.seed, plan.replica_id)
    sites = _sample_initial_stream(spec, plan.rho, plan.N, rng)
    initial = sites.copy()

    obs = np.asarray(plan.observation_times, dtype=float)
    frames = np.empty((obs.shape[0], plan.N), dtype=np.int8)
    t_final, n_events, frozen, jt, jb, jd = _kernels.kmc_run(
        sites,
        rate_r,
        rate_l,
        0.0,
        plan.T,
        obs,
        frames,
        rng,
        plan.log_jumps,
        -1,
    )
    traj = Trajectory(
        plan=plan,
        times=obs,
        frames=frames if plan.record_configs else None,
        initial=initial,
        final=sites,
        n_events=int(n_events),
        frozen=bool(frozen),
    )
    if plan.log_jumps:
        traj.jump_times = jt
        traj.jump_bonds = jb
        traj.jump_dirs = jd
    return traj


@dataclass
class SimState:
    """Mutable fine-grained stepping interface for one replica.

    Used by tests and small studies; run() is the fast path.  The same RNG
    stream is consumed in the same order, so stepping event by event
    reproduces run()'s event sequence; event times agree only to within
    float addition order (the total-rate accumulator is rebuilt per call).
    """

    spec: RateSpec
    asym: AsymmetryParams
    sites: np.ndarray
    t: float = 0.0
    rng: np.ndarray = None
    last_jump: tuple[float, int, int] | None = None
    n_events: int = 0
    _tables: tuple = field(default=None, repr=False)

    @classmethod
    def from_plan(cls, plan: SimulationPlan) -> "SimState":
        spec = plan.spec.normalize()
        rng = _kernels.xoshiro_init(plan.seed, plan.replica_id)
        sites = _sample_initial_stream(spec, plan.rho, plan.N, rng)
        return cls(spec=spec, asym=plan.asym, sites=sites, rng=rng)

    def total_rate(self) -> float:
        rate_r, rate_l = self._scaled()
        a = self.sites
        b = np.roll(a, -1)
        return float(rate_r[a, b].sum() + rate_l[b, a].sum())

    def _scaled(self):
        if self._tables is None:
            self._tables = _scaled_tables(self.spec, self.asym)
        return self._tables

    def step(self) -> "SimState":
        """Advance by exactly one exponential-clock event."""
        rate_r, rate_l = self._scaled()
        no_obs = np.empty(0)
        no_frames = np.empty((0, self.sites.shape[0]), dtype=np.int8)
        t, events, frozen, jt, jb, jd = _kernels.kmc_run(
            self.sites,
            rate_r,
            rate_l,
            self.t,
            np.inf,
            no_obs,
            no_frames,
            self.rng,
            True,
            1,
        )
        if frozen:
            raise FrozenStateError(
                f"all rates vanished at t={self.t:.6g}; configuration is frozen"
            )
        self.t = t
        self.n_events += int(events)
        self.last_jump = (float(jt[0]), int(jb[0]), int(jd[0]))
        return self
