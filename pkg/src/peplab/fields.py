"""Fluctuation fields and the estimators of the scaling-limit statistics.

Test functions live on the macroscopic torus of length M = N/n.  Fourier
modes have exact norms and derivatives; periodized Gaussian bumps get
exact norms from theta-function sums.  The density fluctuation field is

    X_t(phi) = n^{-1/2} sum_x (eta_x(t) - rho) phi(((x - v_n t) mod N) / n)

and the remaining estimators (martingale quadratic variation, second-order
Boltzmann-Gibbs statistic, quadratic-field increments for the energy
condition) follow the same lattice conventions: the indicator smoothing is
defined through local averages, X_t(iota_eps) = sqrt(n) (avg window - rho),
which is exact whenever eps * n is an integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonGradientError
from .kmc import Trajectory, _scaled_tables
from .model import RateSpec
from .thermo import LocalFunction, phi as thermo_phi, phi_prime, phi_second

__all__ = [
    "FourierMode",
    "GaussianBump",
    "FieldStatistic",
    "fluctuation_field",
    "local_average",
    "local_average_field",
    "indicator_field",
    "window_values",
    "martingale_qv",
    "nonlinear_V",
    "first_order_reduction",
    "bg2_statistic",
    "energy_condition_estimator",
]


class FourierMode:
    """cos or sin mode of integer frequency k on the torus [0, M)."""

    def __init__(self, M: float, k: int, kind: str = "cos"):
        if k < 0 or k != int(k):
            raise ValueError("mode index k must be a nonnegative integer")
        if kind not in ("cos", "sin"):
            raise ValueError("kind must be 'cos' or 'sin'")
        if k == 0 and kind == "sin":
            raise ValueError("sin mode with k=0 is identically zero")
        self.M = float(M)
        self.k = int(k)
        self.kind = kind
        self.omega = 2.0 * math.pi * k / M

    @property
    def label(self) -> str:
        return f"{self.kind}{self.k}"

    def phi(self, u):
        arg = self.omega * np.asarray(u, dtype=float)
        return np.cos(arg) if self.kind == "cos" else np.sin(arg)

    def grad(self, u):
        arg = self.omega * np.asarray(u, dtype=float)
        if self.kind == "cos":
            return -self.omega * np.sin(arg)
        return self.omega * np.cos(arg)

    def lap(self, u):
        return -(self.omega**2) * self.phi(u)

    @property
    def l2sq(self) -> float:
        return self.M if self.k == 0 else self.M / 2.0

    @property
    def grad_l2sq(self) -> float:
        return 0.0 if self.k == 0 else self.omega**2 * self.M / 2.0

    @property
    def lap_l2sq(self) -> float:
        return 0.0 if self.k == 0 else self.omega**4 * self.M / 2.0


class GaussianBump:
    """Periodization of exp(-(u - center)^2 / (2 sigma^2)) on [0, M).

    Norms come from the autocorrelation theta sums
    integral g^(j) g^(j)(.+ Delta M) = sqrt(pi) sigma P_j(Delta M) exp(-Delta^2 M^2 / (4 sigma^2)).
    """

    def __init__(self, M: float, center: float, sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if sigma > M:
            raise ValueError("sigma must not exceed the torus length M")
        self.M = float(M)
        self.center = float(center) % self.M
        self.sigma = float(sigma)
        # enough image terms that truncation sits far below the 1e-10
        # norm guarantee: dropped wraps are exp(-((J-1)M)^2 / (2 sigma^2))
        self._wraps = max(3, math.ceil(1.0 + 9.0 * sigma / M))
        self._theta_range = max(24, math.ceil(14.0 * sigma / M))

    @property
    def label(self) -> str:
        return f"bump_c{self.center:g}_s{self.sigma:g}"

    def _offsets(self, u):
        u = np.asarray(u, dtype=float) % self.M
        js = np.arange(-self._wraps, self._wraps + 1)
        return u[..., None] - self.center + js * self.M

    def phi(self, u):
        z = self._offsets(u)
        return np.exp(-(z**2) / (2.0 * self.sigma**2)).sum(axis=-1)

    def grad(self, u):
        z = self._offsets(u)
        g = np.exp(-(z**2) / (2.0 * self.sigma**2))
        return (-(z / self.sigma**2) * g).sum(axis=-1)

    def lap(self, u):
        z = self._offsets(u)
        g = np.exp(-(z**2) / (2.0 * self.sigma**2))
        return (((z**2 - self.sigma**2) / self.sigma**4) * g).sum(axis=-1)

    def _theta(self, poly) -> float:
        s2 = self.sigma**2
        total = 0.0
        for delta in range(-self._theta_range, self._theta_range + 1):
            a = delta * self.M
            w = math.exp(-(a**2) / (4.0 * s2))
            if w == 0.0:
                continue
            total += poly(a, s2) * w
        return math.sqrt(math.pi) * self.sigma * total

    @property
    def l2sq(self) -> float:
        return self._theta(lambda a, s2: 1.0)

    @property
    def grad_l2sq(self) -> float:
        return self._theta(lambda a, s2: 1.0 / (2.0 * s2) - a**2 / (4.0 * s2**2))

    @property
    def lap_l2sq(self) -> float:
        return self._theta(
            lambda a, s2: 3.0 / (4.0 * s2**2)
            - 3.0 * a**2 / (4.0 * s2**3)
            + a**4 / (16.0 * s2**4)
        )


def lattice_points(N: int, n: int, t: float = 0.0, v_n: float = 0.0) -> np.ndarray:
    """Macroscopic coordinates ((x - v_n t) mod N) / n of the ring sites."""
    return ((np.arange(N) - v_n * t) % N) / n


def fluctuation_field(sites, test_fn, t: float, rho: float, n: int, v_n: float = 0.0):
    """X_t(phi) for one configuration."""
    sites = np.asarray(sites)
    vals = test_fn.phi(lattice_points(sites.shape[0], n, t, v_n))
    return float((sites - rho) @ vals) / math.sqrt(n)


def local_average(sites, x: int, ell: int) -> float:
    """Mean occupancy over the window {x, ..., x + ell - 1}, periodic."""
    sites = np.asarray(sites)
    idx = (x + np.arange(ell)) % sites.shape[0]
    return float(sites[idx].mean())


def local_average_field(sites, ell: int) -> np.ndarray:
    """Window means for every starting site at once (periodic wrap)."""
    sites = np.asarray(sites, dtype=float)
    N = sites.shape[0]
    if not (1 <= ell <= N):
        raise ValueError("need 1 <= ell <= N")
    ext = np.concatenate([sites, sites[: ell - 1]])
    cs = np.concatenate(([0.0], np.cumsum(ext)))
    return (cs[ell:] - cs[:-ell])[:N] / ell


def local_average_frames(frames, ell: int) -> np.ndarray:
    """local_average_field applied to a whole (F, N) frame stack at once."""
    frames = np.asarray(frames, dtype=float)
    N = frames.shape[1]
    if not (1 <= ell <= N):
        raise ValueError("need 1 <= ell <= N")
    ext = np.concatenate([frames, frames[:, : ell - 1]], axis=1)
    cs = np.cumsum(ext, axis=1)
    cs = np.concatenate([np.zeros((frames.shape[0], 1)), cs], axis=1)
    return (cs[:, ell:] - cs[:, :-ell])[:, :N] / ell


def indicator_field(sites, x: int, eps_n: int, rho: float, n: int) -> float:
    """X(iota_eps) through the lattice identity sqrt(n) (window mean - rho)."""
    return math.sqrt(n) * (local_average(sites, x, eps_n) - rho)


def window_values(frames: np.ndarray, f: LocalFunction) -> np.ndarray:
    """tau_x f evaluated at every site of every frame (periodic windows)."""
    frames = np.asarray(frames)
    cols = tuple(np.roll(frames, -i, axis=-1) for i in range(f.width))
    return f.table[cols]


@dataclass
class FieldStatistic:
    """Per-replica values of one scalar estimator with exact recomputable
    summary statistics (deterministic accumulation order)."""

    name: str
    values: np.ndarray

    @classmethod
    def from_values(cls, name: str, values) -> "FieldStatistic":
        return cls(name=name, values=np.asarray(values, dtype=float))

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def variance(self) -> float:
        return float(self.values.var(ddof=1))

    @property
    def stderr_mean(self) -> float:
        return math.sqrt(self.variance / self.count)

    @property
    def stderr_variance(self) -> float:
        """Standard error of the sample variance from the fourth moment."""
        r = self.count
        centered = self.values - self.mean
        m4 = float((centered**4).mean())
        s2 = self.variance
        return math.sqrt(max(m4 - s2 * s2 * (r - 3) / (r - 1), 0.0) / r)


def martingale_qv(traj: Trajectory, test_fn, out_times=None) -> np.ndarray:
    """Exact quadratic variation <M(phi)>_t of the fluctuation-field
    martingale, integrated from the jump log.

    The integrand (1/n) sum_x (p r + q r)(s) (grad_n phi)^2_x is piecewise
    constant between jumps only in the static frame, so this estimator is
    restricted to plans whose frame velocity vanishes (e.g. SEP at half
    filling); the frame-shifted weights would vary between jumps otherwise.
    """
    if not traj.has_jump_log:
        raise ValueError("martingale_qv needs a trajectory with a jump log")
    plan = traj.plan
    n = plan.asym.n
    u = np.arange(plan.N + 1) / n
    vals = test_fn.phi(u % test_fn.M)
    gradn = n * (vals[1:] - vals[:-1])
    weights = gradn**2 / float(n) ** 3
    rate_r, rate_l = _scaled_tables(plan.spec.normalize(), plan.asym)
    if out_times is None:
        out_times = traj.times
    return _kernels.replay_qv(
        traj.initial.copy(),
        traj.jump_times,
        traj.jump_bonds,
        traj.jump_dirs,
        rate_r,
        rate_l,
        weights,
        0.0,
        np.asarray(out_times, dtype=float),
    )


def nonlinear_V(spec: RateSpec, rho: float) -> LocalFunction:
    """Centered nonlinearity V = (r(eta_0,eta_1) + r(eta_1,eta_0))/2
    - Phi_r'(rho) (eta_0 - rho), shifted to mean zero at rho.

    Phi_r' is d/drho of 2 chi D by the Einstein relation, so both the mean
    and the density-derivative of the mean vanish at rho; the curvature
    matches Phi_r''.
    """
    from .gradient import check_gradient_closed_form

    spec = spec.normalize()
    ok, _ = check_gradient_closed_form(spec)
    if not ok:
        raise NonGradientError("V is defined through 2 chi D, a gradient-only identity")
    fr = LocalFunction.of_rate(spec)
    slope = phi_prime(spec, fr, rho)
    level = thermo_phi(spec, fr, rho)
    kappa = spec.kappa
    sym = 0.5 * (spec.table + spec.table.T)
    occupancy = np.arange(kappa + 1, dtype=float)[:, None]
    table = sym - slope * (occupancy - rho) - level
    return LocalFunction(kappa, table)


def first_order_reduction(spec: RateSpec, f: LocalFunction, rho: float) -> LocalFunction:
    """f - Phi_f(rho) - Phi_f'(rho) (eta_0 - rho): the projection remainder
    whose bg2 statistic is the first-order replacement error, so no separate
    first-order estimator is needed."""
    spec = spec.normalize()
    level = thermo_phi(spec, f, rho)
    slope = phi_prime(spec, f, rho)
    occupancy = np.arange(spec.kappa + 1, dtype=float)
    shape = [spec.kappa + 1] + [1] * (f.width - 1)
    table = f.table - level - slope * (occupancy.reshape(shape) - rho)
    return LocalFunction(spec.kappa, table)


def _check_bg_precondition(spec: RateSpec, f: LocalFunction, rho: float, tol: float = 1e-8):
    level = thermo_phi(spec, f, rho)
    slope = phi_prime(spec, f, rho)
    if abs(level) > tol or abs(slope) > tol:
        raise ValueError(
            f"bg2 needs Phi_f(rho) = Phi_f'(rho) = 0; got {level:.3e}, {slope:.3e}"
        )


def bg2_statistic(
    trajectories,
    f: LocalFunction,
    test_fn,
    ell: int,
    rho: float,
    v_n: float = 0.0,
    precomputed_phi2: float | None = None,
) -> FieldStatistic:
    """Second moment over replicas of the time-integrated replacement error

        I = int_0^T sum_x (tau_x f - Phi_f''(rho)/2 (window_ell - rho)^2) phi^n_x(s) ds

    on the frame grid (trapezoid rule).  The first-order statistic is this
    one applied to f - Phi_f - Phi_f' centered eta, so no separate estimator
    exists.
    """
    values = []
    spec = None
    for traj in trajectories:
        if spec is None:
            spec = traj.plan.spec.normalize()
            _check_bg_precondition(spec, f, rho)
            half_phi2 = 0.5 * (
                phi_second(spec, f, rho) if precomputed_phi2 is None else precomputed_phi2
            )
        values.append(
            _bg2_single(traj, f, test_fn, ell, rho, v_n, half_phi2)
        )
    sq = np.asarray(values) ** 2
    return FieldStatistic.from_values(f"bg2_ell{ell}", sq)


def _bg2_single(traj, f, test_fn, ell, rho, v_n, half_phi2) -> float:
    plan = traj.plan
    n = plan.asym.n
    frames = traj.frames
    fvals = window_values(frames, f)
    x = np.arange(plan.N)
    static = test_fn.phi((x / n) % test_fn.M) if v_n == 0.0 else None
    integrand = np.empty(traj.times.shape[0])
    for j, t in enumerate(traj.times):
        avg = local_average_field(frames[j], ell)
        if static is None:
            phi_x = test_fn.phi((((x - v_n * t) % plan.N) / n) % test_fn.M)
        else:
            phi_x = static
        integrand[j] = ((fvals[j] - half_phi2 * (avg - rho) ** 2) * phi_x).sum()
    return float(np.trapezoid(integrand, traj.times))


def energy_condition_estimator(
    trajectories,
    test_fn,
    eps_list,
    s: float,
    t: float,
    rho: float,
    v_n: float = 0.0,
) -> list[dict]:
    """Pairwise second moments E[(A^eps - A^delta)^2] for consecutive
    (eps, delta) in eps_list (sorted descending).

    A^eps is the time integral over [s, t] of
    sum_x (window mean over eps*n sites - rho)^2 grad_n phi^n_x, the exact
    lattice form of the quadratic field smoothed at scale eps; eps*n must
    be an integer for the smoothing identity to be exact.
    """
    eps_sorted = sorted(eps_list, reverse=True)
    if len(eps_sorted) < 2:
        raise ValueError("need at least two eps values")
    a_values: list[np.ndarray] = []
    for traj in trajectories:
        a_values.append(_quadratic_fields(traj, test_fn, eps_sorted, s, t, rho, v_n))
    stacked = np.array(a_values)  # (replicas, len(eps))
    rows = []
    for i in range(len(eps_sorted) - 1):
        diff_sq = (stacked[:, i] - stacked[:, i + 1]) ** 2
        stat = FieldStatistic.from_values(
            f"energy_eps{eps_sorted[i]:g}", diff_sq
        )
        rows.append(
            {
                "eps": eps_sorted[i],
                "delta": eps_sorted[i + 1],
                "mean": stat.mean,
                "stderr": stat.stderr_mean,
                "replicas": stat.count,
            }
        )
    return rows


def _quadratic_fields(traj, test_fn, eps_sorted, s, t, rho, v_n) -> np.ndarray:
    plan = traj.plan
    n = plan.asym.n
    windows = []
    for eps in eps_sorted:
        eps_n = eps * n
        if abs(eps_n - round(eps_n)) > 1e-9 or round(eps_n) < 1:
            raise ValueError(f"eps * n must be a positive integer; got {eps} * {n}")
        windows.append(int(round(eps_n)))
    sel = (traj.times >= s - 1e-12) & (traj.times <= t + 1e-12)
    times = traj.times[sel]
    if times.shape[0] < 2:
        raise ValueError("need at least two frames inside [s, t]")
    frames = traj.frames[sel]
    x = np.arange(plan.N)
    if v_n == 0.0:
        gradn = n * (
            test_fn.phi(((x + 1) / n) % test_fn.M) - test_fn.phi((x / n) % test_fn.M)
        )
        out = np.empty(len(windows))
        for w, eps_n in enumerate(windows):
            dev = local_average_frames(frames, eps_n) - rho
            out[w] = np.trapezoid((dev * dev) @ gradn, times)
        return out
    integrands = np.empty((len(windows), times.shape[0]))
    for j, tj in enumerate(times):
        u = (((x - v_n * tj) % plan.N) / n) % test_fn.M
        u_next = (((x + 1 - v_n * tj) % plan.N) / n) % test_fn.M
        gradn = n * (test_fn.phi(u_next) - test_fn.phi(u))
        for w, eps_n in enumerate(windows):
            avg = local_average_field(frames[j], eps_n)
            integrands[w, j] = (((avg - rho) ** 2) * gradn).sum()
    return np.array([np.trapezoid(integrands[w], times) for w in range(len(windows))])
