"""Replica orchestration for the simulation-based estimators.

Each driver fixes a plan template, fans replicas out over a thread pool
(the event loop releases the GIL), reduces per-replica observables into
arrays indexed by replica id, and emits rows in the shared estimator
schema (n, N, rho, alpha, phi_id, ell_or_eps, t, mean, stderr, replicas).
Results are independent of the thread count because replica streams are
derived from (seed, replica_id) alone and reductions are indexed, not
ordered by completion.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .fields import (
    FieldStatistic,
    FourierMode,
    local_average_field,
    local_average_frames,
    martingale_qv,
    nonlinear_V,
    window_values,
    _check_bg_precondition,
    _quadratic_fields,
)
from .kmc import SimulationPlan, run
from .model import AsymmetryParams, RateSpec
from .oracle import SectorIndex, spectral_gap, stationarity_residual
from .thermo import (
    LocalFunction,
    coefficients,
    compressibility,
    einstein_residual,
    phi as thermo_phi,
    phi_second,
    solve_lambda,
)

__all__ = [
    "ESTIMATOR_COLUMNS",
    "field_variance_experiment",
    "qv_experiment",
    "bg_experiment",
    "energy_experiment",
    "thermo_table_rows",
    "oracle_rows",
]

ESTIMATOR_COLUMNS = (
    "n",
    "N",
    "rho",
    "alpha",
    "phi_id",
    "ell_or_eps",
    "t",
    "mean",
    "stderr",
    "replicas",
)


def _default_threads() -> int:
    return min(os.cpu_count() or 1, 8)


def _map_replicas(plan0: SimulationPlan, replicas: int, worker, threads: int | None):
    """worker(trajectory) -> ndarray; returns (replicas, ...) stacked in
    replica order regardless of scheduling."""
    threads = threads or _default_threads()

    def job(i: int):
        return worker(run(plan0.with_replica(i)))

    if threads <= 1:
        results = [job(i) for i in range(replicas)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(replicas)))
    return np.array(results)


def _grid(T: float, frames: int) -> tuple[float, ...]:
    """frames+1 observation times 0, T/frames, ..., T: trapezoid integrals
    then cover [0, T] exactly."""
    return tuple(np.linspace(0.0, T, frames + 1))


def _frame_velocity(spec: RateSpec, rho: float, alpha: float, n: int) -> float:
    """v_n = alpha n^{3/2} Phi_r'(rho); identically zero for symmetric runs,
    where no moving frame is needed and no gradient structure is assumed."""
    if alpha == 0.0:
        return 0.0
    return coefficients(spec, rho, alpha, n).v_n


def field_variance_experiment(
    spec: RateSpec,
    n: int,
    N: int,
    rho: float,
    alpha: float,
    T: float,
    n_times: int,
    modes: tuple[int, ...],
    replicas: int,
    seed: int,
    threads: int | None = None,
) -> list[dict]:
    """Var[X_t(phi)] / (chi ||phi||^2) with its standard error, per Fourier
    mode and observation time: the finite-n surrogate of the white-noise
    marginal of the limit field."""
    spec = spec.normalize()
    asym = AsymmetryParams.sbe(n, alpha)
    v_n = _frame_velocity(spec, rho, alpha, n)
    chi = compressibility(spec, rho)
    M = N / n
    tests = [FourierMode(M, k) for k in modes]
    times = _grid(T, n_times)
    plan0 = SimulationPlan(
        spec=spec, asym=asym, N=N, rho=rho, T=T, observation_times=times, seed=seed
    )
    u_frames = np.arange(N)

    def worker(traj):
        out = np.empty((len(tests), len(times)))
        centered = traj.frames.astype(float) - rho
        for mi, test_fn in enumerate(tests):
            if v_n == 0.0:
                vals = test_fn.phi((u_frames / n) % test_fn.M)
                out[mi, :] = centered @ vals / np.sqrt(n)
            else:
                for j, t in enumerate(times):
                    vals = test_fn.phi((((u_frames - v_n * t) % N) / n) % test_fn.M)
                    out[mi, j] = centered[j] @ vals / np.sqrt(n)
        return out

    samples = _map_replicas(plan0, replicas, worker, threads)
    rows = []
    for mi, test_fn in enumerate(tests):
        target = chi * test_fn.l2sq
        for j, t in enumerate(times):
            stat = FieldStatistic.from_values("X", samples[:, mi, j])
            rows.append(
                {
                    "n": n,
                    "N": N,
                    "rho": rho,
                    "alpha": alpha,
                    "phi_id": test_fn.label,
                    "ell_or_eps": "",
                    "t": t,
                    "mean": stat.variance / target,
                    "stderr": stat.stderr_variance / target,
                    "replicas": replicas,
                }
            )
    return rows


def qv_experiment(
    spec: RateSpec,
    n: int,
    M: int,
    rho: float,
    alpha: float,
    T: float,
    mode: int,
    replicas: int,
    seed: int,
    threads: int | None = None,
) -> list[dict]:
    """Replica mean of <M(phi)>_T / T against the limit Phi_r ||grad phi||^2."""
    spec = spec.normalize()
    asym = AsymmetryParams.sbe(n, alpha)
    v_n = _frame_velocity(spec, rho, alpha, n)
    if abs(v_n) > 1e-12:
        raise ValueError(
            "exact QV replay needs a static frame (v_n = 0); "
            "pick rho with Phi_r'(rho) = 0 or alpha = 0"
        )
    N = M * n
    test_fn = FourierMode(float(M), mode)
    plan0 = SimulationPlan(
        spec=spec,
        asym=asym,
        N=N,
        rho=rho,
        T=T,
        observation_times=(T,),
        seed=seed,
        log_jumps=True,
        record_configs=False,
    )

    def worker(traj):
        return martingale_qv(traj, test_fn) / traj.times

    samples = _map_replicas(plan0, replicas, worker, threads)
    stat = FieldStatistic.from_values("qv", samples[:, 0])
    target = thermo_phi(spec, LocalFunction.of_rate(spec), rho) * test_fn.grad_l2sq
    return [
        {
            "n": n,
            "N": N,
            "rho": rho,
            "alpha": alpha,
            "phi_id": test_fn.label,
            "ell_or_eps": "",
            "t": T,
            "mean": stat.mean,
            "stderr": stat.stderr_mean,
            "replicas": replicas,
            "target": target,
        }
    ]


def bg_experiment(
    spec: RateSpec,
    n: int,
    M: int,
    rho: float,
    alpha: float,
    T: float,
    n_frames: int,
    mode: int,
    ells: tuple[int, ...],
    replicas: int,
    seed: int,
    threads: int | None = None,
    f: LocalFunction | None = None,
) -> list[dict]:
    """Second moment of the time-integrated second-order Boltzmann-Gibbs
    replacement error, swept over the averaging window ell.

    Defaults to the centered nonlinearity V; any local function with
    Phi_f(rho) = Phi_f'(rho) = 0 is accepted.
    """
    spec = spec.normalize()
    asym = AsymmetryParams.sbe(n, alpha)
    if f is None:
        f = nonlinear_V(spec, rho)
    _check_bg_precondition(spec, f, rho)
    half_phi2 = 0.5 * phi_second(spec, f, rho)
    N = M * n
    test_fn = FourierMode(float(M), mode)
    times = _grid(T, n_frames)
    plan0 = SimulationPlan(
        spec=spec, asym=asym, N=N, rho=rho, T=T, observation_times=times, seed=seed
    )
    v_n = _frame_velocity(spec, rho, alpha, n)
    x = np.arange(N)
    tvec = np.asarray(times)

    def worker(traj):
        fvals = window_values(traj.frames, f)
        out = np.empty(len(ells))
        if v_n == 0.0:
            phi_x = test_fn.phi((x / n) % test_fn.M)
            f_part = fvals @ phi_x
            for li, ell in enumerate(ells):
                dev = local_average_frames(traj.frames, ell) - rho
                integrand = f_part - half_phi2 * ((dev * dev) @ phi_x)
                out[li] = np.trapezoid(integrand, tvec)
            return out
        for li, ell in enumerate(ells):
            integrand = np.empty(tvec.shape[0])
            for j, t in enumerate(tvec):
                avg = local_average_field(traj.frames[j], ell)
                phi_x = test_fn.phi((((x - v_n * t) % N) / n) % test_fn.M)
                integrand[j] = ((fvals[j] - half_phi2 * (avg - rho) ** 2) * phi_x).sum()
            out[li] = np.trapezoid(integrand, tvec)
        return out

    samples = _map_replicas(plan0, replicas, worker, threads)
    rows = []
    for li, ell in enumerate(ells):
        stat = FieldStatistic.from_values(f"bg2_{ell}", samples[:, li] ** 2)
        rows.append(
            {
                "n": n,
                "N": N,
                "rho": rho,
                "alpha": alpha,
                "phi_id": test_fn.label,
                "ell_or_eps": ell,
                "t": T,
                "mean": stat.mean,
                "stderr": stat.stderr_mean,
                "replicas": replicas,
            }
        )
    return rows


def energy_experiment(
    spec: RateSpec,
    n: int,
    M: int,
    rho: float,
    alpha: float,
    T: float,
    n_frames: int,
    mode: int,
    eps_list: tuple[float, ...],
    s: float,
    t: float,
    replicas: int,
    seed: int,
    threads: int | None = None,
) -> list[dict]:
    """E[(A^eps - A^delta)^2] for consecutive smoothing scales.

    Rows carry the raw second moment; the energy-condition constant is
    mean / (eps (t - s) ||grad phi||^2).
    """
    spec = spec.normalize()
    asym = AsymmetryParams.sbe(n, alpha)
    v_n = _frame_velocity(spec, rho, alpha, n)
    N = M * n
    test_fn = FourierMode(float(M), mode)
    times = _grid(T, n_frames)
    eps_sorted = tuple(sorted(eps_list, reverse=True))
    plan0 = SimulationPlan(
        spec=spec, asym=asym, N=N, rho=rho, T=T, observation_times=times, seed=seed
    )

    def worker(traj):
        return _quadratic_fields(traj, test_fn, eps_sorted, s, t, rho, v_n)

    samples = _map_replicas(plan0, replicas, worker, threads)
    rows = []
    for i in range(len(eps_sorted) - 1):
        diff_sq = (samples[:, i] - samples[:, i + 1]) ** 2
        stat = FieldStatistic.from_values(f"energy_{eps_sorted[i]:g}", diff_sq)
        rows.append(
            {
                "n": n,
                "N": N,
                "rho": rho,
                "alpha": alpha,
                "phi_id": test_fn.label,
                "ell_or_eps": eps_sorted[i],
                "t": t - s,
                "mean": stat.mean,
                "stderr": stat.stderr_mean,
                "replicas": replicas,
                "delta": eps_sorted[i + 1],
                "grad_l2sq": test_fn.grad_l2sq,
            }
        )
    return rows


THERMO_COLUMNS = (
    "rho",
    "lambda",
    "chi",
    "phi_c",
    "phi_r",
    "D",
    "Lambda",
    "v_tilde",
    "v_n",
    "einstein_residual",
)


def thermo_table_rows(
    spec: RateSpec,
    rhos,
    alpha: float,
    n: int,
    alpha0: float | None = None,
) -> list[dict]:
    spec = spec.normalize()
    rows = []
    for rho in rhos:
        co = coefficients(spec, rho, alpha, n, alpha0)
        rows.append(
            {
                "rho": rho,
                "lambda": solve_lambda(spec, rho),
                "chi": co.chi,
                "phi_c": co.phi_c,
                "phi_r": co.phi_r,
                "D": co.D,
                "Lambda": co.Lambda,
                "v_tilde": co.v_tilde,
                "v_n": co.v_n,
                "einstein_residual": einstein_residual(spec, rho),
            }
        )
    return rows


ORACLE_COLUMNS = ("K", "state_count", "residual", "gap")


def oracle_rows(spec: RateSpec, asym: AsymmetryParams, L: int, budget: int = 2_000_000) -> list[dict]:
    """Per-sector stationarity residual on the L-ring plus the spectral gap
    of the symmetrized dynamics on the open L-segment."""
    spec = spec.normalize()
    residuals = stationarity_residual(spec, asym, L, budget)
    rows = []
    for K in sorted(residuals):
        size = SectorIndex.build(spec.kappa, L, K, budget).size
        gap = spectral_gap(spec, L, K, budget)
        rows.append(
            {
                "K": K,
                "state_count": size,
                "residual": residuals[K],
                "gap": "" if gap == float("inf") else gap,
            }
        )
    return rows
