import numpy as np
import pytest

from peplab import experiments as X
from peplab.model import AsymmetryParams, RateSpec

SEP1 = RateSpec.sep(1)
SEP2 = RateSpec.sep(2)


class TestFieldVariance:
    def test_rows_and_ratio(self):
        rows = X.field_variance_experiment(
            SEP1, n=8, N=64, rho=0.5, alpha=0.0, T=0.05, n_times=2,
            modes=(1, 2), replicas=60, seed=3, threads=1,
        )
        assert len(rows) == 6  # 2 modes x (n_times + 1) grid points incl. t=0
        for row in rows:
            assert set(X.ESTIMATOR_COLUMNS) <= set(row)
            assert abs(row["mean"] - 1.0) < 5 * row["stderr"]

    def test_thread_count_does_not_change_results(self):
        kw = dict(
            spec=SEP1, n=8, N=32, rho=0.5, alpha=0.5, T=0.02, n_times=2,
            modes=(1,), replicas=12, seed=9,
        )
        a = X.field_variance_experiment(**kw, threads=1)
        b = X.field_variance_experiment(**kw, threads=4)
        for ra, rb in zip(a, b):
            assert ra == rb


class TestQV:
    def test_target_and_mean(self):
        rows = X.qv_experiment(
            SEP1, n=16, M=4, rho=0.5, alpha=0.0, T=0.1, mode=1,
            replicas=40, seed=5, threads=1,
        )
        (row,) = rows
        assert row["mean"] > 0
        assert abs(row["mean"] - row["target"]) < 0.2 * row["target"]

    def test_moving_frame_rejected(self):
        with pytest.raises(ValueError):
            X.qv_experiment(
                SEP1, n=16, M=4, rho=0.3, alpha=1.0, T=0.05, mode=1,
                replicas=2, seed=5, threads=1,
            )


class TestMovingFrame:
    """Exercise the v_n != 0 code paths (rho off half filling)."""

    def test_field_variance_in_moving_frame(self):
        rows = X.field_variance_experiment(
            SEP1, n=8, N=64, rho=0.3, alpha=1.0, T=0.05, n_times=2,
            modes=(1,), replicas=80, seed=21, threads=1,
        )
        # the shifted lattice sum of cos^2 over a full ring is still N/2,
        # so the white-noise normalization stays exact
        for row in rows:
            assert abs(row["mean"] - 1.0) < 5 * row["stderr"]

    def test_bg_and_energy_run_off_half_filling(self):
        rows = X.bg_experiment(
            SEP1, n=8, M=4, rho=0.3, alpha=1.0, T=0.05, n_frames=16, mode=1,
            ells=(2, 4), replicas=6, seed=22, threads=1,
        )
        assert all(np.isfinite(r["mean"]) and r["mean"] > 0 for r in rows)
        rows = X.energy_experiment(
            SEP1, n=8, M=4, rho=0.3, alpha=1.0, T=0.05, n_frames=16, mode=1,
            eps_list=(0.5, 0.25), s=0.0, t=0.05, replicas=6, seed=23, threads=1,
        )
        assert all(np.isfinite(r["mean"]) and r["mean"] >= 0 for r in rows)


class TestBG:
    def test_row_per_ell(self):
        rows = X.bg_experiment(
            SEP1, n=16, M=4, rho=0.5, alpha=0.5, T=0.1, n_frames=32, mode=1,
            ells=(2, 4, 8), replicas=10, seed=4, threads=1,
        )
        assert [r["ell_or_eps"] for r in rows] == [2, 4, 8]
        assert all(r["mean"] > 0 for r in rows)


class TestEnergy:
    def test_pairs(self):
        rows = X.energy_experiment(
            SEP1, n=16, M=4, rho=0.5, alpha=0.5, T=0.1, n_frames=64, mode=1,
            eps_list=(0.25, 0.125), s=0.0, t=0.1, replicas=10, seed=4, threads=1,
        )
        assert len(rows) == 1
        assert rows[0]["ell_or_eps"] == 0.25
        assert rows[0]["delta"] == 0.125


class TestTables:
    def test_thermo_rows_einstein_column(self):
        rows = X.thermo_table_rows(SEP2, np.linspace(0.1, 1.9, 7), alpha=1.0, n=64)
        assert len(rows) == 7
        assert all(abs(r["einstein_residual"]) <= 1e-8 for r in rows)
        assert all(abs(r["D"] - 1.0) < 1e-9 for r in rows)
        assert all(abs(r["Lambda"] + 1.0) < 1e-6 for r in rows)

    def test_oracle_rows(self):
        rows = X.oracle_rows(SEP2, AsymmetryParams.from_pq(1, 0.7, 0.3), 3)
        assert [r["K"] for r in rows] == list(range(7))
        assert all(r["residual"] < 1e-12 for r in rows)
        assert rows[0]["gap"] == ""  # single-state sector
        assert rows[0]["state_count"] == 1
        assert rows[3]["state_count"] == 7  # compositions of 3 with parts <= 2
