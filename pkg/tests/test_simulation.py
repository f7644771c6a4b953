import numpy as np
import pytest

from memflow import spectral
from memflow.config import SimulationConfig
from memflow.simulation import EXIT_NAN, EXIT_OK, EXIT_VIOLATION, run


def small_cfg(**over):
    base = dict(
        n=32,
        viscosity=0.1,
        dt=0.05,
        t_final=0.5,
        model_name="psm-raw",
        eps_tail=1e-4,
        velocity_kind="taylor-green",
    )
    base.update(over)
    return SimulationConfig(**base)


class TestRun:
    def test_quiescent_all_zero(self):
        res = run(small_cfg(model_name="oldroyd-b", velocity_kind="zero"))
        assert res.exit_code == EXIT_OK
        last = res.records[-1]
        assert last.energy == 0.0
        assert last.stress_sup == 0.0
        assert last.y_value == 0.0
        assert not any(rec.flags for rec in res.records)

    def test_taylor_green_psm_clean(self):
        res = run(small_cfg())
        assert res.exit_code == EXIT_OK
        assert not any(rec.flags for rec in res.records)
        ys = [rec.y_value for rec in res.records]
        assert all(b >= a for a, b in zip(ys, ys[1:]))
        assert res.records[0].y_value == 0.0

    def test_divergence_bound_every_step(self):
        res = run(small_cfg())
        assert max(rec.divu_sup for rec in res.records) <= 1e-10

    def test_nan_exit_code(self, tmp_path):
        # non-finite state aborts with the dedicated exit code instead of raising
        from memflow.snapshots import write_field

        u = np.zeros((2, 32, 32))
        u[0, 3, 3] = np.nan
        path = tmp_path / "bad_u.fld"
        write_field(path, u)
        res = run(small_cfg(velocity_kind="snapshot", velocity_path=str(path)))
        assert res.exit_code == EXIT_NAN
        assert "non-finite" in res.message

    def test_violation_exit_code(self):
        res = run(small_cfg(stress_tol=-1.0, fatal_on_violation=True))
        assert res.exit_code == EXIT_VIOLATION

    def test_cadence_thins_records(self):
        res = run(small_cfg(cadence=5))
        assert len(res.records) == 3  # t = 0, 0.25, 0.5

    def test_random_band_velocity_runs(self):
        res = run(small_cfg(velocity_kind="random-band", velocity_seed=9, velocity_band=3))
        assert res.exit_code == EXIT_OK


class TestDeterminism:
    def test_byte_identical_across_worker_counts(self):
        cfg = small_cfg()
        saved = spectral.get_workers()
        try:
            spectral.set_workers(1)
            rows1 = [rec.csv_row() for rec in run(cfg).records]
            spectral.set_workers(2)
            rows2 = [rec.csv_row() for rec in run(cfg).records]
        finally:
            spectral.set_workers(saved)
        assert rows1 == rows2

    def test_byte_identical_repeat_runs(self):
        cfg = small_cfg(velocity_kind="random-band", velocity_seed=4)
        rows1 = [rec.csv_row() for rec in run(cfg).records]
        rows2 = [rec.csv_row() for rec in run(cfg).records]
        assert rows1 == rows2


class TestArtifacts:
    def test_csv_written_with_header(self, tmp_path):
        res = run(small_cfg(output_dir=str(tmp_path / "out")))
        csv = (tmp_path / "out" / "diagnostics.csv").read_text().splitlines()
        assert csv[0].startswith("t,stress_sup,min_detG")
        assert len(csv) == len(res.records) + 1

    def test_snapshots_and_checkpoint(self, tmp_path):
        run(small_cfg(output_dir=str(tmp_path / "out"), snapshot_every=5, history_slices=(0, 2)))
        snap = tmp_path / "out" / "snap_000005"
        assert (snap / "u.fld").exists()
        assert (snap / "tau.fld").exists()
        assert (snap / "g_00000.fld").exists()
        assert (snap / "g_00002.fld").exists()
        assert (tmp_path / "out" / "checkpoint" / "meta.json").exists()

    def test_restart_matches_straight_run(self, tmp_path):
        cfg_full = small_cfg(t_final=1.0, output_dir=str(tmp_path / "A"))
        rows_full = {rec.t: rec for rec in run(cfg_full).records}

        cfg_half = small_cfg(t_final=0.5, output_dir=str(tmp_path / "B"))
        run(cfg_half)
        cfg_resume = small_cfg(t_final=1.0)
        res = run(cfg_resume, restart_from=tmp_path / "B" / "checkpoint")

        assert res.exit_code == EXIT_OK
        for rec in res.records:
            ref = rows_full[rec.t]
            for field in ("stress_sup", "min_detG", "min_absG", "energy", "gradu_sup",
                          "y_value", "y_integrand", "stress_grad_norm"):
                a, b = getattr(rec, field), getattr(ref, field)
                assert a == pytest.approx(b, rel=1e-14, abs=1e-14), field
