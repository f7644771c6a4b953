from memflow.cli import main

CONFIG = """
[grid]
n = 32

[flow]
viscosity = 0.1
dt = 0.05
t_final = 0.3

[model]
name = {model}

[history]
eps_tail = 1e-4

[output]
directory = {outdir}
"""


def write_cfg(tmp_path, model="psm-raw", outdir=""):
    p = tmp_path / "sim.ini"
    p.write_text(CONFIG.format(model=model, outdir=outdir))
    return str(p)


class TestRunCommand:
    def test_run_ok(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", write_cfg(tmp_path, outdir=str(out))])
        assert code == 0
        assert (out / "diagnostics.csv").exists()
        assert "completed" in capsys.readouterr().out

    def test_bad_config_exit_one(self, tmp_path, capsys):
        p = tmp_path / "bad.ini"
        p.write_text("[grid]\nn = 48\n[flow]\nviscosity=1\ndt=0.1\nt_final=1\n[model]\nname=psm-raw\n")
        assert main(["run", str(p)]) == 1
        assert "config error" in capsys.readouterr().err

    def test_restart_flag(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", write_cfg(tmp_path, outdir=str(out))]) == 0
        code = main(["run", write_cfg(tmp_path, outdir=str(tmp_path / "out2")), "--restart", str(out / "checkpoint")])
        assert code == 0


class TestVerifyCommand:
    def test_verify_passes_catalog(self, capsys):
        assert main(["verify"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        assert "oldroyd-b" in out and "h2_satisfied=false" in out


class TestOracleCommand:
    def test_oracle_gap_reported(self, tmp_path, capsys):
        code = main(["oracle", write_cfg(tmp_path, model="oldroyd-b"), "--tol", "0.05"])
        assert code == 0
        assert "oracle gap" in capsys.readouterr().out

    def test_oracle_requires_oldroyd(self, tmp_path, capsys):
        assert main(["oracle", write_cfg(tmp_path, model="psm-raw")]) == 1


class TestConvergeCommand:
    def test_converge_writes_table(self, tmp_path, capsys):
        out_csv = tmp_path / "levels.csv"
        code = main(["converge", write_cfg(tmp_path), "--levels", "2", "--out", str(out_csv)])
        assert code == 0
        assert out_csv.exists()
        assert "order[" in capsys.readouterr().out
