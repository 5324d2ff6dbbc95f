import io

import pytest

from hardy_nehari import cli
from hardy_nehari.closed_forms import sobolev_constant
from hardy_nehari.thresholds import n4_chain


def run(argv, tmp_path=None):
    out = io.StringIO()
    code = cli.main(argv, stdout=out)
    return code, out.getvalue()


def record(text):
    return dict(line.split("=", 1) for line in text.splitlines() if line and not line.startswith("#"))


class TestConfig:
    def test_comments_and_blanks(self):
        pairs = cli.parse_config_text("# header\n\nN = 3  # dimension\nbeta12=0.1\n")
        assert pairs == {"N": "3", "beta12": "0.1"}

    def test_malformed_line(self):
        with pytest.raises(cli.ConfigError):
            cli.parse_config_text("N 4\n")

    def test_flags_win(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("N=3\nK=256\n")
        code, text = run(["constants", "--config", str(f), "--N=4"])
        assert code == 0
        assert record(text)["N"] == "4"

    def test_defaults(self):
        cfg = cli.build_config({})
        assert cfg.N == 4
        assert cfg.resolved_lambdas == (0.5, 0.5, 0.5)
        assert cfg.beta.offdiag == (0.05, 0.05, 0.05)

    @pytest.mark.parametrize(
        "argv, fragment",
        [
            (["constants", "--N=2"], "N must be"),
            (["constants", "--lambdas=0.5,0.5,1.0"], "lambda"),
            (["constants", "--lambdas=0.5,0.5"], "lambdas"),
            (["constants", "--K=8"], "K must"),
            (["constants", "--bogus=1"], "unknown keys: bogus"),
            (["constants", "--r_min=1e-3"], "r_min"),
            (["minimize", "--level=saddle"], "level"),
            (["scan-mixed"], "beta12 > 0"),
            (["scan-mixed", "--beta13=-0.5", "--beta23=-0.5", "--lambdas=0.4,0.5,0.5"], "lambda1 == lambda2"),
            (["scan-mixed", "--beta13=-0.5", "--beta23=-0.5", "--mu=2,1"], "increasing"),
            (["constants", "N=4"], "--key=value"),
        ],
    )
    def test_validation_exit_2(self, argv, fragment, capsys):
        code, _ = run(argv)
        assert code == 2
        assert fragment in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_help_documents_keys(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["--help"])
        text = capsys.readouterr().out
        for key in ("lambdas", "beta12", "r_min", "restarts", "mu", "experimental"):
            assert key in text


class TestConstants:
    def test_n4(self, tmp_path):
        out = tmp_path / "c.txt"
        code, _ = run(["constants", f"--output={out}"])
        assert code == 0
        rec = record(out.read_text())
        expected = n4_chain((0.5,) * 3, sobolev_constant(4)).final
        assert float(rec["beta_tilde"]) == pytest.approx(expected, rel=1e-15)
        assert float(rec["beta_tilde"]) > 0

    def test_n3(self):
        code, text = run(["constants", "--N=3"])
        rec = record(text)
        assert code == 0 and 0 < float(rec["beta_hat"]) <= 1

    def test_n5_constants_only(self):
        code, text = run(["constants", "--N=5"])
        assert code == 0
        assert text.startswith("# constants only")
        rec = record(text)
        assert "C_bar" in rec and not any(k.startswith("beta") for k in rec)

    def test_swap_reading_is_annotated(self):
        _, text = run(["constants", "--swap_bound_reading=true"])
        assert text.startswith("# beta_2 evaluated with the bounds exchanged")

    def test_round_trip_digits(self):
        _, text = run(["constants"])
        rec = record(text)
        assert float(rec["S_cal"]) == sobolev_constant(4)


class TestMinimize:
    ARGS = ["minimize", "--K=1024", "--restarts=2"]

    def test_n4_semi_trivial(self):
        code, text = run(self.ARGS)
        rec = record(text)
        assert code == 0
        assert rec["classification"].startswith("semi-trivial")
        assert rec["converged"] == "true"
        assert "run_1_energy" in rec

    def test_n5_fully_nontrivial(self):
        code, text = run(self.ARGS + ["--N=5"])
        assert code == 0 and record(text)["classification"] == "fully-nontrivial"

    def test_profiles_csv(self, tmp_path):
        out = tmp_path / "u.csv"
        code, _ = run(self.ARGS + [f"--csv={out}"])
        raw = out.read_bytes()
        assert code == 0 and b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == "r,u1,u2,u3" and len(lines) == 1025

    def test_non_convergence_exit_1(self):
        code, text = run(self.ARGS + ["--max_iter=1", "--tol=1e-14"])
        assert code == 1
        assert record(text)["converged"] == "false"

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(self.ARGS + ["--seed=3", f"--csv={a}", f"--output={tmp_path / 'a.txt'}"])
        run(self.ARGS + ["--seed=3", f"--csv={b}", f"--output={tmp_path / 'b.txt'}"])
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


class TestScan:
    ARGS = ["scan-mixed", "--beta13=-0.5", "--beta23=-0.5", "--K=1024", "--restarts=1"]

    def test_single_row(self):
        code, text = run(self.ARGS + ["--mu=8"])
        assert code == 0
        rows = [l for l in text.splitlines() if not l.startswith("#")]
        assert rows[0] == "mu,t1,t2,t3,energy,constraint_residual,classification"
        assert len(rows) == 2

    def test_header_comments(self):
        _, text = run(self.ARGS + ["--mu=1,4"])
        head = [l for l in text.splitlines() if l.startswith("#")]
        assert [h.split("=")[0] for h in head] == ["# A12", "# A3", "# asymptote"]
        asym = float(head[2].split("=")[1])
        assert asym == pytest.approx(float(head[0].split("=")[1]) + float(head[1].split("=")[1]), rel=1e-15)

    def test_experimental_flag(self):
        code, text = run(self.ARGS + ["--mu=8", "--lambdas=0.45,0.5,0.5", "--experimental=true"])
        assert code == 0 and "# exploratory" in text


class TestProject:
    def test_linear(self):
        code, text = run(["project", "--K=512"])
        rec = record(text)
        assert code == 0 and rec["regime"] == "linear-N4" and rec["on_N"] == "true"

    def test_cubic(self):
        code, text = run(["project", "--N=3", "--K=512", "--amplitudes=1,0.7,1.3", "--mu=1,2,0.5"])
        assert code == 0 and record(text)["regime"] == "cubic-N3"

    def test_failure_exit_1(self):
        code, text = run(["project", "--K=512", "--beta12=-0.99", "--beta13=-0.99", "--beta23=-0.99"])
        assert code == 1 and text.startswith("projection_failed=")


class TestVerify:
    def test_default_passes(self):
        code, text = run(["verify"])
        lines = text.splitlines()
        assert code == 0
        assert all(l.startswith("PASS ") for l in lines)
        names = {l.split()[1] for l in lines}
        assert {"hardy_inequality", "projection_fixed_point", "bubble_residual_1", "quadrature_constants_1"} <= names

    def test_coarse_grid_flagged(self):
        code, text = run(["verify", "--K=32"])
        assert code == 1
        failed = [l for l in text.splitlines() if l.startswith("FAIL")]
        assert failed and all("measured=" in l for l in failed)
        assert any("bubble_residual" in l or "hardy" in l for l in failed)

    def test_verify_bubble_only(self):
        code, text = run(["verify-bubble", "--N=3"])
        assert code == 0 and len(text.splitlines()) == 3
