import csv
import io
import json

import pytest

from qewarp.catalog import FamilySpec
from qewarp.cli import main

TWO1_I = ["-p", "kind=Two1", "-p", "case=i", "-p", "m=2", "-p", "r=2", "-p", "Lambda=1", "-p", "fiber2_r=2",
          "-p", "fiber2_model=RoundSphere"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCatalog:
    def test_text_listing(self, capsys):
        code, out, _ = run(capsys, "catalog")
        assert code == 0
        for kind in ("TypeA", "Two1 [i, ii, iii, iv]", "Two2_i", "Two2_ii", "Global [1, 2, 3]"):
            assert kind in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "catalog", "--json")
        assert code == 0
        assert [e["kind"] for e in json.loads(out)] == ["TypeA", "Two1", "Two2_i", "Two2_ii", "Global"]

    def test_unknown_kind_empty(self, capsys):
        code, out, _ = run(capsys, "catalog", "--json", "--kind", "Nope")
        assert code == 0 and json.loads(out) == []


class TestVerify:
    def test_exact_family_passes(self, capsys):
        code, out, _ = run(capsys, "verify", *TWO1_I)
        doc = json.loads(out)
        assert code == 0 and doc["pass"]
        assert doc["params"]["derived"]["lambda"] == 4.0
        assert doc["params"]["derived"]["rho"] == 2.0

    def test_wrong_fiber_constant_fails(self, capsys):
        code, out, _ = run(capsys, "verify", *TWO1_I, "-p", "fiber2_k=3.0")
        doc = json.loads(out)
        assert code == 1
        assert "res_block_2" in doc["failures"] and "res_block_1" not in doc["failures"]

    def test_config_file_and_csv(self, capsys, tmp_path):
        cfg = tmp_path / "fam.ini"
        cfg.write_text(FamilySpec("Two2_i", {"m": 2.0, "n": 6, "r1": 2, "root": "minus"}).to_config())
        out_path = tmp_path / "rep.csv"
        code, _, _ = run(capsys, "verify", "--config", str(cfg), "--format", "csv", "--samples", "7",
                         "-o", str(out_path))
        rows = list(csv.reader(io.StringIO(out_path.read_text())))
        assert code == 0
        assert rows[0] == ["s", "res_radial", "res_block_1", "res_block_2", "trace", "gradR", "mu", "cotton",
                           "d_norm", "weyl_norm"]
        assert len(rows) == 8

    def test_with_oracle(self, capsys):
        code, out, _ = run(capsys, "verify", *TWO1_I, "--samples", "10", "--oracle", "--oracle-points", "2")
        doc = json.loads(out)
        assert code == 0 and len(doc["oracle"]) == 2
        assert all(r["ricci"] <= 1e-5 for r in doc["oracle"])

    def test_parallel_matches_serial(self, capsys):
        args = ("verify", *TWO1_I, "--samples", "5", "--oracle", "--oracle-points", "2")
        _, serial, _ = run(capsys, *args)
        _, parallel, _ = run(capsys, *args, "--jobs", "2")
        assert serial == parallel

    def test_deterministic(self, capsys):
        a = run(capsys, "verify", *TWO1_I)[1]
        b = run(capsys, "verify", *TWO1_I)[1]
        assert a == b

    def test_two2_ii_is_rejected(self, capsys):
        code, _, err = run(capsys, "verify", "-p", "kind=Two2_ii", "-p", "m=2", "-p", "n=6", "-p", "r1=2")
        assert code == 2 and "inconsistent" in err

    @pytest.mark.parametrize(
        "extra",
        [[], ["-p", "kind=Two1"], ["-p", "novalue"], [*TWO1_I, "--tol", "trace=-1"], [*TWO1_I, "--samples", "1"],
         ["--config", "/nonexistent/file.ini"]],
        ids=["no_family", "missing_key", "bad_param", "bad_tol", "few_samples", "missing_file"],
    )
    def test_usage_errors(self, capsys, extra):
        assert run(capsys, "verify", *extra)[0] == 2

    def test_tolerance_override(self, capsys):
        code, out, _ = run(capsys, "verify", *TWO1_I, "-p", "fiber2_k=3.99", "--tol", "res_block=0.1",
                           "--tol", "trace=0.1", "--tol", "gradR=1")
        assert code == 0 and json.loads(out)["tolerances"]["res_block"] == 0.1


class TestOde:
    def test_case_i(self, capsys, tmp_path):
        path = tmp_path / "traj.csv"
        code, out, _ = run(capsys, "ode", *TWO1_I, "--s0", "0.3", "--s-end", "1.2", "--step", "1e-3",
                           "-o", str(path))
        doc = json.loads(out)
        assert code == 0 and doc["X_error"] <= 1e-8
        assert "first_integral" in doc["monitors"]
        assert path.read_text().splitlines()[0].startswith("s,fp,X,Y,h1,h2,f")

    def test_step_too_large(self, capsys):
        code, _, err = run(capsys, "ode", *TWO1_I, "--s0", "0.3", "--s-end", "1.2", "--step", "0.5")
        assert code == 1 and json.loads(err)["error"] == "StepTooLarge"

    def test_single_warped_system(self, capsys):
        code, out, _ = run(capsys, "ode", "-p", "kind=TypeA", "-p", "h=sinh(s)", "-p", "f=-2*log(cosh(s))",
                           "-p", "m=2", "-p", "lambda=-5", "-p", "fiber_r=3", "-p", "fiber_k=1",
                           "-p", "fiber_model=RoundSphere", "-p", "domain_lo=0",
                           "--s0", "0.5", "--s-end", "1.5", "--step", "1e-3")
        doc = json.loads(out)
        assert code == 0 and doc["system"] == "one" and doc["fp_error"] <= 1e-8


class TestOracle:
    def test_case_iv(self, capsys):
        code, out, _ = run(capsys, "oracle", "-p", "kind=Two1", "-p", "case=iv", "-p", "m=2", "-p", "r=2",
                           "-p", "Lambda=-1", "-p", "fiber2_r=2", "-p", "fiber2_model=Hyperbolic", "--points", "2")
        doc = json.loads(out)
        assert code == 0 and doc["max_relative_difference"] <= 1e-5
        assert all(c["surviving"] == "B" for c in doc["d_cotton_weyl"])


class TestObstruction:
    def test_certified(self, capsys):
        code, out, _ = run(capsys, "obstruction", "--m", "2", "--count", "1000")
        doc = json.loads(out)
        assert code == 0 and doc["min"] > 0

    def test_seeded_output_is_stable(self, capsys):
        a = run(capsys, "--seed", "5", "obstruction", "--m", "2", "--count", "50")[1]
        b = run(capsys, "--seed", "5", "obstruction", "--m", "2", "--count", "50")[1]
        assert a == b

    def test_forced_zero_violates_distinctness(self, capsys):
        assert run(capsys, "obstruction", "--m", "2", "--zero")[0] == 2

    def test_m_below_one(self, capsys):
        code, _, err = run(capsys, "obstruction", "--m", "0.5")
        assert code == 2 and "m > 1" in err


def test_argparse_error_exit_code(capsys):
    assert run(capsys, "nonsense")[0] == 2
