import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from gamecoding import cli
from gamecoding.errors import InfeasibleError

GOLDEN = Path(__file__).parent / "golden"
sys.path.insert(0, str(GOLDEN))
from regenerate import CASES  # noqa: E402


def close(a, b, rel=1e-12):
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(close(a[k], b[k], rel) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(close(x, y, rel) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return math.isclose(a, b, rel_tol=rel, abs_tol=1e-14)
    return a == b


def run(argv, capsys):
    status = cli.main(argv)
    out = capsys.readouterr()
    return status, out.out, out.err


class TestGoldenFiles:
    @pytest.mark.parametrize("name", sorted(CASES))
    def test_output_matches(self, name, tmp_path):
        target = tmp_path / name
        assert cli.main([*CASES[name], "--output", str(target)]) == 0
        got, want = target.read_text(), (GOLDEN / name).read_text()
        if name.endswith(".json"):
            assert close(json.loads(got), json.loads(want))
        else:
            assert got == want


class TestSubcommands:
    def test_solve_example1(self, capsys):
        status, out, _ = run(["solve", "example1"], capsys)
        assert status == 0 and json.loads(out)["eta_star"] == 6.75

    def test_curve_fig3_shape(self, capsys):
        status, out, _ = run(["curve", "--config", "fig3"], capsys)
        lines = out.split("\n")
        assert status == 0 and lines[0] == cli.CSV_HEADER
        assert lines[-1] == "" and len(lines) == 2 + 25 * 1000
        assert "\r" not in out
        assert len({ln.split(",")[0] for ln in lines[1:-1]}) == 25

    def test_curve_contains_equilibrium_point(self, capsys):
        _, out, _ = run(["curve", "fig3"], capsys)
        rows = [ln.split(",") for ln in out.splitlines()[1:]]
        row = next(r for r in rows if float(r[0]) == 6.75 and float(r[1]) == 0.807)
        assert float(row[2]) == pytest.approx(10.068331, abs=1e-6)

    def test_synthesize_at_given_point(self, capsys):
        status, out, _ = run(["synthesize", "example1", "--set", "synthesize.eta=2",
                              "--set", "synthesize.alpha=0.9"], capsys)
        doc = json.loads(out)
        assert status == 0 and len(doc["atoms"]) == 2 and doc["pa"] == pytest.approx(0.9)

    def test_simulate_with_explicit_adversary(self, capsys):
        spec = json.dumps({"eta": 2, "n_samples": 5000, "adversary": {"atoms": [{"z": 1, "w": 0.5}]}})
        status, out, _ = run(["simulate", "example1", "--set", f"simulate={spec}"], capsys)
        assert status == 0 and json.loads(out)["pa_hat"] == 1.0

    def test_simulate_dump(self, capsys, tmp_path):
        dump = tmp_path / "rounds.csv"
        spec = json.dumps({"eta": 3, "alpha": 0.5, "n_samples": 50})
        status, _, _ = run(["simulate", "example1", "--set", f"simulate={spec}", "--dump", str(dump)], capsys)
        lines = dump.read_text().splitlines()
        assert status == 0 and lines[0] == "u,y1,y2,accepted" and len(lines) == 51

    def test_seed_flag_is_deterministic(self, capsys):
        spec = json.dumps({"eta": 3, "alpha": 0.5, "n_samples": 10000})
        a = run(["simulate", "example1", "--set", f"simulate={spec}", "--seed", "3"], capsys)[1]
        b = run(["simulate", "example1", "--set", f"simulate={spec}", "--seed", "3", "--threads", "4"], capsys)[1]
        c = run(["simulate", "example1", "--set", f"simulate={spec}", "--seed", "4"], capsys)[1]
        assert a == b != c

    def test_verify_passes(self, capsys):
        status, out, _ = run(["verify", "example1", "--set", "verify.mc_samples=200000"], capsys)
        report = json.loads(out)
        assert status == 0 and report["passed"]
        assert {c["name"] for c in report["checks"]} == {
            "beta_vs_brute_force", "synthesized_noise_attains_beta",
            "stackelberg_vs_brute_force", "monte_carlo_agreement"}

    def test_verify_failure_exit_code(self, capsys, monkeypatch):
        def broken(*a, **k):
            return {"checks": [{"name": "x", "passed": False}], "passed": False}

        monkeypatch.setattr(cli, "run_verify", broken)
        assert run(["verify", "example1"], capsys)[0] == cli.EXIT_VERIFY


class TestErrors:
    def test_missing_file(self, capsys):
        status, _, err = run(["solve", "/no/such/file.json"], capsys)
        assert status == 1 and "not found" in err

    def test_bad_utility_reports_location(self, capsys):
        status, _, err = run(["solve", "example1", "--set", 'u_dc="-MMSE + * PA"'], capsys)
        assert status == 1 and "u_dc" in err and "offset 8" in err

    def test_schema_violation(self, capsys):
        status, _, err = run(["curve", "example1", "--set", "eta_grid=[1, 2]"], capsys)
        assert status == 1 and "eta" in err

    def test_unknown_subcommand(self, capsys):
        assert run(["plot", "example1"], capsys)[0] == 1

    def test_config_twice(self, capsys):
        assert run(["solve", "example1", "--config", "example2"], capsys)[0] == 1

    def test_computation_error(self, capsys, monkeypatch):
        def fail(*a, **k):
            raise InfeasibleError("no feasible pair")

        monkeypatch.setattr(cli, "solve_stackelberg", fail)
        status, _, err = run(["solve", "example1"], capsys)
        assert status == 2 and "no feasible pair" in err

    def test_bad_json_location(self, capsys, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{\n  \"eta_grid\": [2,\n}")
        status, _, err = run(["solve", str(p)], capsys)
        assert status == 1 and ":3:" in err

    def test_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("GOC_THREADS", "abc")
        assert run(["solve", "example1"], capsys)[0] == 1
        monkeypatch.setenv("GOC_THREADS", "2")
        assert run(["solve", "example1"], capsys)[0] == 0


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "gamecoding", "solve", "example1", "-o", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(out.read_text())["eta_star"] == 6.75
