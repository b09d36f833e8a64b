import json

import pytest

from osearch.cli import build_parser, main
from osearch.driver import read_certificate


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rate(capsys):
    code, out, _ = run_cli(capsys, "rate", "--k", "4", "--n", "605")
    assert code == 0
    assert float(out) == pytest.approx(0.433, abs=1e-3)


def test_feasible_then_verify_then_plot(capsys, tmp_path):
    cert = tmp_path / "c.json"
    code, out, _ = run_cli(capsys, "feasible", "--k", "2", "--n", "6", "--out", str(cert))
    assert code == 0 and "FEASIBLE" in out
    assert read_certificate(cert).n == 6

    code, out, _ = run_cli(capsys, "verify", str(cert))
    assert code == 0 and out.startswith("PASS")

    code, out, _ = run_cli(capsys, "plot", str(cert), "--out", str(tmp_path / "fig"))
    assert code == 0
    assert (tmp_path / "fig.svg").exists() and (tmp_path / "fig.csv").exists()


def test_infeasible_exit_two(capsys, tmp_path):
    cert = tmp_path / "c.json"
    code, _, _ = run_cli(capsys, "feasible", "--k", "1", "--n", "3", "--out", str(cert))
    assert code == 2
    # a sound INFEASIBLE certificate verifies
    code, out, _ = run_cli(capsys, "verify", str(cert))
    assert code == 0 and "INFEASIBLE" in out
    assert run_cli(capsys, "plot", str(cert), "--out", str(tmp_path / "x"))[0] == 1


def test_maxn(capsys, tmp_path):
    out_json = tmp_path / "m.json"
    code, out, _ = run_cli(capsys, "maxn", "--k", "2", "--out", str(out_json))
    assert code == 0 and "n_max=6" in out
    assert json.loads(out_json.read_text())["n_max"] == 6


def test_long_flag_required_for_k5(capsys):
    code, _, err = run_cli(capsys, "feasible", "--k", "5", "--n", "7265")
    assert code == 1 and "--long" in err
    code, _, err = run_cli(capsys, "maxn", "--k", "6")
    assert code == 1


def test_bad_arguments_exit_one(capsys, tmp_path):
    assert run_cli(capsys, "feasible", "--k", "2", "--n", "6", "--epsilon", "0.1")[0] == 1
    assert run_cli(capsys, "maxn", "--k", "2", "--epsilon", "0.1")[0] == 1
    assert run_cli(capsys, "verify", str(tmp_path / "missing.json"))[0] == 1
    assert run_cli(capsys, "rate", "--k", "2", "--n", "1")[0] == 1
    with pytest.raises(SystemExit):
        build_parser().parse_args(["feasible", "--k", "2"])


def test_iteration_cap_then_resume(capsys, tmp_path):
    ck = tmp_path / "ck.json"
    code, out, _ = run_cli(
        capsys, "feasible", "--k", "3", "--n", "56", "--max-iters", "2", "--checkpoint", str(ck)
    )
    assert code == 3 and "INCONCLUSIVE" in out
    assert json.loads(ck.read_text())["n"] == 56
    code, out, _ = run_cli(capsys, "feasible", "--k", "3", "--n", "56", "--resume", str(ck))
    assert code == 0


def test_simplex_backend(capsys):
    assert run_cli(capsys, "feasible", "--k", "2", "--n", "6", "--solver", "simplex")[0] == 0
    assert run_cli(capsys, "feasible", "--k", "2", "--n", "6", "--solver", "nope")[0] == 1
