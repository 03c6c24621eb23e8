from pathlib import Path

import numpy as np
from pytest import CaptureFixture, mark, raises
from sympy import Symbol

from fieldrouth import Chart, Grid, canonical, parse_expr, shipped_model, soliton
from fieldrouth.cli import EXIT_INVALID, EXIT_OK, EXIT_TOLERANCE, run_command
from fieldrouth.grid import evaluate_on_grid
from fieldrouth.kdv import soliton_potential

kdv_chart = Chart(("t", "x"), ("phi", "psi"), ("mu_1", "mu_2"))
reduced_chart = Chart(("t", "x"), ("psi", "sigma", "rho"), ("mu_1", "mu_2"))


def run(capsys: CaptureFixture[str], *argv: str) -> tuple[int, str, str]:
    status = run_command(list(argv))
    captured = capsys.readouterr()
    return status, captured.out, captured.err


def entries(out: str, separator: str = ": ") -> dict[str, str]:
    return dict(line.strip().split(separator, 1) for line in out.splitlines()
                if line.startswith("  ") and separator in line)


def assert_printed(printed: str, expected: str, chart: Chart) -> None:
    assert canonical(parse_expr(printed.removesuffix(" = 0"), chart)
                     - parse_expr(expected, chart)) == 0


def test_derive(capsys: CaptureFixture[str]) -> None:
    status, out, _ = run(capsys, "derive", "kdv")

    assert status == EXIT_OK
    assert out.startswith("Euler-Lagrange equations:\n")
    equations = entries(out)
    assert_printed(equations["phi"], "phi_tx + 6*phi_x*phi_xx + psi_xx", kdv_chart)
    assert_printed(equations["psi"], "phi_xx - psi", kdv_chart)
    multipliers = entries(out, " = ")
    assert_printed(multipliers["p_phi_x"], "1/2*phi_t + 3*phi_x^2 + psi_x", kdv_chart)
    assert_printed(multipliers["p_psi_t"], "0", kdv_chart)


def test_output_is_deterministic(capsys: CaptureFixture[str]) -> None:
    first = run(capsys, "reduce", "kdv", "--flat")
    second = run(capsys, "reduce", "kdv", "--flat")

    assert first == second


def test_null_divergence_leaves_equations_unchanged(capsys: CaptureFixture[str],
                                                    tmp_path: Path) -> None:
    lagrangian = "1/2*phi_t*phi_x + phi_x^3 + phi_x*psi_x + 1/2*psi^2"
    text = shipped_model("kdv")
    assert lagrangian in text
    path = tmp_path / "divergence.model"
    path.write_text(text.replace(lagrangian, f"{lagrangian} + x*psi_t + t*psi_x + phi_t"),
                    encoding="utf-8")

    _, original, _ = run(capsys, "derive", "kdv")
    status, modified, _ = run(capsys, "derive", str(path))

    assert status == EXIT_OK
    assert modified.split("Legendre")[0] == original.split("Legendre")[0]


def test_momentum(capsys: CaptureFixture[str]) -> None:
    status, out, _ = run(capsys, "momentum", "kdv")

    assert status == EXIT_OK
    assert "Momentum map:\n  J_phi = " in out
    assert "  mu_phi.eta.t = mu_2(t, x)\n" in out
    assert "  mu_phi.eta.x = -mu_1(t, x)\n" in out
    constraints = entries(out)
    assert_printed(constraints["phi.t"], "1/2*phi_x - mu_2(t, x)", kdv_chart)
    assert out.rstrip().splitlines()[-1].startswith("Closedness: closed if ")


def test_reduce_flat(capsys: CaptureFixture[str]) -> None:
    status, out, _ = run(capsys, "reduce", "kdv", "--flat")

    assert status == EXIT_OK
    values = entries(out, " = ")
    assert_printed(values["R_red"], "1/2*sigma*rho + rho^3 + rho*psi_x + 1/2*psi^2"
                                    " - mu_2(t, x)*sigma + mu_1(t, x)*rho", reduced_chart)
    assert values["d(omega_mu)"] == "0"
    equations = entries(out)
    assert_printed(equations["psi"], "rho_x - psi", reduced_chart)
    assert_printed(equations["sigma"], "mu_2(t, x) - 1/2*rho", reduced_chart)
    assert_printed(equations["rho"], "-1/2*sigma - 3*rho^2 - psi_x - mu_1(t, x)", reduced_chart)


def test_reduce_and_eliminate(capsys: CaptureFixture[str]) -> None:
    status, out, _ = run(capsys, "reduce", "kdv", "--eliminate")

    assert status == EXIT_OK
    elimination = out.split("Elimination:\n", 1)[1].splitlines()
    assert elimination[0] == "psi(t, x) = diff(rho(t, x), x)"
    assert elimination[1] == "mu_2(t, x) = rho(t, x)/2"
    assert elimination[-1].endswith(" = 0")


def test_reduce_model_file(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    path = tmp_path / "wave.model"
    path.write_text(shipped_model("wave"), encoding="utf-8")

    status, out, _ = run(capsys, "reduce", str(path))

    assert status == EXIT_OK
    assert "  R_red = " in out


def test_shipped(capsys: CaptureFixture[str]) -> None:
    status, out, _ = run(capsys, "shipped", "kdv")

    assert status == EXIT_OK
    assert out == shipped_model("kdv")


def test_unknown_shipped_model_is_a_usage_error(capsys: CaptureFixture[str]) -> None:
    with raises(SystemExit):
        run(capsys, "shipped", "missing")


def test_missing_model_fails(capsys: CaptureFixture[str]) -> None:
    status, _, err = run(capsys, "derive", "no-such-model")

    assert status == EXIT_INVALID
    assert "no-such-model" in err


def test_invalid_model_fails(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    path = tmp_path / "broken.model"
    path.write_text("[base]\nt, x\n[fields]\nu\n[lagrangian]\nu_t*v\n", encoding="utf-8")

    status, _, err = run(capsys, "derive", str(path))

    assert status == EXIT_INVALID
    assert "line 6 [lagrangian]" in err


def test_verify_kdv(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    report = tmp_path / "report.csv"

    status, _, err = run(capsys, "verify-kdv", "--nx", "401", "--nt", "101", "--tmax", "5",
                         "--out", str(report))

    assert status == EXIT_OK, err
    lines = report.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "stage,quantity,max_norm,l2_norm,h,observed_order"
    assert lines[1].startswith("soliton,kdv_exact,")


def test_verify_kdv_with_tight_tolerance(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    report = tmp_path / "report.csv"

    status, _, err = run(capsys, "verify-kdv", "--nx", "401", "--nt", "101", "--tmax", "5",
                         "--tol", "1e-8", "--out", str(report))

    assert status == EXIT_TOLERANCE
    assert "Stage soliton failed for kdv_fd" in err
    assert report.exists()


def test_verify_kdv_on_unresolved_grid(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    status, _, err = run(capsys, "verify-kdv", "--nx", "41", "--out", str(tmp_path / "r.csv"))

    assert status == EXIT_INVALID
    assert "does not resolve the soliton" in err


def _write_section(path: Path, shift: float) -> Grid:
    grid = Grid.of(t=(0.0, 1.0, 11), x=(-4.0, 4.0, 81))
    t, x = grid.mesh
    rho = evaluate_on_grid(soliton(1), grid, {})
    psi = evaluate_on_grid(soliton(1).diff(Symbol("x")), grid, {})
    columns = (t, x, psi, -rho + shift * x, rho)
    rows = np.column_stack([c.ravel() for c in columns])
    np.savetxt(path, rows, delimiter=",", header="t,x,psi,sigma,rho", comments="")
    return grid


def test_reconstruct(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    data, out = tmp_path / "section.csv", tmp_path / "lifted.csv"
    grid = _write_section(data, 0.0)

    status, stdout, _ = run(capsys, "reconstruct", "kdv", "--data", str(data), "--out", str(out))

    assert status == EXIT_OK
    assert stdout.startswith("Flat residual: ")
    lifted = np.loadtxt(out, delimiter=",", skiprows=1)
    assert out.read_text(encoding="utf-8").startswith("t,x,phi\n")
    expected = evaluate_on_grid(soliton_potential(1), grid, {}).ravel()
    assert np.max(np.abs(lifted[:, 2] - (expected - expected[0]))) < 5e-3


def test_reconstruct_to_stdout(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    data = tmp_path / "section.csv"
    grid = _write_section(data, 0.0)

    status, stdout, _ = run(capsys, "reconstruct", "kdv", "--data", str(data))

    assert status == EXIT_OK
    assert len(stdout.splitlines()) == 2 + int(np.prod(grid.shape))


def test_reconstruct_obstructed_section(capsys: CaptureFixture[str], tmp_path: Path) -> None:
    data = tmp_path / "section.csv"
    _write_section(data, 1.0)

    status, _, err = run(capsys, "reconstruct", "kdv", "--data", str(data))

    assert status == EXIT_TOLERANCE
    assert "flat condition" in err


@mark.parametrize("content", [
    "t,x,psi,sigma\n0,0,0,0\n",
    "t,x,psi,sigma,rho\n0,0,0,0,0\n0,1,0,0,0\n1,0,0,0,0\n",
])
def test_reconstruct_invalid_data(capsys: CaptureFixture[str], tmp_path: Path,
                                  content: str) -> None:
    data = tmp_path / "section.csv"
    data.write_text(content, encoding="utf-8")

    status, _, _ = run(capsys, "reconstruct", "kdv", "--data", str(data))

    assert status == EXIT_INVALID
