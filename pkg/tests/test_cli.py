"""End-to-end command line behaviour: artifacts, exit codes, determinism."""

import json

import numpy as np
import pytest

from diracgreen import cli
from diracgreen.clifford import build_dirac_rep
from diracgreen.kernel import constant_V_exact

CONST_1D = {
    "dimension": 1,
    "potential": {"kind": "constant", "params": {"value": -0.6}},
    "x_star": [0.5],
    "y_star": [-0.5],
    "h_list": [0.2, 0.1, 0.05],
}
CONST_2D = {
    "dimension": 2,
    "potential": {"kind": "constant", "params": {"value": -0.6}},
    "x_star": [0.5, 0.0],
    "y_star": [-0.5, 0.0],
    "h_list": [0.2, 0.1],
}
BUMP_1D = {
    "dimension": 1,
    "potential": {"kind": "bump_well",
                  "params": {"base": -0.6, "depth": 0.3, "radius": 2.0}},
    "x_star": [1.0],
    "y_star": [-1.0],
    "h_list": [0.2, 0.1],
}
BUMP_3D = {
    "dimension": 3,
    "potential": {"kind": "bump_well",
                  "params": {"base": -0.6, "depth": 0.3, "radius": 2.0}},
    "x_star": [1.0, 0.4, -0.2],
    "y_star": [-1.0, -0.3, 0.2],
    "h_list": [0.1],
}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run_to_file(tmp_path, command, config, extra=(), name="out.txt"):
    out = tmp_path / name
    code = cli.main([command, "--config", write_config(tmp_path, config),
                     "--out", str(out), *extra])
    return code, (out.read_text() if out.exists() else "")


# ------------------------------------------------------------------ selfcheck

def test_selfcheck_single_dimension(tmp_path):
    out = tmp_path / "report.json"
    assert cli.main(["selfcheck", "--dim", "1", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    assert report["n_checks"] >= 20
    for check in report["checks"]:
        assert set(check) == {"name", "residual", "tol", "pass"}
        assert check["pass"]


def test_selfcheck_fault_injection(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = cli.main(["selfcheck", "--dim", "1", "--inject-fault", "clifford",
                     "--out", str(out)])
    assert code == 1
    assert "clifford_relations_d1" in capsys.readouterr().err
    report = json.loads(out.read_text())
    assert not report["passed"]
    bad = [c for c in report["checks"] if not c["pass"]]
    assert [c["name"] for c in bad] == ["clifford_relations_d1"]


# ------------------------------------------------------------------- geodesic

def test_geodesic_json_artifact(tmp_path):
    code, text = run_to_file(tmp_path, "geodesic", CONST_2D)
    assert code == 0
    payload = json.loads(text)
    assert payload["tau"] == pytest.approx(0.75, abs=1e-9)
    assert payload["dA"] == pytest.approx(0.8, abs=1e-9)
    assert payload["bordered_det"] == pytest.approx(20.0 / 9.0, rel=1e-8)
    assert payload["det_exp_prime"] == pytest.approx(1.0, abs=1e-7)
    assert payload["conjugate"] is False
    assert payload["uniqueness"]["n_starts"] == 8
    assert payload["uniqueness"]["n_distinct"] == 1


def test_geodesic_conjugacy_exit(tmp_path, capsys):
    cfg = dict(CONST_2D, shooting={"conjugacy_tol": 1e6})
    code, _ = run_to_file(tmp_path, "geodesic", cfg)
    assert code == 3
    assert "near-conjugate" in capsys.readouterr().err


# --------------------------------------------------------------------- kernel

KERNEL_HEADER = ("h,g00_re,g00_im,g01_re,g01_im,g10_re,g10_im,g11_re,g11_im,"
                 "dA,det_exp_prime,ratio_re,ratio_im,abs_ratio_minus_1")


def test_kernel_csv_contract(tmp_path):
    code, text = run_to_file(tmp_path, "kernel", CONST_1D)
    assert code == 0
    lines = text.strip().split("\n")
    assert lines[0] == KERNEL_HEADER
    rows = [ln for ln in lines[1:] if not ln.startswith("#")]
    assert len(rows) == 3
    for row, h in zip(rows, (0.2, 0.1, 0.05)):
        cells = row.split(",")
        assert len(cells) == 14
        assert float(cells[0]) == h
        assert float(cells[9]) == pytest.approx(0.8, abs=1e-12)   # dA
        assert float(cells[13]) <= 1e-9                           # 1D is exact
    assert lines[-1].startswith("# slope = ")


def test_kernel_output_is_deterministic(tmp_path):
    _, first = run_to_file(tmp_path, "kernel", CONST_1D, name="a.csv")
    _, second = run_to_file(tmp_path, "kernel", CONST_1D, name="b.csv")
    assert first == second


def test_kernel_h_list_override(tmp_path):
    code, text = run_to_file(tmp_path, "kernel", CONST_1D,
                             extra=("--h-list", "0.1,0.05"))
    assert code == 0
    rows = [ln for ln in text.strip().split("\n")[1:] if not ln.startswith("#")]
    assert [float(r.split(",")[0]) for r in rows] == [0.1, 0.05]


def test_kernel_rejects_nonconstant_potential(tmp_path):
    code, _ = run_to_file(tmp_path, "kernel", BUMP_1D)
    assert code == 2


# ----------------------------------------------------------------- validate1d

def test_validate1d_artifact(tmp_path):
    code, text = run_to_file(tmp_path, "validate1d", BUMP_1D)
    assert code == 0
    lines = text.strip().split("\n")
    assert lines[0] == "h,dA,ratio_re,ratio_im,abs_ratio_minus_1"
    devs = [float(ln.split(",")[4]) for ln in lines[1:3]]
    assert devs[1] < devs[0]          # deviation shrinks with h
    assert lines[-2].startswith("# slope = ")
    assert lines[-1].startswith("# adjoint_residual = ")
    assert float(lines[-1].split("=")[1]) <= 1e-8


def test_validate1d_constant_control(tmp_path):
    code, text = run_to_file(tmp_path, "validate1d", CONST_1D)
    assert code == 0
    for line in text.strip().split("\n")[1:4]:
        assert float(line.split(",")[4]) <= 1e-9


def test_validate1d_requires_dimension_one(tmp_path):
    code, _ = run_to_file(tmp_path, "validate1d", CONST_2D)
    assert code == 2


# ------------------------------------------------------------------- constant

def test_constant_rows_match_library(tmp_path):
    code, text = run_to_file(tmp_path, "constant", CONST_2D)
    assert code == 0
    lines = text.strip().split("\n")
    rep = build_dirac_rep(2)
    for line in lines[1:]:
        cells = [float(c) for c in line.split(",")]
        h = cells[0]
        got = np.array(cells[1::2][:4]) + 1j * np.array(cells[2::2][:4])
        ref = constant_V_exact(rep, -0.6, [0.5, 0.0], [-0.5, 0.0], h).ravel()
        np.testing.assert_allclose(got, ref, rtol=1e-14)


def test_constant_emits_to_stdout_without_out(tmp_path, capsys):
    code = cli.main(["constant", "--config", write_config(tmp_path, CONST_1D)])
    assert code == 0
    assert capsys.readouterr().out.startswith("h,g00_re")


# ------------------------------------------------------------------------ bmt

def test_bmt_artifact(tmp_path):
    code, text = run_to_file(tmp_path, "bmt", BUMP_3D)
    assert code == 0
    lines = text.strip().split("\n")
    assert lines[0] == "t,s1,s2,s3,abs_s,bmt2_residual"
    rows = [ln for ln in lines[1:] if not ln.startswith("#")]
    assert len(rows) == 201
    for row in rows[:: 50]:
        cells = [float(c) for c in row.split(",")]
        assert cells[4] == pytest.approx(1.0, abs=1e-9)   # Bloch norm
    footers = {ln.split(" = ")[0]: ln.split(" = ")[1]
               for ln in lines[1:] if ln.startswith("#")}
    assert float(footers["# unitarity_defect"]) <= 1e-9
    assert float(footers["# residual_left_inverse"]) <= 1e-6
    assert footers["# best"] == "left_inverse"
    assert footers["# passed"] == "true"


def test_bmt_requires_dimension_three(tmp_path):
    code, _ = run_to_file(tmp_path, "bmt", CONST_2D)
    assert code == 2


# ------------------------------------------------------------- config handling

@pytest.mark.parametrize("mutate", [
    lambda c: c.pop("potential"),
    lambda c: c.update(extra_field=1),
    lambda c: c.update(dimension=0),
    lambda c: c.update(x_star=[0.5]),                    # wrong length for d=2
    lambda c: c.update(y_star=c["x_star"]),              # coincident endpoints
    lambda c: c.update(h_list=[0.1, 0.2]),               # not decreasing
    lambda c: c.update(h_list=[2.0, 0.1]),               # h outside (0, 1]
    lambda c: c.update(potential={"kind": "nope"}),
    lambda c: c.update(ode={"bogus": 1.0}),
    lambda c: c.update(shooting={"allow_conjugate": True}),
])
def test_config_rejection_paths(tmp_path, mutate, capsys):
    cfg = json.loads(json.dumps(CONST_2D))
    mutate(cfg)
    code, _ = run_to_file(tmp_path, "geodesic", cfg)
    assert code == 2
    assert capsys.readouterr().err.startswith("config error:")


def test_missing_and_unreadable_configs(tmp_path, capsys):
    assert cli.main(["geodesic"]) == 2
    assert cli.main(["geodesic", "--config", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["geodesic", "--config", str(bad)]) == 2
    capsys.readouterr()


def test_bad_h_list_override(tmp_path):
    code, _ = run_to_file(tmp_path, "kernel", CONST_1D, extra=("--h-list", "0.05,0.1"))
    assert code == 2


def test_config_round_trip_is_a_fixed_point():
    cfg = cli.RunConfig.from_dict(json.loads(json.dumps(BUMP_3D)))
    once = cfg.to_dict()
    again = cli.RunConfig.from_dict(once).to_dict()
    assert once == again


def test_out_path_from_config(tmp_path):
    target = tmp_path / "from_config.csv"
    cfg = dict(CONST_1D, out=str(target))
    code = cli.main(["constant", "--config", write_config(tmp_path, cfg)])
    assert code == 0
    assert target.read_text().startswith("h,g00_re")
