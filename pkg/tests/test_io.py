"""Artifact writers: round-trip fidelity, atomicity, JSON encoding."""

import json

import numpy as np
import pytest

from lgqsmooth.analysis import efficiency_scan, snapshot_states, sweep_rpr
from lgqsmooth.io import (
    _fmt,
    build_manifest,
    load_system,
    snapshots_to_dict,
    steady_report_to_dict,
    write_efficiency_csv,
    write_estimation_csv,
    write_json,
    write_sweep_csv,
    write_trajectory_csv,
)
from lgqsmooth.model import OPOParams, build_opo, system_to_dict
from lgqsmooth.steady import steady_report


def _read_csv(path):
    text = path.read_text()
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, 200):
        assert float(_fmt(x)) == x
    assert _fmt(np.inf) == "inf"
    assert _fmt(0.1) == "0.10000000000000001"


class TestTrajectoryCSV:
    def test_contents(self, tmp_path, asym_run):
        traj, record, _ = asym_run
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, traj, record)
        header, rows = _read_csv(path)
        assert header == ["t", "x_true_1", "x_true_2", "yodt_1", "yudt_1"]
        assert len(rows) == record.y_o_dt.shape[0]
        k = 137
        assert float(rows[k][0]) == traj.grid.times[k]
        assert float(rows[k][1]) == traj.means[k, 0]
        assert float(rows[k][3]) == record.y_o_dt[k, 0]
        assert not (tmp_path / "traj.csv.tmp").exists()

    def test_rerun_byte_identical(self, tmp_path, asym_run):
        traj, record, _ = asym_run
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trajectory_csv(a, traj, record)
        write_trajectory_csv(b, traj, record)
        assert a.read_bytes() == b.read_bytes()


class TestEstimationCSV:
    def test_contents(self, tmp_path, asym_run):
        _, _, run = asym_run
        path = tmp_path / "est.csv"
        write_estimation_csv(path, run)
        header, rows = _read_csv(path)
        assert header[:6] == ["t", "xF_1", "xF_2", "VF_11", "VF_12", "VF_22"]
        assert header[-6:] == ["PT", "PF", "PS", "PSWV", "physical_S", "physical_SWV"]
        assert len(rows) == run.grid.n_steps + 1
        k = 500
        row = rows[k]
        assert float(row[1]) == run.filtered.means[k, 0]
        assert float(row[4]) == run.filtered.cov[k, 0, 1]
        assert float(row[header.index("xS_1")]) == run.smoother.means[k, 0]
        assert float(row[header.index("PF")]) == run.purity_filtered[k]
        assert row[header.index("physical_S")] in ("0", "1")


def test_sweep_csv(tmp_path):
    sweep = sweep_rpr(0.5, 8, refine=False)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, sweep)
    header, rows = _read_csv(path)
    assert header == ["theta_o", "theta_u", "PF", "PS", "PSWV", "RPR", "physical_SWV"]
    assert len(rows) == 64
    # row-major: the second row advances theta_u, not theta_o
    assert float(rows[1][0]) == float(rows[0][0])
    assert float(rows[1][1]) != float(rows[0][1])
    assert float(rows[10][5]) == sweep.values["RPR"][1, 2]


def test_efficiency_csv(tmp_path):
    scan = efficiency_scan(np.pi / 6, 0.2, np.geomspace(1e-3, 0.5, 5))
    path = tmp_path / "scan.csv"
    write_efficiency_csv(path, scan)
    header, rows = _read_csv(path)
    assert header == ["eta_o", "PF", "PS", "PSWV", "RPR", "PF_asym", "RPR_fit"]
    assert len(rows) == 5
    assert float(rows[2][1]) == scan.values["P_F"][2]
    # no fit anchor on this grid: the fit column is nan, and it survives
    # the CSV round trip as such
    assert np.isnan(float(rows[0][6]))


class TestJSON:
    def test_non_finite_encoding(self, tmp_path):
        path = tmp_path / "x.json"
        write_json(path, {"a": np.inf, "b": -np.inf, "c": np.nan,
                          "d": np.array([1.0, np.inf]), "e": np.True_,
                          "f": np.int64(3)})
        data = json.loads(path.read_text())
        assert data == {"a": "inf", "b": "-inf", "c": None,
                        "d": [1.0, "inf"], "e": True, "f": 3}

    def test_steady_report_dict(self, tmp_path, opo_default):
        rep = steady_report(opo_default)
        d = steady_report_to_dict(rep)
        path = tmp_path / "steady.json"
        write_json(path, d)
        data = json.loads(path.read_text())
        assert data["stationary"] is True
        assert data["P_F"] == rep.p_f
        assert np.allclose(np.array(data["V_T"]), rep.v_t)
        assert data["notes"] == []

    def test_divergent_report_serializes(self, tmp_path):
        rep = steady_report(build_opo(OPOParams(theta_o=np.pi / 2)))
        path = tmp_path / "div.json"
        write_json(path, steady_report_to_dict(rep))
        data = json.loads(path.read_text())
        assert data["V_F"][0][0] == "inf"
        assert data["RPR"] is None
        assert data["rpr_defined"] is False

    def test_snapshots_dict(self, tmp_path, opo_asym, asym_run):
        traj, record, run = asym_run
        snaps = snapshot_states(opo_asym, record, 1.0, trajectory=traj, run=run)
        d = snapshots_to_dict(snaps, 1.0)
        path = tmp_path / "snap.json"
        write_json(path, d)
        data = json.loads(path.read_text())
        assert data["time"] == 1.0
        assert [s["label"] for s in data["states"]] == [
            "unconditioned", "filtered", "smoothed", "true", "SWV"]
        seg = data["states"][0]["contour"]
        assert seg[0][0] is None  # NaN coordinate of the divergent axis


def test_manifest_fields():
    m = build_manifest("estimate", {"dt": 1e-3}, 7)
    assert m["command"] == "estimate"
    assert m["config"] == {"dt": 1e-3}
    assert m["seed"] == 7
    assert m["backend"] in ("cython", "python")
    assert set(m["versions"]) == {"lgqsmooth", "numpy", "python"}
    assert "T" in m["timestamp"]
    assert build_manifest("x", {}, None)["seed"] is None


def test_load_system_round_trip(tmp_path, opo_asym):
    path = tmp_path / "system.json"
    write_json(path, system_to_dict(opo_asym))
    loaded = load_system(path)
    assert np.array_equal(loaded.A, opo_asym.A)
    assert np.array_equal(loaded.C_u, opo_asym.C_u)

    opo_path = tmp_path / "opo.json"
    write_json(opo_path, {"opo": {"theta_o": 0.25, "eta_o": 0.5}})
    sys_ = load_system(opo_path)
    ref = build_opo(OPOParams(theta_o=0.25, eta_o=0.5))
    assert np.array_equal(sys_.C_o, ref.C_o)
