"""CSV and JSON artifact writers shared by the command-line interface.

All floats are printed at 17 significant digits so a rerun with the same
configuration reproduces every file byte for byte; CSV uses '.' decimals
and ',' separators with no locale dependence.  Non-finite values appear
as inf/-inf/nan in CSV and as "inf"/"-inf"/null in JSON.  Writers stage
through a temporary file and rename, so a crash mid-write never leaves a
partial artifact behind.
"""

from __future__ import annotations

import json
import os
import platform
from datetime import datetime, timezone

import numpy as np

from . import __version__
from ._core import BACKEND
from .model import system_from_dict

__all__ = [
    "write_trajectory_csv",
    "write_estimation_csv",
    "write_sweep_csv",
    "write_efficiency_csv",
    "write_json",
    "steady_report_to_dict",
    "mc_report_to_dict",
    "snapshots_to_dict",
    "build_manifest",
    "load_system",
]


def _fmt(x):
    return "%.17g" % float(x)


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def _upper_indices(M):
    return [(i, j) for i in range(M) for j in range(i, M)]


def write_trajectory_csv(path, traj, record):
    """One row per step: time, true mean, and the record increments."""
    M = traj.means.shape[1]
    L_o = record.y_o_dt.shape[1]
    L_u = record.y_u_dt.shape[1] if record.y_u_dt is not None else 0
    header = (["t"] + [f"x_true_{i + 1}" for i in range(M)]
              + [f"yodt_{r + 1}" for r in range(L_o)]
              + [f"yudt_{r + 1}" for r in range(L_u)])
    times = traj.grid.times
    rows = []
    for k in range(record.y_o_dt.shape[0]):
        row = [_fmt(times[k])]
        row += [_fmt(v) for v in traj.means[k]]
        row += [_fmt(v) for v in record.y_o_dt[k]]
        if L_u:
            row += [_fmt(v) for v in record.y_u_dt[k]]
        rows.append(row)
    _csv(path, header, rows)


def write_estimation_csv(path, run):
    """One row per grid point: filtered, smoothed and SWV moments (upper
    triangles of the covariances), the four purity series, and the 0/1
    physicality flags of the smoothed and SWV states."""
    M = run.filtered.means.shape[1]
    iu = _upper_indices(M)
    header = ["t"]
    for tag in ("F", "S", "SWV"):
        header += [f"x{tag}_{i + 1}" for i in range(M)]
        header += [f"V{tag}_{i + 1}{j + 1}" for i, j in iu]
    header += ["PT", "PF", "PS", "PSWV", "physical_S", "physical_SWV"]
    times = run.grid.times
    blocks = (
        (run.filtered.means, run.filtered.cov),
        (run.smoother.means, run.smoother.cov),
        (run.smoother.swv_means, run.smoother.swv_cov),
    )
    rows = []
    for k in range(times.shape[0]):
        row = [_fmt(times[k])]
        for means, cov in blocks:
            row += [_fmt(v) for v in means[k]]
            row += [_fmt(cov[k, i, j]) for i, j in iu]
        row += [_fmt(run.purity_true[k]), _fmt(run.purity_filtered[k]),
                _fmt(run.purity_smoothed[k]), _fmt(run.purity_swv[k]),
                "%d" % bool(run.physical_smoothed[k]),
                "%d" % bool(run.physical_swv[k])]
        rows.append(row)
    _csv(path, header, rows)


def write_sweep_csv(path, sweep):
    """Phase-sweep table, one row per (theta_o, theta_u) cell in row-major
    grid order."""
    to = sweep.axes["theta_o"]
    tu = sweep.axes["theta_u"]
    v = sweep.values
    header = ["theta_o", "theta_u", "PF", "PS", "PSWV", "RPR", "physical_SWV"]
    rows = []
    for i in range(to.shape[0]):
        for j in range(tu.shape[0]):
            rows.append([_fmt(to[i]), _fmt(tu[j]),
                         _fmt(v["P_F"][i, j]), _fmt(v["P_S"][i, j]),
                         _fmt(v["P_SWV"][i, j]), _fmt(v["RPR"][i, j]),
                         "%d" % bool(v["physical_SWV"][i, j])])
    _csv(path, header, rows)


def write_efficiency_csv(path, sweep):
    eta = sweep.axes["eta_o"]
    v = sweep.values
    header = ["eta_o", "PF", "PS", "PSWV", "RPR", "PF_asym", "RPR_fit"]
    rows = []
    for i in range(eta.shape[0]):
        rows.append([_fmt(eta[i]), _fmt(v["P_F"][i]), _fmt(v["P_S"][i]),
                     _fmt(v["P_SWV"][i]), _fmt(v["RPR"][i]),
                     _fmt(v["PF_asym"][i]), _fmt(v["RPR_fit"][i])])
    _csv(path, header, rows)


def _jsonable(x):
    # inf survives as the string "inf" (JSON has no literal for it);
    # NaN becomes null
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def write_json(path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2) + "\n")


def steady_report_to_dict(report):
    return {
        "V_T": report.v_t,
        "V_F": report.v_f,
        "Lam_R": report.lam_r,
        "V_R": report.v_r,
        "V_S": report.v_s,
        "V_SWV": report.v_swv,
        "P_T": report.p_t,
        "P_F": report.p_f,
        "P_S": report.p_s,
        "P_SWV": report.p_swv,
        "RPR": report.rpr,
        "rpr_defined": report.rpr_defined,
        "abar_hurwitz": report.abar_hurwitz,
        "closed_loop_hurwitz": report.closed_loop_hurwitz,
        "stationary": report.stationary,
        "hbar": report.hbar,
        "notes": list(report.notes),
    }


def mc_report_to_dict(report):
    return {
        "n_traj": report.n_traj,
        "seed": report.seed,
        "probe_times": report.probe_times,
        "expected_filtered": report.expected_filtered,
        "expected_smoothed": report.expected_smoothed,
        "empirical_filtered": report.empirical_filtered,
        "empirical_smoothed": report.empirical_smoothed,
        "rel_error_filtered": report.rel_error_filtered,
        "rel_error_smoothed": report.rel_error_smoothed,
        "tolerance": report.tolerance,
        "abs_floor": report.abs_floor,
        "passed": report.passed,
        "trace_ordering": report.trace_ordering,
    }


def snapshots_to_dict(snaps, t):
    states = []
    for s in snaps:
        states.append({
            "label": s.label,
            "mean": s.state.mean,
            "cov": s.state.cov,
            "hbar": s.state.hbar,
            "divergent_axes": list(s.divergent_axes),
            "contour": s.contour,
        })
    return {"time": float(t), "states": states}


def build_manifest(command, config, seed):
    """Provenance record written next to every artifact: the resolved
    configuration, the seed, library versions, the active integration
    backend, and a timestamp (the one field that differs between
    reruns)."""
    return {
        "command": command,
        "config": config,
        "seed": None if seed is None else int(seed),
        "backend": BACKEND,
        "versions": {
            "lgqsmooth": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def load_system(path):
    """LGQSystem from a JSON description file (explicit matrices or an
    embedded "opo" parameter object)."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return system_from_dict(data)
