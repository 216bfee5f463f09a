"""File formats: canonical JSON for structured data, CSV for bulk numbers.

JSON is emitted with sorted keys and decimal float text with 17
significant digits, which round-trips binary64 exactly, so re-reading and
re-writing a file reproduces it byte for byte. Matrices are dense nested
lists in row-major order. CSV files use the same float text.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .discretize import LumpedPhs
from .errors import ValidationError
from .model import BcPhsSpec, ConstantCoefficients
from .simulate import DeformationField, SimulationResult, SpilloverReport
from .synthesis import ControllerRealization

__all__ = [
    "canonical_json_dumps",
    "dump_json",
    "load_json",
    "system_to_dict",
    "system_from_dict",
    "controller_to_dict",
    "controller_from_dict",
    "bcphs_to_dict",
    "bcphs_from_dict",
    "write_matrix_csv",
    "write_eigenvalues_csv",
    "write_spillover_csv",
    "write_trajectory_csv",
    "write_deformation_csv",
]


def _fmt(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite floats are not serializable")
    return format(float(x), ".17g")


def _emit(obj, out: io.StringIO, indent: int):
    pad = "  " * indent
    if obj is None:
        out.write("null")
    elif obj is True:
        out.write("true")
    elif obj is False:
        out.write("false")
    elif isinstance(obj, str):
        out.write('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(_fmt(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), out, indent)
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.write("[]")
            return
        flat = all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj)
        if flat:
            out.write("[" + ", ".join(
                str(int(v)) if isinstance(v, (int, np.integer)) else _fmt(v)
                for v in obj) + "]")
            return
        out.write("[\n")
        for i, item in enumerate(obj):
            out.write(pad + "  ")
            _emit(item, out, indent + 1)
            out.write(",\n" if i + 1 < len(obj) else "\n")
        out.write(pad + "]")
    elif isinstance(obj, dict):
        keys = sorted(obj)
        if not keys:
            out.write("{}")
            return
        out.write("{\n")
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise ValueError("JSON object keys must be strings")
            out.write(pad + "  ")
            _emit(key, out, indent + 1)
            out.write(": ")
            _emit(obj[key], out, indent + 1)
            out.write(",\n" if i + 1 < len(keys) else "\n")
        out.write(pad + "}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json_dumps(obj) -> str:
    out = io.StringIO()
    _emit(obj, out, 0)
    return out.getvalue()


def dump_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json_dumps(obj) + "\n")
    return path


def load_json(path) -> dict:
    import json

    with open(path) as fh:
        return json.load(fh)


def _matrix(data, name) -> np.ndarray:
    try:
        M = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, "not a numeric matrix") from exc
    return M


def system_to_dict(sys: LumpedPhs) -> dict:
    data = {
        "kind": "lumped_phs",
        "n_state": sys.n_c,
        "n_channels": sys.m,
        "h": sys.h,
        "J": sys.J,
        "R": sys.R,
        "Q": sys.Q,
        "B": sys.B,
    }
    if sys.builder is not None:
        data["builder"] = sys.builder
        data["n_per_variable"] = sys.n_per_variable
        data["domain"] = list(sys.domain)
    return data


def system_from_dict(data: dict) -> LumpedPhs:
    if data.get("kind") != "lumped_phs":
        raise ValidationError("kind", "expected a 'lumped_phs' file")
    domain = data.get("domain")
    return LumpedPhs(
        J=_matrix(data["J"], "J"), R=_matrix(data["R"], "R"),
        Q=_matrix(data["Q"], "Q"), B=_matrix(data["B"], "B"),
        h=float(data.get("h", 1.0)),
        builder=data.get("builder"),
        n_per_variable=data.get("n_per_variable"),
        domain=tuple(domain) if domain is not None else None,
    )


def controller_to_dict(ctrl: ControllerRealization,
                       certificate: Optional[dict] = None) -> dict:
    data = {
        "kind": "spr_controller",
        "order": ctrl.order,
        "n_channels": ctrl.m,
        "J_c": ctrl.J_c,
        "R_c": ctrl.R_c,
        "Q_c": ctrl.Q_c,
        "B_c": ctrl.B_c,
        "B_ref": ctrl.B_ref,
        "K": ctrl.K,
        "L": ctrl.L,
    }
    if certificate is not None:
        data["certificate"] = certificate
    return data


def controller_from_dict(data: dict) -> Tuple[ControllerRealization, Optional[dict]]:
    if data.get("kind") != "spr_controller":
        raise ValidationError("kind", "expected a 'spr_controller' file")
    ctrl = ControllerRealization(
        J_c=_matrix(data["J_c"], "J_c"), R_c=_matrix(data["R_c"], "R_c"),
        Q_c=_matrix(data["Q_c"], "Q_c"), B_c=_matrix(data["B_c"], "B_c"),
        B_ref=_matrix(data["B_ref"], "B_ref"), K=_matrix(data["K"], "K"),
        L=_matrix(data["L"], "L"))
    return ctrl, data.get("certificate")


def bcphs_to_dict(spec: BcPhsSpec) -> dict:
    if not isinstance(spec.L, ConstantCoefficients):
        raise ValidationError(
            "L", "only constant diagonal coefficient fields are serializable")
    return {
        "kind": "bc_phs",
        "n": spec.n,
        "P1": spec.P1,
        "P0": spec.P0,
        "G0": spec.G0,
        "L": {"kind": "constant_diagonal", "values": spec.L.values},
        "domain": list(spec.domain),
        "W": spec.W,
        "Wtilde": spec.Wtilde,
    }


def bcphs_from_dict(data: dict) -> BcPhsSpec:
    if data.get("kind") != "bc_phs":
        raise ValidationError("kind", "expected a 'bc_phs' file")
    L = data["L"]
    if L.get("kind") != "constant_diagonal":
        raise ValidationError("L.kind", "only 'constant_diagonal' is supported")
    return BcPhsSpec(
        n=int(data["n"]), P1=_matrix(data["P1"], "P1"),
        P0=_matrix(data["P0"], "P0"), G0=_matrix(data["G0"], "G0"),
        L=ConstantCoefficients(np.asarray(L["values"], dtype=float)),
        domain=tuple(data["domain"]), W=_matrix(data["W"], "W"),
        Wtilde=_matrix(data["Wtilde"], "Wtilde"))


def _write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    return path


def write_matrix_csv(M, path) -> Path:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    header = [f"c{j}" for j in range(M.shape[1])]
    rows = ([_fmt(v) for v in row] for row in M)
    return _write_csv(path, header, rows)


def write_eigenvalues_csv(labeled_spectra, path) -> Path:
    """labeled_spectra: iterable of (label, complex array)."""
    rows = []
    for label, ev in labeled_spectra:
        for lam in np.asarray(ev, dtype=complex).ravel():
            rows.append([_fmt(lam.real), _fmt(lam.imag), label])
    return _write_csv(path, ["re", "im", "label"], rows)


def write_spillover_csv(report: SpilloverReport, path) -> Path:
    rows = []
    for row in report.rows:
        if row.error is None:
            rows.append([str(row.order), str(row.n_states),
                         _fmt(row.max_real_part),
                         "true" if row.stable else "false", ""])
        else:
            rows.append([str(row.order), "", "", "", row.error])
    return _write_csv(path, ["order", "n_states", "max_re", "stable", "error"], rows)


def write_trajectory_csv(result: SimulationResult, path) -> Path:
    n_p = result.plant_states.shape[0]
    n_c = result.observer_states.shape[0]
    m = result.inputs.shape[0]
    header = (["t"]
              + [f"x{i + 1}" for i in range(n_p)]
              + [f"xhat{i + 1}" for i in range(n_c)]
              + [f"u{i + 1}" for i in range(m)]
              + [f"y{i + 1}" for i in range(m)]
              + ([f"yhat{i + 1}" for i in range(m)]
                 if result.output_estimates is not None else [])
              + [f"yr{i + 1}" for i in range(m)]
              + ["H_plant", "H_observer", "V_total"])

    def rows():
        for k, t in enumerate(result.times):
            row = [_fmt(t)]
            row += [_fmt(v) for v in result.plant_states[:, k]]
            row += [_fmt(v) for v in result.observer_states[:, k]]
            row += [_fmt(v) for v in result.inputs[:, k]]
            row += [_fmt(v) for v in result.outputs[:, k]]
            if result.output_estimates is not None:
                row += [_fmt(v) for v in result.output_estimates[:, k]]
            row += [_fmt(v) for v in result.reference_outputs[:, k]]
            row += [_fmt(result.plant_energy[k]), _fmt(result.observer_energy[k]),
                    _fmt(result.total_energy[k])]
            yield row

    return _write_csv(path, header, rows())


def write_deformation_csv(field: DeformationField, path) -> Path:
    header = ["t"] + [f"w_at_{pos:.6g}" for pos in field.positions]
    rows = ([_fmt(t)] + [_fmt(v) for v in field.displacement[:, k]]
            for k, t in enumerate(field.times))
    return _write_csv(path, header, rows)
