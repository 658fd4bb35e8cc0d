"""Plain-text serialization of controller certificates.

One self-contained file holds every matrix row-major at full precision,
the scalar parameters, the verified slack values, and provenance entries
(seed, iteration counts).  Loading reproduces the certificate exactly.
"""
from __future__ import annotations

import numpy as np

from .types import ControllerCertificate

__all__ = ["save_certificate", "load_certificate"]

_HEADER = "switching-certificate 1"
_MATRICES = ("P", "U", "Q1", "Q2", "Omega", "L", "M1", "M2", "M3", "N", "r", "Xi1", "Xi2", "K")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def save_certificate(cert: ControllerCertificate, path: str) -> None:
    lines = [_HEADER]
    lines.append(f"scalar beta1 {_fmt(cert.beta1)}")
    lines.append(f"scalar gamma {'none' if cert.gamma is None else _fmt(cert.gamma)}")
    for name in _MATRICES:
        M = np.atleast_2d(getattr(cert, name))
        lines.append(f"matrix {name} {M.shape[0]} {M.shape[1]}")
        for row in M:
            lines.append(" ".join(_fmt(v) for v in row))
    for key in sorted(cert.slack):
        lines.append(f"slack {key} {_fmt(cert.slack[key])}")
    for key in sorted(cert.meta):
        val = cert.meta[key]
        if isinstance(val, bool):
            lines.append(f"meta {key} bool {val}")
        elif isinstance(val, int):
            lines.append(f"meta {key} int {val}")
        elif isinstance(val, float):
            lines.append(f"meta {key} float {_fmt(val)}")
        elif isinstance(val, str) and "\n" not in val:
            lines.append(f"meta {key} str {val}")
        # richer entries (logs, parameter objects) are deliberately not persisted
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_certificate(path: str) -> ControllerCertificate:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not a certificate file")
    scalars: dict = {}
    matrices: dict = {}
    slack: dict = {}
    meta: dict = {}
    i = 1
    while i < len(lines):
        ln = lines[i]
        if ln == "end" or not ln.strip():
            i += 1
            continue
        parts = ln.split()
        if parts[0] == "scalar":
            scalars[parts[1]] = None if parts[2] == "none" else float(parts[2])
            i += 1
        elif parts[0] == "matrix":
            name, rows, cols = parts[1], int(parts[2]), int(parts[3])
            M = np.array(
                [[float(v) for v in lines[i + 1 + rr].split()] for rr in range(rows)]
            ).reshape(rows, cols)
            matrices[name] = M
            i += 1 + rows
        elif parts[0] == "slack":
            slack[parts[1]] = float(parts[2])
            i += 1
        elif parts[0] == "meta":
            key, kind = parts[1], parts[2]
            raw = " ".join(parts[3:])
            if kind == "bool":
                meta[key] = raw == "True"
            elif kind == "int":
                meta[key] = int(raw)
            elif kind == "float":
                meta[key] = float(raw)
            else:
                meta[key] = raw
            i += 1
        else:
            raise ValueError(f"unrecognized certificate line: {ln!r}")
    missing = [name for name in _MATRICES if name not in matrices]
    if missing or "beta1" not in scalars:
        raise ValueError(f"certificate file is incomplete (missing {missing})")
    return ControllerCertificate(
        **{name: matrices[name] for name in _MATRICES},
        beta1=scalars["beta1"],
        gamma=scalars.get("gamma"),
        slack=slack,
        meta=meta,
    )
