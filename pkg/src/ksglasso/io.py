"""File formats: CSV matrices, key=value sidecars, JSON run manifests."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .solver import SolverTrace

FLOAT_FMT = "%.17g"   # round-trips float64 exactly, locale independent

TRACE_COLUMNS = (
    "iter,f,g,h,alpha,active_theta,active_psi,backtracks,seconds"
)


def write_matrix_csv(path, mat) -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    np.savetxt(path, mat, fmt=FLOAT_FMT, delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise InputError(
                    f"{path}: ragged row at line {lineno} "
                    f"({len(fields)} fields, expected {width})"
                )
            try:
                rows.append([float(x) for x in fields])
            except ValueError as exc:
                raise InputError(f"{path}: bad number at line {lineno}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty matrix file")
    return np.asarray(rows, dtype=np.float64)


def write_sidecar(path, entries: dict) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def read_sidecar(path) -> dict:
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}: malformed sidecar line {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_trace_csv(path, trace: SolverTrace) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(TRACE_COLUMNS + "\n")
        for r in trace.records:
            fh.write(
                f"{r.iteration},{r.f:.17g},{r.g:.17g},{r.h:.17g},{r.alpha:.17g},"
                f"{r.active_theta},{r.active_psi},{r.backtracks},{r.seconds:.6f}\n"
            )


def sha256_of(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ManifestWriter:
    """Collects run metadata and writes one manifest.json per output dir."""

    def __init__(self, command: str, out_dir, config: dict, inputs=()):
        self.out_dir = Path(out_dir)
        self.data = {
            "command": command,
            "inputs": [str(x) for x in inputs],
            "output_dir": str(out_dir),
            "config": config,
            "artifacts": {},
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }

    def add_artifact(self, path) -> None:
        path = Path(path)
        self.data["artifacts"][path.name] = sha256_of(path)

    def set(self, key, value) -> None:
        self.data[key] = value

    def write(self) -> Path:
        self.data["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        target = self.out_dir / "manifest.json"
        with open(target, "w", encoding="ascii") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return target
