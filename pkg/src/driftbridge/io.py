"""Feature files (CSV or DRF1 binary) and calibration JSON."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .calibration import NullSamples, ShiftedGammaFit, fit_shifted_gamma
from .exceptions import DriftBridgeError, InvalidParameterError
from .mmd import KernelSpec
from .statistics import StatisticSpec

MAGIC = b"DRF1"
_HEADER = struct.Struct("<4sQQ")
CALIBRATION_VERSION = 1


class FeatureFileError(DriftBridgeError, ValueError):
    pass


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _read_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]  # single header row
    if not rows:
        raise FeatureFileError(f"{path}: no data rows")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise FeatureFileError(f"{path}: row {k} has {len(r)} columns, expected {width}")
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as e:
        raise FeatureFileError(f"{path}: {e}") from None


def _read_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header")
    _, rows, cols = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size :]
    if len(body) != 8 * rows * cols:
        raise FeatureFileError(f"{path}: expected {rows}x{cols} float64 values, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def read_features(path) -> np.ndarray:
    """Load a feature matrix; the DRF1 magic selects the binary reader, anything else is CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    X = _read_binary(path) if head == MAGIC else _read_csv(path)
    if X.size == 0:
        raise FeatureFileError(f"{path}: empty feature matrix")
    if not np.all(np.isfinite(X)):
        raise FeatureFileError(f"{path}: non-finite values")
    return X


def write_features(path, X, fmt: str = "csv", header: list[str] | None = None) -> None:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidParameterError("features must be a matrix")
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, X.shape[0], X.shape[1]))
            fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if header is not None:
                w.writerow(header)
            for row in X:
                w.writerow([f"{v:.17g}" for v in row])
    else:
        raise InvalidParameterError(f"unknown feature format {fmt!r}")


def dump_json(obj, path=None) -> str:
    """Stable JSON text (fixed key order, shortest round-trip floats, trailing newline)."""
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass(frozen=True)
class CalibrationFile:
    spec: StatisticSpec  # alpha and lengthscale resolved
    n_ref: int
    n_test: int
    permutations: int
    seed: int
    null_samples: np.ndarray
    fit: ShiftedGammaFit
    reference_digest: str
    match_fraction: float = 1.0
    null_alpha: float | None = None

    @property
    def kernel(self) -> KernelSpec | None:
        k = self.spec.kernel
        return None if isinstance(k, str) else k

    def to_dict(self) -> dict[str, Any]:
        s = self.spec
        return {
            "version": CALIBRATION_VERSION,
            "spec": {
                "kind": s.kind,
                "alpha": s.alpha,
                "p": s.p,
                "kernel_family": s.kernel_family,
                "lengthscale": s.lengthscale,
                "dummy_multiplier": s.dummy_multiplier,
                "adhoc_iters": s.adhoc_iters,
                "qp_tol": s.qp_tol,
            },
            "sizes": {"n_ref": self.n_ref, "n_test": self.n_test},
            "permutations": self.permutations,
            "seed": self.seed,
            "match_fraction": self.match_fraction,
            "null_alpha": self.null_alpha,
            "null_samples": [float(v) for v in self.null_samples],
            "fit": {"shift": self.fit.shift, "shape": self.fit.shape, "scale": self.fit.scale},
            "reference_digest": self.reference_digest,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CalibrationFile":
        try:
            if d["version"] != CALIBRATION_VERSION:
                raise InvalidParameterError(f"unsupported calibration version {d['version']!r}")
            spec = StatisticSpec.from_dict(d["spec"])
            values = np.asarray(d["null_samples"], dtype=np.float64)
            f = d["fit"]
            fit = ShiftedGammaFit(float(f["shift"]), float(f["shape"]), float(f["scale"]))
            out = cls(
                spec,
                int(d["sizes"]["n_ref"]),
                int(d["sizes"]["n_test"]),
                int(d["permutations"]),
                int(d["seed"]),
                values,
                fit,
                str(d["reference_digest"]),
                float(d.get("match_fraction", 1.0)),
                d.get("null_alpha"),
            )
        except (KeyError, TypeError) as e:
            raise InvalidParameterError(f"malformed calibration file: {e!r}") from None
        out.check_fit()
        return out

    def check_fit(self, rtol: float = 1e-12) -> None:
        refit = fit_shifted_gamma(self.null_samples)
        for a, b in zip((refit.shift, refit.shape, refit.scale), (self.fit.shift, self.fit.shape, self.fit.scale)):
            if not math.isclose(a, b, rel_tol=rtol, abs_tol=1e-300):
                raise InvalidParameterError("calibration fit does not match its null samples")

    def null(self) -> NullSamples:
        return NullSamples(
            self.null_samples, self.spec, self.n_ref, self.n_test, self.seed, self.null_alpha, self.kernel
        )

    def write(self, path) -> str:
        return dump_json(self.to_dict(), path)

    @classmethod
    def read(cls, path) -> "CalibrationFile":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise InvalidParameterError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(d)
