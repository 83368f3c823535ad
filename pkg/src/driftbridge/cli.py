"""Command-line front end: ``driftbridge {calibrate,score,experiment,sweep,export-matching}``.

Exit codes: 0 success, 1 domain or runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .detector import DetectorConfig, fit_detector, score_batch
from .exceptions import DriftBridgeError
from .harness import SWEEP_AXES, ExperimentConfig, run_experiment, sweep
from .io import CalibrationFile, dump_json, file_digest, read_features
from .ot import DUMMY_MULTIPLIER, partial_wasserstein
from .attribution import export_matching
from .statistics import KINDS, StatisticSpec
from .mmd import FAMILIES


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_calibrate(a) -> int:
    ref = read_features(a.ref)
    spec = StatisticSpec(
        a.stat,
        alpha=a.alpha,
        p=a.p,
        kernel_family=a.kernel_family,
        lengthscale=a.lengthscale,
        dummy_multiplier=a.dummy_multiplier,
    )
    cfg = DetectorConfig(
        spec, a.test_size, a.permutations, seed=a.seed, dummy_multiplier=a.dummy_multiplier, match_fraction=a.match_fraction
    )
    det = fit_detector(cfg, ref)
    if det.null_fit is None:
        raise DriftBridgeError("null statistic has zero variance (degenerate reference); cannot fit a null distribution")
    resolved = replace(
        det.spec,
        alpha=det.alpha if spec.is_partial else None,
        lengthscale=det.kernel.lengthscale if det.kernel is not None else None,
    )
    cal = CalibrationFile(
        resolved,
        det.n_ref,
        a.test_size,
        a.permutations,
        a.seed,
        det.null_samples.values,
        det.null_fit,
        file_digest(a.ref),
        a.match_fraction,
        det.null_alpha if spec.is_partial else None,
    )
    cal.write(a.out)
    return 0


def _detector_from_calibration(cal: CalibrationFile, ref_path):
    if file_digest(ref_path) != cal.reference_digest:
        raise DriftBridgeError(f"{ref_path} does not match the calibration's reference digest")
    ref = read_features(ref_path)
    cfg = DetectorConfig(
        cal.spec,
        cal.n_test,
        cal.permutations,
        seed=cal.seed,
        dummy_multiplier=cal.spec.dummy_multiplier,
        match_fraction=cal.match_fraction,
    )
    return fit_detector(cfg, ref, null_samples=cal.null())


def cmd_score(a) -> int:
    cal = CalibrationFile.read(a.calib)
    det = _detector_from_calibration(cal, a.ref)
    batch = read_features(a.batch)
    rep = score_batch(det, batch, attribute=a.attribute, p_threshold=a.threshold)
    _emit(dump_json(rep.to_dict()), a.out)
    return 0


def _write_roc(path: Path, fpr, tpr) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("fpr", "tpr"))
        for f, t in zip(fpr, tpr):
            w.writerow((f"{f:.17g}", f"{t:.17g}"))


def _load_experiment(path) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise DriftBridgeError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(d, dict):
        raise DriftBridgeError(f"{path}: experiment config must be a JSON object")
    return ExperimentConfig.from_dict(d)


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def _progress(quiet):
    if quiet:
        return None
    return lambda label, o: print(f"{label}: auc={o.auc:.4f} fit={o.fit_seconds:.1f}s", file=sys.stderr)


def cmd_experiment(a) -> int:
    cfg = _load_experiment(a.config)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = run_experiment(cfg, _progress(a.quiet))
    dump_json(rep.to_dict(), out / "report.json")
    dump_json(rep.timings(), out / "timings.json")
    for label, o in rep.outcomes.items():
        _write_roc(out / f"roc_{_safe(label)}.csv", o.roc_fpr, o.roc_tpr)
    return 0


def cmd_sweep(a) -> int:
    cfg = _load_experiment(a.config)
    values = [float(v) if a.axis in ("p", "match_fraction") else int(v) for v in a.values.split(",")]
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    reps = sweep(cfg, a.axis, values, _progress(a.quiet))
    labels = list(next(iter(reps.values())).outcomes)
    summary = {
        "axis": a.axis,
        "values": values,
        "auc": {lab: [reps[v].auc(lab) for v in values] for lab in labels},
    }
    dump_json(summary, out / "sweep.json")
    for v, rep in reps.items():
        dump_json(rep.to_dict(), out / f"report_{a.axis}_{v}.json")
    return 0


def cmd_export_matching(a) -> int:
    ref = read_features(a.ref)
    batch = read_features(a.batch)
    alpha = a.alpha if a.alpha is not None else min(1.0, batch.shape[0] / ref.shape[0])
    res = partial_wasserstein(ref, batch, alpha, a.p, a.dummy_multiplier)
    _emit(export_matching(res, ref, batch).to_csv(), a.out)
    return 0


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="driftbridge", description="Partial-matching drift detection.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="bootstrap and fit the null distribution for a reference set")
    c.add_argument("--ref", required=True)
    c.add_argument("--stat", required=True, choices=KINDS)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--p", type=float, default=2.0)
    c.add_argument("--test-size", type=_positive_int, required=True)
    c.add_argument("--permutations", type=_positive_int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--kernel-family", choices=FAMILIES, default="squared-exponential")
    c.add_argument("--lengthscale", type=float, default=None)
    c.add_argument("--dummy-multiplier", type=float, default=DUMMY_MULTIPLIER)
    c.add_argument("--match-fraction", type=float, default=1.0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("score", help="score one batch against a calibration")
    s.add_argument("--calib", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--batch", required=True)
    s.add_argument("--attribute", action="store_true")
    s.add_argument("--threshold", type=float, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("experiment", help="run the synthetic drift experiment")
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--quiet", action="store_true")
    e.set_defaults(func=cmd_experiment)

    w = sub.add_parser("sweep", help="vary one experiment parameter")
    w.add_argument("--config", required=True)
    w.add_argument("--axis", required=True, choices=SWEEP_AXES)
    w.add_argument("--values", required=True, help="comma separated")
    w.add_argument("--out", required=True)
    w.add_argument("--quiet", action="store_true")
    w.set_defaults(func=cmd_sweep)

    m = sub.add_parser("export-matching", help="partial transport plan as CSV rows")
    m.add_argument("--ref", required=True)
    m.add_argument("--batch", required=True)
    m.add_argument("--alpha", type=float, default=None)
    m.add_argument("--p", type=float, default=2.0)
    m.add_argument("--dummy-multiplier", type=float, default=DUMMY_MULTIPLIER)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_export_matching)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)  # exits 2 on usage errors
    try:
        return a.func(a)
    except (DriftBridgeError, ValueError, OSError) as e:
        print(f"driftbridge {a.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
