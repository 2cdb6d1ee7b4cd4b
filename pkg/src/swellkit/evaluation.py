"""One-pass evaluation of externally produced tracking predictions.

Per sequence, three curves are computed over the frames that carry a
ground-truth box:

* success: fraction of frames with IoU strictly above each of 51 thresholds
  in [0, 1]; AUC is the arithmetic mean of the 51 samples. The strict
  inequality makes the perfect tracker score AUC = 50/51, not 1.
* precision: fraction of frames with center error at most t pixels,
  t = 0..50; the headline P is the value at 20 px.
* normalized precision: center error divided elementwise by the
  ground-truth size, ||(dx/w, dy/h)||, thresholds 0..0.5; the headline
  P_norm is the curve mean (TrackingNet convention; noted in report
  headers since the score is only comparable under the same convention).

Frames with an absent ground-truth box (out of view, full occlusion) are
excluded from every curve. Frames whose ground-truth box has zero width or
height are excluded from the normalized-precision curve only and counted
in the report diagnostics.

Sequence files are plain text, one "x,y,w,h" line per frame, with
"NaN,NaN,NaN,NaN" marking absent ground truth. Attributes come from a JSON
object mapping sequence name to a list of tags.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from swellkit.geometry import BBox, cle, iou

SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 51)
PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
NORM_PRECISION_THRESHOLDS = np.linspace(0.0, 0.5, 51)
PRECISION_AT_PX = 20

NORM_CONVENTION_NOTE = (
    "normalized precision: center error scaled elementwise by gt box size, "
    "thresholds 0..0.5, score is the curve mean"
)


class EvaluationError(ValueError):
    """Sequence unusable for evaluation (no frames, length mismatch, bad file)."""


@dataclass
class TrackSequence:
    name: str
    gt: list[BBox | None]
    preds: dict[str, list[BBox]]
    attributes: frozenset[str] = frozenset()
    fps_declared: float | None = None

    def __post_init__(self):
        self.attributes = frozenset(self.attributes)
        if not any(b is not None for b in self.gt):
            raise EvaluationError(f"sequence {self.name!r} has no ground-truth frames")
        for tracker, boxes in self.preds.items():
            if len(boxes) != len(self.gt):
                raise EvaluationError(
                    f"sequence {self.name!r}: tracker {tracker!r} has {len(boxes)} frames, "
                    f"ground truth has {len(self.gt)}"
                )

    def tracker_names(self) -> list[str]:
        return sorted(self.preds)


def _evaluable(seq: TrackSequence, tracker: str) -> list[tuple[BBox, BBox]]:
    if tracker not in seq.preds:
        raise EvaluationError(f"sequence {seq.name!r} has no predictions for tracker {tracker!r}")
    pairs = [(p, g) for p, g in zip(seq.preds[tracker], seq.gt) if g is not None]
    if not pairs:
        raise EvaluationError(f"sequence {seq.name!r} has zero evaluable frames")
    return pairs


def success_curve(seq: TrackSequence, tracker: str) -> np.ndarray:
    """51 success-rate samples at IoU thresholds 0, 0.02, ..., 1.0."""
    pairs = _evaluable(seq, tracker)
    ious = np.array([iou(p, g) for p, g in pairs])
    return (ious[:, None] > SUCCESS_THRESHOLDS[None, :]).mean(axis=0)


def auc(curve: np.ndarray) -> float:
    return float(np.mean(curve))


def precision_curve(seq: TrackSequence, tracker: str) -> np.ndarray:
    """51 precision samples at CLE thresholds 0, 1, ..., 50 px."""
    pairs = _evaluable(seq, tracker)
    errors = np.array([cle(p, g) for p, g in pairs])
    return (errors[:, None] <= PRECISION_THRESHOLDS[None, :]).mean(axis=0)


def norm_precision_curve(seq: TrackSequence, tracker: str) -> tuple[np.ndarray, int]:
    """51 samples at normalized thresholds 0, 0.01, ..., 0.5.

    Returns (curve, number of frames excluded for zero-size ground truth).
    """
    pairs = _evaluable(seq, tracker)
    errors = []
    excluded = 0
    for p, g in pairs:
        if g.w <= 0 or g.h <= 0:
            excluded += 1
            continue
        (pcx, pcy), (gcx, gcy) = p.center, g.center
        errors.append(math.hypot((pcx - gcx) / g.w, (pcy - gcy) / g.h))
    if not errors:
        raise EvaluationError(
            f"sequence {seq.name!r}: no frames with positive-size ground truth for {tracker!r}"
        )
    err = np.array(errors)
    return (err[:, None] <= NORM_PRECISION_THRESHOLDS[None, :]).mean(axis=0), excluded


def cle_stream_success(cle_series, threshold_px: float = 20.0) -> tuple[list[bool], float]:
    """Per-frame success flags (CLE at or below threshold) plus their fraction."""
    series = [float(v) for v in cle_series]
    if not series:
        raise EvaluationError("empty CLE series")
    if any(not math.isfinite(v) for v in series):
        raise ValueError("CLE series must be finite")
    flags = [v <= threshold_px for v in series]
    return flags, sum(flags) / len(flags)


@dataclass
class TrackerResult:
    tracker: str
    auc: float
    p_norm: float
    p: float
    success: np.ndarray
    precision: np.ndarray
    norm_precision: np.ndarray
    per_attribute: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    excluded_zero_size_gt: dict[str, int] = field(default_factory=dict)


@dataclass
class EvalReport:
    results: dict[str, TrackerResult]
    ranking: list[str]
    sequences: list[str]
    attributes: list[str]


def _aggregate(sequences: list[TrackSequence], tracker: str):
    """Mean of per-sequence curves; headline scores read off the aggregates."""
    succ = np.mean([success_curve(s, tracker) for s in sequences], axis=0)
    prec = np.mean([precision_curve(s, tracker) for s in sequences], axis=0)
    norm_curves = []
    excluded = {}
    for s in sequences:
        curve, skipped = norm_precision_curve(s, tracker)
        norm_curves.append(curve)
        if skipped:
            excluded[s.name] = skipped
    norm = np.mean(norm_curves, axis=0)
    return succ, prec, norm, excluded


def attribute_report(sequences: list[TrackSequence], tracker: str,
                     tags: list[str] | None = None) -> dict[str, tuple[float, float, float]]:
    """Per-attribute (AUC, P_norm, P) over the sequences carrying each tag."""
    present: set[str] = set()
    for s in sequences:
        present |= s.attributes
    requested = sorted(present) if tags is None else list(tags)
    out: dict[str, tuple[float, float, float]] = {}
    for tag in requested:
        subset = [s for s in sequences if tag in s.attributes]
        if not subset:
            warnings.warn(f"attribute {tag!r} matches no sequence; omitted from report")
            continue
        succ, prec, norm, _ = _aggregate(subset, tracker)
        out[tag] = (auc(succ), float(np.mean(norm)), float(prec[PRECISION_AT_PX]))
    return out


def evaluate(sequences: list[TrackSequence], trackers: list[str] | None = None) -> EvalReport:
    if not sequences:
        raise EvaluationError("no sequences to evaluate")
    if trackers is None:
        trackers = sorted({t for s in sequences for t in s.preds})
    results = {}
    for tracker in trackers:
        succ, prec, norm, excluded = _aggregate(sequences, tracker)
        results[tracker] = TrackerResult(
            tracker=tracker,
            auc=auc(succ),
            p_norm=float(np.mean(norm)),
            p=float(prec[PRECISION_AT_PX]),
            success=succ,
            precision=prec,
            norm_precision=norm,
            per_attribute=attribute_report(sequences, tracker),
            excluded_zero_size_gt=excluded,
        )
    ranking = sorted(results, key=lambda t: (-results[t].auc, -results[t].p_norm, t))
    tags = sorted({tag for r in results.values() for tag in r.per_attribute})
    return EvalReport(
        results=results,
        ranking=ranking,
        sequences=[s.name for s in sequences],
        attributes=tags,
    )


# --- file interfaces ---

def _parse_box_line(line: str, *, where: str, allow_absent: bool) -> BBox | None:
    parts = [p.strip() for p in line.strip().split(",")]
    if len(parts) != 4:
        raise EvaluationError(f"{where}: expected 'x,y,w,h', got {line.strip()!r}")
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise EvaluationError(f"{where}: {e}") from e
    if any(math.isnan(v) for v in values):
        if allow_absent:
            return None
        raise EvaluationError(f"{where}: NaN not allowed in predictions")
    try:
        return BBox(*values)
    except ValueError as e:
        raise EvaluationError(f"{where}: {e}") from e


def load_box_file(path: str | Path, *, allow_absent: bool) -> list[BBox | None]:
    path = Path(path)
    boxes = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            boxes.append(_parse_box_line(line, where=f"{path.name} line {lineno}",
                                         allow_absent=allow_absent))
    return boxes


def load_attributes(path: str | Path) -> dict[str, frozenset[str]]:
    with Path(path).open("r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise EvaluationError("attributes file must map sequence name to a list of tags")
    return {name: frozenset(tags) for name, tags in obj.items()}


def load_benchmark(gt_dir: str | Path, pred_dirs: list[str | Path],
                   attributes_path: str | Path | None = None) -> list[TrackSequence]:
    """Assemble sequences from per-sequence text files.

    Tracker names are the prediction directory basenames; every tracker must
    provide a file for every ground-truth sequence.
    """
    gt_dir = Path(gt_dir)
    gt_files = sorted(gt_dir.glob("*.txt"))
    if not gt_files:
        raise EvaluationError(f"no ground-truth files in {gt_dir}")
    attrs = load_attributes(attributes_path) if attributes_path else {}
    sequences = []
    for gt_file in gt_files:
        name = gt_file.stem
        gt = load_box_file(gt_file, allow_absent=True)
        preds = {}
        for pred_dir in pred_dirs:
            pred_dir = Path(pred_dir)
            tracker = pred_dir.name
            pred_file = pred_dir / gt_file.name
            if not pred_file.exists():
                raise EvaluationError(f"tracker {tracker!r} is missing predictions for {name!r}")
            boxes = load_box_file(pred_file, allow_absent=False)
            preds[tracker] = [b for b in boxes]
        sequences.append(TrackSequence(name=name, gt=gt, preds=preds,
                                       attributes=attrs.get(name, frozenset())))
    return sequences


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """Ranking table: overall triple plus one triple per attribute tag."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {NORM_CONVENTION_NOTE}\n")
        fh.write("# success uses strict IoU > t; AUC is the mean of 51 curve samples\n")
        cols = ["tracker", "auc", "p_norm", "p"]
        for tag in report.attributes:
            cols += [f"{tag}_auc", f"{tag}_p_norm", f"{tag}_p"]
        fh.write(",".join(cols) + "\n")
        for tracker in report.ranking:
            r = report.results[tracker]
            row = [tracker, f"{r.auc:.6f}", f"{r.p_norm:.6f}", f"{r.p:.6f}"]
            for tag in report.attributes:
                triple = r.per_attribute.get(tag)
                row += ["", "", ""] if triple is None else [f"{v:.6f}" for v in triple]
            fh.write(",".join(row) + "\n")


def write_curves(report: EvalReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_specs = [
        ("success", SUCCESS_THRESHOLDS, lambda r: r.success),
        ("precision", PRECISION_THRESHOLDS, lambda r: r.precision),
        ("norm_precision", NORM_PRECISION_THRESHOLDS, lambda r: r.norm_precision),
    ]
    for tracker in report.ranking:
        r = report.results[tracker]
        for label, thresholds, pick in curve_specs:
            with (out_dir / f"{tracker}_{label}.csv").open("w", encoding="utf-8", newline="\n") as fh:
                fh.write("threshold,value\n")
                for t, v in zip(thresholds, pick(r)):
                    fh.write(f"{t:.6f},{v:.6f}\n")
