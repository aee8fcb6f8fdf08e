"""Ground-truth labels and mean-IoU evaluation over face sets.

IoU is face-count based by default; pass per-face weights for the
area-weighted variant.  The ``visible`` filter excludes faces invisible
from every trajectory view from both prediction and truth.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError, LengthMismatch, ParseError, UnknownLabel

UNLABELED = -1


@dataclass(frozen=True)
class GroundTruth:
    """Per-face label ids (-1 = unlabeled) with names for every used label."""

    labels: np.ndarray
    label_names: dict

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1).copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        names = {int(k): str(v) for k, v in self.label_names.items()}
        for lab in np.unique(labels):
            if lab >= 0 and int(lab) not in names:
                names[int(lab)] = f"part{int(lab)}"
        object.__setattr__(self, "label_names", names)

    @property
    def face_count(self) -> int:
        return len(self.labels)

    def faces_with(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]

    def used_labels(self) -> list:
        return sorted(int(v) for v in np.unique(self.labels) if v >= 0)

    def resolve(self, label) -> int:
        """Accept a label id or a label name."""
        if isinstance(label, str) and not label.lstrip("-").isdigit():
            for lab, name in self.label_names.items():
                if name == label:
                    return lab
            raise UnknownLabel(f"no label named {label!r}")
        lab = int(label)
        if lab not in self.label_names and lab != UNLABELED:
            raise UnknownLabel(f"label {lab} not present in ground truth")
        return lab


def load_labels(path, face_count: int | None = None) -> GroundTruth:
    """Load per-face labels from one-integer-per-line text or JSON
    ``{"labels": [...], "names": {...}}``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    names: dict = {}
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", path=str(path)) from exc
        if not isinstance(doc, dict) or "labels" not in doc:
            raise ParseError("JSON labels need a 'labels' array", path=str(path))
        labels = doc["labels"]
        names = {int(k): v for k, v in doc.get("names", {}).items()}
    else:
        labels = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise ParseError(f"bad label {line!r}", line=line_no,
                                 path=str(path)) from exc
    labels = np.asarray(labels, dtype=np.int64)
    if face_count is not None and len(labels) != face_count:
        raise LengthMismatch(
            f"{path}: {len(labels)} labels for a mesh with {face_count} faces")
    return GroundTruth(labels=labels, label_names=names)


def save_labels(truth: GroundTruth, path) -> None:
    """Write ground truth as JSON (roundtrips through load_labels)."""
    doc = {"labels": [int(v) for v in truth.labels],
           "names": {str(k): v for k, v in sorted(truth.label_names.items())}}
    try:
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def iou(predicted, truth, weights=None) -> float:
    """Intersection over union of two face-id sets; 1.0 when both are empty.

    ``weights`` maps face id to a nonnegative weight (e.g. triangle area)
    for the area-weighted variant.
    """
    p = set(int(f) for f in predicted)
    t = set(int(f) for f in truth)
    union = p | t
    if not union:
        return 1.0
    inter = p & t
    if weights is None:
        return len(inter) / len(union)
    wi = sum(weights[f] for f in inter)
    wu = sum(weights[f] for f in union)
    return wi / wu if wu > 0 else 1.0


@dataclass(frozen=True)
class EvalReport:
    """Per-part IoU table and their unweighted mean."""

    per_part_iou: dict
    miou: float

    def rows(self):
        return [(name, value) for name, value in sorted(self.per_part_iou.items())]


def _apply_visible(faces, visible) -> set:
    faces = set(int(f) for f in faces)
    if visible is None:
        return faces
    return faces & set(int(f) for f in visible)


def evaluate_single(predicted_faces, truth: GroundTruth, target_label,
                    visible=None, weights=None) -> EvalReport:
    """IoU of one predicted face set against one ground-truth part."""
    label = truth.resolve(target_label)
    p = _apply_visible(predicted_faces, visible)
    t = _apply_visible(truth.faces_with(label), visible)
    name = truth.label_names.get(label, f"part{label}")
    value = iou(p, t, weights)
    return EvalReport(per_part_iou={name: value}, miou=value)


def evaluate_multi(assignment, truth: GroundTruth, visible=None,
                   weights=None) -> EvalReport:
    """Per-part IoU of a full per-face assignment, averaged unweighted.

    Parts are the labels used by the ground truth; the assignment's label
    space must match (query index == label id).
    """
    assignment = np.asarray(assignment, dtype=np.int64).reshape(-1)
    if len(assignment) != truth.face_count:
        raise LengthMismatch(
            f"assignment has {len(assignment)} faces, truth has {truth.face_count}")
    per_part = {}
    for label in truth.used_labels():
        p = _apply_visible(np.nonzero(assignment == label)[0], visible)
        t = _apply_visible(truth.faces_with(label), visible)
        per_part[truth.label_names[label]] = iou(p, t, weights)
    if not per_part:
        raise UnknownLabel("ground truth has no labeled parts")
    return EvalReport(per_part_iou=per_part,
                      miou=float(np.mean(list(per_part.values()))))


def evaluate(prediction, truth: GroundTruth, target_label=None, visible=None,
             weights=None) -> EvalReport:
    """Dispatch: a face set (needs ``target_label``) or a per-face assignment."""
    arr = np.asarray(prediction)
    if target_label is not None:
        return evaluate_single(arr.reshape(-1), truth, target_label, visible, weights)
    return evaluate_multi(arr, truth, visible, weights)


def write_eval_csv(report: EvalReport, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["part", "iou"])
            for name, value in report.rows():
                writer.writerow([name, f"{value:.6f}"])
            writer.writerow(["miou", f"{report.miou:.6f}"])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_eval_csv(path) -> EvalReport:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    per_part, miou = {}, None
    for row in rows[1:]:
        if not row:
            continue
        if row[0] == "miou":
            miou = float(row[1])
        else:
            per_part[row[0]] = float(row[1])
    return EvalReport(per_part_iou=per_part, miou=miou)


def write_eval_json(report: EvalReport, path) -> None:
    doc = {"per_part_iou": {k: v for k, v in report.rows()}, "miou": report.miou}
    try:
        Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
