"""Face confidence revoting: whole-object detection filtering, per-view vote
assignment, multi-view accumulation, dual-branch fusion, thresholding, and
one-pass neighbor smoothing.

Each voting view adds +c to every visible face inside its mask and -c to
every visible face outside it; per-face sums from the untextured and
textured branches are averaged, smoothed over edge-neighbors, and
thresholded (strictly) at zero.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import Detection, GroundingBackend, QuerySpec
from .errors import (BackendError, EmptyRender, IoError, LengthMismatch,
                     MeshMismatch, TopologyMismatch)
from .mesh import Bitmap, FaceAdjacency, Mesh, build_adjacency
from .render import RenderOutput, faces_in_mask, object_bbox, render
from .views import TrajectoryConfig, generate_trajectory

log = logging.getLogger(__name__)

DEFAULT_IOU_CUTOFF = 0.90
DEFAULT_MEMBERSHIP_FRACTION = 0.5
DEFAULT_MIN_PIXELS = 2


@dataclass(frozen=True)
class ViewVote:
    """One view's contribution: +confidence for masked faces, -confidence
    for visible faces outside the mask."""

    view_index: int
    confidence: float
    masked_faces: np.ndarray
    visible_unmasked_faces: np.ndarray

    def __post_init__(self):
        masked = np.asarray(self.masked_faces, dtype=np.int64).reshape(-1)
        unmasked = np.asarray(self.visible_unmasked_faces, dtype=np.int64).reshape(-1)
        if np.intersect1d(masked, unmasked).size:
            raise ValueError("a face cannot be both masked and penalized")
        object.__setattr__(self, "masked_faces", np.sort(masked))
        object.__setattr__(self, "visible_unmasked_faces", np.sort(unmasked))

    def scaled(self, factor: float) -> "ViewVote":
        return ViewVote(self.view_index, self.confidence * factor,
                        self.masked_faces, self.visible_unmasked_faces)


@dataclass(frozen=True)
class FaceScores:
    """Per-face branch sums, their fused average, and the smoothed field.

    In single-branch runs ``g_textured`` is None and ``o`` equals
    ``g_untextured``.
    """

    g_untextured: np.ndarray
    g_textured: np.ndarray | None
    o: np.ndarray
    o_smoothed: np.ndarray
    o_threshold: float = 0.0


@dataclass(frozen=True)
class Diagnostics:
    views_used: int
    views_skipped: int
    detections_filtered: int
    backend_errors: int
    face_view_counts: np.ndarray
    per_branch: dict


@dataclass(frozen=True)
class SegmentationResult:
    member_faces: np.ndarray
    scores: FaceScores
    per_view_votes: dict
    query: QuerySpec
    diagnostics: Diagnostics
    k: int
    seed: int | None = None
    method: str = "revote"

    @property
    def face_count(self) -> int:
        return len(self.scores.o_smoothed)

    @property
    def member_set(self) -> set:
        return set(int(f) for f in self.member_faces)

    def visible_face_ids(self) -> np.ndarray:
        """Faces owning at least one pixel in at least one trajectory view."""
        return np.nonzero(self.diagnostics.face_view_counts > 0)[0]


def box_iou(a, b) -> float:
    """IoU of two (x0, y0, x1, y1) inclusive-exclusive pixel boxes."""
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    if inter == 0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / float(area_a + area_b - inter)


def filter_detections(detections, rendered: RenderOutput,
                      iou_cutoff: float = DEFAULT_IOU_CUTOFF) -> list:
    """Drop detections whose box nearly coincides with the rendered
    silhouette box (evident whole-object errors); order is preserved."""
    try:
        x0, y0, x1, y1 = object_bbox(rendered)
    except EmptyRender:
        return list(detections)
    silhouette = (x0, y0, x1 + 1, y1 + 1)  # object_bbox is inclusive
    return [d for d in detections if box_iou(d.bbox, silhouette) < iou_cutoff]


def make_view_vote(rendered: RenderOutput, detection: Detection, mask: Bitmap,
                   membership_fraction: float = DEFAULT_MEMBERSHIP_FRACTION,
                   min_pixels: int = DEFAULT_MIN_PIXELS,
                   view_index: int = 0) -> ViewVote:
    """Split the view's faces into masked and penalized sets.

    Only faces owning at least ``min_pixels`` visible pixels vote at all
    (sliver suppression applies to both sides); a face is masked when at
    least ``membership_fraction`` of its visible pixels lie in the mask.
    """
    fractions = faces_in_mask(rendered, mask)
    masked, unmasked = [], []
    for face, fraction in fractions.items():
        if rendered.visible_faces[face] < min_pixels:
            continue
        if fraction >= membership_fraction:
            masked.append(face)
        else:
            unmasked.append(face)
    return ViewVote(view_index=view_index, confidence=detection.confidence,
                    masked_faces=np.array(masked, dtype=np.int64),
                    visible_unmasked_faces=np.array(unmasked, dtype=np.int64))


def accumulate(votes, face_count: int) -> np.ndarray:
    """Per-face sum of signed local confidences over all votes."""
    g = np.zeros(face_count)
    for vote in votes:
        if vote.masked_faces.size and int(vote.masked_faces.max()) >= face_count:
            raise LengthMismatch("vote refers to a face beyond the mesh")
        if vote.visible_unmasked_faces.size \
                and int(vote.visible_unmasked_faces.max()) >= face_count:
            raise LengthMismatch("vote refers to a face beyond the mesh")
        np.add.at(g, vote.masked_faces, vote.confidence)
        np.add.at(g, vote.visible_unmasked_faces, -vote.confidence)
    return g


def fuse_branches(g_untextured, g_textured) -> np.ndarray:
    """Elementwise average of the two branch score fields."""
    a = np.asarray(g_untextured, dtype=np.float64)
    b = np.asarray(g_textured, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"branch score lengths differ: {a.shape} vs {b.shape}")
    return (a + b) / 2.0


def smooth(o, adjacency: FaceAdjacency) -> np.ndarray:
    """One pass: each face becomes the mean of itself and its edge-neighbors."""
    o = np.asarray(o, dtype=np.float64)
    if len(o) != adjacency.face_count:
        raise LengthMismatch(
            f"{len(o)} scores for adjacency over {adjacency.face_count} faces")
    sums = o.copy()
    counts = np.ones(len(o))
    src = np.repeat(np.arange(len(o)), np.diff(adjacency.indptr))
    np.add.at(sums, src, o[adjacency.indices])
    np.add.at(counts, src, 1.0)
    return sums / counts


def threshold(o_smoothed, o_threshold: float = 0.0) -> np.ndarray:
    """Member faces: strictly above the threshold (exact zeros excluded at
    the default threshold of 0)."""
    return np.nonzero(np.asarray(o_smoothed) > o_threshold)[0]


# --- pipeline ----------------------------------------------------------------

@dataclass(frozen=True)
class VoteParams:
    iou_cutoff: float = DEFAULT_IOU_CUTOFF
    membership_fraction: float = DEFAULT_MEMBERSHIP_FRACTION
    min_pixels: int = DEFAULT_MIN_PIXELS
    o_threshold: float = 0.0
    multi_box: str = "top1"  # or "union": OR surviving masks, max confidence

    def __post_init__(self):
        if self.multi_box not in ("top1", "union"):
            raise ValueError(f"multi_box must be 'top1' or 'union', got {self.multi_box!r}")


def _check_topology(mesh_a: Mesh, mesh_b: Mesh) -> None:
    if mesh_a.face_count != mesh_b.face_count \
            or mesh_a.vertex_count != mesh_b.vertex_count \
            or not np.array_equal(mesh_a.faces, mesh_b.faces):
        raise TopologyMismatch("branch meshes must share identical face topology")


def _branch_votes(mesh: Mesh, branch: str, viewpoints, query: QuerySpec,
                  backend: GroundingBackend, params: VoteParams, stats: dict,
                  observer=None, render_fn=render):
    """Render, detect, segment, and vote for every view of one branch."""
    votes = []
    for vp in viewpoints:
        rendered = render_fn(mesh, vp, shading=branch)
        if branch == "untextured":
            for face, count in rendered.visible_faces.items():
                stats["face_view_counts"][face] += 1
        detections, mask, used = [], None, False
        try:
            detections = backend.detect(rendered, query, branch=branch,
                                        view_index=vp.index)
            surviving = filter_detections(detections, rendered, params.iou_cutoff)
            stats["detections_filtered"] += len(detections) - len(surviving)
            chosen = []
            if surviving:
                chosen = [surviving[0]] if params.multi_box == "top1" else surviving
            if chosen:
                mask = backend.segment(rendered, chosen[0].bbox, branch=branch,
                                       view_index=vp.index)
                merged = mask.data != 0
                confidence = chosen[0].confidence
                for extra in chosen[1:]:
                    more = backend.segment(rendered, extra.bbox, branch=branch,
                                           view_index=vp.index)
                    merged = merged | (more.data != 0)
                    confidence = max(confidence, extra.confidence)
                mask = Bitmap(merged.astype(np.uint8))
                votes.append(make_view_vote(rendered,
                                            Detection(chosen[0].bbox, confidence),
                                            mask, params.membership_fraction,
                                            params.min_pixels, view_index=vp.index))
                used = True
        except BackendError as exc:
            stats["backend_errors"] += 1
            log.warning("view %d (%s): backend failed: %s", vp.index, branch, exc)
        stats["branch"][branch]["used" if used else "skipped"].append(vp.index)
        stats["views_used" if used else "views_skipped"] += 1
        if observer is not None:
            observer(branch=branch, viewpoint=vp, rendered=rendered,
                     detections=detections, mask=mask)
    return votes


def _run_pipeline(mesh_untextured: Mesh, mesh_textured: Mesh | None, query: QuerySpec,
                  trajectory: TrajectoryConfig, backend: GroundingBackend,
                  params: VoteParams, seed, observer, positive_only: bool,
                  do_smooth: bool, method: str, render_fn=render,
                  adjacency: FaceAdjacency | None = None) -> SegmentationResult:
    if mesh_textured is not None:
        _check_topology(mesh_untextured, mesh_textured)
    branches = {"untextured": mesh_untextured}
    if mesh_textured is not None:
        branches["textured"] = mesh_textured

    viewpoints = generate_trajectory(trajectory)
    m = mesh_untextured.face_count
    stats = {
        "views_used": 0, "views_skipped": 0, "detections_filtered": 0,
        "backend_errors": 0, "face_view_counts": np.zeros(m, dtype=np.int64),
        "branch": {name: {"used": [], "skipped": []} for name in branches},
    }
    all_votes = {}
    for name, mesh in branches.items():
        all_votes[name] = _branch_votes(mesh, name, viewpoints, query, backend,
                                        params, stats, observer, render_fn)
    if positive_only:
        all_votes = {name: [ViewVote(v.view_index, v.confidence, v.masked_faces,
                                     np.zeros(0, dtype=np.int64))
                            for v in votes]
                     for name, votes in all_votes.items()}

    g_untextured = accumulate(all_votes["untextured"], m)
    g_textured = accumulate(all_votes["textured"], m) if "textured" in all_votes else None
    o = g_untextured.copy() if g_textured is None \
        else fuse_branches(g_untextured, g_textured)
    if do_smooth:
        if adjacency is None:
            adjacency = build_adjacency(mesh_untextured)
        o_smoothed = smooth(o, adjacency)
    else:
        o_smoothed = o.copy()
    members = threshold(o_smoothed, params.o_threshold)
    scores = FaceScores(g_untextured=g_untextured, g_textured=g_textured, o=o,
                        o_smoothed=o_smoothed, o_threshold=params.o_threshold)
    diagnostics = Diagnostics(views_used=stats["views_used"],
                              views_skipped=stats["views_skipped"],
                              detections_filtered=stats["detections_filtered"],
                              backend_errors=stats["backend_errors"],
                              face_view_counts=stats["face_view_counts"],
                              per_branch=stats["branch"])
    if stats["views_used"] == 0 and stats["backend_errors"] > 0:
        raise BackendError(
            f"no view produced a vote; {stats['backend_errors']} backend errors")
    return SegmentationResult(member_faces=members, scores=scores,
                              per_view_votes=all_votes, query=query,
                              diagnostics=diagnostics, k=trajectory.k, seed=seed,
                              method=method)


def segment_mesh(mesh_untextured: Mesh, mesh_textured: Mesh | None, query: QuerySpec,
                 trajectory: TrajectoryConfig, backend: GroundingBackend,
                 params: VoteParams = VoteParams(), seed=None, observer=None,
                 render_fn=render, adjacency=None) -> SegmentationResult:
    """Full face-confidence-revoting pipeline.

    Renders both branches along the trajectory, collects per-view votes
    (views with no surviving detection cast none), accumulates per branch,
    averages the branches, smooths once over edge-neighbors, and keeps
    faces strictly above the threshold.  ``mesh_textured`` may be None for
    single-branch runs.  ``render_fn`` and ``adjacency`` allow callers to
    share renders and the face graph across pipeline runs over the same
    geometry.
    """
    return _run_pipeline(mesh_untextured, mesh_textured, query, trajectory, backend,
                         params, seed, observer, positive_only=False,
                         do_smooth=True, method="revote", render_fn=render_fn,
                         adjacency=adjacency)


def baseline_segment(mesh_untextured: Mesh, mesh_textured: Mesh | None, query: QuerySpec,
                     trajectory: TrajectoryConfig, backend: GroundingBackend,
                     params: VoteParams = VoteParams(), seed=None, observer=None,
                     render_fn=render, adjacency=None) -> SegmentationResult:
    """Highest-confidence-box baseline: the union over views of masked faces,
    with no negative votes and no smoothing (the ablation comparator)."""
    return _run_pipeline(mesh_untextured, mesh_textured, query, trajectory, backend,
                         params, seed, observer, positive_only=True,
                         do_smooth=False, method="baseline", render_fn=render_fn,
                         adjacency=adjacency)


def assign_multi(queries, results) -> np.ndarray:
    """Assign each face the query with the highest smoothed score.

    Ties break to the lowest query index; faces whose best score is <= 0
    stay unlabeled (-1).
    """
    if len(queries) != len(results):
        raise MeshMismatch("one result per query required")
    if not results:
        raise MeshMismatch("no results to assign")
    m = results[0].face_count
    for res in results:
        if res.face_count != m:
            raise MeshMismatch("results cover meshes of different face counts")
    stacked = np.stack([res.scores.o_smoothed for res in results])
    best = np.argmax(stacked, axis=0)
    best_score = stacked[best, np.arange(m)]
    labels = np.where(best_score > 0.0, best, -1)
    return labels.astype(np.int64)


# --- report serialization ------------------------------------------------------

def result_report(result: SegmentationResult) -> dict:
    """JSON-ready report; key order and float formatting are deterministic."""
    return {
        "query": {"object_text": result.query.object_text,
                  "grounding_text": result.query.grounding_text},
        "K": result.k,
        "method": result.method,
        "o_threshold": result.scores.o_threshold,
        "o_smoothed": [float(v) for v in result.scores.o_smoothed],
        "member_faces": [int(f) for f in result.member_faces],
        "seed": result.seed,
        "diagnostics": {
            "views_used": result.diagnostics.views_used,
            "views_skipped": result.diagnostics.views_skipped,
            "detections_filtered": result.diagnostics.detections_filtered,
            "backend_errors": result.diagnostics.backend_errors,
            "face_view_counts": [int(c) for c in result.diagnostics.face_view_counts],
            "per_branch": {
                name: {"used": sorted(int(v) for v in info["used"]),
                       "skipped": sorted(int(v) for v in info["skipped"])}
                for name, info in sorted(result.diagnostics.per_branch.items())
            },
        },
    }


def write_report(result: SegmentationResult, path) -> None:
    try:
        Path(path).write_text(json.dumps(result_report(result), indent=1,
                                         sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"bad report {path}: {exc}") from exc
