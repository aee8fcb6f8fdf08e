"""Zero-shot mesh part segmentation: render a mesh along a fixed spherical
trajectory, ground each view with a pluggable 2D detection/segmentation
backend, and aggregate votes onto faces with confidence revoting."""

from .backends import (Corruption, Detection, FilesBackend, GroundingBackend,
                       HttpBackend, OracleBackend, OracleConfig, QuerySpec)
from .errors import MeshsegError
from .evaluate import EvalReport, GroundTruth, evaluate, iou, load_labels, save_labels
from .mesh import Bitmap, FaceAdjacency, Mesh, build_adjacency, normalize_mesh
from .meshio import export_labeled_mesh, load_mesh, load_texture
from .render import RenderOutput, faces_in_mask, object_bbox, render
from .revote import (FaceScores, SegmentationResult, ViewVote, VoteParams,
                     accumulate, assign_multi, baseline_segment, filter_detections,
                     fuse_branches, make_view_vote, segment_mesh, smooth, threshold,
                     write_report)
from .views import TrajectoryConfig, Viewpoint, generate_trajectory, project, unproject

__version__ = "0.1.0"

__all__ = [
    "Bitmap", "Corruption", "Detection", "EvalReport", "FaceAdjacency",
    "FaceScores", "FilesBackend", "GroundTruth", "GroundingBackend", "HttpBackend",
    "Mesh", "MeshsegError", "OracleBackend", "OracleConfig", "QuerySpec",
    "RenderOutput", "SegmentationResult", "TrajectoryConfig", "ViewVote",
    "Viewpoint", "VoteParams", "accumulate", "assign_multi", "baseline_segment",
    "build_adjacency", "evaluate", "export_labeled_mesh", "faces_in_mask",
    "filter_detections", "fuse_branches", "generate_trajectory", "iou",
    "load_labels", "load_mesh", "load_texture", "make_view_vote", "normalize_mesh",
    "object_bbox", "project", "render", "save_labels", "segment_mesh", "smooth",
    "threshold", "unproject", "write_report",
]
