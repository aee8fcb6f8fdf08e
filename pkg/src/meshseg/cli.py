"""Command-line orchestration: ``views``, ``render``, ``segment``, ``eval``.

Exit codes: 0 success, 2 input/config error, 3 backend error, 4 internal
assertion.  A ``--config`` file accepts the same keys as the long flags in
flat ``key=value`` lines; explicit flags override file values.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backends import (Corruption, FilesBackend, HttpBackend, OracleBackend,
                       OracleConfig, QuerySpec, save_detections, view_dir)
from .errors import (BackendError, ConfigError, InputError, MeshsegError)
from .evaluate import (evaluate_multi, evaluate_single, load_labels,
                       write_eval_csv, write_eval_json)
from .mesh import triangle_areas
from .meshio import export_labeled_mesh, load_mesh
from .render import render, save_fidx, save_png
from .revote import (VoteParams, assign_multi, baseline_segment, load_report,
                     segment_mesh, write_report)
from .views import TrajectoryConfig, generate_trajectory
from .mesh import normalize_mesh

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_INTERNAL = 4


def _add_trajectory_flags(parser):
    parser.add_argument("--k", type=int, default=8, help="total view count (even)")
    parser.add_argument("--r", type=float, default=2.0, help="camera radius")
    parser.add_argument("--thetas", default="75,115",
                        help="comma-separated polar angles in degrees")
    parser.add_argument("--image-size", type=int, default=512)
    parser.add_argument("--fov", type=float, default=45.0, help="vertical fov, degrees")
    parser.add_argument("--up-axis", choices=("y", "z"), default="y")


def _trajectory_from_args(args) -> TrajectoryConfig:
    try:
        thetas = tuple(float(t) for t in str(args.thetas).split(",") if t != "")
    except ValueError as exc:
        raise ConfigError(f"bad --thetas value {args.thetas!r}") from exc
    return TrajectoryConfig(k=args.k, r=args.r, polar_angles=thetas,
                            image_size=args.image_size, fov_y=args.fov,
                            up_axis=args.up_axis)


def _add_vote_flags(parser):
    parser.add_argument("--iou-cutoff", type=float, default=0.90,
                        help="whole-object filter IoU threshold")
    parser.add_argument("--membership-fraction", type=float, default=0.5)
    parser.add_argument("--min-pixels", type=int, default=2)
    parser.add_argument("--o-threshold", type=float, default=0.0)
    parser.add_argument("--multi-box", choices=("top1", "union"), default="top1")


def _add_backend_flags(parser):
    parser.add_argument("--backend", choices=("oracle", "files", "http"),
                        default="oracle")
    parser.add_argument("--oracle-labels", help="per-face label file for the oracle")
    parser.add_argument("--oracle-target", type=int, default=1,
                        help="label id the oracle treats as the target")
    parser.add_argument("--oracle-corruption",
                        choices=("none", "drop", "complement", "shift"), default="none")
    parser.add_argument("--oracle-views", default="",
                        help="comma-separated view ids the corruption applies to")
    parser.add_argument("--oracle-dx", type=int, default=0)
    parser.add_argument("--oracle-dy", type=int, default=0)
    parser.add_argument("--files-dir", help="recorded session directory (files backend)")
    parser.add_argument("--http-url", default="http://127.0.0.1:8731",
                        help="sidecar base URL (http backend)")
    parser.add_argument("--http-timeout", type=float, default=30.0)


def _backend_from_args(args, mesh):
    if args.backend == "oracle":
        if not args.oracle_labels:
            raise ConfigError("--backend oracle requires --oracle-labels")
        truth = load_labels(args.oracle_labels, face_count=mesh.face_count)
        views = frozenset(int(v) for v in args.oracle_views.split(",") if v != "")
        corruption = Corruption(kind=args.oracle_corruption, views=views,
                                dx=args.oracle_dx, dy=args.oracle_dy)
        config = OracleConfig(gt_labels=truth.labels, target_label=args.oracle_target,
                              corruption=corruption, seed=args.seed or 0)
        return OracleBackend(config)
    if args.backend == "files":
        if not args.files_dir:
            raise ConfigError("--backend files requires --files-dir")
        return FilesBackend(args.files_dir)
    return HttpBackend(args.http_url, timeout=args.http_timeout)


def _apply_config_file(argv):
    """Expand ``--config FILE`` into leading flags (so real flags override)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    path = Path(argv[idx + 1])
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    expanded = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#")[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        expanded += [f"--{key}", value]
    rest = argv[:idx] + argv[idx + 2:]
    return [rest[0]] + expanded + rest[1:] if rest else expanded


def _load_input_meshes(args):
    mesh = normalize_mesh(load_mesh(args.mesh, texture_path=args.texture))
    textured = None
    if getattr(args, "textured_mesh", None):
        textured = normalize_mesh(load_mesh(args.textured_mesh,
                                            texture_path=args.texture))
    elif mesh.texture is not None:
        textured = mesh
    if textured is not None and textured.texture is None:
        raise ConfigError("textured branch requested but no texture is attached "
                          "(pass --texture or a textured mesh)")
    return mesh, textured


def cmd_views(args) -> int:
    trajectory = _trajectory_from_args(args)
    viewpoints = generate_trajectory(trajectory)
    print(f"{'k':>3} {'r':>6} {'theta':>7} {'phi':>7} "
          f"{'x':>9} {'y':>9} {'z':>9}")
    for vp in viewpoints:
        x, y, z = vp.position
        print(f"{vp.index:>3} {vp.r:>6.3f} {vp.theta:>7.2f} {vp.phi:>7.2f} "
              f"{x:>9.5f} {y:>9.5f} {z:>9.5f}")
    if args.out:
        doc = [{"index": vp.index, "r": vp.r, "theta": vp.theta, "phi": vp.phi,
                "position": [float(v) for v in vp.position],
                "view_matrix": [[float(v) for v in row] for row in vp.view],
                "projection_matrix": [[float(v) for v in row] for row in vp.proj]}
               for vp in viewpoints]
        Path(args.out).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_render(args) -> int:
    trajectory = _trajectory_from_args(args)
    mesh, textured = _load_input_meshes(args)
    out_root = Path(args.out)
    branches = {"untextured": mesh}
    if args.branch in ("textured", "both"):
        if textured is None:
            raise ConfigError("--branch textured requires a texture")
        branches = {"textured": textured} if args.branch == "textured" \
            else {"untextured": mesh, "textured": textured}
    for branch, branch_mesh in branches.items():
        for vp in generate_trajectory(trajectory):
            rendered = render(branch_mesh, vp, shading=branch)
            directory = view_dir(out_root, branch, vp.index)
            directory.mkdir(parents=True, exist_ok=True)
            save_png(rendered.image, directory / "image.png")
            save_fidx(rendered, directory / "fidx.bin")
    return EXIT_OK


def _parse_queries(args):
    groundings = [g for g in args.grounding_text if g.strip()]
    if not groundings:
        raise ConfigError("at least one --grounding-text required")
    return [QuerySpec(object_text=args.object_text, grounding_text=g)
            for g in groundings]


def cmd_segment(args) -> int:
    trajectory = _trajectory_from_args(args)
    mesh, textured = _load_input_meshes(args)
    if args.single_branch:
        textured = None
    queries = _parse_queries(args)
    backend = _backend_from_args(args, mesh)
    params = VoteParams(iou_cutoff=args.iou_cutoff,
                        membership_fraction=args.membership_fraction,
                        min_pixels=args.min_pixels, o_threshold=args.o_threshold,
                        multi_box=args.multi_box)
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)

    def recorder(branch, viewpoint, rendered, detections, mask):
        directory = view_dir(out_root, branch, viewpoint.index)
        directory.mkdir(parents=True, exist_ok=True)
        save_png(rendered.image, directory / "image.png")
        save_fidx(rendered, directory / "fidx.bin")
        save_detections(detections, directory / "detections.json")
        if mask is not None:
            save_png(mask, directory / "mask.png")

    runner = baseline_segment if args.method == "baseline" else segment_mesh
    results = []
    for qi, query in enumerate(queries):
        observer = recorder if (args.record and qi == 0) else None
        result = runner(mesh, textured, query, trajectory, backend, params,
                        seed=args.seed, observer=observer)
        results.append(result)
        name = "report.json" if len(queries) == 1 else f"report_{qi}.json"
        write_report(result, out_root / name)

    if len(queries) == 1:
        labels = np.full(mesh.face_count, -1, dtype=np.int64)
        labels[results[0].member_faces] = 0
    else:
        labels = assign_multi(queries, results)
        with open(out_root / "assignment.txt", "w") as fh:
            for lab in labels:
                fh.write(f"{int(lab)}\n")
    export_labeled_mesh(mesh, labels, out_root / "segmented.ply")
    return EXIT_OK


def cmd_eval(args) -> int:
    if bool(args.report) == bool(args.assignment):
        raise ConfigError("pass exactly one of --report or --assignment")
    truth = load_labels(args.labels)
    weights = None
    visible = None
    if args.area_weighted:
        if not args.mesh:
            raise ConfigError("--area-weighted requires --mesh for face areas")
        mesh = load_mesh(args.mesh)
        weights = {i: float(a) for i, a in enumerate(triangle_areas(mesh.vertices,
                                                                    mesh.faces))}
    if args.report:
        doc = load_report(args.report)
        counts = doc.get("diagnostics", {}).get("face_view_counts")
        if len(doc["o_smoothed"]) != truth.face_count:
            raise ConfigError(
                f"report covers {len(doc['o_smoothed'])} faces, labels {truth.face_count}")
        if args.visible_only:
            if counts is None:
                raise ConfigError("report lacks face_view_counts; "
                                  "cannot apply --visible-only")
            visible = [i for i, c in enumerate(counts) if c > 0]
        report = evaluate_single(doc["member_faces"], truth, args.target_label,
                                 visible=visible, weights=weights)
    else:
        if args.visible_only:
            raise ConfigError("--visible-only needs --report (visibility counts "
                              "live in the report diagnostics)")
        assignment = load_labels(args.assignment, face_count=truth.face_count)
        report = evaluate_multi(assignment.labels, truth, visible=visible,
                                weights=weights)
    for name, value in report.rows():
        print(f"{name}: {value:.4f}")
    print(f"miou: {report.miou:.4f}")
    if args.out_prefix:
        write_eval_csv(report, args.out_prefix + ".csv")
        write_eval_json(report, args.out_prefix + ".json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshseg",
        description="Zero-shot mesh part segmentation by multi-view revoting")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_views = sub.add_parser("views", help="print the camera trajectory")
    _add_trajectory_flags(p_views)
    p_views.add_argument("--out", help="also write matrices as JSON")
    p_views.set_defaults(func=cmd_views)

    p_render = sub.add_parser("render", help="render per-view images and face maps")
    _add_trajectory_flags(p_render)
    p_render.add_argument("--mesh", required=True)
    p_render.add_argument("--texture")
    p_render.add_argument("--textured-mesh")
    p_render.add_argument("--branch", choices=("untextured", "textured", "both"),
                          default="untextured")
    p_render.add_argument("--out", required=True)
    p_render.set_defaults(func=cmd_render)

    p_seg = sub.add_parser("segment", help="run the full segmentation pipeline")
    _add_trajectory_flags(p_seg)
    _add_vote_flags(p_seg)
    _add_backend_flags(p_seg)
    p_seg.add_argument("--mesh", required=True)
    p_seg.add_argument("--texture")
    p_seg.add_argument("--textured-mesh")
    p_seg.add_argument("--single-branch", action="store_true",
                       help="disable the textured branch")
    p_seg.add_argument("--object-text", required=True)
    p_seg.add_argument("--grounding-text", action="append", required=True,
                       help="repeat for multiple queries")
    p_seg.add_argument("--method", choices=("revote", "baseline"), default="revote")
    p_seg.add_argument("--seed", type=int, default=0)
    p_seg.add_argument("--record", action="store_true", default=True,
                       help="write per-view artifacts (default on)")
    p_seg.add_argument("--no-record", dest="record", action="store_false")
    p_seg.add_argument("--out", required=True)
    p_seg.set_defaults(func=cmd_segment)

    p_eval = sub.add_parser("eval", help="score a report against ground truth")
    p_eval.add_argument("--labels", required=True)
    p_eval.add_argument("--report")
    p_eval.add_argument("--target-label", default=1)
    p_eval.add_argument("--assignment")
    p_eval.add_argument("--visible-only", action="store_true")
    p_eval.add_argument("--area-weighted", action="store_true")
    p_eval.add_argument("--mesh")
    p_eval.add_argument("--out-prefix")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except MeshsegError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
