"""Command-line entry points: detect, eval, synth.

All outputs land under --out, never beside the inputs. Every emitted JSON
document is validated against the shipped schema before it is written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .config import AppConfig, load_config, resolve_spool
from .evaluate import ConfusionCounts, SceneSpec, f1, generate_scene, score_report
from .pipeline import run_pipeline
from .privacy import k_anonymize_locations
from .raster import BinaryMask, RasterImage, Region
from .segbackend import ReferenceBackend, SpoolBackend


def _schema() -> dict:
    text = resources.files("rebarscope").joinpath("report_schema.json").read_text()
    return json.loads(text)


def validate_json(instance: dict, definition: str) -> None:
    schema = _schema()
    jsonschema.validate(instance, {"$ref": f"#/$defs/{definition}", "$defs": schema["$defs"]})


def _write_json(path: Path, instance: dict, definition: str) -> None:
    validate_json(instance, definition)
    path.write_text(json.dumps(instance, indent=2) + "\n", encoding="utf-8")


def render_overlay(image: RasterImage, regions: list[Region], palette) -> RasterImage:
    """Tint each region at 50% alpha with palette[id mod 12], outline its bbox."""
    out = image.pixels.astype(np.int32).copy()
    for r in regions:
        color = np.asarray(palette[r.id % 12], dtype=np.int32)
        sel = r.mask.bits
        out[sel] = (out[sel] + color + 1) // 2
        x0, y0, x1, y1 = r.bbox
        out[y0, x0 : x1 + 1] = color
        out[y1, x0 : x1 + 1] = color
        out[y0 : y1 + 1, x0] = color
        out[y0 : y1 + 1, x1] = color
    return RasterImage(np.clip(out, 0, 255).astype(np.uint8))


def render_combined(*images: RasterImage) -> RasterImage:
    """Side-by-side panel with thin black separators."""
    h = max(im.height for im in images)
    parts = []
    for i, im in enumerate(images):
        p = im.pixels
        if im.height < h:
            pad = np.zeros((h - im.height, im.width, 3), dtype=np.uint8)
            p = np.concatenate([p, pad], axis=0)
        parts.append(p)
        if i != len(images) - 1:
            parts.append(np.zeros((h, 2, 3), dtype=np.uint8))
    return RasterImage(np.concatenate(parts, axis=1))


def _make_backend(cfg: AppConfig, spool: str | None):
    if cfg.backend == "external":
        if not spool:
            raise ValueError("external backend requires a spool directory")
        return SpoolBackend(spool=Path(spool), timeout_s=cfg.timeout_s)
    return ReferenceBackend()


@dataclass
class _ImageResult:
    image: str
    report_dict: dict | None
    sign_centroids: list[tuple[float, float]]
    metrics: dict | None = None
    error: str | None = None


def _process_image(
    path_str: str,
    cfg: AppConfig,
    spool: str | None,
    out_dir: str,
    truth_path: str | None = None,
) -> _ImageResult:
    """Worker: full pipeline on one image plus raster outputs.

    The report JSON is returned (not written) so the coordinator can fold
    in batch-level k-anonymity before serialization.
    """
    name = Path(path_str).name
    try:
        image = RasterImage.load(path_str)
        backend = _make_backend(cfg, spool)
        report = run_pipeline(
            image,
            backend,
            cfg.pipeline,
            cfg.privacy,
            image_name=name,
            config_hash=cfg.config_hash(),
        )
        metrics = None
        if truth_path is not None:
            truth = BinaryMask.load(truth_path)
            metrics = score_report(report, truth)
            report.metrics = metrics

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        overlay = render_overlay(image, report.regions, cfg.palette)
        overlay.save(out / f"{name}.overlay.png")
        anonymized = report.anonymized or image
        anonymized.save(out / f"{name}.anon.png")
        render_combined(image, overlay, anonymized).save(out / f"{name}.combined.png")
        for r in report.regions:
            r.mask.save(out / f"{name}.region{r.id}.png")

        centroids = [s.region.centroid for s in (report.privacy.signs if report.privacy else [])]
        return _ImageResult(
            image=name,
            report_dict=report.to_json_dict(),
            sign_centroids=centroids,
            metrics=metrics,
        )
    except Exception as exc:  # per-image isolation: one bad input never kills the batch
        return _ImageResult(image=name, report_dict=None, sign_centroids=[], error=str(exc))


def _run_batch(paths, cfg: AppConfig, spool, out_dir, truths=None) -> list[_ImageResult]:
    truths = truths or [None] * len(paths)
    jobs = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)
    jobs = min(jobs, os.cpu_count() or 1, max(len(paths), 1))
    args = [(str(p), cfg, spool, str(out_dir), t) for p, t in zip(paths, truths)]
    if jobs <= 1 or len(paths) <= 1:
        return [_process_image(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_process_image, *zip(*args)))


def _finalize_reports(results: list[_ImageResult], cfg: AppConfig, out_dir: Path) -> None:
    """Batch k-anonymity + report serialization."""
    all_centroids = [c for r in results for c in r.sign_centroids]
    published, suppressed = k_anonymize_locations(
        all_centroids, cfg.privacy.cell_px, cfg.privacy.k
    )
    for r in results:
        if r.report_dict is None:
            continue
        if r.report_dict.get("privacy") is not None:
            r.report_dict["privacy"]["published_cells"] = [list(c) for c in published]
            r.report_dict["privacy"]["suppressed_cells"] = suppressed
        _write_json(out_dir / f"{r.image}.report.json", r.report_dict, "detection_report")
    summary = {
        "k": cfg.privacy.k,
        "cell_px": cfg.privacy.cell_px,
        "images": len(results),
        "signs": len(all_centroids),
        "published_cells": [list(c) for c in published],
        "suppressed_cells": suppressed,
    }
    _write_json(out_dir / "privacy_summary.json", summary, "privacy_summary")


def cmd_detect(args) -> int:
    if not args.images:
        print("warning: no input images given", file=sys.stderr)
        return 0
    cfg = load_config(args.config)
    if args.backend:
        cfg.backend = args.backend
    if args.jobs is not None:
        cfg.jobs = args.jobs
    spool = resolve_spool(cfg, args.spool)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = _run_batch(args.images, cfg, spool, out_dir)
    _finalize_reports(results, cfg, out_dir)

    failures = [r for r in results if r.error]
    for r in failures:
        print(f"failed: {r.image}: {r.error}", file=sys.stderr)
    return 1 if failures else 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    pairs = json.loads(Path(args.pairs).read_text(encoding="utf-8"))
    if not pairs:
        print("error: --pairs file lists no image/truth pairs", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = [p["image"] for p in pairs]
    truths = [p["truth"] for p in pairs]
    results = _run_batch(paths, cfg, None, out_dir, truths=truths)
    _finalize_reports(results, cfg, out_dir)

    failures = [r for r in results if r.error]
    for r in failures:
        print(f"failed: {r.image}: {r.error}", file=sys.stderr)
    scored = [r for r in results if r.metrics]
    if not scored:
        return 1

    def micro(level: str) -> dict:
        counts = ConfusionCounts(
            tp=sum(r.metrics[level]["tp"] for r in scored),
            fp=sum(r.metrics[level]["fp"] for r in scored),
            fn=sum(r.metrics[level]["fn"] for r in scored),
        )
        total = counts.tp + counts.fp + counts.fn
        p, rc, f = f1(counts) if total else (0.0, 0.0, 0.0)
        out = {
            "precision": round(p, 6),
            "recall": round(rc, 6),
            "f1": round(f, 6),
            "tp": counts.tp,
            "fp": counts.fp,
            "fn": counts.fn,
        }
        if level == "region":
            out["iou_threshold"] = 0.5
        return out

    summary = {
        "pairs": len(scored),
        "pixel": micro("pixel"),
        "region": micro("region"),
        "per_image": [{"image": r.image, "metrics": r.metrics} for r in scored],
    }
    _write_json(out_dir / "eval_summary.json", summary, "eval_summary")
    return 1 if failures else 0


def cmd_synth(args) -> int:
    raw = yaml.safe_load(Path(args.spec).read_text(encoding="utf-8")) or {}
    try:
        spec = SceneSpec.from_dict(raw)
    except (TypeError, ValueError) as exc:
        print(f"error: invalid scene spec: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = generate_scene(spec, args.seed)
    scene.image.save(out_dir / "scene.png")
    scene.rust_mask.save(out_dir / "truth.png")
    echo = {
        "seed": args.seed,
        "spec": spec.to_json_dict(),
        "outputs": {"scene": "scene.png", "truth": "truth.png"},
    }
    _write_json(out_dir / "spec.json", echo, "scene_echo")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rebarscope",
        description="Rebar-corrosion detection and signboard anonymization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect damage and anonymize signboards")
    p.add_argument("images", nargs="*", metavar="IMG")
    p.add_argument("--config", default=None)
    p.add_argument("--backend", choices=["reference", "external"], default=None)
    p.add_argument("--spool", default=None, help="spool dir for the external backend")
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="detect and score against truth masks")
    p.add_argument("--pairs", required=True, help="JSON list of {image, truth} paths")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    p.add_argument("--spec", required=True, help="scene spec file (YAML or JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
