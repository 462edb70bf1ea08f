"""Command-line front end: single run, batch, phantom generation, service.

Exit codes: 0 success, 1 runtime failure, 2 partial batch failure,
3 configuration error (bad flags, config file, manifest, or phantom spec).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from ntscan.canny import CannyParams
from ntscan.despeckle import DespeckleParams
from ntscan.image import ImageFormatError, Roi, load_image
from ntscan.meanshift import MeanShiftParams
from ntscan.measure import CohortStats, NormTable
from ntscan.phantom import generate_phantom, spec_from_dict, write_bundle
from ntscan.pipeline import (
    PipelineConfig,
    StageError,
    batch_run,
    overlay_png,
    parse_manifest,
    report_json,
    run_pipeline,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_PARTIAL = 2
EXIT_CONFIG = 3


class ConfigError(ValueError):
    pass


def _build(cls, d: dict, what: str):
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _norms_from(obj, base: Path) -> NormTable:
    if isinstance(obj, str):
        obj = json.loads((base / obj).read_text())
    if not isinstance(obj, dict):
        raise ConfigError("norms must be an object or a path to one")
    weeks = {int(k): (float(m), float(s))
             for k, (m, s) in obj.get("weeks", {}).items()}
    kwargs = {}
    if weeks:
        kwargs["weeks"] = weeks
    if "cutoff_mm" in obj:
        cutoff = obj["cutoff_mm"]
        kwargs["cutoff_mm"] = None if cutoff is None else float(cutoff)
    return _build(NormTable, kwargs, "norms")


def config_from_dict(d: dict, base: Path = Path(".")) -> PipelineConfig:
    """Build a pipeline config from a JSON-shaped dict, rejecting unknowns."""
    known = {"despeckle", "meanshift", "canny", "norms", "mm_per_px",
             "gestation_weeks"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    if "despeckle" in d:
        kwargs["despeckle"] = _build(DespeckleParams, d["despeckle"], "despeckle")
    if "meanshift" in d:
        kwargs["meanshift"] = _build(MeanShiftParams, d["meanshift"], "meanshift")
    if "canny" in d:
        kwargs["canny"] = _build(CannyParams, d["canny"], "canny")
    if "norms" in d:
        kwargs["norms"] = _norms_from(d["norms"], base)
    for key in ("mm_per_px", "gestation_weeks"):
        if key in d and d[key] is not None:
            kwargs[key] = float(d[key])
    return _build(PipelineConfig, kwargs, "config")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            cfg = config_from_dict(json.loads(path.read_text()), base=path.parent)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config {path}: {exc}") from exc
    if getattr(args, "mm_per_px", None) is not None:
        cfg = replace(cfg, mm_per_px=args.mm_per_px)
    if getattr(args, "weeks", None) is not None:
        cfg = replace(cfg, gestation_weeks=args.weeks)
    return cfg


def _parse_roi(text: str) -> Roi:
    try:
        x0, y0, w, h = (int(part) for part in text.split(","))
        return Roi(x0, y0, w, h)
    except ValueError as exc:
        raise ConfigError(f"--roi must be x0,y0,w,h with w,h >= 16: {exc}") from exc


def _stats_dict(stats: CohortStats) -> list[dict]:
    return [
        {"week": r.week, "n": r.n, "mean_mm": r.mean_mm, "std_mm": r.std_mm,
         "var_mm": r.var_mm, "degenerate": r.degenerate}
        for r in stats.rows
    ]


def cmd_run(args) -> int:
    cfg = _load_config(args)
    roi = _parse_roi(args.roi)
    try:
        img = load_image(args.image)
    except (OSError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        result = run_pipeline(img, roi, cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    text = report_json(result)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        (out / "overlay.png").write_bytes(overlay_png(result))
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _load_config(args)
    try:
        entries = parse_manifest(args.manifest)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"manifest: {exc}") from exc
    result = batch_run(entries, cfg)
    payload = {
        "reports": list(result.reports),
        "cohort": _stats_dict(result.stats),
        "failures": list(result.failures),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "batch.json").write_text(text)
    return result.exit_code


def cmd_phantom(args) -> int:
    spec_dict = {}
    if args.spec:
        try:
            spec_dict = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"spec {args.spec}: {exc}") from exc
    overrides = {
        "seed": args.seed,
        "band_thickness_mm": args.thickness_mm,
        "band_orientation_deg": args.orientation_deg,
        "mm_per_px": args.mm_per_px,
        "speckle_looks": args.looks,
        "band_curvature_px": args.curvature_px,
    }
    if args.size is not None:
        overrides["width"] = overrides["height"] = args.size
    spec_dict.update({k: v for k, v in overrides.items() if v is not None})
    try:
        spec = spec_from_dict(spec_dict)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"phantom spec: {exc}") from exc
    bundle = write_bundle(generate_phantom(spec), args.out)
    print(str(bundle / "truth.json"))
    return EXIT_OK


def cmd_serve(args) -> int:
    from ntscan.server import serve

    cfg = _load_config(args)
    try:
        serve(args.bind, cfg=cfg, snapshot_dir=args.snapshot_dir, ui_dir=args.ui)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntscan",
        description="Translucency thickness measurement from speckled scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="measure one image")
    run.add_argument("--image", required=True)
    run.add_argument("--roi", required=True, help="x0,y0,w,h in pixels")
    run.add_argument("--mm-per-px", dest="mm_per_px", type=float)
    run.add_argument("--weeks", type=float)
    run.add_argument("--config")
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="run a manifest of images")
    batch.add_argument("--manifest", required=True)
    batch.add_argument("--mm-per-px", dest="mm_per_px", type=float)
    batch.add_argument("--weeks", type=float)
    batch.add_argument("--config")
    batch.add_argument("--out")
    batch.set_defaults(func=cmd_batch)

    phantom = sub.add_parser("phantom", help="write a synthetic bundle")
    phantom.add_argument("--spec", help="JSON file of spec fields")
    phantom.add_argument("--seed", type=int)
    phantom.add_argument("--out", required=True)
    phantom.add_argument("--size", type=int)
    phantom.add_argument("--thickness-mm", dest="thickness_mm", type=float)
    phantom.add_argument("--orientation-deg", dest="orientation_deg", type=float)
    phantom.add_argument("--mm-per-px", dest="mm_per_px", type=float)
    phantom.add_argument("--looks", type=float)
    phantom.add_argument("--curvature-px", dest="curvature_px", type=float)
    phantom.set_defaults(func=cmd_phantom)

    serve = sub.add_parser("serve", help="run the HTTP session service")
    serve.add_argument("--bind", default="127.0.0.1:8787")
    serve.add_argument("--config")
    serve.add_argument("--mm-per-px", dest="mm_per_px", type=float)
    serve.add_argument("--weeks", type=float)
    serve.add_argument("--snapshot-dir", dest="snapshot_dir")
    serve.add_argument("--ui")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
