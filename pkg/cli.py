#!/usr/bin/env python
"""
Command-line entry point.

    eval           evaluate a corpus of case directories
    gen-proxy      write synthetic proxy cases from a source video
    validate       metric-vs-human validation statistics from a pair CSV
    check-case     structural validation of one case directory
    build-controls condition fields and region masks for a synthetic 4D scene

Exit codes: 0 success, 1 any case error, 2 configuration error.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from dotenv import load_dotenv
from PIL import Image
from pydantic import ValidationError

from cases import FRAME_PATTERN, check_case, discover_cases, write_case
from errors import ConfigError, PrebenchError
from geometry import build_controls
from graph import evaluate_corpus
from models import EvalConfig, ProxyKind
from proxy import DEFAULT_MARGIN, gen_proxy_case, load_source, synthetic_source
from report import emit_report, validation_to_json
from scene import load_edit, load_scene, synthetic_scene
from validation import load_pairs, validation_table

EXIT_OK = 0
EXIT_CASE_ERROR = 1
EXIT_CONFIG_ERROR = 2

logger = logging.getLogger(__name__)


def setup_logging(debug: bool = False) -> None:
    """Console logging; --debug switches to DEBUG."""
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(name)s - %(message)s"))
    root = logging.getLogger()
    root.setLevel(logging.DEBUG if debug else logging.INFO)
    root.handlers = [handler]


def load_config(path, workers=None, seed=None) -> EvalConfig:
    """EvalConfig from a JSON file (all fields optional) plus CLI overrides."""
    try:
        config = EvalConfig.model_validate_json(Path(path).read_text()) if path else EvalConfig()
        overrides = {k: v for k, v in (("workers", workers), ("seed", seed)) if v is not None}
        return EvalConfig.model_validate({**config.model_dump(), **overrides}) if overrides else config
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}")


# ========== Commands ==========

def cmd_eval(args) -> int:
    config = load_config(args.config, workers=args.workers)
    paths = discover_cases(args.cases)
    if not paths:
        raise ConfigError(f"no case directories under {args.cases}")
    report = evaluate_corpus(paths, config)
    text = emit_report(report, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    for case in report.failed:
        logger.error("case %s failed: %s", case.case_id, case.error)
    return EXIT_CASE_ERROR if report.failed else EXIT_OK


def cmd_gen_proxy(args) -> int:
    if args.source:
        source = load_source(args.source)
        base_id = Path(args.source).name
    else:
        source = synthetic_source(args.frames, args.height, args.width, seed=args.seed)
        base_id = "synthetic"
    params = {"margin": args.margin}
    bundles = gen_proxy_case(source, ProxyKind.parse(args.kind), params, seed=args.seed, base_id=base_id)
    for bundle in bundles.values():
        write_case(bundle, Path(args.out) / bundle.case_id)
    print(f"wrote {len(bundles)} cases to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    pairs = load_pairs(args.pairs)
    summary = validation_table(pairs, args.top_gap)
    text = validation_to_json(summary)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check_case(args) -> int:
    info = check_case(args.case)
    print(f"{info.case_id}: {info.frames} frames at {info.width}x{info.height}, "
          f"trajectories: {'yes' if info.has_trajectories else 'no'}")
    return EXIT_OK


def cmd_build_controls(args) -> int:
    config = load_config(args.config)
    scene = load_scene(args.scene) if args.scene else synthetic_scene(seed=config.seed)
    edit = load_edit(args.edit) if args.edit else []
    states = build_controls(scene, edit, config)
    out = Path(args.out)
    for sub in ("rgb", "confidence", "masks/preserve", "masks/reveal", "masks/expand", "masks/dynamic"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for t, state in enumerate(states):
        name = FRAME_PATTERN.format(t)
        rgb = np.round(np.clip(state.field.rgb, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(rgb).save(out / "rgb" / name)
        conf = np.round(np.clip(state.field.confidence, 0, 1) * 65535).astype(np.uint16)
        Image.fromarray(conf).save(out / "confidence" / name)
        for role in ("preserve", "reveal", "expand", "dynamic"):
            bits = getattr(state.masks, role)
            Image.fromarray(np.where(bits, 255, 0).astype(np.uint8)).save(out / "masks" / role / name)
    print(f"wrote controls for {len(states)} frames to {out}")
    return EXIT_OK


# ========== Parser ==========

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prebench", description="Region-aware evaluation of 4D video edits")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="Evaluate a corpus of cases")
    p.add_argument("--cases", required=True, help="Corpus directory (or a single case directory)")
    p.add_argument("--config", help="JSON file mirroring EvalConfig")
    p.add_argument("--out", help="Report path (stdout when omitted)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--workers", type=int, default=None, help="Parallel case workers")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-proxy", help="Write synthetic proxy cases")
    p.add_argument("--source", help="Directory of source PNG frames (procedural video when omitted)")
    p.add_argument("--kind", required=True, choices=[*[k.value for k in ProxyKind], "reveal", "expand"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=int, default=DEFAULT_MARGIN, help="Crop margin for expand cases")
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--width", type=int, default=720)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_proxy)

    p = sub.add_parser("validate", help="Agreement and Spearman statistics from a pair CSV")
    p.add_argument("--pairs", required=True)
    p.add_argument("--top-gap", type=float, default=None, help="Keep only this fraction of largest-gap pairs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check-case", help="Validate a case directory without evaluating it")
    p.add_argument("case")
    p.set_defaults(func=cmd_check_case)

    p = sub.add_parser("build-controls", help="Condition fields and masks for a synthetic scene")
    p.add_argument("--scene", help="Scene JSON (built-in synthetic scene when omitted)")
    p.add_argument("--edit", help="Edit script JSON")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_controls)
    return parser


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.debug)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG_ERROR
    except PrebenchError as e:
        logger.error("%s", e)
        return EXIT_CASE_ERROR


if __name__ == "__main__":
    sys.exit(main())
