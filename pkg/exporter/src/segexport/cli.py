"""Command-line exporters: `segexport proposals ...` and `segexport flow ...`."""

from __future__ import annotations

import argparse
import sys

from .backends import ModelUnavailableError, TorchvisionMaskRCNN, TorchvisionRaft
from .export import DEFAULT_EXPORT_FLOOR, ExportManifest, export_flow, export_proposals


def _cmd_proposals(args) -> int:
    manifest = ExportManifest(frames_dir=args.frames, proposals_dir=args.out,
                              export_floor=args.floor)
    detector = TorchvisionMaskRCNN(weights=args.weights)
    count = export_proposals(manifest, detector)
    print(f"exported proposals for {count} frames to {args.out}")
    return 0


def _cmd_flow(args) -> int:
    manifest = ExportManifest(frames_dir=args.frames, flow_dir=args.out)
    estimator = TorchvisionRaft(weights=args.weights)
    count = export_flow(manifest, estimator)
    print(f"exported {count} flow files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segexport",
                                     description="Export model outputs in the pipeline's formats")
    sub = parser.add_subparsers(dest="command", required=True)

    props = sub.add_parser("proposals", help="run instance segmentation and export sidecars")
    props.add_argument("--frames", required=True)
    props.add_argument("--out", required=True)
    props.add_argument("--floor", type=float, default=DEFAULT_EXPORT_FLOOR,
                       help="export confidence floor (thresholding happens in the pipeline)")
    props.add_argument("--weights", default="DEFAULT")
    props.set_defaults(func=_cmd_proposals)

    flow = sub.add_parser("flow", help="run dense flow and export .flo files")
    flow.add_argument("--frames", required=True)
    flow.add_argument("--out", required=True)
    flow.add_argument("--weights", default="DEFAULT")
    flow.set_defaults(func=_cmd_flow)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelUnavailableError as exc:
        print(f"error: model unavailable: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
