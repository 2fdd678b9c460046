"""Command line: one `export` subcommand mirroring ExportJob."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ExportError
from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clipexport")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export",
                       help="embed an image folder tree into CMF1 + manifest")
    p.add_argument("--images", required=True,
                   help="root folder with one subfolder per class")
    p.add_argument("--classes", default=None,
                   help="optional file with one class name per line "
                        "(default: sorted subfolder names)")
    p.add_argument("--template", action="append", default=None,
                   help="prompt template with a [class] placeholder; repeat "
                        "for an ensemble (default: 'a photo of a [class].')")
    p.add_argument("--model", default="color-words",
                   help="model id for the embedding backend, or "
                        "'color-words' for the offline stand-in")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    class_names = None
    if args.classes:
        class_names = tuple(
            line.strip() for line in Path(args.classes).read_text().splitlines()
            if line.strip()
        )
    templates = tuple(args.template) if args.template \
        else ("a photo of a [class].",)
    try:
        job = ExportJob(image_root=args.images, output_dir=args.out,
                        model_id=args.model, templates=templates,
                        class_names=class_names,
                        train_fraction=args.train_fraction)
        result = export(job)
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    print(result.manifest_path)


if __name__ == "__main__":
    main()
