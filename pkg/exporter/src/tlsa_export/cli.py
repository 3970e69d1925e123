"""Command-line entry point: tlsa-export images|labels|captions|synonyms.

Every subcommand reads one manifest file. Failures print a single JSON
line {"error", "message", "stage"} to stderr and exit 2 for manifest
problems, 3 for export failures, 1 for anything unexpected.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from . import export, wordnet
from .errors import ExportError, ManifestError
from .manifest import ExportManifest, load_manifest


def _cmd_images(manifest: ExportManifest) -> None:
    path = export.export_image_embeddings(manifest)
    print(f"wrote {path}")


def _cmd_labels(manifest: ExportManifest) -> None:
    path = export.export_label_embeddings(manifest)
    print(f"wrote {path}")


def _cmd_captions(manifest: ExportManifest) -> None:
    path = export.export_captions(manifest)
    print(f"wrote {path}")


def _cmd_synonyms(manifest: ExportManifest) -> None:
    if manifest.wordnet_database is None:
        raise ManifestError("manifest has no [wordnet] database")
    if manifest.out_synonyms is None:
        raise ManifestError("manifest has no [outputs] synonyms path")
    path = wordnet.extract_synonyms(manifest.wordnet_database, manifest.out_synonyms)
    print(f"wrote {path}")


_COMMANDS = {
    "images": _cmd_images,
    "labels": _cmd_labels,
    "captions": _cmd_captions,
    "synonyms": _cmd_synonyms,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsa-export",
        description="Run embedding/caption models over an image folder and emit engine artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("images", "embed every image into an EMB1 file"),
        ("labels", "embed the label list into an EMB1 file"),
        ("captions", "answer the configured prompts for every image"),
        ("synonyms", "extract noun synonym groups into a SYN file"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True, help="path to the export manifest TOML")
    return parser


def _fail(stage: str, exc: Exception, code: int) -> int:
    payload = {"stage": stage, "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        return _fail("manifest", exc, 2)
    try:
        _COMMANDS[args.command](manifest)
    except ManifestError as exc:
        return _fail(args.command, exc, 2)
    except ExportError as exc:
        return _fail(args.command, exc, 3)
    except Exception as exc:  # noqa: BLE001 - contract: unexpected failures exit 1
        return _fail(args.command, exc, 1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
