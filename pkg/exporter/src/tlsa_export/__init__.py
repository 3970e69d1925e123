"""Artifact exporter: runs embedding and captioning models over image
folders and writes the files the alignment engine consumes."""
from .errors import (
    EmptyDatabase,
    EmptyDataset,
    ExportError,
    ManifestError,
    MissingDatabase,
    ModelUnavailable,
)
from .export import export_captions, export_image_embeddings, export_label_embeddings
from .manifest import DEFAULT_PROMPTS, DEFAULT_TEMPLATE, ExportManifest, load_manifest
from .wordnet import extract_synonyms

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PROMPTS",
    "DEFAULT_TEMPLATE",
    "EmptyDatabase",
    "EmptyDataset",
    "ExportError",
    "ExportManifest",
    "ManifestError",
    "MissingDatabase",
    "ModelUnavailable",
    "export_captions",
    "export_image_embeddings",
    "export_label_embeddings",
    "extract_synonyms",
    "load_manifest",
    "__version__",
]
