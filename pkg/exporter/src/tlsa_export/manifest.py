"""Export manifest: one TOML file naming the dataset, models, prompts, and
output paths for a whole export session. Relative paths resolve against the
manifest's own directory."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from .errors import ManifestError

DEFAULT_PROMPTS = [
    "What is the exact name of the object in the painting? Please tell me.",
    "What can you identify in the illustration? Please tell me in a word.",
    "What is the specific name of the object captured in the photograph? Please tell me.",
    "What appears in the picture with its accurate name in the drawing? Please tell me.",
    "What is portrayed in the photo with its exact name? Please tell me.",
]
DEFAULT_TEMPLATE = "a photo of a {label}"
DEFAULT_CLIP = "openai/clip-vit-base-patch32"
DEFAULT_BLIP = "Salesforce/blip-vqa-base"

_SECTIONS = ("dataset", "models", "prompts", "outputs", "labels", "wordnet", "fake")
_KEYS = {
    "dataset": ("root", "domain"),
    "models": ("image_backend", "caption_backend", "clip_model", "blip_model"),
    "prompts": ("list",),
    "outputs": ("image_embeddings", "label_embeddings", "captions", "synonyms"),
    "labels": ("file", "template"),
    "wordnet": ("database",),
    "fake": ("dim", "answers"),
}
_BACKENDS = ("clip", "blip", "fake")


@dataclass
class ExportManifest:
    dataset_root: Optional[Path]
    domain: str
    prompts: list[str]
    image_backend: str = "clip"
    caption_backend: str = "blip"
    clip_model: str = DEFAULT_CLIP
    blip_model: str = DEFAULT_BLIP
    out_image_embeddings: Optional[Path] = None
    out_label_embeddings: Optional[Path] = None
    out_captions: Optional[Path] = None
    out_synonyms: Optional[Path] = None
    labels_file: Optional[Path] = None
    label_template: str = DEFAULT_TEMPLATE
    wordnet_database: Optional[Path] = None
    fake_dim: int = 32
    fake_answers: Optional[Path] = None

    def __post_init__(self) -> None:
        if not self.prompts:
            raise ManifestError("prompt list must be nonempty")
        for name in (self.image_backend, self.caption_backend):
            if name not in _BACKENDS:
                raise ManifestError(
                    f"unknown backend {name!r}; expected one of {', '.join(_BACKENDS)}"
                )
        if "{label}" not in self.label_template:
            raise ManifestError("label template must contain '{label}'")
        if self.fake_dim < 1:
            raise ManifestError("fake embedding dim must be positive")


def load_manifest(path) -> ExportManifest:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(f"bad TOML in {path}: {exc}")

    extra = sorted(set(raw) - set(_SECTIONS))
    if extra:
        raise ManifestError(f"unknown manifest section(s): {', '.join(extra)}")
    for section, keys in _KEYS.items():
        bad = sorted(set(raw.get(section, {})) - set(keys))
        if bad:
            raise ManifestError(f"unknown key(s) in [{section}]: {', '.join(bad)}")

    base = path.parent

    def resolve(section: str, key: str) -> Optional[Path]:
        value = raw.get(section, {}).get(key)
        return None if value is None else base / str(value)

    dataset = raw.get("dataset", {})
    models = raw.get("models", {})
    labels = raw.get("labels", {})
    fake = raw.get("fake", {})
    prompts = raw.get("prompts", {}).get("list", DEFAULT_PROMPTS)
    if not isinstance(prompts, list) or not all(isinstance(p, str) for p in prompts):
        raise ManifestError("[prompts] list must be an array of strings")

    return ExportManifest(
        dataset_root=resolve("dataset", "root"),
        domain=str(dataset.get("domain", "")),
        prompts=list(prompts),
        image_backend=str(models.get("image_backend", "clip")),
        caption_backend=str(models.get("caption_backend", "blip")),
        clip_model=str(models.get("clip_model", DEFAULT_CLIP)),
        blip_model=str(models.get("blip_model", DEFAULT_BLIP)),
        out_image_embeddings=resolve("outputs", "image_embeddings"),
        out_label_embeddings=resolve("outputs", "label_embeddings"),
        out_captions=resolve("outputs", "captions"),
        out_synonyms=resolve("outputs", "synonyms"),
        labels_file=resolve("labels", "file"),
        label_template=str(labels.get("template", DEFAULT_TEMPLATE)),
        wordnet_database=resolve("wordnet", "database"),
        fake_dim=int(fake.get("dim", 32)),
        fake_answers=resolve("fake", "answers"),
    )
