"""Manifest loading: defaults, validation, and path resolution."""
from __future__ import annotations

import pytest

from tlsa_export import manifest
from tlsa_export.errors import ManifestError


def write(tmp_path, body: str):
    path = tmp_path / "m.toml"
    path.write_text(body, encoding="utf-8")
    return path


class TestDefaults:
    def test_minimal_manifest_gets_all_defaults(self, tmp_path):
        m = manifest.load_manifest(write(tmp_path, ""))
        assert m.prompts == manifest.DEFAULT_PROMPTS
        assert len(m.prompts) == 5
        assert m.image_backend == "clip"
        assert m.caption_backend == "blip"
        assert m.label_template == manifest.DEFAULT_TEMPLATE
        assert m.fake_dim == 32

    def test_prompt_list_override(self, tmp_path):
        m = manifest.load_manifest(
            write(tmp_path, '[prompts]\nlist = ["What is this? Please tell me."]\n')
        )
        assert m.prompts == ["What is this? Please tell me."]

    def test_relative_paths_resolve_against_manifest_directory(self, tmp_path):
        m = manifest.load_manifest(
            write(tmp_path, '[dataset]\nroot = "imgs"\n\n[outputs]\ncaptions = "out/c.jsonl"\n')
        )
        assert m.dataset_root == tmp_path / "imgs"
        assert m.out_captions == tmp_path / "out" / "c.jsonl"

    def test_absolute_path_kept(self, tmp_path):
        m = manifest.load_manifest(write(tmp_path, '[dataset]\nroot = "/data/paintings"\n'))
        assert str(m.dataset_root) == "/data/paintings"


class TestValidation:
    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="unknown manifest section"):
            manifest.load_manifest(write(tmp_path, "[surprise]\nx = 1\n"))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match=r"\[dataset\]"):
            manifest.load_manifest(write(tmp_path, '[dataset]\nroot = "d"\nknobs = 3\n'))

    def test_empty_prompt_list_rejected(self, tmp_path):
        # prompt list nonempty is the one manifest invariant
        with pytest.raises(ManifestError, match="nonempty"):
            manifest.load_manifest(write(tmp_path, "[prompts]\nlist = []\n"))

    def test_non_string_prompts_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="array of strings"):
            manifest.load_manifest(write(tmp_path, "[prompts]\nlist = [1, 2]\n"))

    def test_unknown_backend_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="unknown backend"):
            manifest.load_manifest(write(tmp_path, '[models]\nimage_backend = "resnet"\n'))

    def test_template_must_reference_label(self, tmp_path):
        with pytest.raises(ManifestError, match=r"\{label\}"):
            manifest.load_manifest(write(tmp_path, '[labels]\ntemplate = "a photo"\n'))

    def test_bad_toml_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="bad TOML"):
            manifest.load_manifest(write(tmp_path, "not = [toml\n"))

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="cannot read"):
            manifest.load_manifest(tmp_path / "absent.toml")

    def test_nonpositive_fake_dim_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="positive"):
            manifest.load_manifest(write(tmp_path, "[fake]\ndim = 0\n"))
