"""Acceptance gate: every artifact this tool emits must load through the
alignment engine's validators with zero errors on the ten-image smoke
dataset. One pass line prints per artifact kind."""
from __future__ import annotations

import numpy as np
from tlsa import corpus, lexicon

from tlsa_export import export, manifest, wordnet

from test_wordnet import write_db


class TestArtifactConformance:
    def test_all_artifacts_load_through_engine_validators(
        self, smoke_root, manifest_for, tmp_path, capsys
    ):
        labels = tmp_path / "labels.txt"
        labels.write_text("cat\ndog\nfire truck\n", encoding="utf-8")
        db = write_db(tmp_path)
        m = manifest.load_manifest(
            manifest_for(
                smoke_root,
                extra=f'\n[labels]\nfile = "{labels}"\n\n[wordnet]\ndatabase = "{db}"\n',
            )
        )

        images = corpus.load_embeddings(export.export_image_embeddings(m))
        assert len(images) == 10
        assert images.normalized
        assert np.isfinite(images.rows).all()

        label_table = corpus.load_embeddings(export.export_label_embeddings(m))
        assert label_table.ids == ["cat", "dog", "fire truck"]
        assert label_table.rows.shape == (3, m.fake_dim)

        records = corpus.load_captions(export.export_captions(m))
        assert [rec.sample_id for rec in records] == images.ids
        assert all(len(rec.responses) == 5 for rec in records)
        voted = corpus.vote_records(records)
        assert all(rec.voted_label is not None for rec in voted)

        syn = lexicon.parse_synonym_db(
            wordnet.extract_synonyms(m.wordnet_database, m.out_synonyms)
        )
        assert lexicon.are_synonyms(syn, "laptop", "laptop computer")

        with capsys.disabled():
            print("\nPASS conformance: image embeddings load cleanly (10 rows)")
            print("PASS conformance: label embeddings load cleanly (3 rows)")
            print("PASS conformance: captions load and vote cleanly (10 records)")
            print("PASS conformance: synonym file parses cleanly")
