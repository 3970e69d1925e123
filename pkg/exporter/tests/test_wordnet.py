"""Noun-database extraction into the SYN synonym format."""
from __future__ import annotations

import pytest
from tlsa import lexicon

from tlsa_export import wordnet
from tlsa_export.errors import EmptyDatabase, MissingDatabase

# Layout per data line: offset lex_filenum ss_type w_cnt word lex_id ...
MINI_DB = (
    "  1 This software and database is provided for testing purposes only.\n"
    "  2 All lines that begin with whitespace are license header.\n"
    "02971356 06 n 02 laptop 0 laptop_computer 0 001 @ 02970849 n 0000 | a portable computer\n"
    "02970849 06 n 01 portable_computer 0 001 @ 02958343 n 0000 | small enough to carry\n"
    "03001234 06 n 03 sofa 0 couch 0 lounge 2 001 @ 03000000 n 0000 | upholstered seat\n"
)


def write_db(tmp_path, text=MINI_DB):
    path = tmp_path / "data.noun"
    path.write_text(text, encoding="utf-8")
    return path


class TestParsing:
    def test_one_group_per_synset_in_file_order(self, tmp_path):
        synsets = wordnet.parse_noun_synsets(write_db(tmp_path))
        assert synsets == [
            ["laptop", "laptop_computer"],
            ["portable_computer"],
            ["sofa", "couch", "lounge"],
        ]

    def test_word_count_is_hexadecimal(self, tmp_path):
        words = " ".join(f"w{i:02d} 0" for i in range(10))
        db = write_db(tmp_path, f"00000001 06 n 0a {words} 000 | ten lemma synset\n")
        synsets = wordnet.parse_noun_synsets(db)
        assert synsets == [[f"w{i:02d}" for i in range(10)]]

    def test_non_noun_lines_ignored(self, tmp_path):
        db = write_db(
            tmp_path,
            "00001740 29 v 01 breathe 0 001 @ 00001741 v 0000 | draw air\n"
            "02971356 06 n 01 laptop 0 000 | a portable computer\n",
        )
        assert wordnet.parse_noun_synsets(db) == [["laptop"]]

    def test_directory_path_finds_data_noun(self, tmp_path):
        write_db(tmp_path)
        assert wordnet.parse_noun_synsets(tmp_path) == wordnet.parse_noun_synsets(
            tmp_path / "data.noun"
        )

    def test_missing_database_is_an_error(self, tmp_path):
        with pytest.raises(MissingDatabase):
            wordnet.parse_noun_synsets(tmp_path / "nowhere")

    def test_header_only_database_is_empty(self, tmp_path):
        db = write_db(tmp_path, "  1 license text only\n")
        with pytest.raises(EmptyDatabase):
            wordnet.parse_noun_synsets(db)


class TestExtraction:
    def test_output_parses_through_the_engine_lexicon(self, tmp_path):
        out = wordnet.extract_synonyms(write_db(tmp_path), tmp_path / "wn.syn")
        db = lexicon.parse_synonym_db(out)
        # underscores become spaces on the consuming side
        assert lexicon.are_synonyms(db, "laptop", "laptop computer")
        assert lexicon.are_synonyms(db, "sofa", "lounge")
        assert not lexicon.are_synonyms(db, "laptop", "sofa")

    def test_one_line_per_synset(self, tmp_path):
        out = wordnet.extract_synonyms(write_db(tmp_path), tmp_path / "wn.syn")
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines == [
            "laptop|laptop_computer",
            "portable_computer",
            "sofa|couch|lounge",
        ]

    def test_reextract_is_byte_identical(self, tmp_path):
        db = write_db(tmp_path)
        first = wordnet.extract_synonyms(db, tmp_path / "a.syn").read_bytes()
        second = wordnet.extract_synonyms(db, tmp_path / "b.syn").read_bytes()
        assert first == second
