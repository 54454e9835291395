import json
import struct
import zlib

import numpy as np
import pytest

from src.bench.corpus import CorpusSpec, NumericFieldSpec, TermDensity, gen_corpus
from src.errors import (
    CorpusError,
    DuplicateDocument,
    IndexChecksumError,
    IndexFormatError,
    IndexVersionError,
)
from src.index import (
    FORMAT_VERSION,
    MAGIC,
    InvertedIndex,
    bit_tokens,
    build_index,
    deserialize_index,
    is_posting_list,
    load_index,
    lookup,
    read_corpus_jsonl,
    save_index,
    serialize_index,
)


class TestBuildIndex:
    def test_posting_lists_are_sorted_and_deduplicated(self):
        index = build_index([(0, ["a", "a"]), (3, ["a", "b"]), (1, ["b"]), (2, ["a"])])
        assert index.universe_size == 4
        assert index.lookup("a").tolist() == [0, 2, 3]
        assert index.lookup("b").tolist() == [1, 3]
        for term in index.terms():
            assert is_posting_list(index.lookup(term), index.universe_size)

    def test_absent_term_is_empty_not_an_error(self, small_index):
        assert lookup(small_index, "zzz").size == 0
        assert small_index.doc_frequency("zzz") == 0

    def test_posting_lists_are_read_only(self, small_index):
        docs = small_index.lookup("a")
        with pytest.raises(ValueError):
            docs[0] = 7

    def test_document_without_tokens_still_counts(self, small_index):
        assert small_index.universe_size == 5
        assert all(4 not in small_index.lookup(t) for t in small_index.terms())

    def test_empty_corpus(self):
        index = build_index([])
        assert index.universe_size == 0
        assert index.terms() == []

    def test_conflicting_duplicate_is_rejected(self):
        with pytest.raises(DuplicateDocument) as excinfo:
            build_index([(0, ["a"]), (0, ["b"])])
        assert excinfo.value.doc_id == 0

    def test_identical_duplicate_is_accepted(self):
        index = build_index([(0, ["a"]), (0, ["a"])])
        assert index.universe_size == 1

    def test_sparse_ids_are_remapped_and_kept_as_keys(self):
        index = build_index([(10, ["x"]), (5, ["y"]), (20, ["x", "y"])])
        assert index.universe_size == 3
        assert index.doc_keys == ("5", "10", "20")
        assert index.lookup("x").tolist() == [1, 2]
        assert index.doc_key(0) == "5"

    def test_empty_token_is_rejected(self):
        with pytest.raises(CorpusError):
            build_index([(0, ["ok", ""])])

    def test_bit_tokens(self):
        assert bit_tokens("year", 5) == ["year#BIT0", "year#BIT2"]
        assert bit_tokens("year", 0) == []


class TestCorpusJsonl:
    def test_two_line_corpus(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "d1", "tokens": ["a", "b"]}\n{"id": "d2", "tokens": ["b"]}\n')
        index = read_corpus_jsonl(path)
        assert index.universe_size == 2
        assert index.lookup("b").tolist() == [0, 1]
        assert index.doc_keys == ("d1", "d2")

    def test_malformed_line_reports_its_number(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "d1", "tokens": ["a"]}\n{"id": "d2", "tokens": [\n')
        with pytest.raises(CorpusError) as excinfo:
            read_corpus_jsonl(path)
        assert excinfo.value.line == 2
        assert "line 2" in str(excinfo.value)

    def test_missing_id(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"tokens": ["a"]}\n')
        with pytest.raises(CorpusError):
            read_corpus_jsonl(path)

    def test_numeric_fields_become_bit_tokens(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "p", "tokens": [], "fields": {"cites": 6}}\n')
        index = read_corpus_jsonl(path)
        assert index.terms() == ["cites#BIT1", "cites#BIT2"]

    def test_conflicting_duplicate_key(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"id": "d", "tokens": ["a"]}\n{"id": "d", "tokens": ["b"]}\n')
        with pytest.raises(CorpusError):
            read_corpus_jsonl(path)


def signed_index_file(universe_size, body):
    """Header plus body with a valid checksum, so only the body can be at fault."""
    data = struct.pack("<4sIQ", MAGIC, FORMAT_VERSION, universe_size) + body
    return data + struct.pack("<I", zlib.crc32(data))


class TestBinaryFormat:
    def test_round_trip(self, small_index):
        restored = deserialize_index(serialize_index(small_index))
        assert restored == small_index

    def test_empty_index_round_trip(self):
        empty = InvertedIndex(universe_size=0)
        assert deserialize_index(serialize_index(empty)) == empty

    def test_save_and_load_with_keys(self, tmp_path):
        index = build_index([(7, ["a"]), (9, ["a", "b"])])
        path = tmp_path / "corpus.pnix"
        save_index(index, path)
        assert json.loads((tmp_path / "corpus.pnix.keys.json").read_text()) == ["7", "9"]
        assert load_index(path) == index

    def test_synthetic_corpus_resaves_byte_identical(self, tmp_path):
        spec = CorpusSpec(
            universe_size=10_000,
            terms=[TermDensity(term=f"t{i}", density=d) for i, d in enumerate((0.001, 0.01, 0.1, 0.5, 0.9))],
            numeric_fields=[NumericFieldSpec(field="year", width=6)],
            seed=7,
        )
        first = tmp_path / "first.pnix"
        second = tmp_path / "second.pnix"
        save_index(gen_corpus(spec), first)
        save_index(load_index(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_bad_magic(self, small_index):
        data = bytearray(serialize_index(small_index))
        data[:4] = b"NOPE"
        with pytest.raises(IndexFormatError, match="magic"):
            deserialize_index(bytes(data))
        assert MAGIC == b"PNIX"

    def test_future_version(self, small_index):
        data = bytearray(serialize_index(small_index))
        data[4] = 99
        with pytest.raises(IndexVersionError):
            deserialize_index(bytes(data))

    def test_flipped_byte_fails_checksum(self, small_index):
        data = bytearray(serialize_index(small_index))
        data[-6] ^= 0xFF
        with pytest.raises(IndexChecksumError):
            deserialize_index(bytes(data))

    def test_truncated_file(self, small_index):
        data = serialize_index(small_index)
        with pytest.raises(IndexFormatError):
            deserialize_index(data[: len(data) // 2])
        with pytest.raises(IndexFormatError):
            deserialize_index(data[:5])

    def test_postings_survive_as_int64(self, small_index):
        restored = deserialize_index(serialize_index(small_index))
        assert restored.lookup("c").dtype == np.int64

    def test_resave_without_keys_drops_old_sidecar(self, tmp_path):
        path = tmp_path / "idx.pnix"
        save_index(build_index([(10, ["a"]), (20, ["b"]), (30, ["a"])]), path)
        assert (tmp_path / "idx.pnix.keys.json").exists()
        plain = InvertedIndex(universe_size=2, postings={"a": np.array([1])})
        save_index(plain, path)
        assert not (tmp_path / "idx.pnix.keys.json").exists()
        assert load_index(path) == plain

    def test_resave_without_keys_same_universe(self, tmp_path):
        path = tmp_path / "idx.pnix"
        keyed = build_index([(10, ["a"]), (20, ["b"])])
        save_index(keyed, path)
        plain = InvertedIndex(universe_size=2, postings=dict(keyed.postings))
        save_index(plain, path)
        assert load_index(path).doc_keys is None

    def test_invalid_utf8_term(self):
        # one term, 1-byte name 0xff, no postings
        data = signed_index_file(4, bytes([1, 1, 0xFF, 0]))
        with pytest.raises(IndexFormatError, match="UTF-8"):
            deserialize_index(data)

    def test_posting_count_larger_than_file(self):
        # one term "a" claiming 2**40 postings
        huge = bytes([0x80, 0x80, 0x80, 0x80, 0x80, 0x20])
        data = signed_index_file(4, bytes([1, 1]) + b"a" + huge)
        with pytest.raises(IndexFormatError, match="postings"):
            deserialize_index(data)
