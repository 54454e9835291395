"""Inverted index: build, lookup, binary persistence and JSONL corpus ingestion."""
import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.errors import (
    CorpusError,
    DuplicateDocument,
    IndexChecksumError,
    IndexFormatError,
    IndexVersionError,
)

logger = logging.getLogger(__name__)

# A posting list is a read-only, strictly ascending int64 array.
PostingList = np.ndarray

DOC_DTYPE = np.int64
MAGIC = b"PNIX"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_CHECKSUM = struct.Struct("<I")


def freeze(docs: np.ndarray) -> PostingList:
    docs.flags.writeable = False
    return docs


def as_posting_list(docs: Iterable[int]) -> PostingList:
    """Sort and deduplicate arbitrary doc ids into a posting list."""
    arr = np.unique(np.fromiter(docs, dtype=DOC_DTYPE))
    if arr.size and arr[0] < 0:
        raise ValueError("doc ids must be non-negative")
    return freeze(arr)


EMPTY_POSTINGS: PostingList = freeze(np.empty(0, dtype=DOC_DTYPE))


def is_posting_list(docs: np.ndarray, universe_size: Optional[int] = None) -> bool:
    """True when docs is 1-D, strictly ascending and inside the universe."""
    if docs.ndim != 1:
        return False
    if docs.size == 0:
        return True
    if docs[0] < 0 or (docs.size > 1 and not np.all(np.diff(docs) > 0)):
        return False
    return universe_size is None or int(docs[-1]) < universe_size


def bit_tokens(field_name: str, value: int) -> List[str]:
    """Tokens for a bit-sliced numeric field: one `F#BIT<i>` per set bit."""
    if value < 0:
        raise ValueError(f"field {field_name}: negative value {value}")
    return [f"{field_name}#BIT{i}" for i in range(value.bit_length()) if value >> i & 1]


@dataclass(frozen=True)
class InvertedIndex:
    """Term -> posting list mapping over the universe [0, universe_size)."""

    universe_size: int
    postings: Mapping[str, PostingList] = field(default_factory=dict)
    # Optional sidecar: external key of each DocId, position = DocId
    doc_keys: Optional[Tuple[str, ...]] = None

    def lookup(self, term: str) -> PostingList:
        return self.postings.get(term, EMPTY_POSTINGS)

    def doc_frequency(self, term: str) -> int:
        return int(self.lookup(term).size)

    def terms(self) -> List[str]:
        return sorted(self.postings)

    def doc_key(self, doc_id: int) -> str:
        if self.doc_keys is None:
            return str(doc_id)
        return self.doc_keys[doc_id]

    def __eq__(self, other) -> bool:
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        return (
            self.universe_size == other.universe_size
            and self.doc_keys == other.doc_keys
            and self.terms() == other.terms()
            and all(np.array_equal(self.postings[t], other.postings[t]) for t in self.postings)
        )


def lookup(index: InvertedIndex, term: str) -> PostingList:
    """I(term); an absent term yields the empty list, never an error."""
    return index.lookup(term)


def build_index(
    docs: Iterable[Tuple[int, Iterable[str]]],
    doc_keys: Optional[Sequence[str]] = None,
) -> InvertedIndex:
    """Build an index from (doc-id, tokens) pairs.

    Doc ids that are not dense 0..N-1 are remapped in ascending order and
    their original values kept as external keys.
    """
    contents: Dict[int, frozenset] = {}
    for doc_id, tokens in docs:
        token_set = frozenset(tokens)
        for token in token_set:
            if not isinstance(token, str) or not token:
                raise CorpusError(f"document {doc_id}: tokens must be non-empty strings")
        previous = contents.get(doc_id)
        if previous is not None and previous != token_set:
            raise DuplicateDocument(doc_id)
        contents[doc_id] = token_set

    ids = sorted(contents)
    dense = ids == list(range(len(ids)))
    if not dense:
        if doc_keys is None:
            doc_keys = [str(i) for i in ids]
        logger.debug("remapping %d sparse doc ids to a dense range", len(ids))
    remap = {original: new for new, original in enumerate(ids)}

    buckets: Dict[str, List[int]] = {}
    for original, tokens in contents.items():
        for token in tokens:
            buckets.setdefault(token, []).append(remap[original])

    postings = {term: as_posting_list(ids_) for term, ids_ in buckets.items()}
    keys = tuple(doc_keys) if doc_keys is not None else None
    if keys is not None and len(keys) != len(ids):
        raise CorpusError(f"{len(keys)} external keys for {len(ids)} documents")
    return InvertedIndex(universe_size=len(ids), postings=postings, doc_keys=keys)


def read_corpus_jsonl(path) -> InvertedIndex:
    """Build from a corpus file: one `{"id": str, "tokens": [str], "fields": {F: n}}` per line."""
    keys: List[str] = []
    key_to_id: Dict[str, int] = {}
    docs: List[Tuple[int, List[str]]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"malformed JSON: {e.msg}", line=line_no) from e
            if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
                raise CorpusError("expected an object with a string 'id'", line=line_no)
            tokens = entry.get("tokens", [])
            if not isinstance(tokens, list) or not all(isinstance(t, str) and t for t in tokens):
                raise CorpusError("'tokens' must be a list of non-empty strings", line=line_no)
            tokens = list(tokens)
            for field_name, value in (entry.get("fields") or {}).items():
                if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                    raise CorpusError(f"field {field_name} must be a non-negative integer", line=line_no)
                tokens.extend(bit_tokens(field_name, value))

            key = entry["id"]
            if key not in key_to_id:
                key_to_id[key] = len(keys)
                keys.append(key)
            docs.append((key_to_id[key], tokens))
    try:
        return build_index(docs, doc_keys=keys)
    except DuplicateDocument as e:
        raise CorpusError(f"document {keys[e.doc_id]!r} given twice with different tokens") from e


# --- binary format ----------------------------------------------------------


def _put_varint(out: bytearray, value: int) -> None:
    while value >= 0x80:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    out.append(value)


class _Reader:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            if self.pos >= len(self.data):
                raise IndexFormatError("truncated varint")
            byte = self.data[self.pos]
            self.pos += 1
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise IndexFormatError("varint too long")

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError("truncated string")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def serialize_index(index: InvertedIndex) -> bytes:
    """Encode an index; terms in sorted order so output is deterministic."""
    out = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, index.universe_size))
    terms = index.terms()
    _put_varint(out, len(terms))
    for term in terms:
        encoded = term.encode("utf-8")
        _put_varint(out, len(encoded))
        out += encoded
        docs = index.postings[term]
        _put_varint(out, int(docs.size))
        previous = -1
        for doc in docs.tolist():
            _put_varint(out, doc - previous - 1)
            previous = doc
    out += _CHECKSUM.pack(zlib.crc32(out))
    return bytes(out)


def deserialize_index(data: bytes, doc_keys: Optional[Sequence[str]] = None) -> InvertedIndex:
    if len(data) < _HEADER.size + _CHECKSUM.size:
        raise IndexFormatError("file too short for an index header")
    magic, version, universe_size = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise IndexFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise IndexVersionError(f"index format version {version}, expected {FORMAT_VERSION}")
    body, (stored,) = data[:-_CHECKSUM.size], _CHECKSUM.unpack_from(data, len(data) - _CHECKSUM.size)
    if zlib.crc32(body) != stored:
        raise IndexChecksumError("checksum mismatch (corrupted or truncated file)")

    reader = _Reader(body, _HEADER.size)
    postings: Dict[str, PostingList] = {}
    for _ in range(reader.varint()):
        try:
            term = reader.raw(reader.varint()).decode("utf-8")
        except UnicodeDecodeError as e:
            raise IndexFormatError(f"term is not valid UTF-8: {e}") from e
        count = reader.varint()
        # every gap takes at least one byte
        if count > len(body) - reader.pos:
            raise IndexFormatError(f"term {term!r} claims {count} postings, more than the file holds")
        docs = np.empty(count, dtype=DOC_DTYPE)
        previous = -1
        for i in range(count):
            previous += reader.varint() + 1
            docs[i] = previous
        if count and docs[-1] >= universe_size:
            raise IndexFormatError(f"term {term!r} references doc {docs[-1]} outside the universe")
        postings[term] = freeze(docs)
    if reader.pos != len(body):
        raise IndexFormatError("trailing bytes after posting lists")
    keys = tuple(doc_keys) if doc_keys is not None else None
    return InvertedIndex(universe_size=universe_size, postings=postings, doc_keys=keys)


def _keys_path(path: Path) -> Path:
    return path.with_name(path.name + ".keys.json")


def save_index(index: InvertedIndex, path) -> None:
    path = Path(path)
    path.write_bytes(serialize_index(index))
    if index.doc_keys is not None:
        with open(_keys_path(path), "w", encoding="utf-8") as f:
            json.dump(list(index.doc_keys), f)
    else:
        _keys_path(path).unlink(missing_ok=True)
    logger.info("saved index |U|=%d terms=%d to %s", index.universe_size, len(index.postings), path)


def load_index(path) -> InvertedIndex:
    path = Path(path)
    doc_keys = None
    if _keys_path(path).exists():
        with open(_keys_path(path), "r", encoding="utf-8") as f:
            try:
                doc_keys = json.load(f)
            except json.JSONDecodeError as e:
                raise IndexFormatError(f"unreadable key sidecar: {e}") from e
    index = deserialize_index(path.read_bytes(), doc_keys)
    if index.doc_keys is not None and len(index.doc_keys) != index.universe_size:
        raise IndexFormatError("key sidecar does not match the universe size")
    return index
