"""Seeded synthetic corpora.

Every term and numeric field draws from its own generator, derived from the
corpus seed and the name, so adding a term never changes another's list.
"""
import json
import logging
import zlib
from pathlib import Path
from typing import Dict, List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.config import SETTINGS
from src.errors import CorpusError
from src.index import DOC_DTYPE, InvertedIndex, freeze

logger = logging.getLogger(__name__)


class TermDensity(BaseModel):
    model_config = ConfigDict(extra="forbid")

    term: str = Field(min_length=1)
    density: float = Field(ge=0.0, le=1.0)


class NumericFieldSpec(BaseModel):
    """A bit-sliced integer field; values land in [0, 2^width)."""

    model_config = ConfigDict(extra="forbid")

    field: str = Field(min_length=1)
    width: int = Field(ge=1, le=62)
    distribution: Literal["uniform", "geometric"] = "uniform"


class CorpusSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    universe_size: int = Field(ge=0)
    terms: List[TermDensity] = []
    numeric_fields: List[NumericFieldSpec] = []
    seed: int = Field(default_factory=lambda: SETTINGS.seed)

    @field_validator("terms")
    @classmethod
    def _unique_terms(cls, terms: List[TermDensity]) -> List[TermDensity]:
        names = [t.term for t in terms]
        if len(names) != len(set(names)):
            raise ValueError("term names must be unique")
        return terms


def rng_for(seed: int, name: str) -> np.random.Generator:
    """Generator for one named stream of a seeded corpus."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))]))


def sample_postings(rng: np.random.Generator, universe_size: int, density: float) -> np.ndarray:
    """Each document joins independently with probability `density`."""
    return freeze(np.flatnonzero(rng.random(universe_size) < density).astype(DOC_DTYPE))


def gen_field_values(spec: CorpusSpec) -> Dict[str, np.ndarray]:
    """Per-document values of every numeric field, as generated for the corpus."""
    values: Dict[str, np.ndarray] = {}
    for f in spec.numeric_fields:
        rng = rng_for(spec.seed, f"field:{f.field}")
        top = 1 << f.width
        if f.distribution == "uniform":
            drawn = rng.integers(0, top, size=spec.universe_size, dtype=np.int64)
        else:
            drawn = np.minimum(rng.geometric(0.5, size=spec.universe_size) - 1, top - 1).astype(np.int64)
        values[f.field] = drawn
    return values


def gen_corpus(spec: CorpusSpec) -> InvertedIndex:
    postings: Dict[str, np.ndarray] = {}
    for t in spec.terms:
        docs = sample_postings(rng_for(spec.seed, f"term:{t.term}"), spec.universe_size, t.density)
        if docs.size:
            postings[t.term] = docs

    for name, values in gen_field_values(spec).items():
        width = next(f.width for f in spec.numeric_fields if f.field == name)
        for bit in range(width):
            docs = np.flatnonzero((values >> bit) & 1).astype(DOC_DTYPE)
            if docs.size:
                postings[f"{name}#BIT{bit}"] = freeze(docs)

    logger.debug("generated corpus |U|=%d terms=%d seed=%d", spec.universe_size, len(postings), spec.seed)
    return InvertedIndex(universe_size=spec.universe_size, postings=postings)


def write_corpus_jsonl(index: InvertedIndex, path) -> int:
    """Write the index back out as a JSONL corpus; returns the number of lines."""
    tokens: List[List[str]] = [[] for _ in range(index.universe_size)]
    for term in index.terms():
        for doc in index.lookup(term).tolist():
            tokens[doc].append(term)
    with open(Path(path), "w", encoding="utf-8") as f:
        for doc, doc_tokens in enumerate(tokens):
            f.write(json.dumps({"id": index.doc_key(doc), "tokens": doc_tokens}) + "\n")
    return index.universe_size


def load_corpus_spec(path) -> CorpusSpec:
    with open(path, "r", encoding="utf-8") as f:
        try:
            return CorpusSpec.model_validate(json.load(f))
        except json.JSONDecodeError as e:
            raise CorpusError(f"corpus spec {path}: {e.msg}", line=e.lineno) from e
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise CorpusError(f"corpus spec {path}: {first['msg']} at {location}") from e
