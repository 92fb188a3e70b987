"""Sparse feature-vector representation of cells.

A tokenization scheme "e{0|1}-w{0|1}-g{K}" selects three feature families:
a reserved token for empty (NUL) cells, whitespace-delimited words, and
character n-grams of every length 1..K. Feature kinds are namespaced so the
word "an" and the 2-gram "an" are distinct features.
"""

from __future__ import annotations

import re
import threading
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigurationError
from .ingest import NUL, Column, DataSource

KIND_WORD = "word"
KIND_GRAM = "gram"
KIND_NUL = "nul"

_SCHEME_RE = re.compile(r"^e([01])-w([01])-g([0-9])$")


@dataclass(frozen=True)
class TokenizationScheme:
    """Which feature families are extracted from a cell."""

    use_nul_token: bool
    use_words: bool
    max_gram: int

    def __post_init__(self):
        if self.max_gram < 0:
            raise ConfigurationError(f"max_gram must be >= 0, got {self.max_gram}", module="featurize")
        if not (self.use_nul_token or self.use_words or self.max_gram >= 1):
            raise ConfigurationError(
                "scheme enables no feature family (e0-w0-g0 can represent nothing)",
                module="featurize",
            )

    @classmethod
    def parse(cls, text: str) -> "TokenizationScheme":
        m = _SCHEME_RE.match(text.strip())
        if not m:
            raise ConfigurationError(
                f"bad scheme {text!r}, expected e{{0|1}}-w{{0|1}}-g{{0..9}}", module="featurize"
            )
        return cls(m.group(1) == "1", m.group(2) == "1", int(m.group(3)))

    def __str__(self) -> str:
        return f"e{int(self.use_nul_token)}-w{int(self.use_words)}-g{self.max_gram}"


class FeatureDictionary:
    """Bidirectional feature-key <-> dense-id map, ids in first-seen order.

    Registration is atomic per key; a frozen dictionary refuses registration.
    The dictionary binds to the first scheme used with it so one dictionary
    never mixes representations.
    """

    def __init__(self):
        self._key_to_id: dict[tuple[str, str], int] = {}
        self._keys: list[tuple[str, str]] = []
        self._frozen = False
        self._scheme: TokenizationScheme | None = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def scheme(self) -> TokenizationScheme | None:
        return self._scheme

    def freeze(self) -> "FeatureDictionary":
        self._frozen = True
        return self

    def bind_scheme(self, scheme: TokenizationScheme) -> None:
        with self._lock:
            if self._scheme is None:
                self._scheme = scheme
            elif self._scheme != scheme:
                raise ConfigurationError(
                    f"dictionary is bound to scheme {self._scheme}, not {scheme}",
                    module="featurize",
                )

    def lookup(self, key: tuple[str, str]) -> int | None:
        return self._key_to_id.get(key)

    def register(self, key: tuple[str, str]) -> int:
        existing = self._key_to_id.get(key)
        if existing is not None:
            return existing
        with self._lock:
            existing = self._key_to_id.get(key)
            if existing is not None:
                return existing
            if self._frozen:
                raise ConfigurationError("cannot register features in a frozen dictionary", module="featurize")
            new_id = len(self._keys)
            self._key_to_id[key] = new_id
            self._keys.append(key)
            return new_id

    def key_of(self, feature_id: int) -> tuple[str, str]:
        return self._keys[feature_id]

    def items(self) -> list[tuple[tuple[str, str], int]]:
        return [(key, i) for i, key in enumerate(self._keys)]


_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r", "\u0000": "\\0"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r", "0": "\u0000"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            out.append(_UNESCAPES.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def dictionary_to_text(dictionary: FeatureDictionary) -> str:
    """Line-oriented serialization: "(kind)\\t(text-escaped)\\t(id)" per feature."""
    lines = [f"{kind}\t{_escape(text)}\t{i}" for (kind, text), i in dictionary.items()]
    return "\n".join(lines) + ("\n" if lines else "")


def dictionary_from_text(text: str, scheme: TokenizationScheme | None = None) -> FeatureDictionary:
    d = FeatureDictionary()
    if scheme is not None:
        d.bind_scheme(scheme)
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ConfigurationError(f"dictionary line {lineno} is malformed", module="featurize")
        kind, escaped, id_text = parts
        assigned = d.register((kind, _unescape(escaped)))
        if assigned != int(id_text):
            raise ConfigurationError(
                f"dictionary line {lineno}: id {id_text} out of order (expected {assigned})",
                module="featurize",
            )
    return d


@dataclass(frozen=True)
class FeatureVector:
    """Sparse (feature-id, count) pairs; ids strictly increasing, counts > 0."""

    ids: tuple[int, ...]
    counts: tuple[float, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.counts):
            raise ValueError("ids and counts must have equal length")
        if any(b <= a for a, b in zip(self.ids, self.ids[1:])):
            raise ValueError("ids must be strictly increasing")
        if any(c <= 0 for c in self.counts):
            raise ValueError("counts must be positive")

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.ids, self.counts))


EMPTY_VECTOR = FeatureVector((), ())


@dataclass(frozen=True)
class LabeledExample:
    vector: FeatureVector
    label: str


def feature_counts(cell: str, scheme: TokenizationScheme) -> Counter:
    """Feature-key counts of one cell; a pure function of (cell, scheme).

    A NUL cell yields only the reserved nul token (under e1) or nothing
    (under e0). Words are maximal runs of non-whitespace characters; n-grams
    are contiguous substrings of the raw text, whitespace included, for every
    length 1..max_gram. All counted with multiplicity.
    """
    counts: Counter = Counter()
    if cell == NUL:
        if scheme.use_nul_token:
            counts[(KIND_NUL, "")] = 1
        return counts
    if scheme.use_words:
        for word in cell.split():
            counts[(KIND_WORD, word)] += 1
    for k in range(1, scheme.max_gram + 1):
        for i in range(len(cell) - k + 1):
            counts[(KIND_GRAM, cell[i : i + k])] += 1
    return counts


def tokenize(
    cell: str,
    scheme: TokenizationScheme,
    dictionary: FeatureDictionary,
    frozen: bool = False,
) -> FeatureVector:
    """Convert a cell into a FeatureVector, registering new features.

    When ``frozen`` is true (or the dictionary itself is frozen), unseen
    features are dropped instead of registered.
    """
    dictionary.bind_scheme(scheme)
    counts = feature_counts(cell, scheme)
    frozen = frozen or dictionary.frozen
    pairs: list[tuple[int, float]] = []
    for key, count in counts.items():
        fid = dictionary.lookup(key) if frozen else dictionary.register(key)
        if fid is not None:
            pairs.append((fid, float(count)))
    pairs.sort()
    if not pairs:
        return EMPTY_VECTOR
    ids, values = zip(*pairs)
    return FeatureVector(ids, values)


def qualified_label(qualifier: str, column_name: str) -> str:
    return f"{qualifier}.{column_name}"


def build_examples(
    ds: DataSource,
    scheme: TokenizationScheme,
    dictionary: FeatureDictionary,
    frozen: bool = False,
    qualifier: str | None = None,
) -> list[LabeledExample]:
    """One labeled example per cell, in column-major order.

    Labels are data-source-qualified column names ("<qualifier>.<column>");
    the qualifier defaults to the data source's own name.
    """
    prefix = ds.name if qualifier is None else qualifier
    examples: list[LabeledExample] = []
    for col in ds.columns:
        label = qualified_label(prefix, col.name)
        for cell in col.cells:
            examples.append(LabeledExample(tokenize(cell, scheme, dictionary, frozen), label))
    return examples


def tokenize_column(
    col: Column,
    scheme: TokenizationScheme,
    dictionary: FeatureDictionary,
    frozen: bool = True,
) -> list[FeatureVector]:
    return [tokenize(cell, scheme, dictionary, frozen) for cell in col.cells]


def vectors_to_csr(vectors: list[FeatureVector], n_features: int) -> sparse.csr_matrix:
    """Stack sparse vectors into a CSR matrix with ``n_features`` columns."""
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    total = 0
    for i, v in enumerate(vectors):
        total += len(v)
        indptr[i + 1] = total
    indices = np.empty(total, dtype=np.int64)
    data = np.empty(total, dtype=np.float64)
    pos = 0
    for v in vectors:
        end = pos + len(v)
        indices[pos:end] = v.ids
        data[pos:end] = v.counts
        pos = end
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), n_features))
