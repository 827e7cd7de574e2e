"""Dataset loading, tokenization, vocabulary, and fixed-length encoding.

Sentences shorter than the target length are padded *in front* with the
unknown token; pad positions are tracked positionally in a boolean mask
because out-of-vocabulary words also map to the unknown id but are real
tokens that must keep their attention mass.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

UNK_TOKEN = "<unk>"
UNK_ID = 0

_PUNCT = re.compile(r"([.,!?;:()\"'])")


def tokenize(text: str) -> list[str]:
    """Lowercase and whitespace-split, with .,!?;:()"' as standalone tokens."""
    return _PUNCT.sub(r" \1 ", text.lower()).split()


@dataclass
class Vocabulary:
    """Dense token<->id maps with a reserved unknown id 0.

    Every lookup is total: absent tokens map to the unknown id.
    """

    token_to_id: dict = field(default_factory=lambda: {UNK_TOKEN: UNK_ID})
    id_to_token: list = field(default_factory=lambda: [UNK_TOKEN])

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    @classmethod
    def from_tokens(cls, ordered_tokens: list[str]) -> "Vocabulary":
        vocab = cls()
        for tok in ordered_tokens:
            if tok == UNK_TOKEN or tok in vocab.token_to_id:
                continue
            vocab.token_to_id[tok] = len(vocab.id_to_token)
            vocab.id_to_token.append(tok)
        return vocab


def build_vocab(corpus: list[list[str]], min_freq: int = 1) -> Vocabulary:
    """Vocabulary of all tokens with frequency >= min_freq, plus the unknown.

    Ids are assigned by descending frequency, ties broken lexicographically,
    so construction is deterministic for a given corpus.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter(tok for sent in corpus for tok in sent)
    kept = sorted((tok for tok, c in counts.items() if c >= min_freq),
                  key=lambda tok: (-counts[tok], tok))
    return Vocabulary.from_tokens(kept)


def encode_and_pad(tokens: list[str], vocab: Vocabulary, length: int) -> tuple:
    """Fixed-length id row plus pad mask: front-padded, truncated at the end."""
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    kept = tokens[:length]
    n_pad = length - len(kept)
    ids = np.full(length, UNK_ID, dtype=np.int64)
    mask = np.zeros(length, dtype=bool)
    mask[:n_pad] = True
    for j, tok in enumerate(kept):
        ids[n_pad + j] = vocab.lookup(tok)
    return ids, mask


@dataclass
class EncodedBatch:
    """Fixed-length id matrix with positional pad masks and labels.

    ``tokens`` optionally retains the raw (pre-padding) token lists so
    attention weights can be exported next to the words they score.
    """

    ids: np.ndarray            # int64, B x len
    pad_mask: np.ndarray       # bool, B x len; a true-prefix per row
    labels: np.ndarray         # int64, B
    tokens: list | None = None

    def __len__(self) -> int:
        return self.ids.shape[0]


def encode_dataset(examples: list[tuple], vocab: Vocabulary, length: int,
                   keep_tokens: bool = False) -> EncodedBatch:
    """Encode (label, text) pairs into one fixed-length batch."""
    ids = np.zeros((len(examples), length), dtype=np.int64)
    mask = np.zeros((len(examples), length), dtype=bool)
    labels = np.zeros(len(examples), dtype=np.int64)
    token_lists = [] if keep_tokens else None
    for i, (label, text) in enumerate(examples):
        toks = tokenize(text)
        ids[i], mask[i] = encode_and_pad(toks, vocab, length)
        labels[i] = label
        if token_lists is not None:
            token_lists.append(toks)
    return EncodedBatch(ids, mask, labels, tokens=token_lists)


def padded_tokens(tokens: list[str], length: int) -> list[str]:
    """Token strings aligned with encode_and_pad: front pad slots shown as
    the pad token, overlong tails truncated."""
    kept = list(tokens[:length])
    return [UNK_TOKEN] * (length - len(kept)) + kept


def max_sentence_length(examples: list[tuple]) -> int:
    """Longest tokenized sentence; used as the default padded length."""
    longest = max((len(tokenize(text)) for _, text in examples), default=1)
    return max(longest, 1)


def load_dataset(path: str) -> list[tuple]:
    """Read "label<TAB>text" lines into an ordered list of (label, text)."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'label<TAB>text'")
            label_str, text = line.split("\t", 1)
            try:
                label = int(label_str)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-integer label {label_str!r}") from None
            if label < 0:
                raise FormatError(f"{path}:{lineno}: negative label {label}")
            examples.append((label, text))
    return examples


def load_word2vec_text(path: str) -> dict:
    """Parse word vectors in word2vec text format: a "V k" header, then V lines."""
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}:1: expected header 'V k'")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"{path}:1: non-integer header fields") from None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                vectors[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: malformed float value") from None
    if len(vectors) != count:
        raise FormatError(f"{path}: header promised {count} vectors, found {len(vectors)}")
    return vectors


def write_word2vec_text(path: str, vectors: dict) -> None:
    """Inverse of load_word2vec_text; values printed with 6 significant digits."""
    dims = {len(v) for v in vectors.values()}
    if len(dims) > 1:
        raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(vectors)} {dim}\n")
        for tok, vec in vectors.items():
            fh.write(tok + " " + " ".join(f"{v:.6g}" for v in vec) + "\n")


def init_embeddings(vocab: Vocabulary, dim: int, pretrained: dict | None,
                    rng: np.random.Generator) -> np.ndarray:
    """V x dim embedding matrix: pretrained rows copied, the rest U[-0.25, 0.25].

    Rows are drawn in id order so the result is fully determined by the rng
    seed; the uniform range keeps randomly initialized words at the same
    variance as typical pretrained vectors.
    """
    if dim < 1:
        raise ValueError(f"embedding dim must be >= 1, got {dim}")
    pretrained = pretrained or {}
    matrix = np.empty((len(vocab), dim), dtype=np.float64)
    for idx, tok in enumerate(vocab.id_to_token):
        vec = pretrained.get(tok)
        if vec is not None:
            if len(vec) != dim:
                raise FormatError(
                    f"pretrained vector for {tok!r} has dim {len(vec)}, expected {dim}")
            matrix[idx] = vec
        else:
            matrix[idx] = rng.uniform(-0.25, 0.25, size=dim)
    return matrix
