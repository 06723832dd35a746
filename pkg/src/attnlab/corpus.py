"""Dataset ingestion, vocabulary, tokenization with sentence markers, and a
seeded synthetic-corpus generator.

Tokenization is lowercase whitespace word-level with UNK. Each encoded
sentence is wrapped in BOS/EOS; truncation drops whole sentences from the
tail. Raw datasets are JSON Lines (one ``{"id", "sentences", "summary"}``
object per document); vocabularies are ``{"tokens": [...]}`` in id order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import rouge

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3
RESERVED = (PAD, UNK, BOS, EOS)


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict
    id_to_token: tuple

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def token_id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"tokens": list(self.id_to_token)}, f)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path) as f:
            tokens = json.load(f)["tokens"]
        return cls({t: i for i, t in enumerate(tokens)}, tuple(tokens))


@dataclass(frozen=True)
class RawDocument:
    id: str
    sentences: list
    summary: list

    def to_dict(self) -> dict:
        return {"id": self.id, "sentences": self.sentences, "summary": self.summary}

    @classmethod
    def from_dict(cls, d: dict) -> "RawDocument":
        return cls(d["id"], list(d["sentences"]), list(d["summary"]))


@dataclass
class Document:
    id: str
    sentences: list  # per-sentence content token ids, no markers
    flat: np.ndarray  # int64, BOS/EOS wrapped per sentence
    spans: tuple  # per-sentence (start, end) into flat, end exclusive
    gold_summary: list  # token-id sequences
    oracle_labels: Optional[list] = None

    @property
    def n(self) -> int:
        return int(self.flat.size)

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)

    def special_mask(self) -> np.ndarray:
        """True at BOS/EOS/PAD positions."""
        return np.isin(self.flat, (PAD_ID, BOS_ID, EOS_ID))

    def bos_positions(self) -> np.ndarray:
        return np.array([s[0] for s in self.spans], dtype=np.int64)


@dataclass
class Dataset:
    split: str
    documents: list
    vocab: Vocab
    truncation: int


def _tokenize(text: str) -> list[str]:
    return text.lower().split()


def build_vocab(corpus: Iterable, max_size: int) -> Vocab:
    """Frequency-ranked vocabulary (lexicographic tie-break) over sentences
    and summaries, with reserved ids 0..3."""
    if max_size < 5:
        raise ValueError("max_size must be >= 5")
    counts: dict[str, int] = {}
    seen_any = False
    for raw in corpus:
        seen_any = True
        for text in list(raw.sentences) + list(raw.summary):
            for tok in _tokenize(text):
                counts[tok] = counts.get(tok, 0) + 1
    if not seen_any:
        raise ValueError("empty corpus")
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    tokens = list(RESERVED) + ranked[: max_size - len(RESERVED)]
    return Vocab({t: i for i, t in enumerate(tokens)}, tuple(tokens))


def encode_document(raw: RawDocument, vocab: Vocab, max_len: int) -> Document:
    """Encode, wrap sentences in BOS/EOS, drop whole tail sentences to fit."""
    sent_tokens = [_tokenize(s) for s in raw.sentences]
    if not sent_tokens:
        raise ValueError("document has no sentences")
    kept = 0
    total = 0
    for toks in sent_tokens:
        cost = len(toks) + 2
        if total + cost > max_len:
            break
        total += cost
        kept += 1
    if kept == 0:
        raise ValueError("document exceeds truncation")

    sentences = [[vocab.token_id(t) for t in toks] for toks in sent_tokens[:kept]]
    flat: list[int] = []
    spans = []
    for ids in sentences:
        start = len(flat)
        flat.extend([BOS_ID] + ids + [EOS_ID])
        spans.append((start, len(flat)))
    gold = [[vocab.token_id(t) for t in _tokenize(s)] for s in raw.summary]
    return Document(raw.id, sentences, np.array(flat, dtype=np.int64),
                    tuple(spans), gold)


def decode_document(doc: Document, vocab: Vocab) -> RawDocument:
    sentences = [" ".join(vocab.decode(ids)) for ids in doc.sentences]
    summary = [" ".join(vocab.decode(ids)) for ids in doc.gold_summary]
    return RawDocument(doc.id, sentences, summary)


def save_jsonl(raws: Sequence[RawDocument], path) -> None:
    with open(path, "w") as f:
        for raw in raws:
            f.write(json.dumps(raw.to_dict(), sort_keys=True) + "\n")


def load_jsonl(path) -> list[RawDocument]:
    raws = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                raws.append(RawDocument.from_dict(json.loads(line)))
    return raws


def load_dataset(path, vocab: Vocab, truncation: int, split: str,
                 oracle_sents: Optional[int] = None) -> Dataset:
    """Load a raw JSONL split, encode it, and (optionally) attach oracle labels."""
    docs = []
    for raw in load_jsonl(path):
        doc = encode_document(raw, vocab, truncation)
        if oracle_sents is not None:
            doc.oracle_labels = rouge.greedy_oracle(doc, oracle_sents)
        docs.append(doc)
    return Dataset(split, docs, vocab, truncation)


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_docs: int
    sents_per_doc: int
    tokens_per_sent: int
    vocab_size: int
    repeat_signal: bool = True
    gold_sents: int = 2
    n_keys: int = 2

    def __post_init__(self):
        for name in ("n_docs", "sents_per_doc", "tokens_per_sent", "vocab_size",
                     "gold_sents", "n_keys"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.vocab_size < len(RESERVED) + 1:
            raise ValueError("vocab_size smaller than reserved tokens + 1")


def synth_raw(config: SynthConfig, seed: int) -> list[RawDocument]:
    """Generate raw synthetic documents.

    With repeat_signal on, per-document "key" tokens are planted into two
    distinct sentences each, and the gold summary is the sentences containing
    the most repeated tokens, so matching-token structure carries the label.
    """
    rng = np.random.default_rng(seed)
    n_words = config.vocab_size - len(RESERVED)
    width = len(str(max(n_words - 1, 1)))
    words = [f"w{i:0{width}d}" for i in range(n_words)]
    S, T = config.sents_per_doc, config.tokens_per_sent
    raws = []
    for d in range(config.n_docs):
        slots = S * T
        if slots <= n_words:
            grid = rng.choice(n_words, size=slots, replace=False).reshape(S, T)
        else:
            grid = rng.integers(0, n_words, size=(S, T))
        if config.repeat_signal:
            occupied: set = set()
            for _ in range(config.n_keys):
                key = int(rng.integers(0, n_words))
                sents = rng.choice(S, size=min(2, S), replace=False)
                for s in sents:
                    free = [t for t in range(T) if (int(s), t) not in occupied]
                    if not free:
                        continue
                    t = free[int(rng.integers(0, len(free)))]
                    grid[int(s), t] = key
                    occupied.add((int(s), t))
            counts = np.bincount(grid.ravel(), minlength=n_words)
            repeats = (counts[grid] > 1).sum(axis=1)
            order = np.lexsort((np.arange(S), -repeats))
            gold_idx = sorted(int(i) for i in order[: config.gold_sents])
        else:
            gold_idx = list(range(min(config.gold_sents, S)))
        sentences = [" ".join(words[t] for t in row) for row in grid]
        raws.append(RawDocument(
            id=f"synth-{seed}-{d:05d}",
            sentences=sentences,
            summary=[sentences[i] for i in gold_idx],
        ))
    return raws


def synth_generate(config: SynthConfig, seed: int) -> Dataset:
    """Deterministic synthetic Dataset with oracle labels attached."""
    raws = synth_raw(config, seed)
    vocab = build_vocab(raws, config.vocab_size)
    truncation = config.sents_per_doc * (config.tokens_per_sent + 2)
    docs = []
    for raw in raws:
        doc = encode_document(raw, vocab, truncation)
        doc.oracle_labels = rouge.greedy_oracle(doc, config.gold_sents)
        docs.append(doc)
    return Dataset("synth", docs, vocab, truncation)
