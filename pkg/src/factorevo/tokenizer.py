"""Byte-pair-encoding tokenizer.

Training counts adjacent pairs over the whole corpus (no pre-segmentation)
and greedily merges the most frequent pair, breaking ties by the smallest
``(left_id, right_id)``. Each story is its own sequence; pairs never span the
end-of-text token.

Two base alphabets are supported:

* ``"bytes"`` (default): all 256 byte values, so any input round-trips.
* ``"corpus"``: only the bytes present in the training corpus. This allows
  vocabularies below 258; encoding a byte outside the alphabet raises.

Ids are laid out as ``[alphabet..., <|endoftext|>, merges...]``.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

EOT = "<|endoftext|>"
_EOT_BYTES = EOT.encode()


@dataclass
class BpeModel:
    alphabet: bytes  # byte values of ids 0..len(alphabet)-1
    merges: list[tuple[int, int]] = field(default_factory=list)
    complete: bool = True  # False when training ran out of pairs early

    def __post_init__(self):
        self._byte_to_id = {b: i for i, b in enumerate(self.alphabet)}
        self._ranks = {pair: r for r, pair in enumerate(self.merges)}
        self._pieces: list[bytes] = [bytes([b]) for b in self.alphabet] + [_EOT_BYTES]
        for a, b in self.merges:
            self._pieces.append(self._pieces[a] + self._pieces[b])

    @property
    def eot_id(self) -> int:
        return len(self.alphabet)

    @property
    def first_merge_id(self) -> int:
        return len(self.alphabet) + 1

    @property
    def vocab_size(self) -> int:
        return len(self.alphabet) + 1 + len(self.merges)

    def piece(self, token: int) -> bytes:
        return self._pieces[token]

    # -- file format: header "<vocab_size> [alphabet-hex]", then "<id1> <id2> <new_id>" lines
    def dumps(self) -> str:
        header = str(self.vocab_size)
        if self.alphabet != bytes(range(256)):
            header += " " + self.alphabet.hex()
        lines = [header] + [f"{a} {b} {self.first_merge_id + i}" for i, (a, b) in enumerate(self.merges)]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "BpeModel":
        lines = text.strip("\n").split("\n")
        head = lines[0].split()
        vocab = int(head[0])
        alphabet = bytes.fromhex(head[1]) if len(head) > 1 else bytes(range(256))
        merges = []
        for n, line in enumerate(lines[1:], start=2):
            a, b, new = (int(x) for x in line.split())
            if new != len(alphabet) + 1 + len(merges) or a >= new or b >= new:
                raise ValueError(f"line {n}: inconsistent merge {line!r}")
            merges.append((a, b))
        model = cls(alphabet, merges)
        if model.vocab_size != vocab:
            raise ValueError(f"header vocab {vocab} != {model.vocab_size}")
        return model

    @classmethod
    def load(cls, path) -> "BpeModel":
        return cls.loads(Path(path).read_text())


def _to_bytes(text: str | bytes) -> bytes:
    return text.encode("utf-8") if isinstance(text, str) else bytes(text)


def _base_ids(model: BpeModel, data: bytes) -> list[int]:
    try:
        return [model._byte_to_id[b] for b in data]
    except KeyError as exc:
        raise ValueError(f"byte {exc.args[0]:#04x} is outside the tokenizer alphabet") from None


def _merge_pair(seq: list[int], pair: tuple[int, int], new: int) -> list[int]:
    a, b = pair
    out = []
    i = 0
    n = len(seq)
    while i < n:
        if i + 1 < n and seq[i] == a and seq[i + 1] == b:
            out.append(new)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def _pairs(seq: Sequence[int]) -> Counter:
    return Counter(zip(seq, seq[1:]))


def train_bpe(stories: Iterable[str | bytes] | str | bytes, target_vocab: int,
              alphabet: str = "bytes") -> BpeModel:
    """Greedy BPE on ``stories`` up to ``target_vocab`` ids (alphabet + EOT + merges).

    A single string is split on the end-of-text marker. If the corpus runs
    out of pairs first, the smaller model is returned with ``complete=False``.
    """
    if isinstance(stories, (str, bytes)):
        stories = split_stories(stories)
    data = [_to_bytes(s) for s in stories]
    if not any(data):
        raise ValueError("corpus is empty")
    if alphabet == "bytes":
        base = bytes(range(256))
        if target_vocab <= 257:
            raise ValueError("target_vocab must exceed 257 with the byte alphabet")
    elif alphabet == "corpus":
        base = bytes(sorted(set(b"".join(data))))
        if target_vocab <= len(base) + 1:
            raise ValueError(f"target_vocab must exceed {len(base) + 1} for this corpus alphabet")
    else:
        raise ValueError(f"unknown alphabet {alphabet!r}")

    model = BpeModel(base)
    seqs = [_base_ids(model, d) for d in data if d]
    counts: Counter = Counter()
    where: dict[tuple[int, int], set[int]] = defaultdict(set)
    for si, seq in enumerate(seqs):
        for p in zip(seq, seq[1:]):
            counts[p] += 1
            where[p].add(si)

    merges: list[tuple[int, int]] = []
    next_id = len(base) + 1
    while next_id < target_vocab:
        best = None
        best_count = 0
        for p, c in counts.items():
            if c > best_count or (c == best_count and c > 0 and p < best):
                best, best_count = p, c
        if best is None or best_count < 1:
            log.warning("corpus exhausted after %d merges (target vocab %d)", len(merges), target_vocab)
            return BpeModel(base, merges, complete=False)
        merges.append(best)
        for si in list(where.get(best, ())):
            old = seqs[si]
            new = _merge_pair(old, best, next_id)
            if len(new) == len(old):
                continue
            old_pairs, new_pairs = _pairs(old), _pairs(new)
            for p, c in old_pairs.items():
                counts[p] -= c
                if counts[p] <= 0:
                    del counts[p]
            for p, c in new_pairs.items():
                counts[p] += c
                where[p].add(si)
            for p in old_pairs.keys() - new_pairs.keys():
                where[p].discard(si)
            seqs[si] = new
        where.pop(best, None)
        counts.pop(best, None)
        next_id += 1
    return BpeModel(base, merges)


def _encode_chunk(model: BpeModel, data: bytes) -> list[int]:
    seq = _base_ids(model, data)
    ranks = model._ranks
    first = model.first_merge_id
    while len(seq) > 1:
        best_rank = None
        for p in zip(seq, seq[1:]):
            r = ranks.get(p)
            if r is not None and (best_rank is None or r < best_rank):
                best_rank = r
        if best_rank is None:
            break
        seq = _merge_pair(seq, model.merges[best_rank], first + best_rank)
    return seq


def encode(model: BpeModel, text: str | bytes) -> list[int]:
    """Token ids for ``text``; literal end-of-text markers become the EOT id."""
    data = _to_bytes(text)
    out: list[int] = []
    chunks = data.split(_EOT_BYTES)
    for i, chunk in enumerate(chunks):
        if chunk:
            out.extend(_encode_chunk(model, chunk))
        if i < len(chunks) - 1:
            out.append(model.eot_id)
    return out


def decode_bytes(model: BpeModel, tokens: Iterable[int]) -> bytes:
    parts = []
    for t in tokens:
        if not 0 <= t < model.vocab_size:
            raise ValueError(f"unknown token id {t}")
        parts.append(model.piece(t))
    return b"".join(parts)


def decode(model: BpeModel, tokens: Iterable[int]) -> str:
    return decode_bytes(model, tokens).decode("utf-8", errors="surrogateescape")


def split_stories(text: str | bytes) -> list[bytes]:
    """Stories of an EOT-delimited corpus, stripped of surrounding whitespace."""
    data = _to_bytes(text)
    return [s.strip() for s in data.split(_EOT_BYTES) if s.strip()]
