"""Language-modeling fitness task on the bundled story corpus."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..layers import Phenotype
from ..tokenizer import BpeModel, encode, split_stories, train_bpe
from ..transformer import config_of, lm_fitness

log = logging.getLogger(__name__)

BUNDLED = "bundled"
# shipped tokenizers for the bundled corpus, keyed by vocab size
_PRETRAINED = {256: "bpe256.txt", 512: "bpe512.txt"}


def data_path(name: str) -> Path:
    return Path(str(resources.files("factorevo") / "data" / name))


def load_corpus(corpus: str = BUNDLED) -> str:
    path = data_path("stories.txt") if corpus == BUNDLED else Path(corpus)
    return path.read_text(encoding="utf-8")


def load_tokenizer(corpus: str, vocab_size: int, tokenizer: str | None = None) -> BpeModel:
    """Tokenizer from a file, the shipped set, or trained on the spot."""
    if tokenizer:
        return BpeModel.load(tokenizer)
    if corpus == BUNDLED and vocab_size in _PRETRAINED:
        return BpeModel.load(data_path(_PRETRAINED[vocab_size]))
    alphabet = "bytes" if vocab_size > 257 else "corpus"
    log.info("training a %d-token BPE model on %s", vocab_size, corpus)
    return train_bpe(load_corpus(corpus), vocab_size, alphabet)


@dataclass
class LanguageTask:
    """Fixed batch of the first ``n_sequences`` stories, each ending in EOT."""

    corpus: str = BUNDLED
    vocab_size: int = 256
    n_sequences: int = 32
    max_seq_len: int = 64
    tokenizer: str | None = None

    kind = "lm"

    def __post_init__(self):
        self.bpe = load_tokenizer(self.corpus, self.vocab_size, self.tokenizer)
        if self.bpe.vocab_size != self.vocab_size:
            raise ValueError(f"tokenizer has {self.bpe.vocab_size} ids, task expects {self.vocab_size}")
        stories = split_stories(load_corpus(self.corpus))[: self.n_sequences]
        self.batch = [(encode(self.bpe, s) + [self.bpe.eot_id])[: self.max_seq_len] for s in stories]

    def check(self, arch) -> None:
        cfg = config_of(arch)
        if cfg.vocab_size != self.vocab_size:
            raise ValueError(f"network vocab {cfg.vocab_size} != task vocab {self.vocab_size}")

    def evaluate(self, phenotype: Phenotype, job) -> tuple[float, int]:
        """Fitness is deterministic; the step count is the number of scored tokens."""
        fitness = lm_fitness(phenotype, self.batch)
        return fitness, sum(len(s) - 1 for s in self.batch)

    def to_dict(self) -> dict:
        return {"kind": "lm", "corpus": self.corpus, "vocab_size": self.vocab_size,
                "n_sequences": self.n_sequences, "max_seq_len": self.max_seq_len, "tokenizer": self.tokenizer}
