import json

import numpy as np
import pytest

from factorevo.envs.lm import data_path
from factorevo.layers import ArchitectureSpec, LayerSpec
from factorevo.transformer import TransformerConfig, transformer_arch


def bundled_arch(name: str) -> ArchitectureSpec:
    return ArchitectureSpec.load(data_path(f"archs/{name}.json"))


def tiny_convnet(rank=None) -> ArchitectureSpec:
    layers = (LayerSpec.conv(12, 4, (3, 3), 2, rank), LayerSpec.dense(64, 8, rank), LayerSpec.dense(8, 4, None, None))
    return ArchitectureSpec("tiny", "convnet", "factorized" if rank else "nonfactorized", layers, (12, 9, 9))


def tiny_transformer(representation="nonfactorized", vocab=16, **kw) -> ArchitectureSpec:
    cfg = TransformerConfig(n_blocks=2, n_heads=2, head_dim=4, hidden_dim=8, ff_dim=16, vocab_size=vocab,
                            max_seq_len=32, **kw)
    ranks = {"embedding_rank": 4, "rank": 2} if representation == "factorized" else {}
    return transformer_arch(cfg, representation, name="tiny_lm", **ranks)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_json(path, doc):
    path.write_text(json.dumps(doc, indent=2))
    return path
