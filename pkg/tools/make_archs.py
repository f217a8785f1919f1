"""Regenerate the bundled architecture files under src/factorevo/data/archs."""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "factorevo" / "data" / "archs"


def conv(cin, cout, k, s, rank=None):
    d = {"kind": "conv", "in": cin, "out": cout, "kernel": [k, k], "stride": s}
    if rank:
        d["rank"] = rank
    return d


def dense(n_in, n_out, rank=None, activation="relu"):
    d = {"kind": "dense", "in": n_in, "out": n_out, "activation": activation}
    if rank:
        d["rank"] = rank
    return d


def convnet(name, shape, convs, denses, rank=None):
    layers = [conv(*c, rank=rank) for c in convs]
    layers += [dense(a, b, rank) for a, b in denses[:-1]]
    layers.append(dense(*denses[-1], activation=None))
    return {"name": name, "family": "convnet", "representation": "factorized" if rank else "nonfactorized",
            "input_shape": list(shape), "layers": layers}


def transformer(name, rep, vocab, hidden, ff, max_len, emb_rank=None, rank=None):
    d = {"name": name, "family": "transformer", "representation": rep,
         "transformer": {"n_blocks": 3, "n_heads": 4, "head_dim": 4, "hidden_dim": hidden, "ff_dim": ff,
                         "vocab_size": vocab, "max_seq_len": max_len}}
    if rep == "factorized":
        d.update(embedding_rank=emb_rank, rank=rank)
    return d


ARCHS = {
    "atari_nonfactorized": convnet("atari_nonfactorized", (12, 84, 84),
                                   [(12, 32, 8, 4), (32, 64, 4, 2), (64, 64, 3, 1)], [(3136, 256), (256, 18)]),
    "atari_factorized": convnet("atari_factorized", (12, 84, 84),
                                [(12, 32, 8, 4), (32, 64, 4, 2), (64, 64, 3, 1)], [(3136, 256), (256, 18)], rank=4),
    "atari_small": convnet("atari_small", (12, 84, 84),
                           [(12, 4, 8, 4), (4, 8, 4, 2), (8, 8, 3, 1)], [(392, 32), (32, 18)]),
    "carracing_nonfactorized": convnet("carracing_nonfactorized", (12, 64, 64),
                                       [(12, 32, 4, 2), (32, 64, 4, 2), (64, 128, 4, 2), (128, 256, 4, 2)],
                                       [(1024, 256), (256, 3)]),
    "carracing_factorized": convnet("carracing_factorized", (12, 64, 64),
                                    [(12, 32, 4, 2), (32, 64, 4, 2), (64, 128, 4, 2), (128, 256, 4, 2)],
                                    [(1024, 256), (256, 3)], rank=1),
    "carracing_small": convnet("carracing_small", (12, 64, 64),
                               [(12, 4, 4, 2), (4, 4, 4, 2), (4, 8, 4, 2), (8, 16, 4, 2)], [(64, 32), (32, 3)]),
    "tiletrack_nonfactorized": convnet("tiletrack_nonfactorized", (12, 9, 9),
                                       [(12, 16, 3, 1), (16, 32, 3, 2)], [(288, 64), (64, 4)]),
    "tiletrack_factorized": convnet("tiletrack_factorized", (12, 9, 9),
                                    [(12, 16, 3, 1), (16, 32, 3, 2)], [(288, 64), (64, 4)], rank=1),
    "tiletrack_small": convnet("tiletrack_small", (12, 9, 9),
                               [(12, 4, 3, 1), (4, 8, 3, 2)], [(72, 16), (16, 4)]),
    "transformer_nonfactorized": transformer("transformer_nonfactorized", "nonfactorized", 2048, 32, 128, 256),
    "transformer_factorized": transformer("transformer_factorized", "factorized", 2048, 32, 128, 256, 32, 4),
    "transformer_small": transformer("transformer_small", "nonfactorized", 2048, 4, 16, 256),
    "desk_lm_nonfactorized": transformer("desk_lm_nonfactorized", "nonfactorized", 256, 32, 128, 64),
    "desk_lm_factorized": transformer("desk_lm_factorized", "factorized", 256, 32, 128, 64, 32, 4),
    "desk_lm_small": transformer("desk_lm_small", "nonfactorized", 256, 4, 16, 64),
}

if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, d in ARCHS.items():
        (OUT / f"{name}.json").write_text(json.dumps(d, indent=2) + "\n")
        print(name)
