from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorevo.envs.lm import data_path, load_corpus, load_tokenizer
from factorevo.tokenizer import (EOT, BpeModel, decode, decode_bytes, encode, split_stories, train_bpe)


def brute_force_first_merge(data: bytes):
    counts = Counter(zip(data, data[1:]))
    top = max(counts.values())
    return min(p for p, c in counts.items() if c == top)


def test_first_merge_of_aaaa():
    m = train_bpe([b"aaaa"], 258)
    assert m.merges == [(ord("a"), ord("a"))]


def test_repeated_byte_merges_form_powers():
    m = train_bpe([b"a" * 16], 260)
    a, eot = ord("a"), 256
    assert m.merges == [(a, a), (257, 257), (258, 258)]
    assert [m.piece(t) for t in (257, 258, 259)] == [b"aa", b"aaaa", b"aaaaaaaa"]
    assert encode(m, b"a" * 16) == [259, 259]


def test_alternating_bytes_single_merge():
    data = b"xyxyxyxy"
    m = train_bpe([data], 258)
    assert m.merges == [brute_force_first_merge(data)] == [(ord("x"), ord("y"))]
    small = train_bpe([data], 4, alphabet="corpus")
    assert small.vocab_size == 4 and len(small.merges) == 1


@settings(max_examples=40, deadline=None)
@given(st.binary(min_size=2, max_size=40))
def test_first_merge_matches_enumeration(data):
    m = train_bpe([data], 258)
    assert m.merges[0] == brute_force_first_merge(data)


def test_exhausted_corpus_returns_smaller_model():
    m = train_bpe([b"ab"], 300)
    assert not m.complete and m.vocab_size == 258


def test_bytes_target_must_exceed_base():
    with pytest.raises(ValueError):
        train_bpe([b"abc"], 257)


def test_empty_round_trip():
    m = train_bpe([b"hello hello"], 260)
    assert encode(m, "") == [] and decode(m, []) == ""


def test_unmerged_bytes_one_token_each():
    m = train_bpe([b"aaaa"], 258)
    assert encode(m, b"xyz") == [ord("x"), ord("y"), ord("z")]


def test_unknown_id_rejected():
    m = train_bpe([b"aaaa"], 258)
    with pytest.raises(ValueError):
        decode(m, [258])


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=200))
def test_round_trip_arbitrary_bytes(data):
    m = load_tokenizer("bundled", 512)
    assert decode_bytes(m, encode(m, data)) == data


def test_round_trip_bundled_corpus():
    for size in (256, 512):
        m = load_tokenizer("bundled", size)
        assert m.vocab_size == size
        for story in split_stories(load_corpus()):
            assert decode_bytes(m, encode(m, story)) == story


def test_eot_marker_maps_to_special_id():
    m = load_tokenizer("bundled", 512)
    ids = encode(m, f"hi{EOT}there")
    assert m.eot_id in ids and decode(m, ids) == f"hi{EOT}there"


def test_training_deterministic_and_file_round_trip(tmp_path):
    text = load_corpus()[:6000]
    a, b = train_bpe(text, 300), train_bpe(text, 300)
    assert a.merges == b.merges
    a.save(tmp_path / "m.txt")
    lines = (tmp_path / "m.txt").read_text().splitlines()
    assert lines[0] == "300"
    assert lines[1].split()[2] == "257"
    assert BpeModel.load(tmp_path / "m.txt").merges == a.merges


def test_corrupt_model_file():
    with pytest.raises(ValueError):
        BpeModel.loads("259\n97 97 257\n97 97 300\n")


def test_token_count_non_increasing_with_vocab():
    text = load_corpus()[:8000]
    counts = [len(encode(train_bpe(text, v), text)) for v in (260, 300, 400)]
    assert counts[0] >= counts[1] >= counts[2]


def test_bundled_models_match_training():
    stories = split_stories(load_corpus())
    assert train_bpe(stories, 256, alphabet="corpus").merges == load_tokenizer("bundled", 256).merges


def test_shipped_corpus_size():
    size = data_path("stories.txt").stat().st_size
    assert 40_000 < size < 80_000
