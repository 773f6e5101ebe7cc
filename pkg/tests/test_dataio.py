import json

import numpy as np
import pytest

from dgode.dataio import (SyntheticConfig, gen_synthetic, load_dataset, save_dataset,
                          split_dataset)
from dgode.errors import ConfigError, DimensionError, LabelError, ParseError

HEADER = {"format": "dgode-utterances", "classes": ["a", "b"], "dims": [4, 3, 2]}


def record(**changes):
    rec = {"conversation_id": "c1", "utterance_index": 0, "speaker_id": "s",
           "label": "a", "text": [0.0] * 4, "audio": [0.0] * 3, "visual": [0.0] * 2}
    rec.update(changes)
    return rec


def write(tmp_path, *objs, raw=None):
    path = tmp_path / "d.jsonl"
    lines = [json.dumps(o) for o in objs] + ([raw] if raw is not None else [])
    path.write_text("\n".join(lines) + "\n")
    return path


def test_empty_body(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER))
    assert len(ds) == 0 and ds.classes == ("a", "b") and ds.dims == (4, 3, 2)


def test_dimension_error_reports_line(tmp_path):
    with pytest.raises(DimensionError) as info:
        load_dataset(write(tmp_path, HEADER, record(text=[1.0] * 5)))
    assert info.value.line == 2


def test_unknown_label(tmp_path):
    with pytest.raises(LabelError) as info:
        load_dataset(write(tmp_path, HEADER, record(), record(utterance_index=1, label="z")))
    assert info.value.line == 3


@pytest.mark.parametrize("bad", [
    "{not json",
    json.dumps(record(utterance_index=-1)),
    json.dumps(record(text=["x", 0, 0, 0])),
    json.dumps({k: v for k, v in record().items() if k != "speaker_id"}),
])
def test_malformed_records(tmp_path, bad):
    with pytest.raises(ParseError) as info:
        load_dataset(write(tmp_path, HEADER, raw=bad))
    assert info.value.line == 2


def test_bad_header_and_duplicates(tmp_path):
    with pytest.raises(ParseError):
        load_dataset(write(tmp_path, {"classes": ["a"], "dims": [1, 2]}))
    with pytest.raises(ParseError) as info:
        load_dataset(write(tmp_path, HEADER, record(), record()))
    assert info.value.line == 3


def test_grouping_restores_utterance_order(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER, record(utterance_index=2), record(conversation_id="c2"),
                            record(utterance_index=0, label="b")))
    assert [c.conversation_id for c in ds.conversations] == ["c1", "c2"]
    assert [u.utterance_index for u in ds.conversations[0].utterances] == [0, 2]
    assert ds.conversations[0].labels == ["b", "a"]


def test_round_trip_exact(tmp_path):
    ds = gen_synthetic(SyntheticConfig(conversations=7, seed=3))
    save_dataset(ds, tmp_path / "x.jsonl")
    back = load_dataset(tmp_path / "x.jsonl")
    assert back.same_as(ds)


def test_generation_is_pure():
    cfg = SyntheticConfig(conversations=5, seed=11)
    assert gen_synthetic(cfg).same_as(gen_synthetic(cfg))
    assert not gen_synthetic(cfg).same_as(gen_synthetic(SyntheticConfig(conversations=5, seed=12)))


def test_shape_of_generated_data():
    cfg = SyntheticConfig(conversations=9, min_utterances=3, max_utterances=5, speakers=3)
    ds = gen_synthetic(cfg)
    assert len(ds) == 9
    for conv in ds.conversations:
        assert 3 <= len(conv) <= 5
        assert conv.modality("audio").shape == (len(conv), 12)
        assert set(conv.speakers) <= {"spk0", "spk1", "spk2"}


def test_class_frequencies_match_stationary_distribution():
    prior = (0.4, 0.3, 0.2, 0.1)
    cfg = SyntheticConfig(conversations=1000, min_utterances=10, max_utterances=10, dims=(1, 1, 1),
                          class_prior=prior, persistence=0.5, seed=5)
    ds = gen_synthetic(cfg)
    labels = [u.label for c in ds.conversations for u in c.utterances]
    n = len(labels)
    assert n == 10_000
    # every per-speaker kernel rho I + (1 - rho) 1 prior^T leaves the prior stationary
    rho = float(np.mean(cfg.speaker_persistence()))
    inflation = (1 + rho) / (1 - rho)  # lag-k autocorrelation of a sticky chain ~ rho^k
    for k, p in enumerate(prior):
        freq = labels.count(f"c{k}") / n
        sigma = np.sqrt(p * (1 - p) / n * inflation)
        assert abs(freq - p) < 3 * sigma


def test_separable_limit():
    cfg = SyntheticConfig(conversations=20, separation=50.0, noise=1e-3, drift=0.0, seed=2)
    ds = gen_synthetic(cfg)
    x = np.concatenate([c.modality("text") for c in ds.conversations])
    y = np.array([int(u.label[1:]) for c in ds.conversations for u in c.utterances])
    means = np.stack([x[y == k].mean(0) for k in range(4)])
    nearest = np.argmin(((x[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
    assert np.array_equal(nearest, y)


@pytest.mark.parametrize("kwargs", [dict(separation=0.0), dict(noise=-1.0),
                                    dict(min_utterances=5, max_utterances=2),
                                    dict(class_prior=(0.5, 0.5))])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SyntheticConfig(**kwargs)


def test_split_sizes_and_integrity():
    ds = gen_synthetic(SyntheticConfig(conversations=10, seed=1))
    train, val, test = split_dataset(ds, (0.8, 0.1, 0.1), seed=4)
    assert (len(train), len(val), len(test)) == (8, 1, 1)
    ids = [c.conversation_id for part in (train, val, test) for c in part.conversations]
    assert sorted(ids) == sorted(c.conversation_id for c in ds.conversations)
    again = split_dataset(ds, (0.8, 0.1, 0.1), seed=4)
    assert all(a.same_as(b) for a, b in zip((train, val, test), again))
    everything = split_dataset(ds, (1, 0, 0))
    assert [len(p) for p in everything] == [10, 0, 0]


@pytest.mark.parametrize("fractions", [(0.5, 0.5, 0.5), (1.2, -0.1, -0.1), (0.5, 0.5)])
def test_split_rejects_bad_fractions(fractions):
    with pytest.raises(ConfigError):
        split_dataset(gen_synthetic(SyntheticConfig(conversations=3)), fractions)
