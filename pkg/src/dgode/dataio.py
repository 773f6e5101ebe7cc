"""Utterance-feature datasets: file format, synthetic generator, splits.

File format (one JSON object per line)::

    {"format": "dgode-utterances", "classes": [...], "dims": [d_text, d_audio, d_visual]}
    {"conversation_id": ..., "utterance_index": ..., "speaker_id": ..., "label": ...,
     "text": [...], "audio": [...], "visual": [...]}
    ...

Vectors are written with ``repr`` precision so a save/load round trip is exact.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, EmptyInputError, LabelError, ParseError

FORMAT_TAG = "dgode-utterances"
MODALITIES = ("text", "audio", "visual")
RECORD_FIELDS = ("conversation_id", "utterance_index", "speaker_id", "label") + MODALITIES


@dataclass(eq=False)
class UtteranceRecord:
    conversation_id: str
    utterance_index: int
    speaker_id: str
    label: str
    text: np.ndarray
    audio: np.ndarray
    visual: np.ndarray

    def to_json(self):
        rec = {
            "conversation_id": self.conversation_id,
            "utterance_index": int(self.utterance_index),
            "speaker_id": self.speaker_id,
            "label": self.label,
        }
        for m in MODALITIES:
            rec[m] = [float(v) for v in getattr(self, m)]
        return json.dumps(rec)

    def same_as(self, other):
        return (
            self.conversation_id == other.conversation_id
            and self.utterance_index == other.utterance_index
            and self.speaker_id == other.speaker_id
            and self.label == other.label
            and all(np.array_equal(getattr(self, m), getattr(other, m)) for m in MODALITIES)
        )


@dataclass(eq=False)
class Conversation:
    conversation_id: str
    utterances: list

    def __len__(self):
        return len(self.utterances)

    def modality(self, name):
        return np.stack([getattr(u, name) for u in self.utterances])

    @property
    def speakers(self):
        return [u.speaker_id for u in self.utterances]

    @property
    def labels(self):
        return [u.label for u in self.utterances]


@dataclass(eq=False)
class Dataset:
    classes: tuple
    dims: tuple
    conversations: list = field(default_factory=list)

    def __len__(self):
        return len(self.conversations)

    @property
    def utterance_count(self):
        return sum(len(c) for c in self.conversations)

    def subset(self, conversations):
        return Dataset(self.classes, self.dims, list(conversations))

    def same_as(self, other):
        if tuple(self.classes) != tuple(other.classes) or tuple(self.dims) != tuple(other.dims):
            return False
        if len(self) != len(other):
            return False
        for a, b in zip(self.conversations, other.conversations):
            if a.conversation_id != b.conversation_id or len(a) != len(b):
                return False
            if not all(u.same_as(v) for u, v in zip(a.utterances, b.utterances)):
                return False
        return True


def save_dataset(dataset, path):
    header = {"format": FORMAT_TAG, "classes": list(dataset.classes),
              "dims": [int(d) for d in dataset.dims]}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for conv in dataset.conversations:
            for u in conv.utterances:
                fh.write(u.to_json() + "\n")


def _parse_header(obj, lineno):
    if not isinstance(obj, dict) or "classes" not in obj or "dims" not in obj:
        raise ParseError("header must declare 'classes' and 'dims'", line=lineno)
    classes = obj["classes"]
    dims = obj["dims"]
    if not isinstance(classes, list) or not classes or not all(isinstance(c, str) for c in classes):
        raise ParseError("'classes' must be a nonempty list of names", line=lineno)
    if len(set(classes)) != len(classes):
        raise ParseError("duplicate class names in header", line=lineno)
    if (not isinstance(dims, list) or len(dims) != 3
            or not all(isinstance(d, int) and d > 0 for d in dims)):
        raise ParseError("'dims' must be three positive integers", line=lineno)
    return tuple(classes), tuple(dims)


def _parse_record(obj, lineno, classes, dims):
    if not isinstance(obj, dict):
        raise ParseError("record must be an object", line=lineno)
    missing = [f for f in RECORD_FIELDS if f not in obj]
    if missing:
        raise ParseError(f"missing fields {missing}", line=lineno)
    idx = obj["utterance_index"]
    if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
        raise ParseError("utterance_index must be a nonnegative integer", line=lineno)
    vectors = {}
    for m, d in zip(MODALITIES, dims):
        raw = obj[m]
        if not isinstance(raw, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise ParseError(f"{m} must be a list of numbers", line=lineno)
        if len(raw) != d:
            raise DimensionError(f"{m} vector has {len(raw)} entries, header declares {d}",
                                 line=lineno)
        vec = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(vec)):
            raise ParseError(f"{m} has non-finite values", line=lineno)
        vectors[m] = vec
    if obj["label"] not in classes:
        raise LabelError(f"label {obj['label']!r} is not a declared class", line=lineno)
    return UtteranceRecord(str(obj["conversation_id"]), idx, str(obj["speaker_id"]),
                           obj["label"], **vectors)


def load_dataset(path):
    groups = {}
    classes = dims = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", line=lineno) from exc
            if classes is None:
                classes, dims = _parse_header(obj, lineno)
                continue
            rec = _parse_record(obj, lineno, classes, dims)
            groups.setdefault(rec.conversation_id, []).append((rec, lineno))
    if classes is None:
        raise ParseError("missing header record", line=1)
    conversations = []
    for cid, items in groups.items():
        items.sort(key=lambda item: item[0].utterance_index)
        seen = set()
        for rec, lineno in items:
            if rec.utterance_index in seen:
                raise ParseError(f"duplicate utterance index {rec.utterance_index} in {cid!r}",
                                 line=lineno)
            seen.add(rec.utterance_index)
        conversations.append(Conversation(cid, [rec for rec, _ in items]))
    return Dataset(classes, dims, conversations)


@dataclass(frozen=True)
class SyntheticConfig:
    """Class-conditional Gaussian conversations.

    Emotions follow a sticky Markov chain: after class ``c`` a speaker with
    persistence ``rho`` repeats ``c`` with probability ``rho`` and otherwise
    draws from ``class_prior``.  Each speaker's ``rho`` is spread around
    ``persistence``.  Features are ``mean[label] + drift * mean[prev label]``
    plus isotropic noise.
    """

    conversations: int = 60
    min_utterances: int = 6
    max_utterances: int = 12
    speakers: int = 2
    classes: int = 4
    dims: tuple = (16, 12, 8)
    separation: float = 3.0
    noise: float = 1.0
    drift: float = 0.3
    persistence: float = 0.5
    class_prior: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.separation <= 0 or self.noise <= 0:
            raise ConfigError("separation and noise must be positive")
        if self.conversations < 0 or self.speakers < 1 or self.classes < 2:
            raise ConfigError("need >= 0 conversations, >= 1 speaker, >= 2 classes")
        if not 1 <= self.min_utterances <= self.max_utterances:
            raise ConfigError("utterance range must satisfy 1 <= min <= max")
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ConfigError("dims must be three positive integers")
        if not 0 <= self.persistence < 1:
            raise ConfigError("persistence must lie in [0, 1)")
        if self.class_prior:
            p = np.asarray(self.class_prior, dtype=float)
            if p.size != self.classes or np.any(p < 0) or not math.isclose(p.sum(), 1.0):
                raise ConfigError("class_prior must be a distribution over the classes")

    @property
    def prior(self):
        if self.class_prior:
            return np.asarray(self.class_prior, dtype=float)
        return np.full(self.classes, 1.0 / self.classes)

    def speaker_persistence(self):
        """Per-speaker repeat probability, spread over [0.5, 1.5] x persistence."""
        if self.speakers == 1:
            return np.array([self.persistence])
        spread = 0.5 + np.arange(self.speakers) / (self.speakers - 1)
        return np.minimum(self.persistence * spread, 0.95)

    def transition(self, speaker):
        rho = self.speaker_persistence()[speaker]
        return rho * np.eye(self.classes) + (1 - rho) * np.outer(np.ones(self.classes), self.prior)


def class_names(n):
    return tuple(f"c{k}" for k in range(n))


def gen_synthetic(config):
    rng = np.random.default_rng(config.seed)
    names = class_names(config.classes)
    means = []
    for d in config.dims:
        raw = rng.normal(size=(config.classes, d))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        means.append(raw * config.separation / math.sqrt(2.0))
    prior = config.prior
    trans = [config.transition(s) for s in range(config.speakers)]
    conversations = []
    for k in range(config.conversations):
        length = int(rng.integers(config.min_utterances, config.max_utterances + 1))
        utts = []
        prev = None
        for i in range(length):
            spk = int(rng.integers(config.speakers))
            probs = prior if prev is None else trans[spk][prev]
            y = int(rng.choice(config.classes, p=probs))
            vecs = []
            for mu, d in zip(means, config.dims):
                v = mu[y] + config.noise * rng.normal(size=d)
                if prev is not None:
                    v = v + config.drift * mu[prev]
                vecs.append(v)
            utts.append(UtteranceRecord(f"conv{k:04d}", i, f"spk{spk}", names[y], *vecs))
            prev = y
        conversations.append(Conversation(f"conv{k:04d}", utts))
    return Dataset(names, tuple(int(d) for d in config.dims), conversations)


def split_dataset(dataset, fractions=(0.8, 0.1, 0.1), seed=0):
    """Conversation-level split; floors each share and gives the remainder to train."""
    fr = np.asarray(fractions, dtype=float)
    if fr.size != 3 or np.any(fr < 0) or not math.isclose(fr.sum(), 1.0, abs_tol=1e-9):
        raise ConfigError(f"fractions must be three nonnegative numbers summing to 1, got {fractions}")
    n = len(dataset)
    sizes = [int(math.floor(f * n + 1e-9)) for f in fr]
    sizes[0] += n - sum(sizes)
    order = np.random.default_rng(seed).permutation(n)
    parts, start = [], 0
    for size in sizes:
        idx = sorted(order[start:start + size])
        parts.append(dataset.subset(dataset.conversations[i] for i in idx))
        start += size
    return tuple(parts)


def require_nonempty(dataset, what="split"):
    if dataset is None or len(dataset) == 0:
        raise EmptyInputError(f"{what} has no conversations")
