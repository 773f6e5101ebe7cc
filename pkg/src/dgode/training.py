"""Optimizer, training loop, evaluation and the depth sweep."""
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import model as M
from .dataio import require_nonempty
from .errors import ConfigError
from .metrics import classification_report


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-3
    batch_size: int = 8
    epochs: int = 60
    l2: float = 1e-5
    dropout: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size >= 1 and epochs >= 0 required")
        if self.l2 < 0:
            raise ConfigError("l2 must be nonnegative")


# Published settings for the two benchmark corpora (hidden width 512 for both).
PUBLISHED_PRESETS = {
    "iemocap": {
        "train": dict(lr=1e-4, batch_size=16, l2=1e-5, dropout=0.5),
        "model": dict(input_dims=(1024, 1582, 342), dim=512, hidden=512, head_hidden=512),
    },
    "meld": {
        "train": dict(lr=5e-6, batch_size=8, l2=1e-5, dropout=0.5),
        "model": dict(input_dims=(1024, 300, 342), dim=512, hidden=512, head_hidden=512),
    },
}


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params, grads, config, state):
    """In-place bias-corrected Adam update; hop gates are clipped to >= 0."""
    state.step += 1
    t = state.step
    b1, b2 = config.beta1, config.beta2
    for name, arr in params.named_arrays().items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        arr -= config.lr * mhat / (np.sqrt(vhat) + config.adam_eps)
    np.maximum(params.hop_gates, 0.0, out=params.hop_gates)
    return params


def _batches(prepared, batch_size, order):
    for start in range(0, len(order), batch_size):
        yield [prepared[i] for i in order[start:start + batch_size]]


def predict(prepared, params, batch_size=32):
    """Probabilities and labels for prepared conversations, in input order."""
    cfg = params.config
    probs, labels = [], []
    order = np.arange(len(prepared))
    for convs in _batches(prepared, batch_size, order):
        batch = M.collate(convs, cfg.n_speakers, cfg.ode.clamp_eps)
        probs.append(M.forward(batch, params))
        labels.append(batch.labels)
    return np.concatenate(probs), np.concatenate(labels)


def embeddings(prepared, params, batch_size=32):
    cfg = params.config
    out = []
    for convs in _batches(prepared, batch_size, np.arange(len(prepared))):
        batch = M.collate(convs, cfg.n_speakers, cfg.ode.clamp_eps)
        out.append(M.ag.value(M.utterance_embeddings(batch, params.named_arrays(), cfg)))
    return np.concatenate(out)


def evaluate(split, params, batch_size=32):
    """Metrics on a dataset split (or an already prepared list of conversations)."""
    prepared = _prepared(split, params)
    if not prepared:
        raise M.EmptyInputError("evaluation split has no conversations")
    probs, labels = predict(prepared, params, batch_size)
    preds = np.array([M.predict_label(row) for row in probs], dtype=np.intp)
    return classification_report(labels, preds, params.classes)


def _prepared(split, params):
    if isinstance(split, list):
        return split
    require_nonempty(split)
    return M.prepare_dataset(split, params)


@dataclass
class TrainResult:
    params: M.ModelParams  # best-validation copy
    log: list
    timings: list
    best_epoch: int


def train(train_set, val_set, params, config, on_epoch=None):
    """Mini-batch Adam with seeded shuffling; keeps the best validation W-F1.

    Returns a :class:`TrainResult`.  ``params`` is updated in place to the
    final-epoch state; the best-validation copy is in ``result.params``.
    """
    train_prep = _prepared(train_set, params)
    val_prep = _prepared(val_set, params)
    if not train_prep or not val_prep:
        raise M.EmptyInputError("train and validation splits must be nonempty")
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    cfg = params.config
    best, best_score, best_epoch = params.copy(), -np.inf, 0
    log, timings = [], []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_prep))
        total, count = 0.0, 0
        for convs in _batches(train_prep, config.batch_size, order):
            batch = M.collate(convs, cfg.n_speakers, cfg.ode.clamp_eps)
            value, grads = M.backward(batch, params, config.l2, train_mode=True,
                                      dropout=config.dropout, rng=rng)
            adam_step(params, grads, config, state)
            total += value * batch.utterance_count
            count += batch.utterance_count
        val = evaluate(val_prep, params)
        record = {"epoch": epoch, "train_loss": total / count, "val_wf1": val.weighted_f1}
        log.append(record)
        timings.append({"epoch": epoch, "wall_time": time.perf_counter() - t0})
        if val.weighted_f1 > best_score:
            best, best_score, best_epoch = params.copy(), val.weighted_f1, epoch
        if on_epoch is not None:
            on_epoch(record)
    return TrainResult(best, log, timings, best_epoch)


def vocabulary(dataset):
    speakers = sorted({s for c in dataset.conversations for s in c.speakers})
    return tuple(dataset.classes), tuple(speakers)


def fresh_params(model_config, dataset, seed):
    classes, speakers = vocabulary(dataset)
    cfg = replace(model_config, n_classes=len(classes), n_speakers=max(len(speakers), 1),
                  input_dims=tuple(dataset.dims))
    return M.init_params(cfg, seed=seed, classes=classes, speakers=speakers)


def run_experiment(splits, model_config, train_config, seed):
    """Train from a seed-specific initialization and score the test split."""
    train_set, val_set, test_set = splits
    params = fresh_params(model_config, train_set, seed)
    result = train(train_set, val_set, params, replace(train_config, seed=seed))
    return evaluate(test_set, result.params), result


def depth_sweep(splits, model_config, train_config, depths, seeds=(0,),
                dgode_method="closed_form_exact"):
    """Test W-F1 against depth for DGODE (ODE horizon) and a stacked vanilla GCN."""
    if any(int(d) < 1 for d in depths):
        raise ConfigError("depths must be >= 1")
    records = []
    for method in ("dgode", "vanilla_gcn"):
        for depth in depths:
            if method == "dgode":
                ode = replace(model_config.ode, t_end=float(depth), method=dgode_method)
                cfg = replace(model_config, architecture="dgode", ode=ode)
            else:
                cfg = replace(model_config, architecture="vanilla_gcn", gcn_layers=int(depth))
            scores = [run_experiment(splits, cfg, train_config, s)[0].weighted_f1 for s in seeds]
            records.append({"method": method, "depth": int(depth),
                            "w_f1": float(np.mean(scores)),
                            "per_seed": [float(s) for s in scores],
                            "seeds": [int(s) for s in seeds]})
    return records
