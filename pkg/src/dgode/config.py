"""Run configuration read from an INI-style text file.

Sections and their keys (all optional; every key has a default)::

    [run]        dataset, out, seed, params, split, split_seed
    [train]      lr, batch_size, epochs, l2, dropout, beta1, beta2, adam_eps
    [model]      hidden, dim, head_hidden, hop_count, mixhop_depth, w_rho, w_eps,
                 use_ode, use_mixhop, architecture, gcn_layers
    [graph]      alpha, w_past, w_future
    [ode]        t_end, steps, method, sing_tol, clamp_eps
    [synthetic]  conversations, min_utterances, max_utterances, speakers, classes,
                 dims, separation, noise, drift, persistence, class_prior
    [sweep]      depths, seeds, method

Unknown sections or keys are rejected.  Tuples are comma separated.  The only
seed lives in [run]; it also seeds training and the synthetic generator.
"""
import configparser
from dataclasses import dataclass, field, fields, replace

from .dataio import SyntheticConfig
from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig

GRAPH_KEYS = ("alpha", "w_past", "w_future")
MODEL_KEYS = ("hidden", "dim", "head_hidden", "hop_count", "mixhop_depth", "w_rho", "w_eps",
              "use_ode", "use_mixhop", "architecture", "gcn_layers")


@dataclass(frozen=True)
class RunSection:
    dataset: str = ""  # default: <out>/dataset.jsonl
    out: str = "out"
    seed: int = 0
    params: str = ""  # default: <out>/params.txt; "init" = untrained
    split: tuple = (0.7, 0.15, 0.15)
    split_seed: int = 0


@dataclass(frozen=True)
class SweepSection:
    depths: tuple = (2, 4, 8, 16, 32, 64)
    seeds: tuple = (0,)
    method: str = "closed_form_exact"


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    sweep: SweepSection = field(default_factory=SweepSection)

    def with_seed(self, seed):
        seed = int(seed)
        return replace(self, run=replace(self.run, seed=seed),
                       train=replace(self.train, seed=seed),
                       synthetic=replace(self.synthetic, seed=seed))

    def with_out(self, out):
        return replace(self, run=replace(self.run, out=str(out)))


def _convert(raw, default, key):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [p.strip() for p in raw.split(",") if p.strip()]
            if default and isinstance(default[0], int) and not isinstance(default[0], bool):
                return tuple(int(p) for p in items)
            return tuple(float(p) for p in items)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def _apply(obj, items, section, allowed=None):
    known = {f.name: f for f in fields(obj)}
    changes = {}
    for key, raw in items:
        if key not in known or (allowed is not None and key not in allowed):
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        changes[key] = _convert(raw, getattr(obj, key), f"{section}.{key}")
    try:
        return replace(obj, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}]: {exc}") from exc


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = RunConfig()
    sections = set(parser.sections())
    unknown = sections - {"run", "train", "model", "graph", "ode", "synthetic", "sweep"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")

    def items(name):
        return list(parser.items(name)) if name in sections else []

    model = _apply(cfg.model, items("model"), "model", MODEL_KEYS)
    model = _apply(model, items("graph"), "graph", GRAPH_KEYS)
    model = replace(model, ode=_apply(model.ode, items("ode"), "ode"))
    synthetic = _apply(cfg.synthetic, items("synthetic"),
                       "synthetic", {f.name for f in fields(SyntheticConfig)} - {"seed"})
    run = _apply(cfg.run, items("run"), "run")
    cfg = RunConfig(
        run=run,
        train=_apply(cfg.train, items("train"), "train",
                     {f.name for f in fields(TrainConfig)} - {"seed"}),
        model=model,
        synthetic=synthetic,
        sweep=_apply(cfg.sweep, items("sweep"), "sweep"),
    )
    return cfg.with_seed(run.seed)


def load_config(path=None):
    if path is None:
        return RunConfig().with_seed(0)
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dump_config(cfg):
    """Render ``cfg`` back to the text format (used for run provenance)."""
    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(str(x) for x in v)
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v)

    lines = []
    blocks = [
        ("run", cfg.run, None),
        ("train", cfg.train, [f.name for f in fields(TrainConfig) if f.name != "seed"]),
        ("model", cfg.model, MODEL_KEYS),
        ("graph", cfg.model, GRAPH_KEYS),
        ("ode", cfg.model.ode, None),
        ("synthetic", cfg.synthetic,
         [f.name for f in fields(SyntheticConfig) if f.name != "seed"]),
        ("sweep", cfg.sweep, None),
    ]
    for name, obj, keys in blocks:
        keys = keys or [f.name for f in fields(obj)]
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {fmt(getattr(obj, k))}" for k in keys)
        lines.append("")
    return "\n".join(lines)
