"""Run configuration: one JSON document, with command-line flags layered on top."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .detectors import ForestConfig, MetaConfig, MLPConfig, StackingConfig, SVMConfig
from .embedding import TrainConfig, WalkConfig
from .errors import ConfigError
from .generator import GeneratorConfig

ALL_MODELS = ("rf", "svm", "mlp", "stacking")

DEFAULTS = {
    "generator": {"examples_per_label": 41},
    "walk": {"p": 1.0, "q": 0.5, "walk_length": 40, "walks_per_node": 10},
    "train": {"dimensions": 64, "window": 5, "negative_samples": 5, "epochs": 5, "initial_learning_rate": 0.025},
    "models": {
        "rf": {"n_trees": 100, "max_depth": None, "min_leaf": 1, "features_per_split": None},
        "svm": {"lam": 1e-4, "epochs": 50},
        "mlp": {"hidden": [64], "epochs": 200, "batch": 16, "lr": 0.01, "momentum": 0.9},
        "stacking": {"folds": 5, "meta": {"l2": 1e-2, "max_iter": 500}},
    },
    "split": {"test_fraction": 0.2},
    "model_kinds": list(ALL_MODELS),
    "out": "run",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    seed: int
    generator: GeneratorConfig
    walk: WalkConfig
    train: TrainConfig
    forest: ForestConfig
    svm: SVMConfig
    mlp: MLPConfig
    stacking: StackingConfig
    test_fraction: float
    model_kinds: tuple[str, ...]
    out: Path
    raw: dict = field(repr=False, default_factory=dict)

    def snapshot(self) -> dict:
        """Fully resolved settings, as recorded in the run manifest."""
        return copy.deepcopy(self.raw)


def build_config(data: dict) -> RunConfig:
    """Validate a config mapping (already merged with flag overrides)."""
    if "seed" not in data or data["seed"] is None:
        raise ConfigError("config must set `seed` (or pass --seed)")
    unknown = set(data) - set(DEFAULTS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    raw = _merge(DEFAULTS, data)
    try:
        seed = int(raw["seed"])
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        kinds = tuple(raw["model_kinds"])
        bad = set(kinds) - set(ALL_MODELS)
        if bad or not kinds:
            raise ConfigError(f"model kinds must be drawn from {','.join(ALL_MODELS)}; got {sorted(bad) or 'none'}")
        m = raw["models"]
        forest = ForestConfig(**m["rf"], seed=seed)
        svm = SVMConfig(**m["svm"], seed=seed)
        mlp = MLPConfig(**{**m["mlp"], "hidden": tuple(m["mlp"]["hidden"])}, seed=seed)
        stacking = StackingConfig(
            forest, svm, mlp, MetaConfig(**m["stacking"]["meta"]), int(m["stacking"]["folds"]), seed
        )
        test_fraction = float(raw["split"]["test_fraction"])
        if not 0 < test_fraction < 1:
            raise ConfigError("split.test_fraction must lie strictly between 0 and 1")
        return RunConfig(
            seed=seed,
            generator=GeneratorConfig.from_dict({**raw["generator"], "seed": seed}),
            walk=WalkConfig(**raw["walk"], seed=seed),
            train=TrainConfig(**raw["train"], seed=seed),
            forest=forest,
            svm=svm,
            mlp=mlp,
            stacking=stacking,
            test_fraction=test_fraction,
            model_kinds=kinds,
            out=Path(raw["out"]),
            raw=raw,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path=None, seed=None, out=None, models=None, base: dict | None = None) -> RunConfig:
    """Load ``path`` (or start from ``base``) and apply flag overrides."""
    data = copy.deepcopy(base) if base else {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
    # flags win over the file
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["out"] = str(out)
    if models is not None:
        data["model_kinds"] = [m.strip() for m in models.split(",") if m.strip()]
    return build_config(data)
