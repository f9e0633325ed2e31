"""Run configuration: a JSON document with sections {data, prep, dynimg,
flow, model, loss, train, eval}. Every key has a default, unknown keys are
rejected, and validation happens before any work starts.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .flow import TVL1Params
from .loso import TrainConfig
from .model import ModelConfig
from .synth import SyntheticSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid or unknown configuration keys/values."""


DEFAULTS: dict[str, dict[str, Any]] = {
    "data": {
        "seed": 0,
        "synthetic": {
            "subjects": 8,
            "clips_per_class": 6,
            "classes": 3,
            "image_size": 64,
            "frames": 12,
            "magnitude_px": 2.0,
            "noise_std": 0.005,
            "fps": 30.0,
            "directions_deg": None,
        },
    },
    "prep": {
        "align": False,
        "out_size": 64,
        "fps": 30.0,
        "evm": {"enabled": False, "alpha": 10.0, "band": [0.4, 8.0], "levels": 4},
        "augment_copies": 0,
        "augment": {
            "rotation_range": [-10.0, 10.0],
            "scale_range": [0.9, 1.1],
            "flip_prob": 0.5,
        },
    },
    "dynimg": {"lambda_reg": 1.0, "iters": 500, "step": 1e-3, "use_sqrt": False},
    "flow": {
        "attachment": 0.15,
        "tightness": 0.3,
        "tau": 0.25,
        "warps": 5,
        "dual_iters": 30,
        "levels": 5,
        "median_filter": True,
        "frame_pair": "onset_apex",
        "save_debug": False,
    },
    "model": {
        "image_size": 64,
        "patch_size": 16,
        "scales": [1, 2],
        "layers": 4,
        "heads": 4,
        "embed_dim": 64,
        "mlp_ratio": 4.0,
        "num_classes": 3,
        "dropout_rate": 0.1,
        "classifier_hidden": None,
        "attention_norm": "row",
        "importance_axis": 0,
    },
    "loss": {"alpha": 0.1, "temperature": 0.1},
    "train": {"epochs": 50, "batch_size": 16, "lr": 5e-5, "weight_decay": 0.05},
    "eval": {"alphas": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]},
}


def _merge(defaults: Any, given: Any, path: str) -> Any:
    if isinstance(defaults, dict):
        if not isinstance(given, dict):
            raise ConfigError(f"config section '{path}' must be an object")
        unknown = set(given) - set(defaults)
        if unknown:
            raise ConfigError(
                f"unknown config key(s) {sorted(unknown)} under '{path or 'top level'}'"
            )
        out = {}
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            out[key] = _merge(dval, given[key], sub) if key in given else copy.deepcopy(dval)
        return out
    return given


class RunConfig:
    """Validated, fully-defaulted run configuration."""

    def __init__(self, raw: dict | None = None):
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        self.sections = _merge(DEFAULTS, raw, "")
        self._validate()

    def _validate(self) -> None:
        loss = self.sections["loss"]
        if not 0.0 <= loss["alpha"] <= 1.0:
            raise ConfigError(f"loss.alpha must lie in [0, 1], got {loss['alpha']}")
        if loss["temperature"] <= 0:
            raise ConfigError("loss.temperature must be positive")
        if not isinstance(self.sections["data"]["seed"], int):
            raise ConfigError("data.seed must be an integer")
        tr = self.sections["train"]
        if tr["epochs"] < 1 or tr["batch_size"] < 1:
            raise ConfigError("train.epochs and train.batch_size must be positive")
        if tr["lr"] < 0 or tr["weight_decay"] < 0:
            raise ConfigError("train.lr and train.weight_decay must be non-negative")
        for a in self.sections["eval"]["alphas"]:
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"eval.alphas entries must lie in [0, 1], got {a}")
        # constructing the typed configs surfaces their own validation errors
        try:
            self.model_config()
            self.synthetic_spec()
            self.train_config()
            self.tvl1_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def seed(self) -> int:
        return int(self.sections["data"]["seed"])

    def with_seed(self, seed: int) -> "RunConfig":
        raw = copy.deepcopy(self.sections)
        raw["data"]["seed"] = int(seed)
        return RunConfig(raw)

    def model_config(self) -> ModelConfig:
        m = self.sections["model"]
        return ModelConfig(
            image_size=m["image_size"],
            patch_size=m["patch_size"],
            scales=tuple(m["scales"]),
            layers=m["layers"],
            heads=m["heads"],
            embed_dim=m["embed_dim"],
            mlp_ratio=m["mlp_ratio"],
            num_classes=m["num_classes"],
            dropout_rate=m["dropout_rate"],
            classifier_hidden=m["classifier_hidden"],
            attention_norm=m["attention_norm"],
            importance_axis=m["importance_axis"],
        )

    def synthetic_spec(self) -> SyntheticSpec:
        s = self.sections["data"]["synthetic"]
        dirs = s["directions_deg"]
        return SyntheticSpec(
            subjects=s["subjects"],
            clips_per_class=s["clips_per_class"],
            classes=s["classes"],
            image_size=s["image_size"],
            frames=s["frames"],
            magnitude_px=s["magnitude_px"],
            noise_std=s["noise_std"],
            fps=s["fps"],
            seed=self.seed,
            directions_deg=tuple(dirs) if dirs else None,
        )

    def train_config(self, alpha: float | None = None) -> TrainConfig:
        t = self.sections["train"]
        loss = self.sections["loss"]
        return TrainConfig(
            epochs=t["epochs"],
            batch_size=t["batch_size"],
            lr=t["lr"],
            weight_decay=t["weight_decay"],
            alpha=loss["alpha"] if alpha is None else alpha,
            temperature=loss["temperature"],
            seed=self.seed,
        )

    def tvl1_params(self) -> TVL1Params:
        f = self.sections["flow"]
        return TVL1Params(
            attachment=f["attachment"],
            tightness=f["tightness"],
            tau=f["tau"],
            warps=f["warps"],
            dual_iters=f["dual_iters"],
            levels=f["levels"],
            median_filter=f["median_filter"],
        )

    def to_json(self) -> str:
        return json.dumps(self.sections, indent=2, sort_keys=True)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return RunConfig(raw)
