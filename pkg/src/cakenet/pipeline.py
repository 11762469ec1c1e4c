"""Split, standardize, train: the glue shared by the CLI and the end-to-end checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Optional

from .dataset import N_FEATURES, Dataset, NormalizationStats, fit_normalizer, normalize, split
from .errors import InvalidConfig
from .mlp import DEFAULT_ACTIVATION, DEFAULT_HIDDEN, MlpModel, TrainConfig, TrainHistory, init_model, train

FIT_NORM_CHOICES = ("train", "all")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to reproduce one training run.

    ``seed`` drives the train/test shuffle, weight initialization and the
    per-epoch shuffle, overriding ``train.seed``.
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_layers: tuple = DEFAULT_HIDDEN
    hidden_activation: str = DEFAULT_ACTIVATION
    train_fraction: float = 0.7
    seed: int = 0
    fit_norm_on: str = "train"
    validation_fraction: float = 0.15  # only used with early stopping

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidConfig(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InvalidConfig(f"validation_fraction must lie in (0, 1), got {self.validation_fraction}")
        if self.fit_norm_on not in FIT_NORM_CHOICES:
            raise InvalidConfig(f"fit_norm_on must be one of {FIT_NORM_CHOICES}, got {self.fit_norm_on!r}")
        object.__setattr__(self, "hidden_layers", tuple(self.hidden_layers))
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))

    @property
    def layer_sizes(self):
        return (N_FEATURES,) + self.hidden_layers + (1,)

    @classmethod
    def from_dict(cls, payload, **overrides) -> PipelineConfig:
        payload = dict(payload)
        own = {f.name for f in fields(cls)} - {"train"}
        kwargs = {k: payload.pop(k) for k in list(payload) if k in own}
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        train_cfg = TrainConfig.from_dict(payload)
        return cls(train=train_cfg, **kwargs)

    @classmethod
    def from_json(cls, text, **overrides) -> PipelineConfig:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise InvalidConfig("config must be a JSON object")
        return cls.from_dict(payload, **overrides)

    def to_dict(self):
        out = self.train.to_dict()
        out.update(
            hidden_layers=list(self.hidden_layers),
            hidden_activation=self.hidden_activation,
            train_fraction=self.train_fraction,
            seed=self.seed,
            fit_norm_on=self.fit_norm_on,
            validation_fraction=self.validation_fraction,
        )
        return out


@dataclass
class TrainResult:
    model: MlpModel
    history: TrainHistory
    train_set: Dataset
    test_set: Dataset
    stats: NormalizationStats
    validation_set: Optional[Dataset] = None


def run_training(ds: Dataset, config: PipelineConfig = PipelineConfig()) -> TrainResult:
    train_set, test_set = split(ds, config.train_fraction, config.seed)
    stats = fit_normalizer(train_set if config.fit_norm_on == "train" else ds)

    fit_set, validation = train_set, None
    if config.train.early_stop_patience is not None:
        fit_set, validation = split(train_set, 1.0 - config.validation_fraction, (config.seed + 1) % 2**64)

    model = init_model(config.layer_sizes, config.hidden_activation, config.seed, norm_stats=stats)
    model, history = train(
        model,
        normalize(fit_set, stats),
        config.train,
        None if validation is None else normalize(validation, stats),
    )
    return TrainResult(model, history, train_set, test_set, stats, validation)
