"""Regression metrics and evaluation reports."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset, normalize_target
from .errors import ConstantActual, EmptyInput, LengthMismatch
from .mlp import MlpModel, predict

SPACES = ("physical", "normalized")


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float).reshape(-1)
    p = np.asarray(predicted, dtype=float).reshape(-1)
    if a.shape != p.shape:
        raise LengthMismatch(f"{a.size} actual values vs {p.size} predictions")
    if a.size == 0:
        raise EmptyInput("metrics need at least one value")
    return a, p


def mse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean((a - p) ** 2))


def mae(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.mean(np.abs(a - p)))


def r2(actual, predicted) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``; negative for fits worse than the mean."""
    a, p = _pair(actual, predicted)
    if a.size < 2:
        raise ConstantActual("R^2 needs at least two actual values")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ConstantActual("actual values are constant; R^2 is undefined")
    return 1.0 - float(np.sum((a - p) ** 2)) / ss_tot


@dataclass(frozen=True)
class EvalReport:
    """R^2 (``None`` when undefined), MSE and MAE plus the (actual, predicted) pairs behind them."""

    r2: Optional[float]
    mse: float
    mae: float
    pairs: tuple
    space_tag: str = "physical"
    r2_error: Optional[str] = None

    @classmethod
    def from_pairs(cls, actual, predicted, space_tag="physical") -> EvalReport:
        a, p = _pair(actual, predicted)
        try:
            r2_value, r2_error = r2(a, p), None
        except ConstantActual as exc:
            r2_value, r2_error = None, f"{exc.code}: {exc}"
        pairs = tuple((float(x), float(y)) for x, y in zip(a, p))
        return cls(r2_value, mse(a, p), mae(a, p), pairs, space_tag, r2_error)

    @property
    def n(self):
        return len(self.pairs)

    def summary(self):
        out = {"space": self.space_tag, "n": self.n, "r2": self.r2, "mse": self.mse, "mae": self.mae}
        if self.r2_error is not None:
            out["r2_error"] = self.r2_error
        return out

    def pairs_csv(self) -> str:
        buf = io.StringIO()
        buf.write("actual,predicted\n")
        for a, p in self.pairs:
            buf.write(f"{a!r},{p!r}\n")
        return buf.getvalue()


def evaluate(model: MlpModel, test: Dataset, space="physical") -> EvalReport:
    """Predict every test row and score the predictions.

    ``space="normalized"`` scores in standardized target units using the
    model's embedded stats instead of mass fraction.
    """
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}, got {space!r}")
    if len(test) == 0:
        raise EmptyInput("test set is empty")
    predicted = np.atleast_1d(predict(model, test.features))
    actual = test.target
    if space == "normalized":
        actual = normalize_target(actual, model.norm_stats)
        predicted = normalize_target(predicted, model.norm_stats)
    return EvalReport.from_pairs(actual, predicted, space)


def report_json(reports) -> str:
    """JSON document with one summary block per report, keyed by space; pairs stay in the CSV."""
    payload = {r.space_tag: r.summary() for r in reports}
    return json.dumps(payload, indent=2) + "\n"
