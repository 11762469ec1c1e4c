"""Signed connection-weight importance of the network inputs.

The raw score of input ``i`` sums, over every directed path from that input
to the output unit, the product of the weights along the path.  For a single
hidden layer this is ``sum_h W1[h, i] * W2[0, h]``; deeper networks chain the
weight matrices.  Biases and activation curvature are ignored, so the scores
describe the weight structure of the network rather than exact sensitivities.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .dataset import FEATURES
from .errors import AllZeroScores, BadArchitecture
from .mlp import MlpModel

METHOD_NOTE = (
    "connection-weight path products; biases and activation functions are not "
    "accounted for, so scores indicate weight structure, not exact sensitivities"
)


def connection_weight_scores(model: MlpModel) -> np.ndarray:
    if model.weights[-1].shape[0] != 1:
        raise BadArchitecture("importance needs a single output unit")
    paths = model.weights[0]
    for w in model.weights[1:]:
        paths = w @ paths
    return paths[0].copy()


@dataclass(frozen=True)
class ImportanceReport:
    names: tuple
    scores: tuple
    percent: tuple

    @property
    def signs(self):
        return tuple(int(np.sign(s)) for s in self.scores)

    def ranked(self):
        """(name, score, percent) rows by descending percent; ties keep input order."""
        order = sorted(range(len(self.names)), key=lambda i: -self.percent[i])
        return [(self.names[i], self.scores[i], self.percent[i]) for i in order]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("feature,signed_score,percent\n")
        for name, score, pct in self.ranked():
            buf.write(f"{name},{score!r},{pct!r}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [
            {"feature": name, "signed_score": score, "percent": pct, "direction": _direction(score)}
            for name, score, pct in self.ranked()
        ]
        return json.dumps({"method": METHOD_NOTE, "inputs": rows}, indent=2) + "\n"


def _direction(score):
    if score > 0:
        return "direct"
    if score < 0:
        return "inverse"
    return "none"


def relative_importance(scores, names=None) -> ImportanceReport:
    """Percent share ``100 |s_i| / sum_j |s_j|`` with the raw signed scores kept alongside."""
    s = np.asarray(scores, dtype=float).reshape(-1)
    if names is None:
        names = FEATURES if s.size == len(FEATURES) else tuple(f"x{i}" for i in range(s.size))
    if len(names) != s.size:
        raise BadArchitecture(f"{len(names)} names for {s.size} scores")
    total = np.abs(s).sum()
    if total == 0.0:
        raise AllZeroScores("every connection-weight score is zero")
    pct = 100.0 * np.abs(s) / total
    return ImportanceReport(tuple(names), tuple(float(v) for v in s), tuple(float(v) for v in pct))


def importance(model: MlpModel, names=None) -> ImportanceReport:
    return relative_importance(connection_weight_scores(model), names)
