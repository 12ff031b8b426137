"""Indicator baselines over adjusted close prices.

Momentum predicts that the sign of the last ``window``-day move
continues; mean reversion predicts a move back toward the trailing
``window``-day average.  Both emit +1 on ties so every prediction is a
valid label, and both depend only on price ratios, so rescaling a
series leaves the predictions unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, WindowError


@dataclass(frozen=True)
class IndicatorConfig:
    mom_window: int = 10
    mr_window: int = 30

    def __post_init__(self):
        if self.mom_window < 2:
            raise ContractError(f"mom_window must be >= 2, got {self.mom_window}")
        if self.mr_window < 2:
            raise ContractError(f"mr_window must be >= 2, got {self.mr_window}")


def _sign_pos(x: float) -> int:
    return 1 if x >= 0 else -1


def mom_predict(adj_close: np.ndarray, t: int, window: int = 10) -> int:
    """+1 if the price rose over the last ``window`` days, else -1."""
    adj_close = np.asarray(adj_close, dtype=np.float64)
    if t < window or t >= adj_close.shape[0]:
        raise WindowError(
            f"momentum at index {t} needs {window} prior days "
            f"in a series of length {adj_close.shape[0]}"
        )
    return _sign_pos(float(adj_close[t] - adj_close[t - window]))


def mr_predict(adj_close: np.ndarray, t: int, window: int = 30) -> int:
    """-1 if the price sits above its trailing ``window``-day mean, else +1."""
    adj_close = np.asarray(adj_close, dtype=np.float64)
    if t < window - 1 or t >= adj_close.shape[0]:
        raise WindowError(
            f"mean reversion at index {t} needs {window} days of history "
            f"in a series of length {adj_close.shape[0]}"
        )
    mean = float(np.mean(adj_close[t - window + 1 : t + 1]))
    return _sign_pos(-(float(adj_close[t]) - mean))
