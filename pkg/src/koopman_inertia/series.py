"""Uniformly sampled multichannel time series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChannelError, InsufficientDataError

POWER_CHANNEL = "deltaP"
OMEGA_PREFIX = "omega_"


def omega_label(gen_id: int) -> str:
    return f"{OMEGA_PREFIX}{gen_id}"


@dataclass(frozen=True, eq=False)
class TimeSeriesSet:
    """Samples ``values[k, c]`` of channel ``labels[c]`` at ``start + k * period``.

    Times are measured from fault clearing.
    """

    period: float
    labels: tuple[str, ...]
    values: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and len(self.labels) == 1:
            values = values[:, None]
        if values.ndim != 2 and values.size == 0:
            values = values.reshape(0, len(self.labels))
        if values.ndim != 2 or values.shape[1] != len(self.labels):
            raise ChannelError(
                f"values shape {values.shape} does not match {len(self.labels)} labels")
        if not self.period > 0:
            raise ValueError("sample period must be positive")
        if len(set(self.labels)) != len(self.labels):
            raise ChannelError("duplicate channel labels")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", values)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def duration(self) -> float:
        return max(self.n_samples - 1, 0) * self.period

    @property
    def times(self) -> np.ndarray:
        return self.start + self.period * np.arange(self.n_samples)

    @property
    def omega_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.labels if lab.startswith(OMEGA_PREFIX))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ChannelError(f"no channel {label!r}") from None

    def channel(self, label: str) -> np.ndarray:
        return self.values[:, self.index(label)]

    def select(self, labels) -> "TimeSeriesSet":
        cols = [self.index(lab) for lab in labels]
        return TimeSeriesSet(self.period, tuple(labels), self.values[:, cols], self.start)

    def drop(self, label: str) -> "TimeSeriesSet":
        self.index(label)
        return self.select([lab for lab in self.labels if lab != label])

    def scaled(self, label: str, factor: float) -> "TimeSeriesSet":
        values = self.values.copy()
        values[:, self.index(label)] *= factor
        return TimeSeriesSet(self.period, self.labels, values, self.start)

    def window(self, length: float) -> "TimeSeriesSet":
        """First ``length`` seconds of data, both endpoints included."""
        n = int(round(length / self.period)) + 1
        if length < 0 or n > self.n_samples:
            raise InsufficientDataError(
                f"window of {length:g} s exceeds the {self.duration:g} s of data")
        return TimeSeriesSet(self.period, self.labels, self.values[:n], self.start)
