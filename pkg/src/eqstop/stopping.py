"""Stopping rules and Monte Carlo simulation settings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["StoppingRule", "SimulationConfig"]


@dataclass(frozen=True)
class StoppingRule:
    """Binary feedback rule: 1 = stop, 0 = continue.

    Either a threshold rule (stop on [threshold, inf)) or a finite union of
    closed intervals with positive-length gaps.
    """

    threshold: float | None = None
    intervals: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if (self.threshold is None) == (self.intervals is None):
            raise ValueError("exactly one of threshold / intervals must be given")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.intervals is not None:
            iv = tuple((float(a), float(b)) for a, b in self.intervals)
            if not iv:
                raise ValueError("interval union needs at least one interval")
            for a, b in iv:
                if not (0 <= a <= b):
                    raise ValueError(f"bad interval ({a}, {b})")
            for (_, b1), (a2, _) in zip(iv[:-1], iv[1:]):
                if a2 <= b1:
                    raise ValueError("intervals must be sorted with positive-length gaps")
            object.__setattr__(self, "intervals", iv)

    @staticmethod
    def threshold_rule(x_star: float) -> "StoppingRule":
        return StoppingRule(threshold=float(x_star))

    @staticmethod
    def interval_union(intervals) -> "StoppingRule":
        return StoppingRule(intervals=tuple(intervals))

    def __call__(self, x) -> int | np.ndarray:
        x_arr = np.asarray(x, dtype=float)
        if self.threshold is not None:
            out = (x_arr >= self.threshold).astype(np.int64)
        else:
            out = np.zeros_like(x_arr, dtype=np.int64)
            for a, b in self.intervals:
                out |= ((x_arr >= a) & (x_arr <= b)).astype(np.int64)
        return int(out) if np.ndim(x) == 0 else out

    @property
    def continuation_bounded_above(self) -> bool:
        if self.threshold is not None:
            return True
        return self.intervals[-1][1] == np.inf

    @property
    def stop_region_infimum(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return self.intervals[0][0]


@dataclass(frozen=True)
class SimulationConfig:
    """Path count, base step, horizon and reproducibility knobs.

    t_max = None picks the horizon automatically so the worst-case
    truncation bound h(T)(K + running-cost scale) stays below
    0.1 * target_se.  The grid is uniform at dt up to coarsen_after, then
    the step grows like coarsen_rate * t capped at dt_max (set
    coarsen_rate = 0 for a strictly uniform grid).  kill_tol is the
    per-path bound below which a decayed path is closed out analytically.
    """

    paths: int = 100_000
    dt: float = 1e-3
    t_max: float | None = None
    seed: int = 0
    antithetic: bool = True
    coarsen_after: float = 1.0
    coarsen_rate: float = 0.002
    dt_max: float = 0.25
    kill_tol: float = 1e-5
    target_se: float = 1e-3

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_max is not None and self.t_max <= 0:
            raise ValueError("t_max must be positive when given")
        if self.coarsen_rate < 0 or self.dt_max < self.dt:
            raise ValueError("bad coarsening settings")
