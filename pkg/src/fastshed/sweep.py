"""Nadir surface over (SR parameter x total delay) and SR selection for a safety margin."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .dynamics import GovernorParams, SimScenario, nadir, run_scenario
from .edsa import FlsParams
from .errors import InfeasibleMarginError
from .grid_model import GridConfig

BLACKOUT_NADIR = 0.0


@dataclass(eq=False)
class NadirSurface:
    sr_values: tuple[float, ...]
    delay_values: tuple[float, ...]
    nadir: np.ndarray
    blackout: np.ndarray
    scenario: SimScenario

    def at_delay(self, delay: float) -> np.ndarray:
        """Nadir against SR for one delay column."""
        return self.nadir[:, self.delay_values.index(delay)]

    def at_sr(self, sr: float) -> np.ndarray:
        """Nadir against delay for one SR row."""
        return self.nadir[self.sr_values.index(sr), :]


def _check_axis(name: str, values: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if not values:
        raise ValueError(f"{name} axis is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} axis must be strictly increasing")
    return values


def evaluate_cell(config: GridConfig, scenario: SimScenario, sr: float, delay: float,
                  fls: Optional[FlsParams] = None,
                  governors: Optional[Mapping[str, GovernorParams]] = None) -> tuple[float, bool]:
    """(nadir, blackout) of one run with the given SR parameter and total delay."""
    trace = run_scenario(config, scenario.with_(sr_parameter=float(sr), total_delay=float(delay)),
                         fls, governors=governors)
    if trace.blackout:
        return BLACKOUT_NADIR, True
    return nadir(trace), False


def _cell(args):
    return evaluate_cell(*args)


def sweep_surface(config: GridConfig, scenario: SimScenario, sr_values: Sequence[float],
                  delay_values: Sequence[float], *, fls: Optional[FlsParams] = None,
                  governors: Optional[Mapping[str, GovernorParams]] = None,
                  workers: int = 1) -> NadirSurface:
    """Run one simulation per (SR, delay) pair; cells are independent and assembled by index."""
    srs = _check_axis("SR", sr_values)
    delays = _check_axis("delay", delay_values)
    jobs = [(config, scenario, sr, d, fls, governors) for sr in srs for d in delays]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs))
    else:
        results = [_cell(job) for job in jobs]
    shape = (len(srs), len(delays))
    values = np.array([r[0] for r in results], dtype=float).reshape(shape)
    flags = np.array([r[1] for r in results], dtype=bool).reshape(shape)
    return NadirSurface(srs, delays, values, flags, scenario)


@dataclass(frozen=True)
class SrSelection:
    sr: float
    nadir: float
    target: float
    simulations: int


def bisection_steps(span: float, tolerance: float) -> int:
    return max(0, math.ceil(math.log2(span / tolerance))) if span > 0 else 0


def max_sr_for_margin(config: GridConfig, scenario: SimScenario, threshold: float, margin: float,
                      sr_range: tuple[float, float], tolerance: float = 0.1, *,
                      fls: Optional[FlsParams] = None,
                      governors: Optional[Mapping[str, GovernorParams]] = None) -> SrSelection:
    """Largest SR in ``sr_range`` (to within ``tolerance``) whose nadir stays >= threshold + margin.

    Assumes the nadir is non-increasing in SR.  The scenario's own total
    delay is kept; one probe at the range minimum is followed by
    ``ceil(log2(span / tolerance))`` bisection runs.
    """
    lo, hi = float(sr_range[0]), float(sr_range[1])
    if not hi >= lo:
        raise ValueError("SR range must be (min, max) with max >= min")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    target = threshold + margin
    delay = scenario.total_delay if scenario.total_delay is not None else (fls or FlsParams()).total_delay

    def probe(sr: float) -> float:
        value, _ = evaluate_cell(config, scenario, sr, delay, fls, governors)
        return value

    best = probe(lo)
    runs = 1
    if best < target:
        raise InfeasibleMarginError(lo, best, target)
    for _ in range(bisection_steps(hi - lo, tolerance)):
        mid = 0.5 * (lo + hi)
        value = probe(mid)
        runs += 1
        if value >= target:
            lo, best = mid, value
        else:
            hi = mid
    return SrSelection(lo, best, target, runs)
