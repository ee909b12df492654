"""Joint Ramsey/CPMG fit of a three-component noise spectrum.

The forward model is the filter-function coherence of a whole-interval
waveform: Ramsey is free evolution over [0, T] and ``CPMG-n`` carries ``n``
equidistant π pulses over [0, T]. Parameters are found by scoring a coarse
grid over the bounds, then running lmfit's Nelder-Mead from the best grid
points.
"""

from __future__ import annotations

import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from lmfit import Minimizer, Parameters

from ..monitoring import FIT_EVALUATIONS
from ..schemas import FitResultRecord, ThreeComponentParams
from ..utils.errors import ConfigError, DomainError, PreconditionError
from ..utils.records import read_csv_rows
from .coherence import chi_from_filter
from .noise_model import ThreeComponentNsd
from .sequences import Segment, cpmg_waveform, ramsey_waveform
from .spectral import FrequencyGrid, TransformCache, power, waveform_transform

logger = logging.getLogger(__name__)

PARAMETER_NAMES = ("y0", "a_g", "v_g", "w_g", "a_1f")
CSV_COLUMNS = ("label", "time_us", "coherence", "weight")
GRID_POINTS_PER_PARAMETER = 3
DEFAULT_RESTARTS = 3
MIN_WIDTH = 1e-9

_CPMG_LABEL = re.compile(r"^cpmg-(\d+)$", re.IGNORECASE)

Bounds = Mapping[str, tuple[float, float]]


def waveform_for(label: str, total_time: float) -> Segment:
    """Map ``Ramsey`` / ``CPMG-n`` to the waveform evaluated at time ``total_time``."""

    if label.strip().lower() == "ramsey":
        return ramsey_waveform(total_time)
    match = _CPMG_LABEL.match(label.strip())
    if match and int(match.group(1)) >= 1:
        return cpmg_waveform(total_time, int(match.group(1)))
    raise DomainError(f"unknown decay label {label!r}; expected Ramsey or CPMG-n")


@dataclass(frozen=True)
class DecayDataset:
    label: str
    times: tuple[float, ...]
    coherences: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        waveform_for(self.label, 1.0)
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "coherences", tuple(float(c) for c in self.coherences))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.times) < 3:
            raise PreconditionError(f"dataset {self.label} needs at least 3 points, got {len(self.times)}")
        if len(self.coherences) != len(self.times):
            raise PreconditionError(f"dataset {self.label}: times and coherences differ in length")
        if self.times[0] <= 0 or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise PreconditionError(f"dataset {self.label}: times must be positive and strictly increasing")
        if any(not 0.0 <= c <= 1.0 for c in self.coherences):
            raise PreconditionError(f"dataset {self.label}: coherences must lie in [0, 1]")
        if self.weights is not None:
            if len(self.weights) != len(self.times) or any(not w > 0 for w in self.weights):
                raise PreconditionError(f"dataset {self.label}: weights must be positive, one per point")

    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self.times))
        return np.asarray(self.weights, dtype=np.float64)


@dataclass
class FitResult:
    params: ThreeComponentNsd
    sse: float
    residuals: dict[str, list[float]]
    converged: bool
    iterations: int
    initial_sse: float
    restart_index: int
    restart_sse: list[float] = field(default_factory=list)

    def to_record(self) -> FitResultRecord:
        return FitResultRecord(
            params=ThreeComponentParams(**self.params.to_dict()),
            sse=self.sse,
            converged=self.converged,
            iterations=self.iterations,
            initial_sse=self.initial_sse,
            residuals=self.residuals,
            restart_index=self.restart_index,
        )


def predict_chi(
    params: ThreeComponentNsd, label: str, times: Iterable[float], grid: FrequencyGrid, cache: TransformCache
) -> list[float]:
    return [
        chi_from_filter(power(waveform_transform(waveform_for(label, t), grid, cache)), params, grid) for t in times
    ]


def predict_decay(
    params: ThreeComponentNsd, label: str, times: Iterable[float], grid: FrequencyGrid, cache: TransformCache
) -> list[float]:
    """Model coherence W(T) of the ``label`` experiment at each time."""

    return [math.exp(-chi) for chi in predict_chi(params, label, times, grid, cache)]


def synthesize_decay(
    params: ThreeComponentNsd,
    label: str,
    times: Sequence[float],
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> DecayDataset:
    """Model decay with optional additive Gaussian noise, clipped to [0, 1]."""

    values = np.asarray(predict_decay(params, label, times, grid, cache))
    if noise_sigma > 0:
        values = values + np.random.default_rng(seed).normal(0.0, noise_sigma, size=values.shape)
    return DecayDataset(label=label, times=tuple(times), coherences=tuple(np.clip(values, 0.0, 1.0)))


def datasets_from_csv(text: str) -> list[DecayDataset]:
    """Group ``label,time_us,coherence[,weight]`` rows into datasets, in first-seen label order."""

    rows = read_csv_rows(text)
    if not rows:
        raise PreconditionError("decay CSV holds no rows")
    missing = [column for column in CSV_COLUMNS[:3] if column not in rows[0]]
    if missing:
        raise ConfigError(f"decay CSV is missing columns {', '.join(missing)}", field=missing[0])
    grouped: dict[str, list[dict[str, str]]] = {}
    for row in rows:
        grouped.setdefault(row["label"].strip(), []).append(row)
    datasets = []
    for label, group in grouped.items():
        try:
            weighted = all(row.get("weight") not in (None, "") for row in group)
            datasets.append(
                DecayDataset(
                    label=label,
                    times=tuple(float(row["time_us"]) for row in group),
                    coherences=tuple(float(row["coherence"]) for row in group),
                    weights=tuple(float(row["weight"]) for row in group) if weighted else None,
                )
            )
        except ValueError as exc:
            if isinstance(exc, PreconditionError):
                raise
            raise ConfigError(f"decay CSV rows for {label!r} are not numeric: {exc}", field="time_us") from exc
    return datasets


def datasets_to_rows(datasets: Sequence[DecayDataset]) -> list[tuple[object, ...]]:
    rows: list[tuple[object, ...]] = []
    for dataset in datasets:
        weights = dataset.weights or (None,) * len(dataset.times)
        rows.extend(zip(itertools.repeat(dataset.label), dataset.times, dataset.coherences, weights))
    return rows


def default_bounds(init: ThreeComponentNsd) -> dict[str, tuple[float, float]]:
    """Each parameter in [0, 10× its initial guess]."""

    return {name: (0.0, 10.0 * value) for name, value in zip(PARAMETER_NAMES, init.as_vector())}


def _build_parameters(init: ThreeComponentNsd, bounds: Bounds, vary: Mapping[str, bool]) -> Parameters:
    params = Parameters()
    for name, value in zip(PARAMETER_NAMES, init.as_vector()):
        low, high = bounds[name]
        if name == "w_g":
            low = max(low, MIN_WIDTH)
        if low > high:
            raise ConfigError(f"bounds for {name} are empty: [{low}, {high}]", field=name)
        if high == low:
            # lmfit refuses min == max; a collapsed interval is a pinned value
            params.add(name, value=float(low), vary=False)
            continue
        params.add(name, value=float(min(max(value, low), high)), min=low, max=high, vary=vary.get(name, True))
    return params


def _nsd_from(params: Parameters) -> ThreeComponentNsd:
    return ThreeComponentNsd.from_vector([params[name].value for name in PARAMETER_NAMES])


def _coarse_points(params: Parameters) -> list[dict[str, float]]:
    """Cell centres of a 3-per-axis grid over the bounds of every varied parameter."""

    axes = []
    for name in PARAMETER_NAMES:
        par = params[name]
        if par.vary:
            fractions = [(k + 0.5) / GRID_POINTS_PER_PARAMETER for k in range(GRID_POINTS_PER_PARAMETER)]
            axes.append([par.min + f * (par.max - par.min) for f in fractions])
        else:
            axes.append([par.value])
    return [dict(zip(PARAMETER_NAMES, point)) for point in itertools.product(*axes)]


class _Objective:
    def __init__(self, datasets: Sequence[DecayDataset], grid: FrequencyGrid, cache: TransformCache) -> None:
        self.datasets, self.grid, self.cache = datasets, grid, cache
        self._sqrt_weights = [np.sqrt(d.weight_array()) for d in datasets]
        self._measured = [np.asarray(d.coherences) for d in datasets]

    def residuals(self, nsd: ThreeComponentNsd) -> list[np.ndarray]:
        return [
            np.asarray(predict_decay(nsd, d.label, d.times, self.grid, self.cache)) - measured
            for d, measured in zip(self.datasets, self._measured)
        ]

    def weighted(self, nsd: ThreeComponentNsd) -> np.ndarray:
        FIT_EVALUATIONS.inc()
        return np.concatenate([w * r for w, r in zip(self._sqrt_weights, self.residuals(nsd))])

    def __call__(self, params: Parameters) -> np.ndarray:
        return self.weighted(_nsd_from(params))

    def sse(self, nsd: ThreeComponentNsd) -> float:
        values = self.weighted(nsd)
        return float(np.dot(values, values))


def fit_nsd(
    datasets: Sequence[DecayDataset],
    init: ThreeComponentNsd,
    grid: FrequencyGrid,
    cache: TransformCache,
    *,
    bounds: Bounds | None = None,
    vary: Mapping[str, bool] | None = None,
    restarts: int = DEFAULT_RESTARTS,
    max_iterations: int | None = None,
) -> FitResult:
    """Minimise Σ weight·(predicted − measured)² jointly over all datasets."""

    labels = {d.label.strip().lower() for d in datasets}
    if len(labels) < 2:
        raise PreconditionError("a joint fit needs at least two datasets with distinct sequence labels")
    if restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {restarts}", field="restarts")
    bounds = {**default_bounds(init), **(bounds or {})}
    template = _build_parameters(init, bounds, vary or {})
    objective = _Objective(datasets, grid, cache)
    initial_sse = objective.sse(_nsd_from(template))

    candidates = _coarse_points(template)
    # ties keep grid order
    scored = sorted((objective.sse(ThreeComponentNsd(**point)), index) for index, point in enumerate(candidates))
    starts = [candidates[index] for _, index in scored[:restarts]]
    logger.info(
        "Coarse grid of %d points scored; refining from %d starts (best grid SSE %.3e)",
        len(candidates),
        len(starts),
        scored[0][0],
    )

    n_free = sum(1 for name in PARAMETER_NAMES if template[name].vary)
    options = {"xatol": 1e-10, "fatol": 1e-16, "maxiter": max_iterations or 2000 * (n_free + 1)}
    best: tuple[float, int, Parameters, int] | None = None
    restart_sse: list[float] = []
    for restart_index, start in enumerate(starts):
        params = template.copy()
        for name, value in start.items():
            params[name].set(value=value)
        start_sse = objective.sse(_nsd_from(params))
        if n_free:
            outcome = Minimizer(objective, params).minimize(method="nelder", options=options)
            fitted, evaluations = outcome.params, int(outcome.nfev)
        else:
            fitted, evaluations = params, 0
        sse = objective.sse(_nsd_from(fitted))
        restart_sse.append(sse)
        logger.debug("Restart %d: SSE %.3e -> %.3e after %d evaluations", restart_index, start_sse, sse, evaluations)
        if best is None or sse < best[0]:
            best = (sse, restart_index, fitted, evaluations)

    assert best is not None
    sse, restart_index, fitted, evaluations = best
    nsd = _nsd_from(fitted)
    residuals = {d.label: [float(r) for r in values] for d, values in zip(datasets, objective.residuals(nsd))}
    converged = sse < initial_sse or sse == 0.0
    if not converged:
        logger.warning("Best SSE %.3e did not improve on the initial guess (%.3e)", sse, initial_sse)
    logger.info("Fit finished: SSE %.3e (initial %.3e), restart %d", sse, initial_sse, restart_index)
    return FitResult(
        params=nsd,
        sse=sse,
        residuals=residuals,
        converged=converged,
        iterations=evaluations,
        initial_sse=initial_sse,
        restart_index=restart_index,
        restart_sse=restart_sse,
    )
