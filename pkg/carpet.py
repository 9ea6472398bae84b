"""
Free evolution of the flat state in a Dirichlet box, written as a theta series.

With xi = (x - midpoint) / l in [-1/2, 1/2] and tau = 2 pi hbar t / (m l^2),

    theta(xi, tau) = sum_n d_n exp(2 pi i xi (n + 1/2) - i pi tau (n + 1/2)^2)

truncated to n = -n_max .. n_max - 1. Integer tau gives revivals, rational tau
a piecewise-constant intensity and irrational tau a fractal graph.
"""
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import polygamma

from config import ordered_map
from errors import DomainError
from logging_config import get_logger
from models import GridState, Interval, PhysicalConfig

logger = get_logger(__name__)

XI_INTERVAL = Interval(a=-0.5, b=0.5)
GOLDEN_TAU = (np.sqrt(5.0) - 1.0) / 2.0
_CHUNK_ELEMENTS = 1 << 21


class CarpetSeries(BaseModel):
    """Truncated theta series of the flat initial state on a box of width ``l``"""
    model_config = ConfigDict(frozen=True)

    n_max: int = Field(default=2048, ge=1)
    l: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    tail_tolerance: float = Field(default=1e-2, gt=0.0, description="bound on the dropped norm fraction")

    @model_validator(mode="after")
    def _tail_small(self):
        if self.tail_bound * self.l >= self.tail_tolerance:
            raise DomainError(
                f"n_max={self.n_max} drops a norm fraction {self.tail_bound * self.l:.3e} "
                f">= {self.tail_tolerance:.3e}"
            )
        return self

    @cached_property
    def indices(self) -> np.ndarray:
        n = np.arange(-self.n_max, self.n_max, dtype=np.int64)
        n.setflags(write=False)
        return n

    @cached_property
    def half_integers(self) -> np.ndarray:
        m = self.indices + 0.5
        m.setflags(write=False)
        return m

    @cached_property
    def d_coeffs(self) -> np.ndarray:
        signs = np.where(self.indices % 2 == 0, 1.0, -1.0)
        d = signs / (np.pi * np.sqrt(self.l) * self.half_integers)
        d.setflags(write=False)
        return d

    @cached_property
    def triangular(self) -> np.ndarray:
        """n (n + 1) / 2, an integer for every n, so (n + 1/2)^2 = 2 T_n + 1/4"""
        n = self.indices
        t = (n * (n + 1) // 2).astype(float)
        t.setflags(write=False)
        return t

    @property
    def tail_bound(self) -> float:
        """Squared norm of the dropped terms, sum over |n + 1/2| > n_max of d_n^2"""
        return float(2.0 * polygamma(1, self.n_max + 0.5) / (np.pi ** 2 * self.l))


class PlateauStatistics(BaseModel):
    """Windowed variance test for piecewise-constant profiles"""
    model_config = ConfigDict(frozen=True)

    q: int
    window_means: List[float]
    within_variance: float
    between_variance: float
    ratio: float
    single_plateau: bool
    threshold: float

    @property
    def passes(self) -> bool:
        return self.single_plateau or self.ratio >= self.threshold


class BoxCount(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimension: float
    flat: bool
    exponents: List[int]
    counts: List[int]


def expansion_coefficients_c(n):
    """Sine-basis coefficients of the flat state: sqrt(2) (1 - (-1)^n) / (n pi)"""
    arr = np.asarray(n)
    if not np.issubdtype(arr.dtype, np.integer) or np.any(arr < 1):
        raise DomainError(f"sine index must be an integer >= 1, got {n!r}")
    odd = (arr % 2 == 1).astype(float)
    values = np.sqrt(2.0) * 2.0 * odd / (arr * np.pi)
    return float(values) if values.ndim == 0 else values


def rescaled_time(t: float, interval: Interval, config: PhysicalConfig) -> float:
    return 2.0 * np.pi * config.hbar * t / (config.mass * interval.width ** 2)


def phase_factors(series: CarpetSeries, tau: float) -> np.ndarray:
    """exp(-i pi tau (n + 1/2)^2) with the integer part of tau reduced exactly"""
    tau = float(tau)
    if not np.isfinite(tau):
        raise DomainError(f"tau must be finite, got {tau}")
    whole = np.floor(tau)
    frac = tau - whole
    turns = frac * series.triangular
    turns -= np.floor(turns)
    common = np.exp(-1j * np.pi * ((whole % 8.0) + frac) / 4.0)
    return common * np.exp(-2j * np.pi * turns)


def evolved_coefficients(series: CarpetSeries, tau: float) -> np.ndarray:
    return series.d_coeffs * phase_factors(series, tau)


def _check_xi(xi: np.ndarray) -> None:
    if xi.size == 0:
        return
    if not np.all(np.isfinite(xi)) or np.max(np.abs(xi)) > 0.5 + 1e-12:
        raise DomainError("xi must lie in [-1/2, 1/2]")


def theta(series: CarpetSeries, xi, tau: float, threads: Optional[int] = None):
    """Direct summation of the truncated series at arbitrary xi points"""
    xi_arr = np.asarray(xi, dtype=float)
    flat = np.atleast_1d(xi_arr).ravel()
    _check_xi(flat)
    amps = evolved_coefficients(series, tau)
    m = series.half_integers
    step = max(1, _CHUNK_ELEMENTS // m.size)
    chunks = [flat[i:i + step] for i in range(0, flat.size, step)]

    def _partial(chunk):
        return np.exp(2j * np.pi * np.outer(chunk, m)) @ amps

    parts = ordered_map(_partial, chunks, threads)
    values = np.concatenate(parts) if parts else np.empty(0, dtype=complex)
    if xi_arr.ndim == 0:
        return complex(values[0])
    return values.reshape(xi_arr.shape)


def theta_on_grid(series: CarpetSeries, tau: float, n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Exact truncated series on the uniform xi grid with ``n_points`` points.

    On xi_j = -1/2 + j / P the terms collapse onto P frequencies after folding
    n modulo P, so one inverse FFT of length P gives every grid value.
    """
    if n_points < 16:
        raise DomainError(f"need at least 16 grid points, got {n_points}")
    periods = n_points - 1
    xi = XI_INTERVAL.grid(n_points)
    signs = np.where(series.indices % 2 == 0, 1.0, -1.0)
    folded = np.zeros(periods, dtype=complex)
    np.add.at(folded, series.indices % periods, evolved_coefficients(series, tau) * signs)
    periodic = periods * np.fft.ifft(folded)
    values = np.exp(1j * np.pi * xi) * periodic[np.arange(n_points) % periods]
    logger.debug("theta grid: n_max=%d tau=%.12g points=%d", series.n_max, tau, n_points)
    return xi, values


def profile(series: CarpetSeries, tau: float, n_points: int) -> GridState:
    """|theta|^2 sampled on the xi grid"""
    _, values = theta_on_grid(series, tau, n_points)
    return GridState.from_samples(XI_INTERVAL, np.abs(values) ** 2)


def revival_fidelity(series: CarpetSeries, tau: float) -> float:
    """|<theta(0)|theta(tau)>| / ||theta(0)||^2, from the coefficients"""
    weights = series.d_coeffs ** 2
    overlap = np.sum(weights * phase_factors(series, tau))
    return float(min(1.0, abs(overlap) / np.sum(weights)))


def plateau_statistics(
    state: GridState, q: int, threshold: float = 10.0, flat_tol: float = 0.05
) -> PlateauStatistics:
    """Compare intensity variance inside windows of width 1/(4q) with the spread of window means"""
    if q < 1:
        raise DomainError(f"denominator must be >= 1, got {q}")
    count = 4 * q
    if state.n < 8 * count:
        raise DomainError(f"{state.n} samples are too few for {count} windows")
    y = state.samples.real
    position = (state.x - state.interval.a) / state.interval.width
    window = np.minimum(np.floor(position * count).astype(int), count - 1)

    sizes = np.bincount(window, minlength=count).astype(float)
    means = np.bincount(window, weights=y, minlength=count) / sizes
    squares = np.bincount(window, weights=y * y, minlength=count) / sizes
    within = float(np.mean(np.maximum(squares - means ** 2, 0.0)))
    between = float(np.var(means))
    ratio = between / within if within > 0 else float("inf")
    single = bool(np.ptp(means) <= flat_tol * abs(np.mean(means)))
    logger.debug("plateaus q=%d: within=%.3e between=%.3e single=%s", q, within, between, single)
    return PlateauStatistics(
        q=q,
        window_means=means.tolist(),
        within_variance=within,
        between_variance=between,
        ratio=ratio,
        single_plateau=single,
        threshold=threshold,
    )


def box_counting_dimension(state: GridState, scales: Sequence[int] = tuple(range(4, 13))) -> BoxCount:
    """Box dimension of the graph of a real profile, rescaled to the unit square.

    ``scales`` are dyadic exponents j, boxes have side 2^-j. Each of the 2^j
    columns covers the samples between its edges (shared with the neighbour
    column), and contributes every box row between its min and max.
    """
    exponents = sorted(int(j) for j in scales)
    if len(exponents) < 2 or exponents[-1] - exponents[0] < 4:
        raise DomainError("box counting needs scales spanning at least 4 octaves")
    if exponents[0] < 1:
        raise DomainError("dyadic exponents must be >= 1")
    n = state.n
    if n - 1 < 2 ** exponents[-1]:
        raise DomainError(f"{n} samples cannot resolve 2^{exponents[-1]} columns")

    y = state.samples.real
    low, span = float(np.min(y)), float(np.ptp(y))
    if span <= 1e-12 * max(1.0, abs(low)):
        return BoxCount(dimension=1.0, flat=True, exponents=exponents, counts=[2 ** j for j in exponents])
    y = (y - low) / span

    counts = []
    for j in exponents:
        boxes = 2 ** j
        edges = np.round(np.linspace(0, n - 1, boxes + 1)).astype(int)
        starts = edges[:-1]
        col_min = np.minimum(np.minimum.reduceat(y, starts), y[edges[1:]])
        col_max = np.maximum(np.maximum.reduceat(y, starts), y[edges[1:]])
        top = np.minimum(np.floor(col_max * boxes), boxes - 1)
        bottom = np.minimum(np.floor(col_min * boxes), boxes - 1)
        counts.append(int(np.sum(top - bottom + 1)))

    slope = np.polyfit(np.array(exponents) * np.log(2.0), np.log(counts), 1)[0]
    logger.debug("box counts %s -> dimension %.4f", counts, slope)
    return BoxCount(dimension=float(slope), flat=False, exponents=exponents, counts=counts)


def fibonacci_times(count: int) -> List[Fraction]:
    """Approximants 1/2, 2/3, 3/5, ... of the golden-mean time 1/phi"""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    times = []
    p, q = 1, 2
    for _ in range(count):
        times.append(Fraction(p, q))
        p, q = q, p + q
    return times
