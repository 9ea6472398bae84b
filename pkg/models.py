from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import GridMismatchError, NumericDomainError


def _frozen_array(values, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class PhysicalConfig(BaseModel):
    """Units shared by every formula: hbar, mass and the reference length l0"""
    model_config = ConfigDict(frozen=True)

    hbar: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    mass: float = Field(default=0.5, gt=0.0, allow_inf_nan=False)
    l0: float = Field(default=1.0, gt=0.0, allow_inf_nan=False, description="reference length")

    @property
    def kinetic_prefactor(self) -> float:
        """hbar^2 / 2m"""
        return self.hbar ** 2 / (2.0 * self.mass)

    def energy_from_wavenumber(self, k: float) -> float:
        return self.kinetic_prefactor * k * k


class Interval(BaseModel):
    """The box [a, b]"""
    model_config = ConfigDict(frozen=True)

    a: float = Field(default=0.0, allow_inf_nan=False)
    b: float = Field(default=1.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.b > self.a:
            raise ValueError(f"interval needs b > a, got [{self.a}, {self.b}]")
        return self

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.a + self.b)

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)

    def same_as(self, other: "Interval", tol: float = 1e-12) -> bool:
        scale = max(1.0, abs(self.a), abs(self.b))
        return abs(self.a - other.a) <= tol * scale and abs(self.b - other.b) <= tol * scale


class GridState(BaseModel):
    """Complex samples on a uniform grid that includes both endpoints"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    interval: Interval
    samples: np.ndarray
    n: int = Field(ge=3)

    @field_validator("samples", mode="before")
    @classmethod
    def _as_array(cls, value):
        return _frozen_array(value)

    @model_validator(mode="after")
    def _consistent(self):
        if self.samples.ndim != 1 or self.samples.shape[0] != self.n:
            raise ValueError(f"expected {self.n} samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise NumericDomainError("grid state holds non-finite samples")
        return self

    @classmethod
    def from_samples(cls, interval: Interval, samples) -> "GridState":
        samples = np.asarray(samples, dtype=complex)
        return cls(interval=interval, samples=samples, n=samples.shape[0])

    @property
    def x(self) -> np.ndarray:
        return self.interval.grid(self.n)

    @property
    def spacing(self) -> float:
        return self.interval.width / (self.n - 1)

    def derivative(self) -> "GridState":
        """Second-order finite-difference derivative (one-sided at the ends)"""
        grad = np.gradient(self.samples, self.spacing, edge_order=2)
        return GridState.from_samples(self.interval, grad)

    def scaled(self, factor: complex) -> "GridState":
        return GridState.from_samples(self.interval, factor * self.samples)


class SpectralState(BaseModel):
    """Coefficients of a state in the orthonormal eigenbasis named by ``basis_tag``"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    basis_tag: str
    coeffs: np.ndarray

    @field_validator("coeffs", mode="before")
    @classmethod
    def _as_array(cls, value):
        arr = _frozen_array(value)
        if arr.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise NumericDomainError("spectral state holds non-finite coefficients")
        return arr

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def with_coeffs(self, coeffs) -> "SpectralState":
        return SpectralState(basis_tag=self.basis_tag, coeffs=coeffs)


def sample_function(interval: Interval, n: int, rule: Callable) -> GridState:
    """Sample ``rule`` on ``n`` uniform points of ``interval``, endpoints included.

    ``rule`` may be vectorized; scalar rules are applied point by point.
    """
    if n < 3:
        raise ValueError(f"need at least 3 grid points, got {n}")
    x = interval.grid(n)
    try:
        values = np.asarray(rule(x), dtype=complex)
        if values.shape != x.shape:
            values = np.broadcast_to(values, x.shape).astype(complex)
    except (TypeError, ValueError):
        values = np.array([complex(rule(float(xi))) for xi in x])
    if not np.all(np.isfinite(values)):
        raise NumericDomainError("sampled rule produced non-finite values")
    return GridState.from_samples(interval, values)


def _check_same_grid(f: GridState, g: GridState) -> None:
    if f.n != g.n or not f.interval.same_as(g.interval):
        raise GridMismatchError(
            f"grids differ: [{f.interval.a}, {f.interval.b}] n={f.n} "
            f"vs [{g.interval.a}, {g.interval.b}] n={g.n}"
        )


def trapezoid_inner_product(f: GridState, g: GridState) -> complex:
    """<f|g>, antilinear in ``f``, by the trapezoid rule"""
    _check_same_grid(f, g)
    integrand = np.conj(f.samples) * g.samples
    return complex(np.trapezoid(integrand, dx=f.spacing))


def trapezoid_norm(f: GridState) -> float:
    return float(np.sqrt(max(trapezoid_inner_product(f, f).real, 0.0)))


# Closed-form function families ------------------------------------------------

def _moment_integrals(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """J_q(z) = int_0^1 t^q e^{z t} dt for q = 0, 1, 2."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5

    # power series near the origin
    zs = np.where(small, z, 0.0)
    j0 = np.zeros_like(zs)
    j1 = np.zeros_like(zs)
    j2 = np.zeros_like(zs)
    term = np.ones_like(zs)
    for j in range(26):
        j0 = j0 + term / (j + 1)
        j1 = j1 + term / (j + 2)
        j2 = j2 + term / (j + 3)
        term = term * zs / (j + 1)

    # upward recurrence elsewhere
    zl = np.where(small, 1.0, z)
    ez = np.exp(zl)
    r0 = np.expm1(zl) / zl
    r1 = (ez - r0) / zl
    r2 = (ez - 2.0 * r1) / zl

    return np.where(small, j0, r0), np.where(small, j1, r1), np.where(small, j2, r2)


@dataclass(frozen=True)
class ExpTerms:
    """A family of functions sum_t c * (x - x0)^p * exp(lam * (x - x0)) on an interval.

    Arrays have shape (functions, terms). Powers are 0 or 1 and every anchor x0
    is one of the interval endpoints; decaying exponentials are anchored at the
    wall they decay away from so that no factor overflows.
    """
    interval: Interval
    coef: np.ndarray
    power: np.ndarray
    rate: np.ndarray
    anchor: np.ndarray

    @classmethod
    def from_functions(cls, interval: Interval, functions: Sequence[Iterable[Tuple[complex, int, complex, float]]]) -> "ExpTerms":
        rows = [list(f) for f in functions]
        width = max(1, max((len(r) for r in rows), default=1))
        shape = (len(rows), width)
        coef = np.zeros(shape, dtype=complex)
        power = np.zeros(shape, dtype=int)
        rate = np.zeros(shape, dtype=complex)
        anchor = np.full(shape, interval.a, dtype=float)
        for i, row in enumerate(rows):
            for j, (c, p, lam, x0) in enumerate(row):
                if p not in (0, 1):
                    raise ValueError("only powers 0 and 1 are supported")
                coef[i, j], power[i, j], rate[i, j], anchor[i, j] = c, p, lam, x0
        return cls(interval, coef, power, rate, anchor)

    @property
    def count(self) -> int:
        return self.coef.shape[0]

    def take(self, index) -> "ExpTerms":
        idx = np.atleast_1d(np.arange(self.count)[index])
        return ExpTerms(self.interval, self.coef[idx], self.power[idx], self.rate[idx], self.anchor[idx])

    def scaled(self, factors) -> "ExpTerms":
        factors = np.asarray(factors, dtype=complex).reshape(-1, 1)
        return ExpTerms(self.interval, self.coef * factors, self.power, self.rate, self.anchor)

    @staticmethod
    def concatenate(parts: Sequence["ExpTerms"]) -> "ExpTerms":
        width = max(p.coef.shape[1] for p in parts)

        def pad(arr, fill):
            extra = width - arr.shape[1]
            if extra == 0:
                return arr
            return np.concatenate([arr, np.full((arr.shape[0], extra), fill, dtype=arr.dtype)], axis=1)

        interval = parts[0].interval
        return ExpTerms(
            interval,
            np.concatenate([pad(p.coef, 0) for p in parts]),
            np.concatenate([pad(p.power, 0) for p in parts]),
            np.concatenate([pad(p.rate, 0) for p in parts]),
            np.concatenate([pad(p.anchor, interval.a) for p in parts]),
        )

    def evaluate(self, x, derivative: bool = False) -> np.ndarray:
        """Values (or first derivatives) at points ``x``; shape (functions, len(x))"""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s = x[None, None, :] - self.anchor[:, :, None]
        lam = self.rate[:, :, None]
        p = self.power[:, :, None]
        expo = np.exp(lam * s)
        poly = np.where(p == 1, s, 1.0)
        if derivative:
            poly = np.where(p == 1, 1.0 + lam * s, lam)
        return np.sum(self.coef[:, :, None] * poly * expo, axis=1)

    def endpoint_data(self) -> Tuple[np.ndarray, np.ndarray]:
        """(values, derivatives) at (a, b); each of shape (functions, 2)"""
        ends = [self.interval.a, self.interval.b]
        return self.evaluate(ends), self.evaluate(ends, derivative=True)

    def to_grid(self, n: int, index: int = 0) -> GridState:
        x = self.interval.grid(n)
        return GridState.from_samples(self.interval, self.evaluate(x)[index])


def _pair_integral(c1, p1, lam1, x1, c2, p2, lam2, x2, a: float, length: float) -> np.ndarray:
    """int_a^b of the product of two single terms, in closed form."""
    # anchor the product at the term that varies fastest
    swap = np.abs(lam2.real) > np.abs(lam1.real)
    cA = np.where(swap, c2, c1)
    pA = np.where(swap, p2, p1)
    lamA = np.where(swap, lam2, lam1)
    xA = np.where(swap, x2, x1)
    co = np.where(swap, c1, c2)
    po = np.where(swap, p1, p2)
    lamo = np.where(swap, lam1, lam2)
    xo = np.where(swap, x1, x2)

    delta = xA - xo
    shift = np.exp(lamo * delta)
    mu = lamA + lamo
    at_left = np.abs(xA - a) <= np.abs(xA - (a + length))

    z = np.where(at_left, mu * length, -mu * length)
    j0, j1, j2 = _moment_integrals(z)
    k0 = length * j0
    k1 = np.where(at_left, 1.0, -1.0) * length ** 2 * j1
    k2 = length ** 3 * j2

    k_pa = np.where(pA == 1, k1, k0)
    k_pa1 = np.where(pA == 1, k2, k1)
    total = np.where(po == 1, k_pa1 + delta * k_pa, k_pa)
    return cA * co * shift * total


def overlap_matrix(bra: ExpTerms, ket: ExpTerms) -> np.ndarray:
    """Matrix of <bra_i|ket_j> computed from closed-form term integrals"""
    if not bra.interval.same_as(ket.interval):
        raise GridMismatchError("function families live on different intervals")
    a = bra.interval.a
    length = bra.interval.width
    result = np.zeros((bra.count, ket.count), dtype=complex)
    for t1 in range(bra.coef.shape[1]):
        c1 = np.conj(bra.coef[:, t1])[:, None]
        if not np.any(c1):
            continue
        p1 = bra.power[:, t1][:, None]
        lam1 = np.conj(bra.rate[:, t1])[:, None]
        x1 = bra.anchor[:, t1][:, None]
        for t2 in range(ket.coef.shape[1]):
            c2 = ket.coef[:, t2][None, :]
            if not np.any(c2):
                continue
            result += _pair_integral(
                c1, p1, lam1, x1,
                c2, ket.power[:, t2][None, :], ket.rate[:, t2][None, :], ket.anchor[:, t2][None, :],
                a, length,
            )
    return result


def gram_matrix(family: ExpTerms) -> np.ndarray:
    gram = overlap_matrix(family, family)
    return 0.5 * (gram + gram.conj().T)


def project_grid_state(family: ExpTerms, state: GridState) -> np.ndarray:
    """Trapezoid overlaps <family_i|state>, for states without a closed form"""
    if not family.interval.same_as(state.interval):
        raise GridMismatchError("state and basis live on different intervals")
    values = family.evaluate(state.x)
    return np.trapezoid(np.conj(values) * state.samples[None, :], dx=state.spacing, axis=1)
