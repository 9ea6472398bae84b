"""
Free-particle spectrum on [a, b] under an arbitrary U(2) boundary condition.

Each energy branch uses a two-function basis whose endpoint traces stay
finite as the wavenumber goes to zero:

* oscillatory (E > 0): cos(k s) and sin(k s)/k with s = x - a
* linear (E = 0): 1 and s
* evanescent (E < 0): exp(-kappa s) and a combination of exp(kappa (x - b))
  that tends to 2 s / l as kappa goes to zero

Substituting the basis traces into ``i (I + U) Psi' - (I - U) Psi = 0`` gives
a 2x2 matrix B(k). Its columns are rescaled to be dimensionless and of order
one, and its determinant vanishes exactly at the eigen-wavenumbers.
Eigenmodes are reported in the plane-wave form of ExpTerms.
"""
import csv
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import cholesky, solve_triangular, svdvals
from scipy.optimize import brentq, minimize_scalar
from scipy.special import airy, gamma

from boundary import IDENTITY, BoundaryTrace, BoundaryUnitary, satisfies_bc
from errors import ConvergenceError, DomainError
from logging_config import get_logger
from models import ExpTerms, GridState, Interval, PhysicalConfig, gram_matrix, overlap_matrix

logger = get_logger(__name__)

Branch = Literal["oscillatory", "linear", "evanescent"]
_SIGN = np.array([-1.0, 1.0])


class SolverOptions(BaseModel):
    """Tuning knobs of the root search"""
    model_config = ConfigDict(frozen=True)

    grid_divisions: int = Field(default=16, ge=4, description="dk = pi / (grid_divisions * l)")
    accept_tol: float = Field(default=1e-8, gt=0.0, description="sigma_min / sigma_ref below which a root is accepted")
    degeneracy_tol: float = Field(default=1e-6, gt=0.0)
    partner_tol: float = Field(default=0.05, gt=0.0, description="second singular value that triggers a partner search")
    bc_tol: float = Field(default=1e-8, gt=0.0)
    kappa_ratio: float = Field(default=1.02, gt=1.0)
    zero_floor: float = Field(default=1e-6, gt=0.0, description="k or kappa below this (units 1/l) belongs to the linear branch")


class EigenMode(BaseModel):
    """One normalized eigenfunction u(x) = c1 f1(x) + c2 f2(x).

    f1, f2 are exp(+-i k (x - a)) for the oscillatory branch, 1 and (x - a)
    for the linear branch, and exp(-kappa (x - a)), exp(kappa (x - b)) for the
    evanescent branch.
    """
    model_config = ConfigDict(frozen=True)

    branch: Branch
    k_or_kappa: float = Field(ge=0.0)
    energy: float
    c1: complex
    c2: complex
    norm: float = Field(gt=0.0)
    interval: Interval
    multiplicity: int = Field(default=1, ge=1, le=2)

    def terms(self) -> ExpTerms:
        return ExpTerms.from_functions(self.interval, [_mode_terms(self.branch, self.k_or_kappa, self.c1, self.c2, self.interval)])


class DispersionScan(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    branch: Branch
    k_grid: np.ndarray
    det_values: np.ndarray
    roots: List[float]
    multiplicities: List[int]

    @field_validator("k_grid")
    @classmethod
    def _increasing(cls, value):
        value = np.asarray(value, dtype=float)
        if value.size > 1 and not np.all(np.diff(value) > 0):
            raise ValueError("scan grid must be increasing")
        return value


def _mode_terms(branch: str, k: float, c1: complex, c2: complex, interval: Interval):
    a, b = interval.a, interval.b
    if branch == "oscillatory":
        return [(c1, 0, 1j * k, a), (c2, 0, -1j * k, a)]
    if branch == "linear":
        return [(c1, 0, 0.0, a), (c2, 1, 0.0, a)]
    return [(c1, 0, -k, a), (c2, 0, k, b)]


# Dispersion matrices ----------------------------------------------------------

def _basis_traces(branch: str, k: np.ndarray, length: float) -> Tuple[np.ndarray, np.ndarray]:
    """Values and x-derivatives of the two basis functions at (a, b).

    Arrays have shape (len(k), endpoint, basis function).
    """
    values = np.zeros((k.size, 2, 2))
    slopes = np.zeros((k.size, 2, 2))
    kl = k * length
    if branch == "evanescent":
        e1 = np.exp(-kl)
        denom = -np.expm1(-kl)
        values[:, 0, 0] = 1.0
        values[:, 1, 0] = e1
        values[:, 1, 1] = -np.expm1(-2.0 * kl) / denom
        slopes[:, 0, 0] = -k
        slopes[:, 1, 0] = -k * e1
        slopes[:, 0, 1] = 2.0 * k * e1 / denom
        slopes[:, 1, 1] = k * (1.0 + e1 * e1) / denom
    else:
        cos = np.cos(kl)
        values[:, 0, 0] = 1.0
        values[:, 1, 0] = cos
        values[:, 1, 1] = length * np.sinc(kl / np.pi)
        slopes[:, 1, 0] = -k * np.sin(kl)
        slopes[:, 0, 1] = 1.0
        slopes[:, 1, 1] = cos
    return values, slopes


def _column_scales(branch: str, k: np.ndarray, length: float, l0: float) -> np.ndarray:
    first = 1.0 / (1.0 + k * l0)
    if branch == "evanescent":
        second = 1.0 / (2.0 + k * l0 + 2.0 * l0 / length)
    else:
        second = np.full_like(k, 1.0 / (l0 + length))
    return np.stack([first, second], axis=-1)


def _system(U: BoundaryUnitary, branch: str, k, length: float, l0: float) -> Tuple[np.ndarray, np.ndarray]:
    """Scaled dispersion matrices B(k), shape (len(k), 2, 2), and their column scales"""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    values, slopes = _basis_traces(branch, k, length)
    signed = l0 * slopes * _SIGN[None, :, None]
    matrix = 1j * np.einsum("ij,kjl->kil", IDENTITY + U.u, signed)
    matrix -= np.einsum("ij,kjl->kil", IDENTITY - U.u, values)
    scales = _column_scales(branch, k, length, l0)
    return matrix * scales[:, None, :], scales


def _term_scale(U: BoundaryUnitary, branch: str, k: float, length: float, l0: float) -> float:
    """Size of the two terms that cancel in B(k); roundoff in B is relative to it"""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    values, slopes = _basis_traces(branch, k, length)
    scales = _column_scales(branch, k, length, l0)[0]
    signed = l0 * slopes[0] * _SIGN[:, None] * scales[None, :]
    plain = values[0] * scales[None, :]
    return float(np.linalg.norm(IDENTITY + U.u) * np.linalg.norm(signed)
                 + np.linalg.norm(IDENTITY - U.u) * np.linalg.norm(plain))


def _det(matrices: np.ndarray) -> np.ndarray:
    return matrices[:, 0, 0] * matrices[:, 1, 1] - matrices[:, 0, 1] * matrices[:, 1, 0]


def dispersion_determinant(U: BoundaryUnitary, interval: Interval, config: Optional[PhysicalConfig],
                           branch: Branch, k: float) -> complex:
    """det B(k); zero exactly when k (or kappa) is an eigen-wavenumber of the branch"""
    config = config or PhysicalConfig()
    if branch == "linear":
        k = 0.0
    elif not k > 0:
        raise DomainError(f"{branch} branch needs k > 0, got {k!r}")
    matrices, _ = _system(U, branch, k, interval.width, config.l0)
    return complex(_det(matrices)[0])


# Root search ------------------------------------------------------------------

class _RootFinder:
    """Refines local minima of |det B| on one branch into accepted roots"""

    def __init__(self, U: BoundaryUnitary, branch: str, length: float, l0: float, options: SolverOptions):
        self.U = U
        self.branch = branch
        self.length = length
        self.l0 = l0
        self.options = options

    def matrix(self, k: float) -> np.ndarray:
        return _system(self.U, self.branch, k, self.length, self.l0)[0][0]

    def det(self, k: float) -> complex:
        m = self.matrix(k)
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    def det_sq(self, k: float) -> float:
        d = self.det(k)
        return d.real * d.real + d.imag * d.imag

    def _sign_root(self, func, k: float, lo: float, hi: float) -> Optional[float]:
        """Root of the real projection of a complex function that vanishes on the real axis"""
        w = 1e-7 * (k + 1.0 / self.length)
        left, right = max(lo, k - w), min(hi, k + w)
        if right <= left:
            return None
        slope = (func(right) - func(left)) / (right - left)
        if slope == 0:
            return None
        phase = np.conj(slope) / abs(slope)

        def projected(x):
            return float((phase * func(x)).real)

        f_left, f_right = projected(left), projected(right)
        if f_left == 0.0:
            return left
        if f_right == 0.0:
            return right
        if f_left * f_right > 0:
            return None
        return brentq(projected, left, right, xtol=1e-15 * (k + 1.0 / self.length), maxiter=200)

    def polish(self, k: float, lo: float, hi: float) -> float:
        start = float(np.min(svdvals(self.matrix(k))))
        candidate = self._sign_root(self.det, k, lo, hi)
        if candidate is None:
            # double root: det has no sign change but every entry of B does
            w = 1e-7 * (k + 1.0 / self.length)
            left, right = max(lo, k - w), min(hi, k + w)
            change = np.abs(self.matrix(right) - self.matrix(left))
            i, j = np.unravel_index(np.argmax(change), change.shape)
            candidate = self._sign_root(lambda x: self.matrix(x)[i, j], k, lo, hi)
        if candidate is None:
            logger.debug("no sign change near k=%.15g; keeping minimizer", k)
            return k
        if float(np.min(svdvals(self.matrix(candidate)))) <= start:
            return float(candidate)
        logger.warning("secant polish did not improve root near k=%.15g", k)
        return k

    def minimize(self, func, lo: float, hi: float) -> float:
        res = minimize_scalar(func, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13 * (hi + 1.0 / self.length), "maxiter": 500})
        if not res.success:
            raise ConvergenceError(f"{self.branch} root refinement did not converge: {res.message}", bracket=(lo, hi))
        return float(res.x)

    def classify(self, k: float):
        sigma_ref = max(_term_scale(self.U, self.branch, k, self.length, self.l0), 1e-300)
        sigma = svdvals(self.matrix(k))
        accepted = sigma[-1] <= self.options.accept_tol * sigma_ref
        multiplicity = max(1, int(np.count_nonzero(sigma <= self.options.degeneracy_tol * sigma_ref)))
        return accepted, multiplicity, sigma, sigma_ref

    def refine(self, lo: float, hi: float) -> List[Tuple[float, int]]:
        k = self.polish(self.minimize(self.det_sq, lo, hi), lo, hi)
        accepted, multiplicity, sigma, sigma_ref = self.classify(k)
        if not accepted:
            logger.debug("rejected %s minimum at %.12g (sigma_min/ref=%.2e)", self.branch, k, sigma[-1] / sigma_ref)
            return []
        found = [(k, multiplicity)]
        if multiplicity == 1 and sigma[0] < self.options.partner_tol * sigma_ref:
            partner = self._partner(k, lo, hi)
            if partner is not None:
                found.append((partner, 1))
        return found

    def _partner(self, root: float, lo: float, hi: float) -> Optional[float]:
        """Second root close to ``root`` found by deflating det(k) / (k - root)"""
        floor = 1e-12 * (root + 1.0 / self.length)

        def deflated_sq(x):
            gap = x - root
            if abs(gap) < floor:
                gap = floor
            d = self.det(x) / gap
            return d.real * d.real + d.imag * d.imag

        k = self.polish(self.minimize(deflated_sq, lo, hi), lo, hi)
        accepted, _, _, _ = self.classify(k)
        if accepted and abs(k - root) > 1e-9 * (root + 1.0 / self.length):
            logger.debug("near-degenerate partner at %.15g next to %.15g", k, root)
            return k
        return None


def _local_minima(values: np.ndarray) -> List[int]:
    mags = np.abs(values)
    idx = []
    if mags.size > 1 and mags[0] <= mags[1]:
        idx.append(0)
    for j in range(1, mags.size - 1):
        if mags[j] <= mags[j - 1] and mags[j] <= mags[j + 1]:
            idx.append(j)
    return idx


def _dedupe(roots: Iterable[Tuple[float, int]], length: float) -> List[Tuple[float, int]]:
    merged: List[Tuple[float, int]] = []
    for k, mult in sorted(roots):
        if merged and abs(k - merged[-1][0]) <= 1e-9 * (k + 1.0 / length):
            merged[-1] = (merged[-1][0], max(merged[-1][1], mult))
        else:
            merged.append((k, mult))
    return merged


def _scan_grid(U: BoundaryUnitary, branch: str, length: float, l0: float, upper: float, options: SolverOptions) -> np.ndarray:
    if branch == "linear":
        return np.zeros(1)
    if branch == "oscillatory":
        dk = np.pi / (options.grid_divisions * length)
        return np.arange(0.0, upper + 2.0 * dk, dk)
    eig = np.linalg.eigvals(U.u)
    free = eig[np.abs(eig + 1.0) > 1e-9]
    # exp(-i theta) -> tan(theta/2) = -i (1 - u)/(1 + u)
    rates = (-1j * (1.0 - free) / (1.0 + free)).real if free.size else np.zeros(1)
    top = 2.0 * max(float(np.max(rates, initial=0.0)), 0.0) / l0 + 20.0 / length
    # starts inside the linear branch range; roots below zero_floor are dropped after refinement
    bottom = 0.5 * options.zero_floor / length
    count = int(np.ceil(np.log(top / bottom) / np.log(options.kappa_ratio))) + 1
    return np.geomspace(bottom, top, count)


def scan_dispersion(U: BoundaryUnitary, interval: Interval, config: Optional[PhysicalConfig], branch: Branch,
                    upper: float = 0.0, options: Optional[SolverOptions] = None) -> DispersionScan:
    """Sample det B on a branch grid and refine every dip into a root.

    ``upper`` is the largest oscillatory wavenumber of interest; the
    evanescent grid is sized from the eigenphases of U and the linear branch
    is the single point k = 0.
    """
    config = config or PhysicalConfig()
    options = options or SolverOptions()
    length = interval.width
    grid = _scan_grid(U, branch, length, config.l0, upper, options)
    matrices, _ = _system(U, branch, grid, length, config.l0)
    dets = _det(matrices)

    if branch == "linear":
        sigma = svdvals(matrices[0])
        sigma_ref = max(_term_scale(U, branch, 0.0, length, config.l0), 1e-300)
        found = [(0.0, int(np.count_nonzero(sigma <= options.accept_tol * sigma_ref)))]
        found = [f for f in found if f[1] > 0]
    else:
        finder = _RootFinder(U, branch, length, config.l0, options)
        raw = []
        for j in _local_minima(dets):
            lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
            raw.extend(finder.refine(lo, hi))
        found = _dedupe(raw, length)
        found = [(k, m) for k, m in found if k >= options.zero_floor / length]
    logger.debug("%s scan: %d grid points, %d roots", branch, grid.size, sum(m for _, m in found))
    return DispersionScan(
        branch=branch,
        k_grid=grid,
        det_values=dets,
        roots=[k for k, _ in found],
        multiplicities=[m for _, m in found],
    )


# Modes ------------------------------------------------------------------------

def _plane_wave_coefficients(branch: str, k: float, length: float, basis: np.ndarray) -> Tuple[complex, complex]:
    first, second = basis
    if branch == "oscillatory":
        # A cos(ks) + B sin(ks)/k
        return (first - 1j * second / k) / 2.0, (first + 1j * second / k) / 2.0
    if branch == "linear":
        return first, second
    e1 = np.exp(-k * length)
    denom = -np.expm1(-k * length)
    return first - second * e1 / denom, second / denom


def _fix_phase(row: np.ndarray) -> np.ndarray:
    mags = np.abs(row)
    pivot = row[int(np.argmax(mags >= mags.max() * (1.0 - 1e-9)))]
    return row * (abs(pivot) / pivot)


def _energy(branch: str, k: float, config: PhysicalConfig) -> float:
    if branch == "oscillatory":
        return config.energy_from_wavenumber(k)
    if branch == "evanescent":
        return -config.energy_from_wavenumber(k)
    return 0.0


def _modes_at_root(U: BoundaryUnitary, interval: Interval, config: PhysicalConfig, branch: str,
                   k: float, multiplicity: int, options: SolverOptions) -> List[EigenMode]:
    length = interval.width
    matrices, scales = _system(U, branch, k, length, config.l0)
    _, _, vh = np.linalg.svd(matrices[0])
    null = vh[-multiplicity:].conj() * scales[0][None, :]
    coeffs = np.array([_plane_wave_coefficients(branch, k, length, v) for v in null], dtype=complex)

    family = ExpTerms.from_functions(interval, [_mode_terms(branch, k, c[0], c[1], interval) for c in coeffs])
    gram = gram_matrix(family)
    factor = cholesky(gram, lower=True)
    # Gram is antilinear in the first slot, so rows transform with conj(L)^{-1}
    coeffs = solve_triangular(factor.conj(), coeffs, lower=True)
    coeffs = np.array([_fix_phase(c) for c in coeffs])

    family = ExpTerms.from_functions(interval, [_mode_terms(branch, k, c[0], c[1], interval) for c in coeffs])
    norms = np.sqrt(np.real(np.diag(gram_matrix(family))))
    values, slopes = family.endpoint_data()
    modes = []
    for c, norm, val, der in zip(coeffs, norms, values, slopes):
        trace = BoundaryTrace.from_endpoints(val[0], val[1], der[0], der[1], config.l0)
        if not satisfies_bc(U, trace, options.bc_tol):
            raise ConvergenceError(f"{branch} mode at k={k:.15g} violates the boundary condition", bracket=(k, k))
        modes.append(EigenMode(
            branch=branch,
            k_or_kappa=k,
            energy=_energy(branch, k, config),
            c1=complex(c[0]),
            c2=complex(c[1]),
            norm=float(norm),
            interval=interval,
            multiplicity=multiplicity,
        ))
    return modes


def _without_resolved_zero(scans: dict, length: float, options: SolverOptions) -> DispersionScan:
    """Linear-branch scan minus the levels already resolved as small k or kappa roots.

    B(0) is accepted as singular whenever a level sits within about
    sqrt(accept_tol) / l of zero, so such a level shows up on both sides.
    """
    linear = scans["linear"]
    if not linear.roots:
        return linear
    near = 10.0 * np.sqrt(options.accept_tol) / length
    resolved = sum(m for branch in ("evanescent", "oscillatory")
                   for k, m in zip(scans[branch].roots, scans[branch].multiplicities) if k <= near)
    left = linear.multiplicities[0] - resolved
    if resolved:
        logger.debug("linear branch: %d of %d zero levels resolved off zero", min(resolved, linear.multiplicities[0]),
                     linear.multiplicities[0])
    if left > 0:
        return linear.model_copy(update={"multiplicities": [left]})
    return linear.model_copy(update={"roots": [], "multiplicities": []})


def solve_spectrum(U: BoundaryUnitary, interval: Interval, config: Optional[PhysicalConfig] = None,
                   e_max: float = 100.0, options: Optional[SolverOptions] = None) -> List[EigenMode]:
    """All eigenmodes with energy <= e_max, sorted by energy"""
    config = config or PhysicalConfig()
    options = options or SolverOptions()
    if not e_max > 0:
        raise DomainError(f"e_max must be positive, got {e_max!r}")
    k_max = float(np.sqrt(e_max / config.kinetic_prefactor))

    scans = {branch: scan_dispersion(U, interval, config, branch, upper=k_max, options=options)
             for branch in ("evanescent", "linear", "oscillatory")}
    scans["linear"] = _without_resolved_zero(scans, interval.width, options)

    modes: List[EigenMode] = []
    for branch, scan in scans.items():
        for k, mult in zip(scan.roots, scan.multiplicities):
            if _energy(branch, k, config) > e_max * (1.0 + 1e-12):
                continue
            modes.extend(_modes_at_root(U, interval, config, branch, k, mult, options))

    modes.sort(key=lambda m: m.energy)
    negatives = sum(1 for m in modes if m.energy < 0)
    if negatives > 2:
        logger.warning("found %d negative levels for %s; expected at most 2", negatives, U.label)
    logger.debug("spectrum of %s below %.6g: %d modes", U.label, e_max, len(modes))
    return modes


def lowest_modes(U: BoundaryUnitary, interval: Interval, config: Optional[PhysicalConfig] = None,
                 count: int = 10, options: Optional[SolverOptions] = None) -> List[EigenMode]:
    """The ``count`` lowest modes, growing the energy window until enough are found"""
    config = config or PhysicalConfig()
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    e_max = config.energy_from_wavenumber((count + 1) * np.pi / interval.width)
    for _ in range(30):
        modes = solve_spectrum(U, interval, config, e_max, options)
        if len(modes) >= count:
            return modes[:count]
        e_max *= 2.0
    raise ConvergenceError(f"found only {len(modes)} of {count} modes", bracket=(0.0, e_max))


def dirichlet_energy(n: int, interval: Interval, config: Optional[PhysicalConfig] = None) -> float:
    config = config or PhysicalConfig()
    return config.energy_from_wavenumber(n * np.pi / interval.width)


def dirichlet_mode(n: int, interval: Interval, config: Optional[PhysicalConfig] = None) -> EigenMode:
    """i sqrt(2/l) sin(n pi (x - a)/l), phased like the solver output"""
    config = config or PhysicalConfig()
    amp = 1.0 / np.sqrt(2.0 * interval.width)
    return EigenMode(branch="oscillatory", k_or_kappa=n * np.pi / interval.width,
                     energy=dirichlet_energy(n, interval, config), c1=amp, c2=-amp,
                     norm=1.0, interval=interval)


def modes_to_terms(modes: Sequence[EigenMode]) -> ExpTerms:
    interval = modes[0].interval
    return ExpTerms.from_functions(interval, [_mode_terms(m.branch, m.k_or_kappa, m.c1, m.c2, interval) for m in modes])


def mode_overlaps(bra_modes: Sequence[EigenMode], ket_modes: Sequence[EigenMode]) -> np.ndarray:
    """Closed-form matrix <bra_i|ket_j>"""
    return overlap_matrix(modes_to_terms(bra_modes), modes_to_terms(ket_modes))


def mode_on_grid(mode: EigenMode, n: int) -> GridState:
    return mode.terms().to_grid(n)


def write_spectrum_csv(modes: Sequence[EigenMode], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["index", "branch", "k_or_kappa", "energy", "re_c1", "im_c1", "re_c2", "im_c2"])
        for i, m in enumerate(modes):
            writer.writerow([i, m.branch, repr(m.k_or_kappa), repr(m.energy),
                             repr(m.c1.real), repr(m.c1.imag), repr(m.c2.real), repr(m.c2.imag)])


# Airy levels of the accelerating box -------------------------------------------

_AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * gamma(2.0 / 3.0))
_AIP0 = 1.0 / (3.0 ** (1.0 / 3.0) * gamma(1.0 / 3.0))


def airy_series(z: float) -> Tuple[float, float]:
    """Ai(z), Bi(z) from their Maclaurin series; accurate for |z| <= 4"""
    if abs(z) > 4.0:
        raise DomainError(f"series evaluation limited to |z| <= 4, got {z!r}")
    z3 = z ** 3
    f, g = 0.0, 0.0
    tf, tg = 1.0, z
    for k in range(60):
        f += tf
        g += tg
        tf *= z3 / ((3 * k + 2) * (3 * k + 3))
        tg *= z3 / ((3 * k + 3) * (3 * k + 4))
        if abs(tf) + abs(tg) < 1e-18 * (abs(f) + abs(g)):
            break
    ai = _AI0 * f - _AIP0 * g
    bi = np.sqrt(3.0) * (_AI0 * f + _AIP0 * g)
    return float(ai), float(bi)


def airy_quantization(epsilon: float, method: Literal["scipy", "series"] = "scipy") -> float:
    """Ai(-1/2 - eps) Bi(1/2 - eps) - Ai(1/2 - eps) Bi(-1/2 - eps).

    Zeros are the levels eps = E/(m g l) of a box of width l in a uniform
    field, with lengths measured in units where the gravitational length
    (hbar^2 / 2 m^2 g)^(1/3) equals l.
    """
    lo, hi = -0.5 - epsilon, 0.5 - epsilon
    if method == "series":
        ai_lo, bi_lo = airy_series(lo)
        ai_hi, bi_hi = airy_series(hi)
    else:
        ai_lo, _, bi_lo, _ = airy(lo)
        ai_hi, _, bi_hi, _ = airy(hi)
    return float(ai_lo * bi_hi - ai_hi * bi_lo)


def solve_airy_levels(n_levels: int, step: float = 0.25, eps_max: Optional[float] = None) -> List[float]:
    """First ``n_levels`` roots of airy_quantization, increasing"""
    if n_levels < 1:
        raise DomainError(f"n_levels must be >= 1, got {n_levels}")
    top = eps_max if eps_max is not None else 1.5 * (n_levels + 1) ** 2 * np.pi ** 2 + 10.0
    grid = np.arange(0.0, top + step, step)
    ai_lo, _, bi_lo, _ = airy(-0.5 - grid)
    ai_hi, _, bi_hi, _ = airy(0.5 - grid)
    values = ai_lo * bi_hi - ai_hi * bi_lo
    roots: List[float] = []
    for j in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
        roots.append(brentq(airy_quantization, grid[j], grid[j + 1], xtol=1e-13, rtol=1e-15))
        if len(roots) == n_levels:
            return roots
    raise ConvergenceError(f"found {len(roots)} of {n_levels} Airy levels", bracket=(0.0, float(grid[-1])))
