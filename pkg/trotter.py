"""
Alternating free evolutions with two boundary conditions.

Each factor exp(-i tau T_U / hbar) is diagonal in the eigenbasis of T_U, so a
run of

    (exp(-i tau T_U / hbar) exp(-i tau T_V / hbar))^N,   tau = t / N

keeps the state as coefficients on the lowest K modes of T_V or T_U and moves
between the two with the closed-form transfer matrix <u_i|v_j>. The lowest
modes of T_W, W = star(U, V), only enter at both ends: the initial state is
given on them and the target exp(-2 i t T_W / hbar) is evolved on them.
"""
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from boundary import BoundaryUnitary
from config import ordered_map
from errors import DomainError
from forms import star
from logging_config import get_logger
from models import ExpTerms, Interval, PhysicalConfig, overlap_matrix
from spectral import EigenMode, SolverOptions, lowest_modes, mode_overlaps, modes_to_terms

logger = get_logger(__name__)

_ISOMETRY_WARNING = 1e-3


def _frozen(value, dtype=complex) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    return arr


class PropagatorBundle(BaseModel):
    """Lowest eigenmodes of T_U and their overlaps <u_i|w_j> with the reference modes"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    U_bc: BoundaryUnitary
    modes: List[EigenMode]
    energies: np.ndarray
    overlaps: np.ndarray
    hbar: float = Field(default=1.0, gt=0.0)

    @field_validator("energies", mode="before")
    @classmethod
    def _real(cls, value):
        return _frozen(value, float)

    @field_validator("overlaps", mode="before")
    @classmethod
    def _matrix(cls, value):
        arr = _frozen(value)
        if arr.ndim != 2:
            raise ValueError("overlaps must be a matrix")
        return arr

    @property
    def isometry_defect(self) -> float:
        """max |O^H O - I| over the reference modes; small when T_U's modes capture them"""
        gram = self.overlaps.conj().T @ self.overlaps
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    def projection_deficit(self, coeffs) -> float:
        """Norm lost by a state on its way through this eigenbasis"""
        coeffs = np.asarray(coeffs, dtype=complex)
        return float(np.linalg.norm(coeffs) - np.linalg.norm(self.overlaps @ coeffs))


class Alternation(BaseModel):
    """Everything needed to run the two-condition switching protocol"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    U: BoundaryUnitary
    V: BoundaryUnitary
    W: BoundaryUnitary
    interval: Interval
    config: PhysicalConfig
    reference_modes: List[EigenMode]
    reference_energies: np.ndarray
    bundle_u: PropagatorBundle
    bundle_v: PropagatorBundle
    transfer: np.ndarray

    @field_validator("reference_energies", mode="before")
    @classmethod
    def _real(cls, value):
        return _frozen(value, float)

    @field_validator("transfer", mode="before")
    @classmethod
    def _transfer(cls, value):
        arr = _frozen(value)
        if arr.ndim != 2:
            raise ValueError("transfer must be a matrix")
        return arr

    @property
    def transfer_defect(self) -> float:
        """max |C C^H - I| for C = <u_i|v_j>; zero when both factors share one basis"""
        gram = self.transfer @ self.transfer.conj().T
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    @property
    def n_modes(self) -> int:
        return len(self.reference_modes)

    def project(self, terms: ExpTerms) -> np.ndarray:
        """Reference coefficients <w_j|f> of the first function in ``terms``"""
        return overlap_matrix(modes_to_terms(self.reference_modes), terms.take(0))[:, 0]

    def to_reference(self, state_u) -> np.ndarray:
        """Coefficients on T_U's modes back onto the reference modes"""
        return self.bundle_u.overlaps.conj().T @ np.asarray(state_u, dtype=complex)


class ConvergenceRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_pairs: int
    error: float
    norm_deficit: float
    target_deficit: float = 0.0


class ConvergenceReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    W: BoundaryUnitary
    t_total: float
    n_modes: int
    rows: List[ConvergenceRow]
    fitted_order: Optional[float] = None
    isometry_defects: List[float]
    projection_deficits: List[float]
    transfer_defect: float = 0.0

    @property
    def errors(self) -> List[float]:
        return [row.error for row in self.rows]

    def non_increasing(self, jitter: float = 0.1) -> bool:
        errors = self.errors
        return all(b <= (1.0 + jitter) * a for a, b in zip(errors, errors[1:]))


def smooth_bump(interval: Interval) -> ExpTerms:
    """sin^4(pi (x - a) / l), normalized; vanishes to fourth order at both walls"""
    a, l = interval.a, interval.width
    scale = np.sqrt(128.0 / (35.0 * l))
    w = 2j * np.pi / l
    terms = [
        (3.0 / 8.0 * scale, 0, 0.0, a),
        (-0.25 * scale, 0, w, a),
        (-0.25 * scale, 0, -w, a),
        (scale / 16.0, 0, 2 * w, a),
        (scale / 16.0, 0, -2 * w, a),
    ]
    return ExpTerms.from_functions(interval, [terms])


def _bundle(U: BoundaryUnitary, reference: Sequence[EigenMode], interval: Interval, config: PhysicalConfig,
            count: int, options: Optional[SolverOptions]) -> PropagatorBundle:
    modes = lowest_modes(U, interval, config, count, options)
    bundle = PropagatorBundle(
        U_bc=U,
        modes=modes,
        energies=[m.energy for m in modes],
        overlaps=mode_overlaps(modes, reference),
        hbar=config.hbar,
    )
    defect = bundle.isometry_defect
    if defect > _ISOMETRY_WARNING:
        logger.warning("%d modes of %s capture the reference basis only to %.2e", count, U.label, defect)
    else:
        logger.debug("bundle %s: %d modes, isometry defect %.2e", U.label, count, defect)
    return bundle


def prepare_alternation(U: BoundaryUnitary, V: BoundaryUnitary, interval: Interval,
                        config: Optional[PhysicalConfig] = None, n_modes: int = 64, oversample: int = 8,
                        options: Optional[SolverOptions] = None, threads: Optional[int] = None) -> Alternation:
    """Solve the spectra of T_W, T_U and T_V and the change-of-basis matrices between them"""
    config = config or PhysicalConfig()
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    if oversample < 1:
        raise DomainError(f"oversample must be >= 1, got {oversample}")
    W = star(U, V)
    reference = lowest_modes(W, interval, config, n_modes, options)
    count = oversample * n_modes

    shared = U.close_to(V, tol=0.0)
    targets = [U] if shared else [U, V]
    bundles = ordered_map(lambda X: _bundle(X, reference, interval, config, count, options), targets, threads)
    if shared:
        transfer = np.eye(count, dtype=complex)
    else:
        transfer = mode_overlaps(bundles[0].modes, bundles[1].modes)
    return Alternation(
        U=U,
        V=V,
        W=W,
        interval=interval,
        config=config,
        reference_modes=reference,
        reference_energies=[m.energy for m in reference],
        bundle_u=bundles[0],
        bundle_v=bundles[-1],
        transfer=transfer,
    )


def apply_evolution(bundle: PropagatorBundle, coeffs, tau: float) -> np.ndarray:
    """exp(-i tau T_U / hbar) on reference coefficients, through the bundle's eigenbasis"""
    if tau < 0:
        raise DomainError(f"tau must be non-negative, got {tau}")
    coeffs = np.asarray(coeffs, dtype=complex)
    phases = np.exp(-1j * bundle.energies * tau / bundle.hbar)
    return bundle.overlaps.conj().T @ (phases * (bundle.overlaps @ coeffs))


def reference_evolution(energies, coeffs, t: float, hbar: float = 1.0) -> np.ndarray:
    return np.asarray(coeffs, dtype=complex) * np.exp(-1j * np.asarray(energies) * t / hbar)


def alternating_run(setup: Alternation, t_total: float, n_pairs: int, coeffs) -> np.ndarray:
    """N pairs of switches, each V then U for tau = t_total / N

    ``coeffs`` are reference coefficients. The result is on T_U's modes: the
    state stays in the eigenbases of the two factors for the whole run and is
    only handed over through the transfer matrix.
    """
    if n_pairs < 1:
        raise DomainError(f"need at least one pair, got {n_pairs}")
    if t_total < 0:
        raise DomainError(f"t_total must be non-negative, got {t_total}")
    tau = t_total / n_pairs
    phase_u = np.exp(-1j * setup.bundle_u.energies * tau / setup.config.hbar)
    phase_v = np.exp(-1j * setup.bundle_v.energies * tau / setup.config.hbar)
    transfer = setup.transfer
    back = transfer.conj().T
    state_v = setup.bundle_v.overlaps @ np.asarray(coeffs, dtype=complex)
    state_u = None
    for step in range(n_pairs):
        if step:
            state_v = back @ state_u
        state_u = phase_u * (transfer @ (phase_v * state_v))
    return state_u


def _fit_order(rows: Sequence[ConvergenceRow]) -> Optional[float]:
    usable = [(r.n_pairs, r.error) for r in rows if r.error > 0]
    if len(usable) < 2:
        return None
    n, err = np.array(usable, dtype=float).T
    return float(-np.polyfit(np.log(n), np.log(err), 1)[0])


def convergence_report(setup: Alternation, t_total: float, n_list: Sequence[int], coeffs,
                       threads: Optional[int] = None) -> ConvergenceReport:
    """L2 distance of the alternating product to exp(-2 i t T_W / hbar) for each N"""
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError(f"N list must be non-empty and increasing, got {n_list}")
    coeffs = np.asarray(coeffs, dtype=complex)
    target = reference_evolution(setup.reference_energies, coeffs, 2.0 * t_total, setup.config.hbar)
    target_u = setup.bundle_u.overlaps @ target
    # norm of the target outside the span of T_U's modes; reported, not part of the error
    target_deficit = float(np.sqrt(max(np.linalg.norm(target) ** 2 - np.linalg.norm(target_u) ** 2, 0.0)))
    start = np.linalg.norm(coeffs)

    def _row(n: int) -> ConvergenceRow:
        final = alternating_run(setup, t_total, n, coeffs)
        return ConvergenceRow(
            n_pairs=n,
            error=float(np.linalg.norm(final - target_u)),
            norm_deficit=float(start - np.linalg.norm(final)),
            target_deficit=target_deficit,
        )

    rows = ordered_map(_row, n_list, threads)
    order = _fit_order(rows)
    logger.debug("alternation %s/%s: errors %s, order %s", setup.U.label, setup.V.label,
                 [f"{r.error:.3e}" for r in rows], order)
    return ConvergenceReport(
        W=setup.W,
        t_total=t_total,
        n_modes=setup.n_modes,
        rows=rows,
        fitted_order=order,
        isometry_defects=[setup.bundle_u.isometry_defect, setup.bundle_v.isometry_defect],
        projection_deficits=[setup.bundle_u.projection_deficit(coeffs), setup.bundle_v.projection_deficit(coeffs)],
        transfer_defect=setup.transfer_defect,
    )
