"""
Quadratic forms of the kinetic energy and the composition law they induce.

For a boundary unitary U the kinetic form is

    t_U(psi) = hbar^2/2m (||psi'||^2 + Gamma_U(Psi)),   Gamma_U(Psi) = (i/l0) <Psi|A Psi>

on boundary vectors orthogonal to the -1 eigenspace of U, with A the Cayley
generator of U restricted to the remaining directions. Averaging two such
forms gives the condition W = star(U, V) reached by fast alternation.
"""
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from boundary import IDENTITY, MINUS_ONE_TOL, BoundaryUnitary, cayley_generator, classify_minus_one, make_dirichlet
from errors import ConstraintViolationError, DomainError
from logging_config import get_logger
from models import GridState, PhysicalConfig, trapezoid_inner_product

logger = get_logger(__name__)


def _frozen(value, width: int = 2) -> np.ndarray:
    arr = np.array(value, dtype=complex).reshape(-1, width) if np.size(value) else np.zeros((0, width), complex)
    arr.setflags(write=False)
    return arr


class FormDescriptor(BaseModel):
    """Constraint directions, free directions and the generator compressed onto the free ones"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    constraint_dim: int = Field(ge=0, le=2)
    constraint_vectors: np.ndarray
    free_vectors: np.ndarray
    gamma_generator: np.ndarray
    l0: float = Field(default=1.0, gt=0.0)

    @field_validator("constraint_vectors", "free_vectors", mode="before")
    @classmethod
    def _rows(cls, value):
        return _frozen(value)

    @field_validator("gamma_generator", mode="before")
    @classmethod
    def _square(cls, value):
        arr = np.array(value, dtype=complex)
        size = int(round(np.sqrt(arr.size)))
        arr = arr.reshape(size, size)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _consistent(self):
        if self.constraint_vectors.shape[0] != self.constraint_dim:
            raise ValueError("constraint_dim does not match the constraint vectors")
        if self.constraint_dim + self.gamma_generator.shape[0] != 2:
            raise ValueError("constraints and generator must together span the boundary space")
        if self.free_vectors.shape[0] != self.gamma_generator.shape[0]:
            raise ValueError("free vectors do not match the generator size")
        g = self.gamma_generator
        if g.size and np.max(np.abs(g + g.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise ValueError("compressed generator is not anti-Hermitian")
        return self


def free_generator(U: BoundaryUnitary) -> np.ndarray:
    """Cayley generator of U on the complement of its -1 eigenspace, as a 2x2 matrix"""
    structure = classify_minus_one(U)
    if structure.count == 0:
        return cayley_generator(U)
    if structure.count == 2:
        return np.zeros((2, 2), dtype=complex)
    g = (1.0 - structure.u2) / (1.0 + structure.u2)
    # keep the scalar purely imaginary so the compression stays anti-Hermitian
    g = 1j * g.imag
    return g * np.outer(structure.xi_perp, structure.xi_perp.conj())


def _compress(generator: np.ndarray, free: np.ndarray) -> np.ndarray:
    compressed = free.conj() @ generator @ free.T
    return 0.5 * (compressed - compressed.conj().T)


def form_descriptor(U: BoundaryUnitary, l0: float = 1.0) -> FormDescriptor:
    structure = classify_minus_one(U)
    if structure.count == 0:
        free = IDENTITY
    elif structure.count == 1:
        free = structure.xi_perp.reshape(1, 2)
    else:
        free = np.zeros((0, 2), dtype=complex)
    return FormDescriptor(
        constraint_dim=structure.count,
        constraint_vectors=structure.constraints,
        free_vectors=free,
        gamma_generator=_compress(free_generator(U), free) if free.shape[0] else np.zeros((0, 0)),
        l0=l0,
    )


def _check_constraints(descriptor: FormDescriptor, Psi: np.ndarray, tol: float) -> None:
    if descriptor.constraint_dim == 0:
        return
    leak = np.abs(descriptor.constraint_vectors.conj() @ Psi)
    if np.any(leak > tol * (1.0 + np.linalg.norm(Psi))):
        raise ConstraintViolationError(
            f"boundary vector leaves the form domain (constraint overlap {np.max(leak):.3e})"
        )


def gamma_value(descriptor: FormDescriptor, Psi, tol: float = 1e-9) -> float:
    """Gamma_U(Psi); Psi must satisfy the constraints of the descriptor"""
    Psi = np.asarray(Psi, dtype=complex).reshape(2)
    _check_constraints(descriptor, Psi, tol)
    if descriptor.gamma_generator.size == 0:
        return 0.0
    coords = descriptor.free_vectors.conj() @ Psi
    value = 1j * np.vdot(coords, descriptor.gamma_generator @ coords) / descriptor.l0
    return float(value.real)


def quadratic_form(descriptor: FormDescriptor, config: PhysicalConfig, grad_norm_sq: float, Psi) -> float:
    """t_U = hbar^2/2m (||psi'||^2 + Gamma_U(Psi))"""
    if grad_norm_sq < 0:
        raise DomainError(f"||psi'||^2 must be non-negative, got {grad_norm_sq}")
    return config.kinetic_prefactor * (grad_norm_sq + gamma_value(descriptor, Psi))


def kinetic_expectation(state: GridState, config: PhysicalConfig, second: Optional[GridState] = None) -> float:
    """<psi| -hbar^2/2m d^2/dx^2 |psi> by quadrature; finite differences when ``second`` is omitted"""
    if second is None:
        second = state.derivative().derivative()
    return float((-config.kinetic_prefactor * trapezoid_inner_product(state, second)).real)


def _span(rows: np.ndarray, tol: float = MINUS_ONE_TOL) -> np.ndarray:
    """Orthonormal rows spanning the given rows"""
    if rows.shape[0] == 0:
        return np.zeros((0, 2), dtype=complex)
    _, s, vh = np.linalg.svd(rows)
    rank = int(np.count_nonzero(s > tol * max(1.0, s[0])))
    return vh[:rank].conj()


def _complement(span: np.ndarray) -> np.ndarray:
    if span.shape[0] == 0:
        return IDENTITY.copy()
    if span.shape[0] == 2:
        return np.zeros((0, 2), dtype=complex)
    v = span[0]
    return np.array([[-np.conj(v[1]), np.conj(v[0])]])


class CompositionReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    constraint_dims: List[int]
    joint_constraint_dim: int
    compressed_u: List[List[complex]]
    compressed_v: List[List[complex]]
    mean_generator: List[List[complex]]
    w2: Optional[complex] = None
    result: BoundaryUnitary


def _compose(U: BoundaryUnitary, V: BoundaryUnitary) -> CompositionReport:
    cons_u = classify_minus_one(U).constraints
    cons_v = classify_minus_one(V).constraints
    joint = _span(np.vstack([cons_u, cons_v]))
    dims = [cons_u.shape[0], cons_v.shape[0]]

    if joint.shape[0] == 2:
        return CompositionReport(
            constraint_dims=dims, joint_constraint_dim=2,
            compressed_u=[], compressed_v=[], mean_generator=[], result=make_dirichlet(),
        )

    free = _complement(joint)
    g_u = _compress(free_generator(U), free)
    g_v = _compress(free_generator(V), free)
    mean = 0.5 * (g_u + g_v)
    # mean = iK with K Hermitian; the Cayley image is diagonal in the eigenbasis of K
    mu, basis = np.linalg.eigh(-1j * mean)
    block = (basis * ((1.0 - 1j * mu) / (1.0 + 1j * mu))) @ basis.conj().T
    w = free.T @ block @ free.conj() - joint.T @ joint.conj()
    w2 = complex(block[0, 0]) if joint.shape[0] == 1 else None
    result = BoundaryUnitary.from_matrix(w, tag=f"star({U.label},{V.label})")
    logger.debug("star: constraints %s -> %d, mean generator %s", dims, joint.shape[0], np.round(mean, 6).tolist())
    return CompositionReport(
        constraint_dims=dims,
        joint_constraint_dim=joint.shape[0],
        compressed_u=g_u.tolist(),
        compressed_v=g_v.tolist(),
        mean_generator=mean.tolist(),
        w2=w2,
        result=result,
    )


def star(U: BoundaryUnitary, V: BoundaryUnitary) -> BoundaryUnitary:
    """Boundary condition of the averaged kinetic form.

    The -1 eigenspaces of U and V are absorbed into the result; on the
    remaining directions the generators are averaged and mapped back through
    the Cayley transform. Two independent constraints give Dirichlet. Both
    forms carry the same 1/l0, so the result does not depend on l0.
    """
    return _compose(U, V).result


def compose_diagnostics(U: BoundaryUnitary, V: BoundaryUnitary) -> CompositionReport:
    return _compose(U, V)
