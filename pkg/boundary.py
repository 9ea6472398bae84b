"""
U(2) boundary conditions for the free particle on an interval.

A condition is a 2x2 unitary U acting on boundary traces through
``i (I + U) Psi' = (I - U) Psi`` with ``Psi = (psi(a), psi(b))`` and
``Psi' = l0 * (-psi'(a), psi'(b))``.
"""
import json
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import DomainError, NumericDomainError
from logging_config import get_logger

logger = get_logger(__name__)

MINUS_ONE_TOL = 1e-9
IDENTITY = np.eye(2, dtype=complex)


def _frozen(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


class BoundaryUnitary(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    u: np.ndarray
    tol_unitary: float = Field(default=1e-10, gt=0.0)
    tag: Optional[str] = None

    @field_validator("u", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return _frozen(value, (2, 2))

    @model_validator(mode="after")
    def _unitary(self):
        if not np.all(np.isfinite(self.u)):
            raise ValueError("boundary unitary has non-finite entries")
        defect = np.max(np.abs(self.u.conj().T @ self.u - IDENTITY))
        if defect > self.tol_unitary:
            raise ValueError(f"matrix is not unitary (max |U^H U - I| = {defect:.3e})")
        return self

    @classmethod
    def from_matrix(cls, u, tag: Optional[str] = None, tol_unitary: float = 1e-10) -> "BoundaryUnitary":
        """Validate ``u`` and raise DomainError instead of a pydantic error"""
        u = np.asarray(u, dtype=complex)
        if u.shape != (2, 2) or not np.all(np.isfinite(u)):
            raise DomainError(f"boundary unitary must be a finite 2x2 matrix, got shape {u.shape}")
        defect = float(np.max(np.abs(u.conj().T @ u - IDENTITY)))
        if defect > tol_unitary:
            raise DomainError(f"matrix is not unitary (max |U^H U - I| = {defect:.3e})")
        return cls(u=u, tag=tag, tol_unitary=tol_unitary)

    @property
    def label(self) -> str:
        return self.tag or "custom"

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.u)

    def close_to(self, other: "BoundaryUnitary", tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.u - other.u)) <= tol)

    def to_json_dict(self) -> dict:
        flat = []
        for entry in self.u.reshape(-1):
            flat.extend([float(entry.real), float(entry.imag)])
        data = {"u": flat}
        if self.tag:
            data["tag"] = self.tag
        return data

    @classmethod
    def from_json_dict(cls, data) -> "BoundaryUnitary":
        values = data["u"] if isinstance(data, dict) else data
        if len(values) != 8:
            raise DomainError(f"expected 8 reals (row-major re/im), got {len(values)}")
        pairs = np.asarray(values, dtype=float).reshape(4, 2)
        u = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(2, 2)
        tag = data.get("tag") if isinstance(data, dict) else None
        return cls.from_matrix(u, tag=tag, tol_unitary=1e-8)


class BoundaryTrace(BaseModel):
    """Endpoint values Psi and the signed, l0-scaled derivatives Psi'"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    psi: np.ndarray
    dpsi: np.ndarray
    l0: float = Field(default=1.0, gt=0.0)

    @field_validator("psi", "dpsi", mode="before")
    @classmethod
    def _as_vector(cls, value):
        arr = _frozen(value, (2,))
        if not np.all(np.isfinite(arr)):
            raise NumericDomainError("boundary trace has non-finite components")
        return arr

    @classmethod
    def from_endpoints(cls, psi_a, psi_b, dpsi_a, dpsi_b, l0: float = 1.0) -> "BoundaryTrace":
        """Build a trace from raw values and raw derivatives d psi/dx at a and b"""
        return cls(psi=[psi_a, psi_b], dpsi=[-l0 * dpsi_a, l0 * dpsi_b], l0=l0)

    @property
    def raw_derivatives(self) -> np.ndarray:
        """(psi'(a), psi'(b)) in plain x-derivatives"""
        return np.array([-self.dpsi[0], self.dpsi[1]]) / self.l0


class MinusOneStructure(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    count: int = Field(ge=0, le=2)
    eigenvalues: np.ndarray
    xi: Optional[np.ndarray] = None
    xi_perp: Optional[np.ndarray] = None
    u2: Optional[complex] = None

    @property
    def constraints(self) -> np.ndarray:
        """Orthonormal rows spanning the -1 eigenspace"""
        if self.count == 0:
            return np.zeros((0, 2), dtype=complex)
        if self.count == 2:
            return IDENTITY.copy()
        return self.xi.reshape(1, 2)


def boundary_form(psi: BoundaryTrace, phi: BoundaryTrace) -> complex:
    """Lambda(psi, phi) = (<Psi'|Phi> - <Psi|Phi'>) / l0"""
    if not np.isclose(psi.l0, phi.l0):
        raise DomainError(f"traces use different reference lengths {psi.l0} and {phi.l0}")
    value = (np.vdot(psi.dpsi, phi.psi) - np.vdot(psi.psi, phi.dpsi)) / psi.l0
    if not np.isfinite(value):
        raise NumericDomainError("boundary form is not finite")
    return complex(value)


def bc_residual(U: BoundaryUnitary, trace: BoundaryTrace) -> float:
    lhs = 1j * (IDENTITY + U.u) @ trace.dpsi
    rhs = (IDENTITY - U.u) @ trace.psi
    return float(np.linalg.norm(lhs - rhs))


def satisfies_bc(U: BoundaryUnitary, trace: BoundaryTrace, tol: float = 1e-8) -> bool:
    scale = 1.0 + np.linalg.norm(trace.psi) + np.linalg.norm(trace.dpsi)
    return bc_residual(U, trace) <= tol * scale


def _check_angle(alpha: float, name: str = "alpha") -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or not (-np.pi < alpha <= np.pi):
        raise DomainError(f"{name} must lie in (-pi, pi], got {alpha!r}")
    return alpha


def make_dirichlet() -> BoundaryUnitary:
    return BoundaryUnitary(u=-IDENTITY, tag="dirichlet")


def make_neumann() -> BoundaryUnitary:
    return BoundaryUnitary(u=IDENTITY, tag="neumann")


def make_robin(alpha: float) -> BoundaryUnitary:
    """U = exp(-i alpha) I, i.e. psi'(a) = -tan(alpha/2) psi(a) / l0 and psi'(b) = tan(alpha/2) psi(b) / l0"""
    alpha = _check_angle(alpha)
    if alpha == np.pi:
        return BoundaryUnitary(u=-IDENTITY, tag="robin:pi")
    return BoundaryUnitary(u=np.exp(-1j * alpha) * IDENTITY, tag=f"robin:{alpha!r}")


def make_local(alpha1: float, alpha2: float) -> BoundaryUnitary:
    alpha1 = _check_angle(alpha1, "alpha1")
    alpha2 = _check_angle(alpha2, "alpha2")
    diag = [-1.0 if a == np.pi else np.exp(-1j * a) for a in (alpha1, alpha2)]
    return BoundaryUnitary(u=np.diag(diag), tag=f"local:{alpha1!r},{alpha2!r}")


def make_pseudo_periodic(alpha: float) -> BoundaryUnitary:
    """cos(alpha) sigma_x + sin(alpha) sigma_y: psi(b) = e^{i alpha} psi(a), same for psi'"""
    alpha = _check_angle(alpha)
    phase = np.exp(1j * alpha)
    u = np.array([[0.0, np.conj(phase)], [phase, 0.0]], dtype=complex)
    return BoundaryUnitary(u=u, tag=f"pseudo_periodic:{alpha!r}")


def make_periodic() -> BoundaryUnitary:
    return make_pseudo_periodic(0.0).model_copy(update={"tag": "periodic"})


def make_antiperiodic() -> BoundaryUnitary:
    return make_pseudo_periodic(np.pi).model_copy(update={"tag": "antiperiodic"})


def classify_minus_one(U: BoundaryUnitary, tol: float = MINUS_ONE_TOL) -> MinusOneStructure:
    eigvals = np.linalg.eigvals(U.u)
    near = np.abs(eigvals + 1.0) <= tol
    count = int(np.count_nonzero(near))
    if count != 1:
        return MinusOneStructure(count=count, eigenvalues=eigvals)

    # kernel of U + I from the smallest right singular vector
    _, _, vh = np.linalg.svd(U.u + IDENTITY)
    xi = vh[-1].conj()
    mags = np.abs(xi)
    pivot = xi[int(np.argmax(mags >= mags.max() * (1.0 - 1e-9)))]
    xi = xi * (np.abs(pivot) / pivot)
    xi_perp = np.array([-np.conj(xi[1]), np.conj(xi[0])])
    u2 = complex(np.vdot(xi_perp, U.u @ xi_perp))
    return MinusOneStructure(count=1, eigenvalues=eigvals, xi=xi, xi_perp=xi_perp, u2=u2)


def cayley_generator(U: BoundaryUnitary) -> np.ndarray:
    """A = (I - U)(I + U)^{-1}; anti-Hermitian, defined when -1 is not an eigenvalue"""
    if classify_minus_one(U).count:
        raise DomainError("Cayley generator undefined: U has eigenvalue -1")
    return (IDENTITY - U.u) @ np.linalg.inv(IDENTITY + U.u)


def unitary_from_generator(A: np.ndarray, tag: Optional[str] = None) -> BoundaryUnitary:
    """Inverse Cayley map (I - A)(I + A)^{-1}"""
    A = np.asarray(A, dtype=complex)
    u = (IDENTITY - A) @ np.linalg.inv(IDENTITY + A)
    return BoundaryUnitary.from_matrix(u, tag=tag, tol_unitary=1e-9)


def conforming_trace(U: BoundaryUnitary, Psi, free=None, l0: float = 1.0) -> BoundaryTrace:
    """A trace satisfying the condition for U built from boundary values ``Psi``.

    ``Psi`` is projected off the -1 eigenspace of U; on that eigenspace the
    derivative components are taken from ``free`` (zero by default).
    """
    eigvals, vecs = np.linalg.eig(U.u)
    vecs, _ = np.linalg.qr(vecs)
    coords = vecs.conj().T @ np.asarray(Psi, dtype=complex)
    extra = np.zeros(2, dtype=complex) if free is None else vecs.conj().T @ np.asarray(free, dtype=complex)
    value = np.zeros(2, dtype=complex)
    slope = np.zeros(2, dtype=complex)
    for j, u in enumerate(eigvals):
        if abs(u + 1.0) <= MINUS_ONE_TOL:
            slope[j] = extra[j]
        else:
            value[j] = coords[j]
            slope[j] = -1j * (1.0 - u) / (1.0 + u) * coords[j]
    return BoundaryTrace(psi=vecs @ value, dpsi=vecs @ slope, l0=l0)


def reflection_phase(alpha: float, k: float, l0: float = 1.0) -> float:
    """Phase beta(k) of the reflection coefficient at a Robin wall, tan(beta/2) = tan(alpha/2)/(k l0)"""
    alpha = _check_angle(alpha)
    if k <= 0 or not np.isfinite(k):
        raise DomainError(f"wavenumber must be positive, got {k!r}")
    if alpha == np.pi:
        return float(np.pi)
    if alpha == 0.0:
        return 0.0
    half = alpha / 2.0
    return float(2.0 * np.arctan2(np.sin(half), k * l0 * np.cos(half)))


def wall_bound_state(alpha: float, l0: float = 1.0) -> Optional[float]:
    """Decay rate kappa of the bound state of a single Robin wall, or None.

    The reflection amplitude has a pole at k = i kappa with kappa = tan(alpha/2)/l0,
    which is a normalizable state only for alpha in (0, pi).
    """
    alpha = _check_angle(alpha)
    if not 0.0 < alpha < np.pi:
        return None
    return float(np.tan(alpha / 2.0) / l0)


_NAMED = {
    "dirichlet": make_dirichlet,
    "neumann": make_neumann,
    "periodic": make_periodic,
    "antiperiodic": make_antiperiodic,
}


def parse_angle(text: str) -> float:
    """Angles like "pi/2", "-3pi/4", "2*pi/3" or plain floats"""
    token = text.strip().lower().replace(" ", "")
    sign = -1.0 if token.startswith("-") else 1.0
    token = token.lstrip("+-")
    if "pi" in token:
        head, _, tail = token.partition("pi")
        numerator = float(head.rstrip("*")) if head.rstrip("*") else 1.0
        denominator = float(tail.lstrip("/")) if tail.lstrip("/") else 1.0
        return sign * numerator * np.pi / denominator
    return sign * float(token)


def parse_boundary(text: str) -> BoundaryUnitary:
    """Named spec (``robin:pi/2``, ``local:pi,0``, ``pseudo_periodic:0.3``, ...) or inline JSON"""
    raw = text.strip()
    if raw.startswith("{") or raw.startswith("["):
        try:
            return BoundaryUnitary.from_json_dict(json.loads(raw))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DomainError(f"cannot read boundary unitary from JSON: {exc}") from exc

    name, _, args = raw.lower().partition(":")
    try:
        if name in _NAMED and not args:
            return _NAMED[name]()
        if name == "robin":
            return make_robin(parse_angle(args))
        if name in ("pseudo_periodic", "pseudoperiodic"):
            return make_pseudo_periodic(parse_angle(args))
        if name == "local":
            first, second = args.split(",")
            return make_local(parse_angle(first), parse_angle(second))
    except ValueError as exc:
        raise DomainError(f"bad boundary spec {text!r}: {exc}") from exc
    raise DomainError(
        f"unknown boundary spec {text!r}; use dirichlet, neumann, periodic, antiperiodic, "
        "robin:<angle>, local:<a1>,<a2>, pseudo_periodic:<angle> or JSON"
    )
