"""
Moving Dirichlet walls mapped onto the fixed box I = [-l0/2, l0/2].

The frame map U(l, d) rescales I_{l,d} = [d - l/2, d + l/2] onto I. In the
fixed frame the state obeys

    i hbar dphi/dt = ((l0/l)^2 p^2/2m - (ldot/l) x.p - (l0 ddot/l) p) phi

with x.p the symmetrized product. Dynamics are Galerkin in the Dirichlet
sine basis of I, where every matrix element is closed form.
"""
import math
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import LinAlgError, norm, solve

from errors import DomainError, StepError, SupportMismatchError
from logging_config import get_logger
from models import GridState, Interval, PhysicalConfig, SpectralState

logger = get_logger(__name__)

SINE_BASIS = "dirichlet_sine"

Direction = Literal["forward", "inverse"]


class WallTrajectory(BaseModel):
    """Width l(t) and center d(t) of the box, with optional analytic rates"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    width_fn: Callable[[float], float]
    center_fn: Callable[[float], float]
    width_rate_fn: Optional[Callable[[float], float]] = None
    center_rate_fn: Optional[Callable[[float], float]] = None
    l_min: float = Field(default=1e-6, gt=0.0)
    h: float = Field(default=1e-5, gt=0.0, description="central-difference step for missing rates")
    label: str = "custom"

    def width(self, t: float) -> float:
        value = float(self.width_fn(t))
        if not math.isfinite(value) or value < self.l_min:
            raise DomainError(f"{self.label}: width {value} at t={t} is below l_min={self.l_min}")
        return value

    def center(self, t: float) -> float:
        value = float(self.center_fn(t))
        if not math.isfinite(value):
            raise DomainError(f"{self.label}: center is not finite at t={t}")
        return value

    def _central(self, fn, t: float) -> float:
        return (float(fn(t + self.h)) - float(fn(t - self.h))) / (2.0 * self.h)

    def width_rate(self, t: float) -> float:
        if self.width_rate_fn is not None:
            return float(self.width_rate_fn(t))
        return self._central(self.width_fn, t)

    def center_rate(self, t: float) -> float:
        if self.center_rate_fn is not None:
            return float(self.center_rate_fn(t))
        return self._central(self.center_fn, t)

    def interval(self, t: float) -> Interval:
        l, d = self.width(t), self.center(t)
        return Interval(a=d - 0.5 * l, b=d + 0.5 * l)

    def rate_mismatch(self, times) -> float:
        """Largest gap between analytic rates and central differences"""
        worst = 0.0
        for t in times:
            if self.width_rate_fn is not None:
                worst = max(worst, abs(self.width_rate_fn(t) - self._central(self.width_fn, t)))
            if self.center_rate_fn is not None:
                worst = max(worst, abs(self.center_rate_fn(t) - self._central(self.center_fn, t)))
        return worst


def static(l0: float = 1.0, d0: float = 0.0) -> WallTrajectory:
    return WallTrajectory(
        width_fn=lambda t: l0, center_fn=lambda t: d0,
        width_rate_fn=lambda t: 0.0, center_rate_fn=lambda t: 0.0,
        l_min=0.5 * l0, label="static",
    )


def breathing(l0: float = 1.0, amplitude: float = 0.1, omega: float = 1.0) -> WallTrajectory:
    """l(t) = l0 (1 + amplitude sin(omega t)), fixed center"""
    if not 0.0 <= abs(amplitude) < 1.0:
        raise DomainError(f"breathing amplitude must be below 1, got {amplitude}")
    return WallTrajectory(
        width_fn=lambda t: l0 * (1.0 + amplitude * math.sin(omega * t)),
        center_fn=lambda t: 0.0,
        width_rate_fn=lambda t: l0 * amplitude * omega * math.cos(omega * t),
        center_rate_fn=lambda t: 0.0,
        l_min=0.5 * l0 * (1.0 - abs(amplitude)),
        label="breathing",
    )


def linear_expansion(l0: float = 1.0, rate: float = 1e-3) -> WallTrajectory:
    """l(t) = l0 (1 + rate t)"""
    return WallTrajectory(
        width_fn=lambda t: l0 * (1.0 + rate * t),
        center_fn=lambda t: 0.0,
        width_rate_fn=lambda t: l0 * rate,
        center_rate_fn=lambda t: 0.0,
        l_min=1e-3 * l0,
        label="linear_expansion",
    )


def rigid_translation(l0: float = 1.0, d0: float = 0.0, v: float = 1.0) -> WallTrajectory:
    return WallTrajectory(
        width_fn=lambda t: l0,
        center_fn=lambda t: d0 + v * t,
        width_rate_fn=lambda t: 0.0,
        center_rate_fn=lambda t: v,
        l_min=0.5 * l0,
        label="rigid_translation",
    )


def accelerating(l0: float = 1.0, d0: float = 0.0, g: float = 1.0) -> WallTrajectory:
    """Rigid box with d(t) = d0 - g t^2 / 2"""
    return WallTrajectory(
        width_fn=lambda t: l0,
        center_fn=lambda t: d0 - 0.5 * g * t * t,
        width_rate_fn=lambda t: 0.0,
        center_rate_fn=lambda t: -g * t,
        l_min=0.5 * l0,
        label="accelerating",
    )


def _lambdify(expr: sympy.Expr, t: sympy.Symbol) -> Callable[[float], float]:
    fn = sympy.lambdify(t, expr, modules="math")
    return lambda value: float(fn(value))


def from_expressions(l_expr: str, d_expr: str = "0", l_min: float = 1e-6) -> WallTrajectory:
    """Trajectory from expressions in ``t``; rates come from symbolic derivatives"""
    t = sympy.Symbol("t", real=True)
    parsed = []
    for text in (l_expr, d_expr):
        try:
            expr = sympy.sympify(text, locals={"t": t})
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise DomainError(f"cannot parse trajectory expression {text!r}: {exc}") from exc
        extra = expr.free_symbols - {t}
        if extra:
            raise DomainError(f"trajectory expression {text!r} uses unknown symbols {sorted(map(str, extra))}")
        parsed.append(expr)
    l_sym, d_sym = parsed
    return WallTrajectory(
        width_fn=_lambdify(l_sym, t),
        center_fn=_lambdify(d_sym, t),
        width_rate_fn=_lambdify(sympy.diff(l_sym, t), t),
        center_rate_fn=_lambdify(sympy.diff(d_sym, t), t),
        l_min=l_min,
        label=f"l={l_expr}; d={d_expr}",
    )


class GalerkinOperators(BaseModel):
    """p^2/2m, p and x.p in the orthonormal sine basis of [-l0/2, l0/2]"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_modes: int = Field(ge=2)
    config: PhysicalConfig
    kin: np.ndarray
    mom: np.ndarray
    virial: np.ndarray

    @field_validator("kin", "mom", "virial", mode="before")
    @classmethod
    def _frozen(cls, value):
        arr = np.array(value)
        arr.setflags(write=False)
        return arr

    @property
    def reference(self) -> Interval:
        half = 0.5 * self.config.l0
        return Interval(a=-half, b=half)

    @property
    def mode_numbers(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1)

    def basis(self, x: np.ndarray, derivative: bool = False) -> np.ndarray:
        """Sine modes (rows) evaluated at ``x``"""
        l0 = self.config.l0
        k = self.mode_numbers[:, None] * np.pi / l0
        s = np.asarray(x, dtype=float)[None, :] + 0.5 * l0
        if derivative:
            return np.sqrt(2.0 / l0) * k * np.cos(k * s)
        return np.sqrt(2.0 / l0) * np.sin(k * s)


def build_galerkin(config: PhysicalConfig, n_modes: int) -> GalerkinOperators:
    if n_modes < 2:
        raise DomainError(f"need at least 2 modes, got {n_modes}")
    l0, hbar = config.l0, config.hbar
    n = np.arange(1, n_modes + 1, dtype=float)
    row, col = np.meshgrid(n, n, indexing="ij")
    diff_sq = row ** 2 - col ** 2
    off = diff_sq != 0
    odd = (row + col) % 2 == 1
    ratio = np.divide(row * col, diff_sq, out=np.zeros_like(diff_sq), where=off)

    mom = np.where(odd, -1j * hbar * 4.0 * ratio / l0, 0.0)
    virial = np.where(~odd & off, 1j * hbar * 2.0 * ratio, 0.0)
    kin = np.diag(config.kinetic_prefactor * (n * np.pi / l0) ** 2).astype(complex)
    return GalerkinOperators(n_modes=n_modes, config=config, kin=kin, mom=mom, virial=virial)


def _check_state(ops: GalerkinOperators, state: SpectralState) -> np.ndarray:
    if state.coeffs.shape[0] != ops.n_modes:
        raise DomainError(f"state has {state.coeffs.shape[0]} coefficients, operators have {ops.n_modes} modes")
    return state.coeffs


def mode_state(ops: GalerkinOperators, n: int = 1) -> SpectralState:
    if not 1 <= n <= ops.n_modes:
        raise DomainError(f"mode {n} outside 1..{ops.n_modes}")
    coeffs = np.zeros(ops.n_modes, dtype=complex)
    coeffs[n - 1] = 1.0
    return SpectralState(basis_tag=SINE_BASIS, coeffs=coeffs)


def assemble_hamiltonian(ops: GalerkinOperators, traj: WallTrajectory, t: float) -> np.ndarray:
    """H(l) + K(l, d) at time t"""
    l = traj.width(t)
    l0 = ops.config.l0
    # kinetic scale is (l0/l)^2 so that l = l0 gives the static box
    return ((l0 / l) ** 2) * ops.kin - (traj.width_rate(t) / l) * ops.virial - (l0 * traj.center_rate(t) / l) * ops.mom


def stable_time_step(ops: GalerkinOperators, traj: WallTrajectory, t: float, accuracy: float = 0.1) -> float:
    """Largest dt with ||H_mid|| dt / hbar <= accuracy"""
    return accuracy * ops.config.hbar / float(norm(assemble_hamiltonian(ops, traj, t), 2))


def _cayley_step(ops: GalerkinOperators, traj: WallTrajectory, coeffs: np.ndarray, t: float, dt: float) -> np.ndarray:
    h_mid = assemble_hamiltonian(ops, traj, t + 0.5 * dt)
    half = (0.5j * dt / ops.config.hbar) * h_mid
    eye = np.eye(ops.n_modes)
    lhs = eye + half
    try:
        new = solve(lhs, (eye - half) @ coeffs)
    except (LinAlgError, ValueError) as exc:
        raise StepError(f"Crank-Nicolson solve failed at t={t}: {exc}", condition=float(np.linalg.cond(lhs))) from exc
    if not np.all(np.isfinite(new)):
        raise StepError(f"Crank-Nicolson step produced non-finite coefficients at t={t}",
                        condition=float(np.linalg.cond(lhs)))
    return new


def step_crank_nicolson(
    ops: GalerkinOperators, traj: WallTrajectory, state: SpectralState, t: float, dt: float
) -> SpectralState:
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    return state.with_coeffs(_cayley_step(ops, traj, _check_state(ops, state), t, dt))


def energy(ops: GalerkinOperators, traj: WallTrajectory, state: SpectralState, t: float) -> float:
    """<phi|H(l(t))|phi>"""
    coeffs = _check_state(ops, state)
    return _energy(ops, coeffs, traj.width(t))


def _energy(ops: GalerkinOperators, coeffs: np.ndarray, l: float) -> float:
    return float((ops.config.l0 / l) ** 2 * np.sum(ops.kin.diagonal().real * np.abs(coeffs) ** 2))


def wall_slopes(ops: GalerkinOperators, state: SpectralState) -> Tuple[complex, complex]:
    """phi'(-l0/2) and phi'(l0/2) from the sine coefficients"""
    coeffs = _check_state(ops, state)
    l0 = ops.config.l0
    n = ops.mode_numbers
    weights = np.sqrt(2.0 / l0) * (np.pi / l0) * n
    left = complex(np.sum(weights * coeffs))
    right = complex(np.sum(weights * np.where(n % 2 == 0, 1.0, -1.0) * coeffs))
    return left, right


def energy_rate_rhs(ops: GalerkinOperators, traj: WallTrajectory, state: SpectralState, t: float) -> float:
    """Wall-flux form of dE/dt"""
    l0 = ops.config.l0
    l, ldot, ddot = traj.width(t), traj.width_rate(t), traj.center_rate(t)
    left, right = wall_slopes(ops, state)
    flux = (0.5 * ldot + ddot) * abs(right) ** 2 - (-0.5 * ldot + ddot) * abs(left) ** 2
    return float(-ops.config.kinetic_prefactor * (l0 / l) ** 3 * flux)


def energy_rate_check(
    ops: GalerkinOperators, traj: WallTrajectory, state: SpectralState, t: float, h: Optional[float] = None
) -> Tuple[float, float]:
    """(lhs, rhs): numerical dE/dt along the propagation and its wall-flux form.

    lhs propagates the state h and h/2 forward and backward, takes symmetric
    differences of the energy and combines them by Richardson extrapolation.
    The default h keeps ||H|| h / hbar at 0.05 and never exceeds 1e-4.
    """
    coeffs = _check_state(ops, state)
    if h is None:
        h = min(1e-4, stable_time_step(ops, traj, t, accuracy=0.05))

    def _symmetric(step: float) -> float:
        plus = _cayley_step(ops, traj, coeffs, t, step)
        minus = _cayley_step(ops, traj, coeffs, t, -step)
        e_plus = _energy(ops, plus, traj.width(t + step))
        e_minus = _energy(ops, minus, traj.width(t - step))
        return (e_plus - e_minus) / (2.0 * step)

    lhs = (4.0 * _symmetric(0.5 * h) - _symmetric(h)) / 3.0
    return lhs, energy_rate_rhs(ops, traj, state, t)


class EvolutionSample(BaseModel):
    t: float
    norm: float
    energy: float
    lhs_rate: Optional[float] = None
    rhs_rate: Optional[float] = None


class Evolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    samples: List[EvolutionSample]
    final: SpectralState
    dt: float


def propagate(
    ops: GalerkinOperators,
    traj: WallTrajectory,
    state: SpectralState,
    t0: float,
    t_end: float,
    dt: float,
    record_every: int = 1,
    rate_check: bool = False,
) -> Evolution:
    """Crank-Nicolson run from t0 to t_end, recording every ``record_every`` steps"""
    if not t_end > t0:
        raise DomainError(f"t_end must exceed t0, got [{t0}, {t_end}]")
    if not dt > 0 or record_every < 1:
        raise DomainError("dt must be positive and record_every >= 1")
    steps = max(1, int(math.ceil((t_end - t0) / dt - 1e-9)))
    dt = (t_end - t0) / steps
    guideline = stable_time_step(ops, traj, t0)
    if dt > guideline:
        logger.debug("dt=%.3e exceeds the accuracy guideline %.3e for %d modes", dt, guideline, ops.n_modes)

    coeffs = _check_state(ops, state)

    def _record(t: float, c: np.ndarray) -> EvolutionSample:
        lhs = rhs = None
        if rate_check:
            lhs, rhs = energy_rate_check(ops, traj, state.with_coeffs(c), t)
        return EvolutionSample(
            t=t, norm=float(np.linalg.norm(c)), energy=_energy(ops, c, traj.width(t)), lhs_rate=lhs, rhs_rate=rhs
        )

    samples = [_record(t0, coeffs)]
    for i in range(steps):
        t = t0 + i * dt
        coeffs = _cayley_step(ops, traj, coeffs, t, dt)
        if (i + 1) % record_every == 0 or i + 1 == steps:
            samples.append(_record(t0 + (i + 1) * dt, coeffs))
    logger.debug("propagated %d steps of %.3e for %s, final norm %.15f",
                 steps, dt, traj.label, samples[-1].norm)
    return Evolution(samples=samples, final=state.with_coeffs(coeffs), dt=dt)


def to_grid(ops: GalerkinOperators, state: SpectralState, n_points: int) -> GridState:
    """Synthesize phi on the reference interval"""
    coeffs = _check_state(ops, state)
    x = ops.reference.grid(n_points)
    return GridState.from_samples(ops.reference, coeffs @ ops.basis(x))


def from_grid(ops: GalerkinOperators, state: GridState) -> SpectralState:
    """Trapezoid projection of a reference-frame grid state onto the sine modes"""
    if not state.interval.same_as(ops.reference):
        raise SupportMismatchError("state is not on the reference interval")
    x = state.x
    coeffs = np.trapezoid(ops.basis(x) * state.samples[None, :], x, axis=1)
    return SpectralState(basis_tag=SINE_BASIS, coeffs=coeffs)


def translate(state: GridState, d: float) -> GridState:
    """(T(d) psi)(x) = psi(x - d)"""
    moved = Interval(a=state.interval.a + d, b=state.interval.b + d)
    return GridState.from_samples(moved, state.samples)


def dilate(state: GridState, s: float) -> GridState:
    """(D(s) psi)(x) = exp(-s/2) psi(exp(-s) x)"""
    scale = math.exp(s)
    stretched = Interval(a=state.interval.a * scale, b=state.interval.b * scale)
    return GridState.from_samples(stretched, math.exp(-0.5 * s) * state.samples)


class FrameMap(BaseModel):
    """U(l, d) (forward, moving box onto I) or its inverse"""
    model_config = ConfigDict(frozen=True)

    l: float = Field(gt=0.0, allow_inf_nan=False)
    d: float = Field(default=0.0, allow_inf_nan=False)
    l0: float = Field(default=1.0, gt=0.0, allow_inf_nan=False)
    direction: Direction = "forward"

    @property
    def moving(self) -> Interval:
        return Interval(a=self.d - 0.5 * self.l, b=self.d + 0.5 * self.l)

    @property
    def reference(self) -> Interval:
        return Interval(a=-0.5 * self.l0, b=0.5 * self.l0)

    @property
    def source(self) -> Interval:
        return self.moving if self.direction == "forward" else self.reference

    @property
    def target(self) -> Interval:
        return self.reference if self.direction == "forward" else self.moving


def _resample(state: GridState, target: Interval, n_points: int) -> GridState:
    grid = target.grid(n_points)
    # stretch the mapped support onto the exact target ends
    src = target.a + (state.x - state.interval.a) * (target.width / state.interval.width)
    values = np.interp(grid, src, state.samples.real) + 1j * np.interp(grid, src, state.samples.imag)
    return GridState.from_samples(target, values)


def frame_map_apply(frame: FrameMap, state: GridState, n_points: Optional[int] = None) -> GridState:
    if not state.interval.same_as(frame.source, tol=1e-10):
        raise SupportMismatchError(
            f"state lives on [{state.interval.a}, {state.interval.b}], "
            f"map expects [{frame.source.a}, {frame.source.b}]"
        )
    log_ratio = math.log(frame.l / frame.l0)
    if frame.direction == "forward":
        mapped = dilate(translate(state, -frame.d), -log_ratio)
    else:
        mapped = translate(dilate(state, log_ratio), frame.d)
    return _resample(mapped, frame.target, n_points or state.n)


def gauge_transform(
    state: GridState, t: float, g: float, config: PhysicalConfig, direction: Direction = "forward"
) -> GridState:
    """Multiply by exp(+-(i/hbar)(m g xi t - m g^2 t^3 / 6)) on the reference interval"""
    half = 0.5 * config.l0
    if not state.interval.same_as(Interval(a=-half, b=half)):
        raise SupportMismatchError("gauge transform acts on the reference interval")
    sign = 1.0 if direction == "forward" else -1.0
    phase = (config.mass * g * state.x * t - config.mass * g * g * t ** 3 / 6.0) / config.hbar
    return GridState.from_samples(state.interval, np.exp(1j * sign * phase) * state.samples)


def relative_bound(
    ops: GalerkinOperators,
    traj: WallTrajectory,
    t: float,
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """Fit ||K c|| <= a ||c|| + b ||H c|| on random normalized band-limited c.

    The slope b comes from a least-squares line; a is then raised until the
    bound covers every sample.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    l = traj.width(t)
    l0 = ops.config.l0
    h_op = ((l0 / l) ** 2) * ops.kin
    k_op = -(traj.width_rate(t) / l) * ops.virial - (l0 * traj.center_rate(t) / l) * ops.mom

    k_norms, h_norms = [], []
    for _ in range(samples):
        cutoff = int(rng.integers(1, ops.n_modes + 1))
        c = np.zeros(ops.n_modes, dtype=complex)
        c[:cutoff] = rng.normal(size=cutoff) + 1j * rng.normal(size=cutoff)
        c /= np.linalg.norm(c)
        k_norms.append(np.linalg.norm(k_op @ c))
        h_norms.append(np.linalg.norm(h_op @ c))
    k_norms, h_norms = np.array(k_norms), np.array(h_norms)
    b = max(0.0, float(np.polyfit(h_norms, k_norms, 1)[0]))
    a = max(0.0, float(np.max(k_norms - b * h_norms)))
    return a, b
