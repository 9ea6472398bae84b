import numpy as np
import pytest
from scipy.stats import unitary_group

from boundary import (
    BoundaryUnitary,
    classify_minus_one,
    conforming_trace,
    make_dirichlet,
    make_local,
    make_neumann,
    make_pseudo_periodic,
    make_robin,
)
from errors import ConstraintViolationError, DomainError
from forms import (
    FormDescriptor,
    compose_diagnostics,
    form_descriptor,
    gamma_value,
    kinetic_expectation,
    quadratic_form,
    star,
)
from models import GridState, Interval, PhysicalConfig, trapezoid_norm


def _random_unitaries(count, seed):
    rng = np.random.default_rng(seed)
    return [BoundaryUnitary(u=unitary_group.rvs(2, random_state=rng)) for _ in range(count)]


def _defect(W):
    return np.max(np.abs(W.u.conj().T @ W.u - np.eye(2)))


def _robin_mean(alpha1, alpha2):
    return make_robin(2.0 * np.arctan(0.5 * (np.tan(alpha1 / 2) + np.tan(alpha2 / 2))))


def test_neumann_descriptor_has_zero_generator():
    descriptor = form_descriptor(make_neumann())
    assert descriptor.constraint_dim == 0
    np.testing.assert_allclose(descriptor.gamma_generator, np.zeros((2, 2)), atol=1e-15)
    assert gamma_value(descriptor, [0.3, -1.2j]) == 0.0


def test_dirichlet_descriptor():
    descriptor = form_descriptor(make_dirichlet())
    assert descriptor.constraint_dim == 2
    assert descriptor.gamma_generator.shape == (0, 0)
    assert gamma_value(descriptor, [0.0, 0.0]) == 0.0
    with pytest.raises(ConstraintViolationError):
        gamma_value(descriptor, [1.0, 0.0])


@pytest.mark.parametrize("alpha", [-2.0, -0.4, 0.7, np.pi / 2, 3.0])
def test_robin_generator(alpha):
    descriptor = form_descriptor(make_robin(alpha))
    np.testing.assert_allclose(descriptor.gamma_generator, 1j * np.tan(alpha / 2) * np.eye(2), atol=1e-12)


def test_robin_gamma_value():
    assert gamma_value(form_descriptor(make_robin(np.pi / 2)), [1.0, 0.0]) == pytest.approx(-1.0, abs=1e-12)
    Psi = np.array([0.5 + 0.2j, -1.1])
    expected = -np.tan(0.6 / 2) * np.vdot(Psi, Psi).real / 2.5
    assert gamma_value(form_descriptor(make_robin(0.6), l0=2.5), Psi) == pytest.approx(expected, rel=1e-12)


def test_pseudo_periodic_domain():
    descriptor = form_descriptor(make_pseudo_periodic(0.0))
    assert descriptor.constraint_dim == 1
    # periodic traces carry no boundary energy
    assert gamma_value(descriptor, [1.0, 1.0]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConstraintViolationError):
        gamma_value(descriptor, [1.0, 0.0])


def test_gamma_is_real_for_random_conditions():
    rng = np.random.default_rng(5)
    for U in _random_unitaries(50, seed=6):
        descriptor = form_descriptor(U, l0=0.8)
        Psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        A = descriptor.gamma_generator
        direct = 1j * np.vdot(Psi, A @ Psi) / 0.8
        assert abs(direct.imag) < 1e-9 * (1.0 + abs(direct))
        assert gamma_value(descriptor, Psi) == pytest.approx(direct.real, rel=1e-10, abs=1e-12)


def test_inconsistent_descriptor_is_rejected():
    with pytest.raises(ValueError):
        FormDescriptor(constraint_dim=1, constraint_vectors=[], free_vectors=np.eye(2), gamma_generator=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        FormDescriptor(constraint_dim=0, constraint_vectors=[], free_vectors=np.eye(2), gamma_generator=np.eye(2))


def test_quadratic_form_rejects_negative_gradient():
    with pytest.raises(DomainError):
        quadratic_form(form_descriptor(make_neumann()), PhysicalConfig(), -1.0, [0.0, 0.0])


def _hermite_with_bump(p0, p1, s0, s1, bump, n):
    s = np.linspace(0.0, 1.0, n)
    h = [2 * s ** 3 - 3 * s ** 2 + 1, s ** 3 - 2 * s ** 2 + s, -2 * s ** 3 + 3 * s ** 2, s ** 3 - s ** 2]
    dh = [6 * s ** 2 - 6 * s, 3 * s ** 2 - 4 * s + 1, -6 * s ** 2 + 6 * s, 3 * s ** 2 - 2 * s]
    ddh = [12 * s - 6, 6 * s - 4, -12 * s + 6, 6 * s - 2]
    weights = [p0, s0, p1, s1]
    psi = sum(w * f for w, f in zip(weights, h)) + bump * (1 - np.cos(2 * np.pi * s)) / 2
    dpsi = sum(w * f for w, f in zip(weights, dh)) + bump * np.pi * np.sin(2 * np.pi * s)
    ddpsi = sum(w * f for w, f in zip(weights, ddh)) + bump * 2 * np.pi ** 2 * np.cos(2 * np.pi * s)
    return psi, dpsi, ddpsi


def test_quadratic_form_matches_integration_by_parts():
    rng = np.random.default_rng(8)
    interval = Interval(a=0.0, b=1.0)
    config = PhysicalConfig()
    n = 2 ** 16 + 1
    for alpha in rng.uniform(-0.8 * np.pi, 0.8 * np.pi, 20):
        U = make_robin(alpha)
        Psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        slopes = conforming_trace(U, Psi).raw_derivatives
        bump = rng.normal() + 1j * rng.normal()
        psi, dpsi, ddpsi = _hermite_with_bump(Psi[0], Psi[1], slopes[0], slopes[1], bump, n)

        state = GridState.from_samples(interval, psi)
        lhs = kinetic_expectation(state, config, second=GridState.from_samples(interval, ddpsi))
        grad_sq = trapezoid_norm(GridState.from_samples(interval, dpsi)) ** 2
        rhs = quadratic_form(form_descriptor(U), config, grad_sq, Psi)
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-6)


def test_kinetic_expectation_by_finite_differences():
    interval = Interval(a=0.0, b=1.0)
    x = interval.grid(4097)
    state = GridState.from_samples(interval, np.sqrt(2.0) * np.sin(np.pi * x))
    assert kinetic_expectation(state, PhysicalConfig()) == pytest.approx(np.pi ** 2, rel=1e-3)


def test_dirichlet_absorbs_everything():
    for U in _random_unitaries(20, seed=9):
        assert star(make_dirichlet(), U).close_to(make_dirichlet(), tol=0.0)
        assert star(U, make_dirichlet()).close_to(make_dirichlet(), tol=0.0)


def test_dirichlet_and_neumann_give_dirichlet():
    report = compose_diagnostics(make_dirichlet(), make_neumann())
    assert report.constraint_dims == [2, 0]
    assert report.joint_constraint_dim == 2
    assert report.w2 is None
    assert report.result.close_to(make_dirichlet(), tol=0.0)


def test_robin_tangent_mean():
    W = star(make_robin(np.pi / 3), make_robin(np.pi / 2))
    assert W.close_to(_robin_mean(np.pi / 3, np.pi / 2), tol=1e-12)
    assert W.label == f"star({make_robin(np.pi / 3).label},{make_robin(np.pi / 2).label})"


def test_independent_constraints_give_dirichlet():
    W = star(make_pseudo_periodic(0.0), make_pseudo_periodic(np.pi / 2))
    assert classify_minus_one(W).count == 2
    assert W.close_to(make_dirichlet(), tol=1e-12)


def test_star_is_commutative_and_unitary():
    pairs = _random_unitaries(1000, seed=10)
    for U, V in zip(pairs[::2], pairs[1::2]):
        W = star(U, V)
        assert np.max(np.abs(W.u - star(V, U).u)) < 1e-12
        assert _defect(W) < 1e-12


def test_star_is_idempotent():
    samples = _random_unitaries(100, seed=12) + [
        make_neumann(),
        make_robin(2.5),
        make_local(np.pi, 0.4),
        make_pseudo_periodic(1.1),
        make_dirichlet(),
    ]
    for U in samples:
        assert star(U, U).close_to(U, tol=1e-12)


def test_single_constraint_is_absorbed():
    U = make_pseudo_periodic(0.9)
    xi = classify_minus_one(U).xi
    for beta in (-1.0, 0.3, 2.0):
        report = compose_diagnostics(U, make_robin(beta))
        assert report.joint_constraint_dim == 1
        assert np.linalg.norm(report.result.u @ xi + xi) < 1e-12
        m = np.tan(beta / 2) / 2
        assert report.w2 == pytest.approx((1 - 1j * m) / (1 + 1j * m), abs=1e-12)
        assert _defect(report.result) < 1e-12


def test_local_constraint_with_robin():
    alpha2, beta = 0.4, -1.3
    W = star(make_local(np.pi, alpha2), make_robin(beta))
    expected = make_local(np.pi, 2.0 * np.arctan(0.5 * (np.tan(alpha2 / 2) + np.tan(beta / 2))))
    assert W.close_to(expected, tol=1e-12)


def test_shared_constraint_is_kept_once():
    report = compose_diagnostics(make_pseudo_periodic(0.4), make_pseudo_periodic(0.4))
    assert report.constraint_dims == [1, 1]
    assert report.joint_constraint_dim == 1


def test_star_is_not_associative():
    a, b, c = make_neumann(), make_robin(np.pi / 2), make_robin(-np.pi / 2)
    left = star(star(a, b), c)
    right = star(a, star(b, c))
    assert left.close_to(make_robin(2.0 * np.arctan(-0.25)), tol=1e-12)
    assert right.close_to(make_neumann(), tol=1e-12)
    assert not left.close_to(right, tol=1e-3)
