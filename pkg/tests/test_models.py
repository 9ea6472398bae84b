import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import quad

from errors import GridMismatchError, NumericDomainError
from models import (
    ExpTerms,
    GridState,
    Interval,
    PhysicalConfig,
    SpectralState,
    _moment_integrals,
    gram_matrix,
    overlap_matrix,
    project_grid_state,
    sample_function,
    trapezoid_inner_product,
    trapezoid_norm,
)

UNIT = Interval(a=0.0, b=1.0)


def test_physical_config_defaults():
    config = PhysicalConfig()
    assert config.kinetic_prefactor == 1.0
    assert config.energy_from_wavenumber(np.pi) == pytest.approx(np.pi ** 2)


@pytest.mark.parametrize("field", ["hbar", "mass", "l0"])
@pytest.mark.parametrize("value", [0.0, -1.0, float("inf"), float("nan")])
def test_physical_config_rejects_non_positive(field, value):
    with pytest.raises(ValidationError):
        PhysicalConfig(**{field: value})


def test_interval_geometry():
    interval = Interval(a=-0.5, b=1.5)
    assert interval.width == 2.0
    assert interval.midpoint == 0.5
    np.testing.assert_allclose(interval.grid(5), [-0.5, 0.0, 0.5, 1.0, 1.5])
    with pytest.raises(ValidationError):
        Interval(a=1.0, b=1.0)


def test_grid_state_count_must_match():
    with pytest.raises(ValidationError):
        GridState(interval=UNIT, samples=np.ones(4), n=5)
    with pytest.raises(ValidationError):
        GridState(interval=UNIT, samples=np.ones(2), n=2)


def test_grid_state_samples_are_frozen():
    state = sample_function(UNIT, 11, lambda x: x)
    with pytest.raises(ValueError):
        state.samples[0] = 3.0


def test_inner_product_of_constants():
    one = sample_function(UNIT, 101, lambda x: np.ones_like(x))
    assert trapezoid_inner_product(one, one) == pytest.approx(1.0, abs=1e-14)


def test_inner_product_is_antilinear_in_first_slot():
    one = sample_function(UNIT, 101, lambda x: np.ones_like(x))
    i_one = one.scaled(1j)
    assert trapezoid_inner_product(one, i_one) == pytest.approx(1j, abs=1e-14)
    assert trapezoid_inner_product(i_one, one) == pytest.approx(-1j, abs=1e-14)


def test_sine_modes_are_orthogonal():
    f = sample_function(UNIT, 2001, lambda x: np.sin(np.pi * x))
    g = sample_function(UNIT, 2001, lambda x: np.sin(2 * np.pi * x))
    assert abs(trapezoid_inner_product(f, g)) < 1e-6


def test_inner_product_conjugate_symmetry():
    rng = np.random.default_rng(7)
    f = GridState.from_samples(UNIT, rng.normal(size=64) + 1j * rng.normal(size=64))
    g = GridState.from_samples(UNIT, rng.normal(size=64) + 1j * rng.normal(size=64))
    assert trapezoid_inner_product(f, g) == pytest.approx(np.conj(trapezoid_inner_product(g, f)), abs=1e-15)


def test_inner_product_grid_mismatch():
    f = sample_function(UNIT, 11, lambda x: x)
    with pytest.raises(GridMismatchError):
        trapezoid_inner_product(f, sample_function(UNIT, 12, lambda x: x))
    with pytest.raises(GridMismatchError):
        trapezoid_inner_product(f, sample_function(Interval(a=0.0, b=2.0), 11, lambda x: x))


def test_sample_function_examples():
    zero = sample_function(UNIT, 7, lambda x: 0.0)
    assert np.all(zero.samples == 0)
    identity = sample_function(UNIT, 3, lambda x: x)
    np.testing.assert_array_equal(identity.samples, [0.0, 0.5, 1.0])


@pytest.mark.parametrize("n", [3, 4, 17, 1000])
def test_flat_ground_state_has_unit_norm(n):
    v0 = sample_function(UNIT, n, lambda x: 1.0)
    np.testing.assert_array_equal(v0.samples, np.ones(n))
    assert trapezoid_norm(v0) == pytest.approx(1.0, abs=1e-12)


def test_sample_function_accepts_scalar_rules():
    import math
    state = sample_function(UNIT, 5, lambda x: math.cos(x))
    np.testing.assert_allclose(state.samples.real, np.cos(UNIT.grid(5)))


def test_sample_function_accepts_branching_rules():
    # comparisons on an array raise ValueError inside ``if``
    step = sample_function(UNIT, 5, lambda x: 1.0 if x < 0.5 else 2.0)
    np.testing.assert_array_equal(step.samples, [1.0, 1.0, 2.0, 2.0, 2.0])


def test_sample_function_rejects_non_finite():
    with pytest.raises(NumericDomainError):
        sample_function(UNIT, 5, lambda x: 1.0 / (x - 0.5))
    with pytest.raises(ValueError):
        sample_function(UNIT, 2, lambda x: x)


def test_spectral_state_norm():
    state = SpectralState(basis_tag="dirichlet", coeffs=[3.0, 4.0j])
    assert state.norm == pytest.approx(5.0)
    with pytest.raises(ValidationError):
        SpectralState(basis_tag="dirichlet", coeffs=[[1.0]])


@pytest.mark.parametrize("z", [0.0, 0.3, -0.49, 0.51, -2.0, 3.5j, -40.0 + 7.0j, 1.5 - 0.2j])
def test_moment_integrals_match_quadrature(z):
    j0, j1, j2 = _moment_integrals(np.array([z]))
    for q, value in enumerate((j0[0], j1[0], j2[0])):
        re = quad(lambda t: (t ** q * np.exp(z * t)).real, 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        im = quad(lambda t: (t ** q * np.exp(z * t)).imag, 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
        assert value == pytest.approx(re + 1j * im, rel=1e-11, abs=1e-14)


def _sample_family(interval):
    a, b = interval.a, interval.b
    return ExpTerms.from_functions(interval, [
        [(1.0, 0, 3j, a), (0.5 - 0.2j, 0, -3j, a)],
        [(2.0, 1, -4.0, a)],
        [(1.0, 0, 2.5, b), (0.3j, 1, 0.0, a)],
        [(1.0, 0, 0.0, a)],
    ])


def test_closed_form_overlaps_match_trapezoid():
    interval = Interval(a=-0.3, b=1.2)
    family = _sample_family(interval)
    closed = overlap_matrix(family, family)
    x = interval.grid(200001)
    values = family.evaluate(x)
    numeric = np.trapezoid(np.conj(values)[:, None, :] * values[None, :, :], x, axis=2)
    np.testing.assert_allclose(closed, numeric, atol=1e-8)


def test_gram_matrix_is_hermitian():
    gram = gram_matrix(_sample_family(UNIT))
    np.testing.assert_allclose(gram, gram.conj().T, atol=0)


def test_steep_exponentials_do_not_overflow():
    kappa = 1e4
    family = ExpTerms.from_functions(UNIT, [[(1.0, 0, kappa, UNIT.b)], [(1.0, 0, -kappa, UNIT.a)]])
    gram = gram_matrix(family)
    assert np.all(np.isfinite(gram))
    assert gram[0, 0].real == pytest.approx(-np.expm1(-2 * kappa) / (2 * kappa), rel=1e-13)
    assert abs(gram[0, 1]) < 1e-300


def test_derivative_evaluation():
    family = _sample_family(UNIT)
    x = np.linspace(0.1, 0.9, 7)
    h = 1e-6
    numeric = (family.evaluate(x + h) - family.evaluate(x - h)) / (2 * h)
    np.testing.assert_allclose(family.evaluate(x, derivative=True), numeric, rtol=1e-7, atol=1e-7)


def test_projection_of_grid_state():
    family = _sample_family(UNIT)
    state = family.to_grid(40001, index=2)
    np.testing.assert_allclose(project_grid_state(family, state), overlap_matrix(family, family.take(2))[:, 0], atol=1e-8)


def test_grid_derivative_second_order():
    state = sample_function(UNIT, 2001, lambda x: np.sin(3 * x))
    np.testing.assert_allclose(state.derivative().samples.real, 3 * np.cos(3 * state.x), atol=1e-5)
