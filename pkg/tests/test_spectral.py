import numpy as np
import pytest
from scipy.special import airy
from scipy.stats import unitary_group

from boundary import (
    BoundaryTrace,
    BoundaryUnitary,
    make_dirichlet,
    make_local,
    make_neumann,
    make_periodic,
    make_pseudo_periodic,
    make_robin,
    satisfies_bc,
)
from errors import ConvergenceError, DomainError
from models import Interval, PhysicalConfig, trapezoid_inner_product
from spectral import (
    airy_quantization,
    airy_series,
    dirichlet_energy,
    dirichlet_mode,
    dispersion_determinant,
    lowest_modes,
    mode_on_grid,
    mode_overlaps,
    scan_dispersion,
    solve_airy_levels,
    solve_spectrum,
    write_spectrum_csv,
)

UNIT = Interval(a=0.0, b=1.0)
CONFIG = PhysicalConfig()
AIRY_TABLE = [9.86851, 39.4787, 88.8266, 157.914]


def _random_unitaries(count, seed):
    rng = np.random.default_rng(seed)
    return [BoundaryUnitary(u=unitary_group.rvs(2, random_state=rng)) for _ in range(count)]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dirichlet_determinant_vanishes_at_levels(n):
    assert abs(dispersion_determinant(make_dirichlet(), UNIT, CONFIG, "oscillatory", n * np.pi)) < 1e-12


def test_dirichlet_determinant_away_from_levels():
    assert abs(dispersion_determinant(make_dirichlet(), UNIT, CONFIG, "oscillatory", np.pi / 2)) > 0.1


def test_neumann_has_no_evanescent_roots():
    for kappa in np.geomspace(0.5, 50.0, 200):
        assert abs(dispersion_determinant(make_neumann(), UNIT, CONFIG, "evanescent", kappa)) > 0.1


def test_determinant_needs_positive_k():
    with pytest.raises(DomainError):
        dispersion_determinant(make_dirichlet(), UNIT, CONFIG, "oscillatory", 0.0)


def test_dirichlet_spectrum_and_modes():
    modes = solve_spectrum(make_dirichlet(), UNIT, CONFIG, e_max=450.0)
    energies = [m.energy for m in modes]
    expected = [(n * np.pi) ** 2 for n in range(1, 7)]
    np.testing.assert_allclose(energies, expected, rtol=1e-8)
    x = UNIT.grid(201)
    for n, mode in enumerate(modes, start=1):
        assert mode.branch == "oscillatory"
        values = mode_on_grid(mode, 201).samples
        reference = np.sqrt(2.0) * np.sin(n * np.pi * x)
        phase = np.vdot(reference, values) / abs(np.vdot(reference, values))
        np.testing.assert_allclose(values, phase * reference, atol=1e-8)


def test_dirichlet_first_twenty_levels():
    modes = solve_spectrum(make_dirichlet(), UNIT, CONFIG, e_max=4000.0)
    assert len(modes) == 20
    expected = [dirichlet_energy(n, UNIT, CONFIG) for n in range(1, 21)]
    np.testing.assert_allclose([m.energy for m in modes], expected, rtol=1e-8)


def test_dirichlet_levels_scale_with_units():
    config = PhysicalConfig(hbar=2.0, mass=3.0, l0=0.5)
    interval = Interval(a=-1.0, b=1.5)
    modes = solve_spectrum(make_dirichlet(), interval, config, e_max=dirichlet_energy(4, interval, config) * 1.01)
    expected = [config.hbar ** 2 * (n * np.pi / interval.width) ** 2 / (2 * config.mass) for n in range(1, 5)]
    np.testing.assert_allclose([m.energy for m in modes], expected, rtol=1e-8)


def test_neumann_ground_state_is_flat():
    modes = solve_spectrum(make_neumann(), UNIT, CONFIG, e_max=50.0)
    ground = modes[0]
    assert ground.branch == "linear"
    assert ground.energy == 0.0
    np.testing.assert_allclose(mode_on_grid(ground, 11).samples, np.ones(11), atol=1e-12)
    np.testing.assert_allclose([m.energy for m in modes[1:]], [np.pi ** 2, 4 * np.pi ** 2], rtol=1e-8)


def test_robin_walls_bind_one_state_each():
    interval = Interval(a=0.0, b=20.0)
    modes = solve_spectrum(make_robin(np.pi / 2), interval, CONFIG, e_max=1.0)
    bound = [m for m in modes if m.energy < 0]
    assert len(bound) == 2
    for mode in bound:
        assert mode.branch == "evanescent"
        assert abs(mode.k_or_kappa - 1.0) < 1e-6


def test_repulsive_robin_has_no_bound_state():
    modes = solve_spectrum(make_robin(-np.pi / 2), UNIT, CONFIG, e_max=20.0)
    assert all(m.energy > 0 for m in modes)


@pytest.mark.parametrize("U, boundary_rate", [
    (make_robin(1e-9), 2 * np.tan(0.5e-9)),
    (make_robin(-1e-9), 2 * np.tan(-0.5e-9)),
    (make_robin(1e-7), 2 * np.tan(0.5e-7)),
    (make_robin(-1e-7), 2 * np.tan(-0.5e-7)),
    (make_robin(1e-4), 2 * np.tan(0.5e-4)),
    (make_robin(-1e-2), 2 * np.tan(-0.5e-2)),
    (make_local(2e-7, -1e-7), np.tan(1e-7) + np.tan(-0.5e-7)),
])
def test_weak_walls_keep_one_level_near_zero(U, boundary_rate):
    modes = solve_spectrum(U, UNIT, CONFIG, e_max=20.0)
    energies = [m.energy for m in modes]
    assert len(modes) == 2
    # constant state to first order: E = -(tan(a1/2) + tan(a2/2)) / (l0 l)
    assert energies[0] == pytest.approx(-boundary_rate, rel=1e-2)
    assert sum(e < 0 for e in energies) == (1 if boundary_rate > 0 else 0)
    assert energies[1] == pytest.approx(np.pi ** 2, rel=1e-2)


def test_weakly_bound_level_is_evanescent():
    modes = solve_spectrum(make_robin(1e-7), UNIT, CONFIG, e_max=20.0)
    ground = modes[0]
    assert ground.branch == "evanescent"
    assert ground.energy == pytest.approx(-1e-7, rel=1e-4)
    assert ground.k_or_kappa == pytest.approx(np.sqrt(1e-7), rel=1e-4)


def test_near_zero_level_is_not_doubled():
    modes = solve_spectrum(make_robin(-1e-9), UNIT, CONFIG, e_max=20.0)
    near_zero = [m for m in modes if abs(m.energy) < 1e-3]
    assert len(near_zero) == 1
    assert near_zero[0].energy == pytest.approx(1e-9, rel=1e-3)


def test_neumann_zero_level_stays_linear():
    modes = solve_spectrum(make_neumann(), UNIT, CONFIG, e_max=20.0)
    assert [m.branch for m in modes] == ["linear", "oscillatory"]
    assert modes[0].energy == 0.0


def test_periodic_degeneracy():
    modes = lowest_modes(make_periodic(), UNIT, CONFIG, count=5)
    expected = [0.0, 4 * np.pi ** 2, 4 * np.pi ** 2, 16 * np.pi ** 2, 16 * np.pi ** 2]
    np.testing.assert_allclose([m.energy for m in modes], expected, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(mode_overlaps(modes, modes), np.eye(5), atol=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4, 5])
def test_random_conditions_give_orthonormal_modes(seed):
    U = _random_unitaries(1, seed)[0]
    modes = lowest_modes(U, UNIT, CONFIG, count=10)
    np.testing.assert_allclose(mode_overlaps(modes, modes), np.eye(10), atol=1e-8)
    for mode in modes:
        assert mode.norm == pytest.approx(1.0, abs=1e-10)
        values, slopes = mode.terms().endpoint_data()
        trace = BoundaryTrace.from_endpoints(values[0, 0], values[0, 1], slopes[0, 0], slopes[0, 1], CONFIG.l0)
        assert satisfies_bc(U, trace, 1e-8)
    energies = [m.energy for m in modes]
    assert energies == sorted(energies)


def test_closed_form_overlaps_agree_with_quadrature():
    U = _random_unitaries(1, seed=12)[0]
    modes = lowest_modes(U, UNIT, CONFIG, count=4)
    grids = [mode_on_grid(m, 200001) for m in modes]
    numeric = np.array([[trapezoid_inner_product(f, g) for g in grids] for f in grids])
    np.testing.assert_allclose(mode_overlaps(modes, modes), numeric, atol=1e-6)


def test_at_most_two_negative_levels():
    for U in _random_unitaries(200, seed=21):
        modes = solve_spectrum(U, UNIT, CONFIG, e_max=1.0)
        assert sum(1 for m in modes if m.energy < 0) <= 2


def test_robin_approaches_dirichlet():
    modes = solve_spectrum(make_robin(np.pi - 1e-3), UNIT, CONFIG, e_max=100.0)
    positive = [m.energy for m in modes if m.energy > 0][:3]
    for n, energy in enumerate(positive, start=1):
        assert abs(energy - (n * np.pi) ** 2) / (n * np.pi) ** 2 < 1e-2


def test_pseudo_periodic_spectrum():
    alpha = 0.8
    modes = lowest_modes(make_pseudo_periodic(alpha), UNIT, CONFIG, count=4)
    # psi(b) = e^{i alpha} psi(a): plane waves with k = alpha + 2 pi n
    ks = sorted(abs(alpha + 2 * np.pi * n) for n in (-1, 0, 1, -2))
    np.testing.assert_allclose([m.energy for m in modes], np.square(ks), rtol=1e-8)


def test_scan_reports_accepted_roots():
    scan = scan_dispersion(make_dirichlet(), UNIT, CONFIG, "oscillatory", upper=10.0)
    assert np.all(np.diff(scan.k_grid) > 0)
    np.testing.assert_allclose(scan.roots, [np.pi, 2 * np.pi, 3 * np.pi], rtol=1e-12)
    for root in scan.roots:
        assert abs(dispersion_determinant(make_dirichlet(), UNIT, CONFIG, "oscillatory", root)) < 1e-12


def test_dirichlet_mode_matches_solver():
    solved = solve_spectrum(make_dirichlet(), UNIT, CONFIG, e_max=40.0)
    exact = [dirichlet_mode(n, UNIT, CONFIG) for n in (1, 2)]
    overlaps = mode_overlaps(exact, solved)
    np.testing.assert_allclose(np.abs(overlaps), np.eye(2), atol=1e-10)


def test_solve_spectrum_rejects_bad_window():
    with pytest.raises(DomainError):
        solve_spectrum(make_dirichlet(), UNIT, CONFIG, e_max=0.0)


def test_spectrum_csv(tmp_path):
    modes = solve_spectrum(make_neumann(), UNIT, CONFIG, e_max=15.0)
    path = tmp_path / "spectrum.csv"
    write_spectrum_csv(modes, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "index,branch,k_or_kappa,energy,re_c1,im_c1,re_c2,im_c2"
    assert len(lines) == 3
    assert float(lines[2].split(",")[3]) == modes[1].energy


@pytest.mark.parametrize("z", np.linspace(-4.0, 4.0, 17))
def test_airy_series_matches_scipy(z):
    ai, _, bi, _ = airy(z)
    series_ai, series_bi = airy_series(z)
    assert series_ai == pytest.approx(ai, abs=1e-12)
    assert series_bi == pytest.approx(bi, rel=1e-12, abs=1e-12)


def test_airy_series_range():
    with pytest.raises(DomainError):
        airy_series(-4.5)


def test_airy_quantization_at_first_level():
    assert abs(airy_quantization(9.86851)) < 1e-4


def test_airy_quantization_at_zero_energy():
    value = airy_quantization(0.0)
    assert value != 0.0
    assert value == pytest.approx(airy_quantization(0.0, method="series"), abs=1e-13)


def test_airy_quantization_sign_change_at_second_level():
    assert airy_quantization(39.47) * airy_quantization(39.49) < 0


def test_airy_table():
    levels = solve_airy_levels(4)
    for level, expected in zip(levels, AIRY_TABLE):
        assert level == pytest.approx(expected, rel=1e-5)


def test_weak_field_first_level_near_dirichlet():
    assert abs(solve_airy_levels(1)[0] - np.pi ** 2) < 0.002


def test_airy_levels_increase():
    levels = solve_airy_levels(10)
    assert len(levels) == 10
    assert np.all(np.diff(levels) > 0)


def test_airy_levels_bracketing_failure():
    with pytest.raises(ConvergenceError):
        solve_airy_levels(3, eps_max=20.0)
