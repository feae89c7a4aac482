import numpy as np
import pytest

from abtroika.geometry import Sense, SmearingProfile, SmearKind, TrajectoryHalfCircle
from abtroika.modes import (
    ModeGrid,
    ModeState,
    analytic_mode,
    b_relation_residual,
    classical_field_modes,
    electron_drive,
    evolve_mode,
    export_mode_state,
    overlap_coherent,
    overlap_gaussian_check,
    photon_number,
    random_smooth_state,
    riccati_stationarity,
    state_from_fields,
)

POINT = SmearingProfile()
LINE = SmearingProfile(SmearKind.LINE_Z, sigma=1.0)


def small_traj(beta=0.3):
    return TrajectoryHalfCircle(1.0, beta, Sense.RIGHT)


# -------------------------------------------------------------------- grids

def test_cartesian_grid_symmetric_no_zero():
    g = ModeGrid.cartesian(8, 4.0)
    assert g.n_modes == 512
    assert g.omega.min() > 0
    neg = g.neg_index()
    np.testing.assert_allclose(g.k_points[neg], -g.k_points, atol=0)
    assert g.polarization_count == 3


def test_spherical_grid_symmetric():
    g = ModeGrid.spherical(6.0, n_r=16, n_mu=6, n_phi=8)
    neg = g.neg_index()
    np.testing.assert_allclose(g.k_points[neg], -g.k_points, atol=1e-12)
    # weights integrate d3k over the ball to a decent accuracy
    vol = g.weights.sum()
    np.testing.assert_allclose(vol, 4 / 3 * np.pi * 6.0**3, rtol=1e-6)


def test_fft_grid_pairing():
    g = ModeGrid.fft_pair(8, 6.0)
    assert g.n_modes == 7**3 - 1  # paired band only: Nyquist rows and k=0 dropped
    neg = g.neg_index()
    np.testing.assert_allclose(g.k_points[neg], -g.k_points, atol=1e-12)


def test_squeeze_hook_rejected():
    g = ModeGrid.cartesian(4, 2.0)
    with pytest.raises(NotImplementedError):
        ModeState(g, np.zeros((g.n_modes, 3), complex), 0j, 0.0, squeeze_f=0.3)


# ---------------------------------------------------------------- evolution

def test_evolve_zero_drive_stays_vacuum():
    g = ModeGrid.cartesian(4, 2.0)
    st = evolve_mode(ModeState.vacuum(g), 0.05, 200)
    assert np.all(st.alpha == 0)
    assert st.c_phase == 0


def test_evolve_step_size_violation_names_mode():
    g = ModeGrid.cartesian(4, 2.0)
    with pytest.raises(ValueError, match="mode"):
        evolve_mode(ModeState.vacuum(g), 1.0, 1)


def test_evolve_constant_drive_closed_form():
    g = ModeGrid.cartesian(4, 3.0)
    J0 = (0.3 + 0.1j) * np.ones((g.n_modes, 3))

    def drive(t):
        return J0

    om = g.omega
    t_end = 4.0
    steps = int(np.ceil(om.max() * t_end / 0.02))
    st = evolve_mode(ModeState.vacuum(g, drive), t_end / steps, steps)
    expected = J0 * ((1.0 - np.exp(-1j * om * t_end)) / (om * np.sqrt(2 * om)))[:, None]
    err = np.max(np.abs(st.alpha - expected))
    assert err < 1e-8, f"max mode error {err:.2e}"


def test_drive_off_after_traverse_alpha_modulus_constant():
    # evolve from just past the traverse end: the attached drive has switched
    # off, so per-mode |alpha| must be conserved by the integrator
    tr = small_traj(0.3)
    g = ModeGrid.cartesian(4, 2.0)
    T = tr.traverse_time
    st_T = analytic_mode(tr, POINT, g, T * (1 + 1e-9))
    n1 = np.abs(st_T.alpha)
    dt = 0.01 / g.omega.max()
    st_late = evolve_mode(st_T, dt, int(0.5 * T / dt))  # on to ~1.5 T
    n2 = np.abs(st_late.alpha)
    assert np.max(np.abs(n1 - n2)) < 1e-10


def test_analytic_matches_evolution_ab_drive():
    tr = small_traj(0.3)
    g = ModeGrid.cartesian(6, 3.0)
    drive = electron_drive(tr, POINT, g)
    T = tr.traverse_time
    st_a = analytic_mode(tr, POINT, g, T)
    steps = int(np.ceil(g.omega.max() * T / 0.03))
    st_e = evolve_mode(ModeState.vacuum(g, drive), T / steps, steps)
    err = np.max(np.abs(st_a.alpha - st_e.alpha))
    assert err < 1e-6, f"max mode error {err:.2e}"
    # phases agree too
    assert abs(st_a.c_phase - st_e.c_phase) < 1e-6


def test_analytic_alpha_zero_at_start():
    tr = small_traj()
    g = ModeGrid.cartesian(4, 2.0)
    st = analytic_mode(tr, POINT, g, 0.0)
    assert np.allclose(st.alpha, 0.0)


def test_reconstructed_field_modes_conjugate_symmetric():
    tr = small_traj(0.3)
    g = ModeGrid.cartesian(4, 2.0)
    st = analytic_mode(tr, LINE, g, 0.6 * tr.traverse_time)
    neg = g.neg_index()
    om = g.omega[:, None]
    At = (st.alpha + np.conj(st.alpha[neg])) / np.sqrt(2 * om)
    np.testing.assert_allclose(At[neg], np.conj(At), atol=1e-12)


# ------------------------------------------------------------ photon number

def test_photon_number_vacuum_and_single_mode():
    g = ModeGrid.cartesian(4, 2.0)
    assert photon_number(ModeState.vacuum(g)) == 0.0
    alpha = np.zeros((g.n_modes, 3), complex)
    alpha[5, 1] = 2.0
    st = ModeState(g, alpha, 0j, 0.0)
    np.testing.assert_allclose(photon_number(st), 4.0 * g.weights[5], rtol=1e-15)


def test_photon_number_free_evolution_invariant():
    tr = small_traj(0.3)
    g = ModeGrid.cartesian(4, 2.0)
    T = tr.traverse_time
    st = analytic_mode(tr, POINT, g, T * (1 + 1e-9))  # drive already off
    n0 = photon_number(st)
    dt = 0.01 / g.omega.max()
    st2 = evolve_mode(st, dt, 2000)
    assert abs(photon_number(st2) - n0) <= 1e-10 * max(n0, 1.0)


# ----------------------------------------------------------------- overlaps

def _coherent_state(grid, alpha, gamma=0.0):
    c = -0.5 * np.sum(grid.weights[:, None] * np.abs(alpha) ** 2) + 1j * gamma
    return ModeState(grid, alpha, complex(c), 0.0)


def test_overlap_identical_states_pure_phase():
    g = ModeGrid.cartesian(4, 2.0)
    rng = np.random.default_rng(0)
    alpha = rng.normal(size=(g.n_modes, 3)) + 1j * rng.normal(size=(g.n_modes, 3))
    st = _coherent_state(g, alpha, gamma=0.37)
    ov = overlap_coherent(st, st)
    np.testing.assert_allclose(abs(ov), 1.0, rtol=1e-12)


def test_overlap_modulus_is_displacement_gaussian():
    g = ModeGrid.cartesian(4, 2.0)
    rng = np.random.default_rng(1)
    aL = rng.normal(size=(g.n_modes, 3)) + 1j * rng.normal(size=(g.n_modes, 3))
    aR = rng.normal(size=(g.n_modes, 3)) + 1j * rng.normal(size=(g.n_modes, 3))
    ov = overlap_coherent(_coherent_state(g, aL), _coherent_state(g, aR))
    expected = np.exp(-0.5 * np.sum(g.weights[:, None] * np.abs(aR - aL) ** 2))
    np.testing.assert_allclose(abs(ov), expected, rtol=1e-10)


def test_overlap_modulus_matches_photon_number_on_traverses():
    # two code paths for the decoherence exponent of the traverse pair:
    # -ln|<L|R>| against half the photon number of the difference state
    tr = small_traj(0.3)
    smear = SmearingProfile(SmearKind.LINE_Z, sigma=1.0)
    g = ModeGrid.cartesian(6, 3.0)
    T = tr.traverse_time
    stR = analytic_mode(tr, smear, g, T)
    stL = analytic_mode(tr.mirrored(), smear, g, T)
    ov = overlap_coherent(stL, stR)
    diff = ModeState(g, stR.alpha - stL.alpha, 0j, T)
    np.testing.assert_allclose(-np.log(abs(ov)), 0.5 * photon_number(diff),
                               rtol=1e-10)


def test_overlap_grid_mismatch_rejected():
    g1 = ModeGrid.cartesian(4, 2.0)
    g2 = ModeGrid.cartesian(4, 3.0)
    with pytest.raises(ValueError):
        overlap_coherent(ModeState.vacuum(g1), ModeState.vacuum(g2))


def test_gaussian_overlap_identity_random_fields():
    g = ModeGrid.fft_pair(8, 6.0)
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(50):
        stL = random_smooth_state(g, rng)
        stR = random_smooth_state(g, rng)
        lhs, rhs = overlap_gaussian_check(stL, stR)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    assert worst < 1e-8, f"worst relative mismatch {worst:.2e}"


def test_gaussian_overlap_identical_configurations():
    g = ModeGrid.fft_pair(8, 6.0)
    rng = np.random.default_rng(3)
    st = random_smooth_state(g, rng)
    lhs, rhs = overlap_gaussian_check(st, st)
    np.testing.assert_allclose(abs(lhs), 1.0, rtol=1e-12)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_gaussian_overlap_needs_fft_grid():
    g = ModeGrid.cartesian(4, 2.0)
    with pytest.raises(ValueError):
        overlap_gaussian_check(ModeState.vacuum(g), ModeState.vacuum(g))


# ------------------------------------------------- kernel / field relations

def test_riccati_stationary_kernel():
    g = ModeGrid.cartesian(4, 2.0)
    assert riccati_stationarity(g) == 0.0


def test_riccati_wrong_kernel_flagged():
    g = ModeGrid.cartesian(4, 2.0)
    res = riccati_stationarity(g, kernel=lambda om: om)
    expected = np.max(np.abs(-2 * g.omega**2 + g.omega**2 / 2))
    np.testing.assert_allclose(res, expected, rtol=1e-12)
    assert res > 1.0


def test_b_relation_from_classical_field():
    tr = small_traj(0.3)
    g = ModeGrid.cartesian(4, 2.0)
    res = b_relation_residual(tr, POINT, g, 0.7 * tr.traverse_time)
    assert res < 1e-8, f"b-relation residual {res:.2e}"


# ------------------------------------------------------------------- export

def test_export_text_and_binary(tmp_path):
    g = ModeGrid.cartesian(4, 2.0)
    rng = np.random.default_rng(9)
    alpha = rng.normal(size=(g.n_modes, 3)) + 1j * rng.normal(size=(g.n_modes, 3))
    st = _coherent_state(g, alpha)
    txt = tmp_path / "state.txt"
    export_mode_state(st, txt, fmt="text")
    table = np.loadtxt(txt)
    assert table.shape == (3 * g.n_modes, 7)
    np.testing.assert_allclose(table[: g.n_modes, :3], g.k_points)
    np.testing.assert_allclose(table[: g.n_modes, 4], alpha[:, 0].real)
    binf = tmp_path / "state.bin"
    export_mode_state(st, binf, fmt="binary")
    raw = np.fromfile(binf, dtype="<f8").reshape(3 * g.n_modes, 7)
    np.testing.assert_allclose(raw, table)
