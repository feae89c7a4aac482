"""Mode-space simulator: each Fourier mode is an independently driven oscillator.

The field with a classical current J decomposes into modes alpha^i(k, t)
obeying  i d(alpha)/dt = omega alpha - Jt / sqrt(2 omega),  with
Jt^i(k, t) = (2 pi)^{-3/2} Int d3x J^i(x, t) e^{-i k.x}, plus a global phase
c(t) with  i dc/dt = - Int dk Jt* . alpha / sqrt(2 omega).  Everything here
operates on a discrete ModeGrid carrying quadrature weights for Int d3k.

The vacuum kernel is stationary at B(k) = omega / 2 (Riccati fixed point);
only that choice (zero squeezing) is supported.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import SmearingProfile, SmearKind, TrajectoryHalfCircle

__all__ = [
    "ModeGrid",
    "ModeState",
    "electron_drive",
    "traverse_difference_drive",
    "evolve_mode",
    "analytic_mode",
    "classical_field_modes",
    "photon_number",
    "overlap_coherent",
    "overlap_gaussian_check",
    "riccati_stationarity",
    "b_relation_residual",
    "export_mode_state",
    "random_smooth_state",
]

POLARIZATION_COUNT = 3


def _fft_keep_mask(n: int) -> np.ndarray:
    """Flat mask of the negation-paired FFT band: |index| <= (n-1)//2, k != 0."""
    idx = np.rint(np.fft.fftfreq(n) * n).astype(int)
    ix, iy, iz = np.meshgrid(idx, idx, idx, indexing="ij")
    half = (n - 1) // 2
    inband = (np.abs(ix) <= half) & (np.abs(iy) <= half) & (np.abs(iz) <= half)
    nonzero = (ix != 0) | (iy != 0) | (iz != 0)
    return (inband & nonzero).ravel()


@dataclass(frozen=True)
class ModeGrid:
    """Discrete set of k-points with weights approximating Int d3k.

    Grids are symmetric under k -> -k (neg_index maps each point to its
    partner) and exclude k = 0.  kind is one of "cartesian" (midpoint cube),
    "spherical" (Gauss radial x Gauss polar x uniform azimuth; resolves fine
    radial oscillations cheaply) and "fft" (discrete-transform pair with a
    real-space cube, for functional-overlap checks).
    """

    k_points: np.ndarray
    weights: np.ndarray
    kind: str = "cartesian"
    fft_shape: tuple | None = None
    box_length: float | None = None

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("mode weights must be positive")
        if np.any(self.omega <= 0):
            raise ValueError("k = 0 must be excluded from a ModeGrid")

    @property
    def omega(self) -> np.ndarray:
        return np.linalg.norm(self.k_points, axis=-1)

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    @property
    def polarization_count(self) -> int:
        return POLARIZATION_COUNT

    def neg_index(self) -> np.ndarray:
        """Index of the k -> -k partner of every mode."""
        key = np.round(self.k_points / (np.abs(self.k_points).max() * 1e-12)).astype(np.int64)
        lookup = {tuple(row): i for i, row in enumerate(key)}
        try:
            return np.array([lookup[tuple(-row)] for row in key])
        except KeyError as exc:
            raise ValueError("grid is not symmetric under k -> -k") from exc

    @classmethod
    def cartesian(cls, n: int, k_max: float) -> "ModeGrid":
        """Midpoint cube grid: n^3 points, no k = 0, negation-symmetric."""
        dk = 2.0 * k_max / n
        ax = -k_max + (np.arange(n) + 0.5) * dk
        kx, ky, kz = np.meshgrid(ax, ax, ax, indexing="ij")
        pts = np.stack([kx.ravel(), ky.ravel(), kz.ravel()], axis=-1)
        return cls(pts, np.full(len(pts), dk**3), kind="cartesian")

    @classmethod
    def spherical(cls, k_max: float, n_r: int, n_mu: int = 8, n_phi: int = 8,
                  r_segments: int | None = None) -> "ModeGrid":
        """Spherical product grid, composite-Gauss radial direction.

        n_phi must be even so the azimuth contains phi and phi + pi pairs.
        """
        if n_phi % 2:
            raise ValueError("n_phi must be even for k -> -k symmetry")
        if r_segments is None:
            r_segments = max(1, n_r // 8)
        per = max(2, n_r // r_segments)
        xg, wg = np.polynomial.legendre.leggauss(per)
        redges = np.linspace(0.0, k_max, r_segments + 1)
        r, wr = [], []
        for lo, hi in zip(redges[:-1], redges[1:]):
            r.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
            wr.append(0.5 * (hi - lo) * wg)
        r = np.concatenate(r)
        wr = np.concatenate(wr)
        mu, wmu = np.polynomial.legendre.leggauss(n_mu)
        phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        wphi = 2 * np.pi / n_phi
        R, MU, PH = np.meshgrid(r, mu, phi, indexing="ij")
        WR, WMU, _ = np.meshgrid(wr, wmu, phi, indexing="ij")
        st = np.sqrt(1.0 - MU**2)
        pts = np.stack([(R * st * np.cos(PH)).ravel(),
                        (R * st * np.sin(PH)).ravel(),
                        (R * MU).ravel()], axis=-1)
        w = (WR * WMU * wphi * R**2).ravel()
        return cls(pts, w, kind="spherical")

    @classmethod
    def fft_pair(cls, n: int, box_length: float) -> "ModeGrid":
        """FFT-conjugate grid of an n^3 periodic cube.

        Keeps the exactly negation-paired band (the unpaired Nyquist rows of
        an even n are dropped along with k = 0), so the kept modes and the
        band-limited real-space fields form an exact discrete transform pair.
        """
        freqs = 2 * np.pi * np.fft.fftfreq(n, d=box_length / n)
        kx, ky, kz = np.meshgrid(freqs, freqs, freqs, indexing="ij")
        pts = np.stack([kx.ravel(), ky.ravel(), kz.ravel()], axis=-1)
        keep = _fft_keep_mask(n)
        dk = 2 * np.pi / box_length
        return cls(pts[keep], np.full(keep.sum(), dk**3), kind="fft",
                   fft_shape=(n, n, n), box_length=box_length)


@dataclass(frozen=True)
class ModeState:
    """Coherent amplitudes alpha^i(k, t) plus the global phase c(t).

    squeeze_f is the frozen-to-zero squeezing function hook: only the
    stationary vacuum kernel is implemented and operations reject any other
    value as unsupported.
    """

    grid: ModeGrid
    alpha: np.ndarray            # (n_modes, 3) complex
    c_phase: complex
    time: float
    drive: object = None         # callable t -> (n_modes, 3) complex, or None
    squeeze_f: float = 0.0

    def __post_init__(self):
        if self.squeeze_f != 0.0:
            raise NotImplementedError(
                "nonzero squeezing is unsupported (stationary kernel only)")
        if self.alpha.shape != (self.grid.n_modes, POLARIZATION_COUNT):
            raise ValueError("alpha must have shape (n_modes, 3)")

    @classmethod
    def vacuum(cls, grid: ModeGrid, drive=None) -> "ModeState":
        return cls(grid, np.zeros((grid.n_modes, POLARIZATION_COUNT), complex),
                   0.0 + 0.0j, 0.0, drive)


def _smear_factor(smear: SmearingProfile, kz: np.ndarray) -> np.ndarray:
    """Fourier factor of the charge profile (real for the centred line)."""
    if smear.kind is SmearKind.POINT:
        return np.ones_like(kz)
    x = kz * smear.sigma / 2.0
    xs = np.where(np.abs(x) < 1e-30, 1.0, x)
    return np.where(np.abs(x) < 1e-30, 1.0, np.sin(xs) / xs)


def electron_drive(traj: TrajectoryHalfCircle, smear: SmearingProfile,
                   grid: ModeGrid):
    """Fourier transform of the traverse current: callable t -> (n, 3) complex.

    Jt(k, t) = (2 pi)^{-3/2} e u(t) exp(-i k . x(t)) S(k_z); zero outside
    [0, T] (the traverse drive switches off when the packets recombine).
    """
    pref = (2 * np.pi) ** (-1.5) * traj.charge
    S = _smear_factor(smear, grid.k_points[:, 2])
    T = traj.traverse_time

    def drive(t: float) -> np.ndarray:
        # a few-ulp tolerance so integrator stages that land on T by rounding
        # still see the final current sample
        if t < 0.0 or t > T * (1 + 1e-13):
            return np.zeros((grid.n_modes, POLARIZATION_COUNT), complex)
        pos, vel = traj.point_velocity_extended(np.asarray(min(t, T)))
        phase = np.exp(-1j * (grid.k_points @ pos.reshape(3)))
        return pref * (S * phase)[:, None] * vel.reshape(1, 3)

    return drive


def traverse_difference_drive(traj_right: TrajectoryHalfCircle,
                              smear: SmearingProfile, grid: ModeGrid):
    """Drive of the right-minus-left current difference."""
    dr = electron_drive(traj_right, smear, grid)
    dl = electron_drive(traj_right.mirrored(), smear, grid)
    return lambda t: dr(t) - dl(t)


def evolve_mode(state: ModeState, dt: float, steps: int) -> ModeState:
    """Classical Runge-Kutta (4th order) integration of the driven modes.

    Requires dt * omega_max <= 0.5; a coarser step raises an error naming the
    worst mode.  The drive attached to the state supplies Jt(k, t).
    """
    if state.squeeze_f != 0.0:
        raise NotImplementedError("nonzero squeezing is unsupported")
    om = state.grid.omega
    worst = int(np.argmax(om))
    if dt * om[worst] > 0.5:
        raise ValueError(
            f"dt * omega = {dt * om[worst]:.3f} > 0.5 for mode {worst} "
            f"(|k| = {om[worst]:.4g}); reduce dt")
    drive = state.drive if state.drive is not None else (
        lambda t: np.zeros((state.grid.n_modes, POLARIZATION_COUNT), complex))
    w = state.grid.weights
    sq = np.sqrt(2.0 * om)

    def rhs(t, alpha):
        J = drive(t)
        dalpha = -1j * (om[:, None] * alpha) + 1j * J / sq[:, None]
        dc = 1j * np.sum(w[:, None] * np.conj(J) * alpha / sq[:, None])
        return dalpha, dc

    alpha = state.alpha.copy()
    c = complex(state.c_phase)
    t0 = state.time
    for i in range(steps):
        # stage times from i * dt, not accumulation: the final stage must not
        # drift past the drive support by rounding
        t = t0 + i * dt
        k1a, k1c = rhs(t, alpha)
        k2a, k2c = rhs(t + dt / 2, alpha + dt / 2 * k1a)
        k3a, k3c = rhs(t + dt / 2, alpha + dt / 2 * k2a)
        k4a, k4c = rhs(t + dt, alpha + dt * k3a)
        alpha = alpha + dt / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        c = c + dt / 6 * (k1c + 2 * k2c + 2 * k3c + k4c)
    return replace(state, alpha=alpha, c_phase=c, time=t0 + steps * dt)


def _time_segments(t_final: float, omega_max: float, max_phase: float = 1.5,
                   min_segments: int = 16):
    nseg = max(min_segments, int(np.ceil(omega_max * t_final / max_phase)))
    edges = np.linspace(0.0, t_final, nseg + 1)
    return edges


_GL8 = np.polynomial.legendre.leggauss(8)


def analytic_mode(traj: TrajectoryHalfCircle, smear: SmearingProfile,
                  grid: ModeGrid, t: float, drive=None) -> ModeState:
    """Closed-form mode amplitudes by segmented direct quadrature.

    alpha(k, t) = (i / sqrt(2 omega)) Int_0^t e^{-i omega (t - t')} Jt(k, t') dt'
    and the phase c(t) accumulated from dc/dt = i <Jt*, alpha> / sqrt(2 omega).
    The real part of c is fixed by construction to -(1/2) Sum w |alpha|^2,
    which the quadrature route also satisfies; the imaginary part is the
    accumulated current-field phase.
    """
    if drive is None:
        drive = electron_drive(traj, smear, grid)
    om = grid.omega
    sq = np.sqrt(2.0 * om)
    w = grid.weights
    edges = _time_segments(t, float(om.max()))
    xg, wg = _GL8
    S = np.zeros((grid.n_modes, POLARIZATION_COUNT), complex)  # Int e^{i om t'} Jt dt'
    c_im = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        tsub = mid + half * xg
        # segment increments of S at the outer Gauss nodes, then the segment total
        Jsub = [drive(ts) for ts in tsub]
        phases = np.exp(1j * om[:, None] * tsub[None, :])
        # alpha at each outer node needs the partial integral up to that node:
        # inner 8-point Gauss on [lo, ts]
        for gi, ts in enumerate(tsub):
            ihalf = 0.5 * (ts - lo)
            imid = 0.5 * (ts + lo)
            tin = imid + ihalf * xg
            part = np.zeros_like(S)
            for gj, ti in enumerate(tin):
                part += (ihalf * wg[gj]) * drive(ti) * \
                    np.exp(1j * om[:, None] * ti)
            alpha_here = 1j / sq[:, None] * np.exp(-1j * om[:, None] * ts) * (S + part)
            integrand = 1j * np.sum(
                w[:, None] * np.conj(Jsub[gi]) * alpha_here / sq[:, None])
            c_im += (half * wg[gi]) * integrand.imag
        seg = np.zeros_like(S)
        for gj in range(8):
            seg += (half * wg[gj]) * Jsub[gj] * phases[:, gj][:, None]
        S = S + seg
    alpha = 1j / sq[:, None] * np.exp(-1j * om[:, None] * t) * S
    c = -0.5 * np.sum(w[:, None] * np.abs(alpha) ** 2) + 1j * c_im
    return ModeState(grid, alpha, complex(c), t, drive)


def classical_field_modes(traj: TrajectoryHalfCircle, smear: SmearingProfile,
                          grid: ModeGrid, t: float, drive=None):
    """Mode amplitudes of the classical field and its time derivative.

    At(k, t) = Int_0^t Jt(k, t') sin(omega (t - t')) / omega dt' and
    Vt = d(At)/dt with the cosine kernel, by the same segmented quadrature
    but through the real trigonometric kernels (an independent code path
    from analytic_mode).
    """
    if drive is None:
        drive = electron_drive(traj, smear, grid)
    om = grid.omega
    edges = _time_segments(t, float(om.max()))
    xg, wg = _GL8
    Ssin = np.zeros((grid.n_modes, POLARIZATION_COUNT), complex)
    Scos = np.zeros_like(Ssin)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for gj in range(8):
            ts = mid + half * xg[gj]
            J = drive(ts)
            Ssin += (half * wg[gj]) * J * np.sin(om[:, None] * ts)
            Scos += (half * wg[gj]) * J * np.cos(om[:, None] * ts)
    s, c = np.sin(om * t)[:, None], np.cos(om * t)[:, None]
    At = (s * Scos - c * Ssin) / om[:, None]
    Vt = c * Scos + s * Ssin
    return At, Vt


def photon_number(state: ModeState) -> float:
    """Sum_k w |alpha|^2 over modes and polarizations (for the difference
    state alpha_R - alpha_L this is twice the decoherence exponent)."""
    import math
    terms = (state.grid.weights[:, None] * np.abs(state.alpha) ** 2).ravel()
    return math.fsum(terms.tolist())


def overlap_coherent(state_l: ModeState, state_r: ModeState) -> complex:
    """<L|R> = exp( Sum w alpha_L* . alpha_R + c_R + c_L* ), the coherent form.

    The left state is the conjugated one, so its phase enters conjugated;
    the modulus is exp(-(1/2) Sum w |alpha_R - alpha_L|^2) once each c carries
    its -(1/2) Sum w |alpha|^2 normalisation.
    """
    if state_l.grid is not state_r.grid and not (
            state_l.grid.n_modes == state_r.grid.n_modes
            and np.array_equal(state_l.grid.k_points, state_r.grid.k_points)):
        raise ValueError("overlap requires both states on the same mode grid")
    w = state_l.grid.weights
    inner = np.sum(w[:, None] * np.conj(state_l.alpha) * state_r.alpha)
    return complex(np.exp(inner + state_r.c_phase + np.conj(state_l.c_phase)))


def _fields_from_state(state: ModeState):
    """Real-space A and Adot on the fft cube (requires an fft-pair grid)."""
    grid = state.grid
    if grid.kind != "fft":
        raise ValueError("field reconstruction needs an fft-pair ModeGrid")
    n = grid.fft_shape[0]
    L = grid.box_length
    neg = grid.neg_index()
    om = grid.omega
    At = (state.alpha + np.conj(state.alpha[neg])) / np.sqrt(2 * om)[:, None]
    Vt = -1j * np.sqrt(om / 2)[:, None] * (state.alpha - np.conj(state.alpha[neg]))
    keep = _fft_keep_mask(n)
    dk = 2 * np.pi / L
    A = np.zeros((n**3, 3))
    V = np.zeros((n**3, 3))
    # inverse transform: A(x) = (2 pi)^{-3/2} Sum_k w At(k) e^{i k.x}
    full_At = np.zeros((n**3, 3), complex)
    full_Vt = np.zeros((n**3, 3), complex)
    full_At[keep] = At
    full_Vt[keep] = Vt
    fac = dk**3 * n**3 / (2 * np.pi) ** 1.5
    for i in range(3):
        A[:, i] = np.fft.ifftn(full_At[:, i].reshape(n, n, n)).real.ravel() * fac
        V[:, i] = np.fft.ifftn(full_Vt[:, i].reshape(n, n, n)).real.ravel() * fac
    return A.reshape(n, n, n, 3), V.reshape(n, n, n, 3)


def state_from_fields(grid: ModeGrid, A: np.ndarray, Adot: np.ndarray,
                      c_extra: float = 0.0) -> ModeState:
    """Coherent state whose mean field and field velocity are (A, Adot).

    alpha(k) = sqrt(omega/2) At(k) + (i/sqrt(2 omega)) Vt(k); the phase c is
    fixed to -(1/2) Sum w |alpha|^2 + i c_extra.
    """
    if grid.kind != "fft":
        raise ValueError("state_from_fields needs an fft-pair ModeGrid")
    n = grid.fft_shape[0]
    L = grid.box_length
    dx3 = (L / n) ** 3
    keep = _fft_keep_mask(n)
    At = np.empty((grid.n_modes, 3), complex)
    Vt = np.empty((grid.n_modes, 3), complex)
    fac = dx3 / (2 * np.pi) ** 1.5
    for i in range(3):
        At[:, i] = np.fft.fftn(A[..., i]).ravel()[keep] * fac
        Vt[:, i] = np.fft.fftn(Adot[..., i]).ravel()[keep] * fac
    om = grid.omega
    alpha = np.sqrt(om / 2)[:, None] * At + 1j / np.sqrt(2 * om)[:, None] * Vt
    c = -0.5 * np.sum(grid.weights[:, None] * np.abs(alpha) ** 2) + 1j * c_extra
    return ModeState(grid, alpha, complex(c), 0.0)


def random_smooth_state(grid: ModeGrid, rng, corr: float = 0.35) -> ModeState:
    """Random smooth real field configuration as a coherent state (test aid)."""
    n = grid.fft_shape[0]
    L = grid.box_length
    x = np.arange(n) * (L / n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    A = np.zeros((n, n, n, 3))
    V = np.zeros((n, n, n, 3))
    kbase = 2 * np.pi / L
    for i in range(3):
        for fld in (A, V):
            acc = np.zeros((n, n, n))
            for _ in range(4):
                m = rng.integers(-2, 3, 3)
                amp = rng.normal() * corr
                ph = rng.uniform(0, 2 * np.pi)
                acc += amp * np.cos(kbase * (m[0] * X + m[1] * Y + m[2] * Z) + ph)
            fld[..., i] = acc - acc.mean()
    return state_from_fields(grid, A, V)


def overlap_gaussian_check(state_l: ModeState, state_r: ModeState,
                           field_grid: ModeGrid | None = None):
    """The overlap evaluated two ways: coherent form vs Gaussian-functional form.

    Returns (lhs, rhs): lhs from the alpha representation, rhs from the
    quadratic forms in (A_R - A_L) and (Adot_R - Adot_L) with the stationary
    kernel and its inverse, plus the cross phase
    -(1/2) Int (Adot_R + Adot_L).(A_R - A_L)
    and the single-state phase terms.  The two are identical analytically;
    the pair is computed through genuinely different code paths (mode sums
    against FFT reconstruction and real-space sums).
    """
    grid = state_l.grid if field_grid is None else field_grid
    if grid.kind != "fft":
        raise ValueError("overlap_gaussian_check needs an fft-pair ModeGrid")
    lhs = overlap_coherent(state_l, state_r)

    Al, Vl = _fields_from_state(state_l)
    Ar, Vr = _fields_from_state(state_r)
    n = grid.fft_shape[0]
    L = grid.box_length
    dx3 = (L / n) ** 3
    dA = Ar - Al
    dV = Vr - Vl
    # quadratic forms through the kernel omega/2 and its inverse 2/omega
    keep = _fft_keep_mask(n)
    om = grid.omega
    fac = dx3 / (2 * np.pi) ** 1.5
    qa = 0.0
    qv = 0.0
    for i in range(3):
        dAt = np.fft.fftn(dA[..., i]).ravel()[keep] * fac
        dVt = np.fft.fftn(dV[..., i]).ravel()[keep] * fac
        qa += np.sum(grid.weights * (om / 2) * np.abs(dAt) ** 2)
        qv += np.sum(grid.weights * (2 / om) * np.abs(dVt) ** 2)
    cross = -0.5 * dx3 * np.sum((Vr + Vl) * dA)
    single = 0.5 * dx3 * (np.sum(Vr * Ar) - np.sum(Vl * Al))
    # current-phase parts of c enter both forms identically
    gamma = state_r.c_phase.imag - state_l.c_phase.imag
    rhs = complex(np.exp(-0.5 * qa - 0.125 * qv + 1j * (cross + single + gamma)))
    return lhs, rhs


def riccati_stationarity(grid: ModeGrid, kernel=None) -> float:
    """Max residual of the stationarity condition 2 B_k^2 = omega^2 / 2.

    kernel maps omega -> B_k; the implemented vacuum kernel omega/2 gives
    zero residual, anything else is flagged by the returned magnitude.
    """
    om = grid.omega
    B = om / 2 if kernel is None else kernel(om)
    return float(np.max(np.abs(-2.0 * B**2 + om**2 / 2.0)))


def b_relation_residual(traj, smear, grid: ModeGrid, t: float) -> float:
    """Mode-wise residual of the linear-coefficient relation
    i b = 2 B A_cl + i Adot_cl, i.e. sqrt(2 omega) alpha = omega At + i Vt.

    alpha comes from the complex-kernel quadrature, (At, Vt) from the real
    trigonometric kernels; the relative max residual measures their
    consistency.
    """
    st = analytic_mode(traj, smear, grid, t)
    At, Vt = classical_field_modes(traj, smear, grid, t)
    om = grid.omega[:, None]
    lhs = np.sqrt(2.0 * om) * st.alpha
    rhs = om * At + 1j * Vt
    scale = np.max(np.abs(lhs)) + 1e-300
    return float(np.max(np.abs(lhs - rhs)) / scale)


def export_mode_state(state: ModeState, path, fmt: str = "text") -> None:
    """Snapshot of the mode amplitudes.

    text: whitespace table, one row per (mode, polarization):
          kx ky kz pol Re(alpha) Im(alpha) weight
    binary: the same seven float64 columns, little-endian ('<f8'), row-major,
            no header.
    """
    g = state.grid
    rows = []
    for i in range(POLARIZATION_COUNT):
        block = np.column_stack([
            g.k_points,
            np.full(g.n_modes, float(i)),
            state.alpha[:, i].real,
            state.alpha[:, i].imag,
            g.weights,
        ])
        rows.append(block)
    table = np.concatenate(rows, axis=0)
    if fmt == "text":
        header = "kx ky kz pol re_alpha im_alpha weight"
        np.savetxt(path, table, header=header)
    elif fmt == "binary":
        table.astype("<f8").tofile(path)
    else:
        raise ValueError("fmt must be 'text' or 'binary'")
