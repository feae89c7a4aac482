"""Electron traverses, smeared currents, solenoid model, coupling constants.

Geometry conventions (natural units, lengths in units of the orbit radius):
the solenoid axis is z, the electron orbits in the z = 0 plane at radius R.
The right traverse runs counterclockwise from angle -pi/2 to +pi/2 in time
T = pi R / u; the left traverse runs clockwise from 3pi/2 to pi/2.  The two
are exchanged by a 180-degree rotation about the y axis,
(x, y, z) -> (-x, y, -z).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Sense(enum.Enum):
    RIGHT = "right"  # counterclockwise
    LEFT = "left"    # clockwise


class SmearKind(enum.Enum):
    POINT = "point"
    LINE_Z = "line_z"


class SolenoidKind(enum.Enum):
    IDEAL_INFINITE = "ideal_infinite"
    FINITE_LOOPS = "finite_loops"


@dataclass(frozen=True)
class UnitsAndCouplings:
    """Dimensionless parameter group: coupling e^2/(hbar c), beta = u/c, lam = sigma/R."""

    beta: float
    lam: float
    fine_structure: float = 1.0 / 137.036

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must satisfy 0 < beta < 1, got {self.beta}")
        if not self.lam > 0.0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not self.fine_structure > 0.0:
            raise ValueError(f"fine_structure must be > 0, got {self.fine_structure}")


@dataclass(frozen=True)
class TrajectoryHalfCircle:
    """Half-circle traverse of the electron around the solenoid.

    speed is u in units of c.  ramp_fraction eta >= 0 smooths the impulsive
    start: |velocity| rises from 0 to u over [0, eta*T] (sin^2 profile) and
    stays u afterwards.  With eta > 0 the traverse ends short of the nominal
    final angle by eta*pi/2 radians; eta = 0 reproduces the exact half circle.
    """

    radius: float
    speed: float
    sense: Sense
    ramp_fraction: float = 0.0
    charge: float = 1.0

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        if not 0.0 < self.speed < 1.0:
            raise ValueError(f"speed must satisfy 0 < u < 1 (c = 1), got {self.speed}")
        if self.ramp_fraction < 0.0 or self.ramp_fraction >= 1.0:
            raise ValueError("ramp_fraction must lie in [0, 1)")

    @property
    def traverse_time(self) -> float:
        return np.pi * self.radius / self.speed

    @property
    def start_angle(self) -> float:
        return -np.pi / 2 if self.sense is Sense.RIGHT else 3 * np.pi / 2

    @property
    def angle_rate_sign(self) -> float:
        return +1.0 if self.sense is Sense.RIGHT else -1.0

    def _arc_speed(self, t):
        """Arc length travelled and instantaneous speed at time t (array ok).

        Defined for all real t: at rest with zero arc before t = 0, and the
        circular motion continues smoothly past the traverse time (needed for
        centred time derivatives of the retarded field at t = T; currents are
        only ever integrated over [0, T]).
        """
        t = np.asarray(t, dtype=float)
        u = self.speed
        T = self.traverse_time
        eta = self.ramp_fraction
        if eta == 0.0:
            arc = u * np.clip(t, 0.0, None)
            spd = np.where(t >= 0.0, u, 0.0)
            return arc, spd
        t_ramp = eta * T
        tc = np.clip(t, 0.0, None)
        in_ramp = tc < t_ramp
        # speed = u sin^2(pi t / (2 t_ramp)) during the ramp
        spd = np.where(in_ramp, u * np.sin(np.pi * tc / (2 * t_ramp)) ** 2, u)
        spd = np.where(t >= 0.0, spd, 0.0)
        arc_ramp = u * (tc / 2 - (t_ramp / (2 * np.pi)) * np.sin(np.pi * tc / t_ramp))
        arc = np.where(in_ramp, arc_ramp, u * t_ramp / 2 + u * (tc - t_ramp))
        return arc, spd

    def point_velocity_extended(self, t):
        """Position (N,3) and velocity (N,3) for arbitrary t (see _arc_speed)."""
        t = np.asarray(t, dtype=float)
        arc, spd = self._arc_speed(t)
        phi = self.start_angle + self.angle_rate_sign * arc / self.radius
        c, s = np.cos(phi), np.sin(phi)
        pos = np.stack([self.radius * c, self.radius * s, np.zeros_like(phi)], axis=-1)
        tang = self.angle_rate_sign * np.stack([-s, c, np.zeros_like(phi)], axis=-1)
        vel = spd[..., None] * tang
        return pos, vel

    def angle(self, t):
        arc, _ = self._arc_speed(t)
        return self.start_angle + self.angle_rate_sign * arc / self.radius

    def mirrored(self) -> "TrajectoryHalfCircle":
        """The opposite-sense traverse (same radius, speed, ramp)."""
        other = Sense.LEFT if self.sense is Sense.RIGHT else Sense.RIGHT
        return TrajectoryHalfCircle(self.radius, self.speed, other,
                                    self.ramp_fraction, self.charge)


@dataclass(frozen=True)
class SmearingProfile:
    """Charge smearing: POINT, or LINE_Z, a uniform line of extent sigma along z.

    The line is centred on the trajectory plane (z in [-sigma/2, sigma/2]);
    this preserves the exact 180-degree-about-y exchange symmetry of the two
    traverses, and every quadratic (overlap) quantity is unchanged relative to
    a one-sided line because only |smear factor|^2 enters there.
    """

    kind: SmearKind = SmearKind.POINT
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind is SmearKind.LINE_Z and self.sigma <= 0.0:
            raise ValueError("LINE_Z smearing requires sigma > 0")

    def offsets_weights(self, n: int = 16):
        """Gauss-Legendre nodes/weights for the line parameter (unit total weight)."""
        if self.kind is SmearKind.POINT:
            return np.zeros(1), np.ones(1)
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * self.sigma * x, 0.5 * w


@dataclass(frozen=True)
class SolenoidModel:
    """Solenoid of radius a carrying total flux through its cross-section.

    IDEAL_INFINITE uses the analytic azimuthal potential.  FINITE_LOOPS models
    the winding as n_loops coaxial circular loops spread uniformly over length
    L, each carrying loop_current; the mid-plane enclosed flux converges to
    the nominal flux in the long, tightly wound limit.
    """

    solenoid_radius: float
    flux: float
    kind: SolenoidKind = SolenoidKind.FINITE_LOOPS
    n_loops: int = 200
    length: float = 20.0

    def __post_init__(self):
        if self.solenoid_radius <= 0.0:
            raise ValueError("solenoid_radius must be positive")
        if self.kind is SolenoidKind.FINITE_LOOPS:
            if self.n_loops < 2:
                raise ValueError("FINITE_LOOPS needs n_loops >= 2")
            if self.length <= 0.0:
                raise ValueError("FINITE_LOOPS needs length > 0")

    @property
    def loop_current(self) -> float:
        """Per-loop current reproducing the nominal flux in the ideal limit.

        B_inside = I * n / L for a long solenoid (wave-equation normalisation,
        A = Int J / (4 pi |x - x'|)), so I = flux * L / (pi a^2 n).
        """
        a = self.solenoid_radius
        return self.flux * self.length / (np.pi * a * a * self.n_loops)

    def loop_positions(self) -> np.ndarray:
        """z-coordinates of the loops (uniform, centred on the mid-plane)."""
        n, L = self.n_loops, self.length
        return -L / 2 + (np.arange(n) + 0.5) * (L / n)


def position_velocity(traj: TrajectoryHalfCircle, t: float):
    """Electron position and velocity at time t in [0, T]."""
    T = traj.traverse_time
    if np.any(np.asarray(t) < 0.0) or np.any(np.asarray(t) > T * (1 + 1e-12)):
        raise ValueError(f"t must lie in [0, T = {T:g}]")
    pos, vel = traj.point_velocity_extended(t)
    return pos, vel


def mirror_map(x):
    """180-degree rotation about the y axis: (x, y, z) -> (-x, y, -z)."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    out[..., 0] *= -1.0
    out[..., 2] *= -1.0
    return out


# vectors transform the same way under a rotation
mirror_vector = mirror_map


def current_density(traj: TrajectoryHalfCircle, smear: SmearingProfile, x, t: float):
    """Current density of the (possibly smeared) electron charge at (x, t).

    For POINT the transverse delta support is implicit: the returned value is
    zero off the instantaneous electron position and e*u(t) on it (the delta
    normalisation is carried by the caller's quadrature).  For LINE_Z the
    delta factors transverse to the line are implicit in the same way and the
    returned value on the support is the line density e*u(t)/sigma.
    """
    T = traj.traverse_time
    if t < 0.0 or t > T * (1 + 1e-12):
        raise ValueError(f"t must lie in [0, T = {T:g}]")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pos, vel = traj.point_velocity_extended(np.asarray(t))
    ev = traj.charge * vel.reshape(3)
    d = x - pos.reshape(3)
    out = np.zeros_like(x)
    tol = 1e-12 * max(traj.radius, 1.0)
    if smear.kind is SmearKind.POINT:
        on = (np.abs(d) < tol).all(axis=-1)
        out[on] = ev
    else:
        transverse = (np.abs(d[:, 0]) < tol) & (np.abs(d[:, 1]) < tol)
        along = np.abs(d[:, 2]) <= smear.sigma / 2 + tol
        out[transverse & along] = ev / smear.sigma
    return out if out.shape[0] > 1 else out[0]
