"""Closed-form 3D motion models for UAV tracking.

Three models of increasing richness, all sharing the state tuple
(x, y, z, theta, phi, v, a, omega, psi):

* DR        -- straight line at constant speed and heading.
* CTRA+     -- constant turn rate omega and tangential acceleration a on a
               plane tilted by a fixed pitch phi (Archimedean spiral).
* 3D-CTRA   -- adds a constant tilt rate psi = d(phi)/dt, producing a curved
               helix from two independent spiraling motions.

The kinematic ODE integrated by every model is

    dx/dt = v(t) cos(theta(t)) cos(phi(t))
    dy/dt = v(t) sin(theta(t)) cos(phi(t))
    dz/dt = v(t) sin(phi(t))

with theta(t) = theta0 + omega*t, phi(t) = phi0 + psi*t and
v(t) = v0 + a*t.  Position updates are exact closed forms; the 3D-CTRA
integrals have removable singularities at psi = 0 and omega = +/-psi, which
are handled by dispatching on :func:`classify_regime` rather than by series
expansion.

Units are SI throughout: meters, radians, seconds.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

# State vector layout shared by all models.  DR uses the first 6 components,
# CTRA+ the first 8, 3D-CTRA all 9.
STATE_FIELDS = ("x", "y", "z", "theta", "phi", "v", "a", "omega", "psi")
STATE_DIM = 9
IX, IY, IZ, ITHETA, IPHI, IV, IA, IOMEGA, IPSI = range(STATE_DIM)

#: Rates below this magnitude (rad/s) are treated as zero when choosing the
#: closed-form branch.  Kept small so branch continuity stays testable.
EPS_RATE = 1e-6


class ModelKind(Enum):
    """Which motion model drives propagation (and the filter state size)."""

    DR = "dr"
    CTRA_PLUS = "ctra+"
    CTRA_3D = "3d-ctra"


#: State dimension used by the filters for each model.
MODEL_DIM = {ModelKind.DR: 6, ModelKind.CTRA_PLUS: 8, ModelKind.CTRA_3D: 9}


class RegimeClass(Enum):
    """Singular-regime classification of the (omega, psi) pair."""

    GENERIC = 0
    PSI_ZERO = 1
    OMEGA_EQ_PSI = 2
    OMEGA_EQ_NEG_PSI = 3
    BOTH_ZERO = 4


def wrap_angle(theta):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


def _reflect_attitude(theta, phi, psi):
    """Map raw (theta, phi, psi) onto the chart theta in [-pi, pi),
    phi in [-pi/2, pi/2].

    A pitch beyond +/-pi/2 is an over-the-top maneuver: reflect phi about
    the pole, turn theta by pi, and flip the sign of psi so the reflected
    chart keeps tracing the same physical trajectory.
    """
    theta = np.asarray(theta, dtype=float)
    phi = wrap_angle(phi)
    psi = np.asarray(psi, dtype=float)
    over = np.abs(phi) > np.pi / 2
    phi = np.where(over, np.sign(phi) * np.pi - phi, phi)
    theta = wrap_angle(np.where(over, theta + np.pi, theta))
    psi = np.where(over, -psi, psi)
    return theta, phi, psi


@dataclass(frozen=True)
class UavState:
    """Full kinematic state of the drone.

    Attributes
    ----------
    x, y, z : position, m
    theta   : yaw, rad, normalized to [-pi, pi)
    phi     : pitch, rad, in [-pi/2, pi/2]
    v       : speed magnitude, m/s, >= 0
    a       : tangential acceleration, m/s^2
    omega   : yaw rate, rad/s
    psi     : tilt rate, rad/s
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    theta: float = 0.0
    phi: float = 0.0
    v: float = 0.0
    a: float = 0.0
    omega: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        vals = [self.x, self.y, self.z, self.theta, self.phi,
                self.v, self.a, self.omega, self.psi]
        if not all(math.isfinite(u) for u in vals):
            raise ValueError(f"non-finite state component: {vals}")
        if self.v < 0:
            raise ValueError(f"speed must be nonnegative, got {self.v}")
        th, ph, ps = _reflect_attitude(self.theta, self.phi, self.psi)
        object.__setattr__(self, "theta", float(th))
        object.__setattr__(self, "phi", float(ph))
        object.__setattr__(self, "psi", float(ps))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.theta, self.phi,
                         self.v, self.a, self.omega, self.psi])

    @classmethod
    def from_array(cls, arr) -> "UavState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (STATE_DIM,):
            raise ValueError(f"expected shape ({STATE_DIM},), got {arr.shape}")
        return cls(*arr)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def velocity_components(state: UavState) -> tuple[float, float, float]:
    """Project the speed magnitude onto the axes via the attitude angles."""
    cphi = math.cos(state.phi)
    vx = state.v * math.cos(state.theta) * cphi
    vy = state.v * math.sin(state.theta) * cphi
    vz = state.v * math.sin(state.phi)
    return vx, vy, vz


def classify_regime(omega: float, psi: float, eps_rate: float = EPS_RATE) -> RegimeClass:
    """Classify (omega, psi) into the closed-form branch to use.

    Precedence: BOTH_ZERO, PSI_ZERO, OMEGA_EQ_PSI, OMEGA_EQ_NEG_PSI, GENERIC.
    Exactly one class is returned for any input.
    """
    if eps_rate <= 0:
        raise ValueError("eps_rate must be positive")
    if abs(omega) < eps_rate and abs(psi) < eps_rate:
        return RegimeClass.BOTH_ZERO
    if abs(psi) < eps_rate:
        return RegimeClass.PSI_ZERO
    if abs(omega - psi) < eps_rate:
        return RegimeClass.OMEGA_EQ_PSI
    if abs(omega + psi) < eps_rate:
        return RegimeClass.OMEGA_EQ_NEG_PSI
    return RegimeClass.GENERIC


def _classify_codes(omega: np.ndarray, psi: np.ndarray, eps: float) -> np.ndarray:
    """Vectorized classify_regime returning RegimeClass values as int codes."""
    codes = np.full(omega.shape, RegimeClass.GENERIC.value)
    codes = np.where(np.abs(omega + psi) < eps, RegimeClass.OMEGA_EQ_NEG_PSI.value, codes)
    codes = np.where(np.abs(omega - psi) < eps, RegimeClass.OMEGA_EQ_PSI.value, codes)
    codes = np.where(np.abs(psi) < eps, RegimeClass.PSI_ZERO.value, codes)
    codes = np.where((np.abs(omega) < eps) & (np.abs(psi) < eps),
                     RegimeClass.BOTH_ZERO.value, codes)
    return codes


def _delta_z_spiral(ph0, ps, v0, a, te):
    """[-v cos(phi)/psi + a sin(phi)/psi^2]_0^te, valid for |psi| >= eps."""
    ph_t = ph0 + ps * te
    v_t = v0 + a * te
    f_t = -v_t * np.cos(ph_t) / ps + a * np.sin(ph_t) / ps**2
    f_0 = -v0 * np.cos(ph0) / ps + a * np.sin(ph0) / ps**2
    return f_t - f_0


def _delta_generic(th0, ph0, v0, a, om, ps, te):
    sp = om + ps
    sm = om - ps
    th_t = th0 + om * te
    ph_t = ph0 + ps * te
    v_t = v0 + a * te
    p0, m0 = th0 + ph0, th0 - ph0
    pt, mt = th_t + ph_t, th_t - ph_t

    def fx(v, p, m):
        return (v * np.sin(p) / (2 * sp) + v * np.sin(m) / (2 * sm)
                + a * np.cos(p) / (2 * sp**2) + a * np.cos(m) / (2 * sm**2))

    def fy(v, p, m):
        return (-v * np.cos(p) / (2 * sp) - v * np.cos(m) / (2 * sm)
                + a * np.sin(p) / (2 * sp**2) + a * np.sin(m) / (2 * sm**2))

    dx = fx(v_t, pt, mt) - fx(v0, p0, m0)
    dy = fy(v_t, pt, mt) - fy(v0, p0, m0)
    dz = _delta_z_spiral(ph0, ps, v0, a, te)
    return dx, dy, dz


def _delta_psi_zero(th0, ph0, v0, a, om, te):
    """CTRA+ closed form: 2D CTRA scaled by cos(phi), linear climb."""
    th_t = th0 + om * te
    v_t = v0 + a * te
    cph = np.cos(ph0)

    def gx(v, th):
        return (v * om * np.sin(th) + a * np.cos(th)) / om**2

    def gy(v, th):
        return (-v * om * np.cos(th) + a * np.sin(th)) / om**2

    dx = cph * (gx(v_t, th_t) - gx(v0, th0))
    dy = cph * (gy(v_t, th_t) - gy(v0, th0))
    dz = np.sin(ph0) * (v0 * te + 0.5 * a * te**2)
    return dx, dy, dz


def _delta_both_zero(th0, ph0, v0, a, te):
    """Straight line with tangential acceleration along the fixed heading."""
    arc = v0 * te + 0.5 * a * te**2
    cph = np.cos(ph0)
    return arc * np.cos(th0) * cph, arc * np.sin(th0) * cph, arc * np.sin(ph0)


def _delta_omega_eq_psi(th0, ph0, v0, a, om, ps, te):
    """omega = psi: theta - phi is frozen, only the sum angle spirals."""
    sp = om + ps
    th_t = th0 + om * te
    ph_t = ph0 + ps * te
    v_t = v0 + a * te
    p0, pt = th0 + ph0, th_t + ph_t
    m0 = th0 - ph0
    drift = 0.5 * v0 * te + 0.25 * a * te**2

    def ax(v, p):
        return v * np.sin(p) / (2 * sp) + a * np.cos(p) / (2 * sp**2)

    def ay(v, p):
        return -v * np.cos(p) / (2 * sp) + a * np.sin(p) / (2 * sp**2)

    dx = ax(v_t, pt) - ax(v0, p0) + np.cos(m0) * drift
    dy = ay(v_t, pt) - ay(v0, p0) + np.sin(m0) * drift
    dz = _delta_z_spiral(ph0, ps, v0, a, te)
    return dx, dy, dz


def _delta_omega_eq_neg_psi(th0, ph0, v0, a, om, ps, te):
    """omega = -psi: the mirror case, theta + phi frozen instead."""
    sm = om - ps
    th_t = th0 + om * te
    ph_t = ph0 + ps * te
    v_t = v0 + a * te
    m0, mt = th0 - ph0, th_t - ph_t
    p0 = th0 + ph0
    drift = 0.5 * v0 * te + 0.25 * a * te**2

    def bx(v, m):
        return v * np.sin(m) / (2 * sm) + a * np.cos(m) / (2 * sm**2)

    def by(v, m):
        return -v * np.cos(m) / (2 * sm) + a * np.sin(m) / (2 * sm**2)

    dx = bx(v_t, mt) - bx(v0, m0) + np.cos(p0) * drift
    dy = by(v_t, mt) - by(v0, m0) + np.sin(p0) * drift
    dz = _delta_z_spiral(ph0, ps, v0, a, te)
    return dx, dy, dz


def _propagate_turning(states: np.ndarray, dt: np.ndarray, use_psi: bool,
                       eps_rate: float) -> np.ndarray:
    """Shared CTRA+ / 3D-CTRA kernel over a (n, 9) state block.

    CTRA+ is the psi = 0 slice of the same integrals, so both models run
    through here; ``use_psi`` selects whether the state's tilt rate drives
    the pitch or is carried along untouched.
    """
    out = states.copy()
    th0 = states[:, ITHETA]
    ph0 = states[:, IPHI]
    v0 = np.maximum(states[:, IV], 0.0)
    a = states[:, IA]
    om = states[:, IOMEGA]
    ps = states[:, IPSI] if use_psi else np.zeros_like(om)

    # Speed would go negative: evaluate the position integrals at the
    # stopping time, then hold position for the rest of the step.
    v_end = v0 + a * dt
    stopped = v_end < 0.0
    te = np.where(stopped, -v0 / np.where(stopped, a, 1.0), dt)

    codes = _classify_codes(om, ps, eps_rate)
    dx = np.zeros_like(v0)
    dy = np.zeros_like(v0)
    dz = np.zeros_like(v0)
    branches = {
        RegimeClass.GENERIC.value: lambda i: _delta_generic(
            th0[i], ph0[i], v0[i], a[i], om[i], ps[i], te[i]),
        RegimeClass.PSI_ZERO.value: lambda i: _delta_psi_zero(
            th0[i], ph0[i], v0[i], a[i], om[i], te[i]),
        RegimeClass.OMEGA_EQ_PSI.value: lambda i: _delta_omega_eq_psi(
            th0[i], ph0[i], v0[i], a[i], om[i], ps[i], te[i]),
        RegimeClass.OMEGA_EQ_NEG_PSI.value: lambda i: _delta_omega_eq_neg_psi(
            th0[i], ph0[i], v0[i], a[i], om[i], ps[i], te[i]),
        RegimeClass.BOTH_ZERO.value: lambda i: _delta_both_zero(
            th0[i], ph0[i], v0[i], a[i], te[i]),
    }
    for code, fn in branches.items():
        idx = codes == code
        if np.any(idx):
            dx[idx], dy[idx], dz[idx] = fn(idx)

    out[:, IX] += dx
    out[:, IY] += dy
    out[:, IZ] += dz
    # Rates keep acting on the attitude for the full step even if the drone
    # stops; a quad-copter can rotate in place.
    th_new = th0 + om * dt
    ph_new = ph0 + ps * dt
    psi_out = states[:, IPSI]
    th_new, ph_new, psi_out = _reflect_attitude(th_new, ph_new, psi_out)
    out[:, ITHETA] = th_new
    out[:, IPHI] = ph_new
    out[:, IPSI] = psi_out
    out[:, IV] = np.maximum(v_end, 0.0)
    out[:, IA] = np.where(stopped, 0.0, a)
    return out


def _propagate_dr(states: np.ndarray, dt: np.ndarray) -> np.ndarray:
    out = states.copy()
    v0 = np.maximum(states[:, IV], 0.0)
    cph = np.cos(states[:, IPHI])
    out[:, IX] += v0 * np.cos(states[:, ITHETA]) * cph * dt
    out[:, IY] += v0 * np.sin(states[:, ITHETA]) * cph * dt
    out[:, IZ] += v0 * np.sin(states[:, IPHI]) * dt
    out[:, ITHETA] = wrap_angle(out[:, ITHETA])
    out[:, IV] = v0
    return out


def propagate_array(states: np.ndarray, dt, model: ModelKind,
                    eps_rate: float = EPS_RATE) -> np.ndarray:
    """Propagate a batch of state vectors by ``dt`` seconds.

    ``states`` has shape (..., 9); ``dt`` is a scalar or broadcasts against
    the leading dimensions.  Returns a new array of the same shape.
    """
    states = np.asarray(states, dtype=float)
    flat = np.atleast_2d(states.reshape(-1, STATE_DIM))
    dt_arr = np.broadcast_to(np.asarray(dt, dtype=float),
                             states.shape[:-1]).reshape(-1)
    if np.any(dt_arr < 0):
        raise ValueError("dt must be nonnegative")
    if model is ModelKind.DR:
        flat = _propagate_dr(flat, dt_arr)
    elif model is ModelKind.CTRA_PLUS:
        flat = _propagate_turning(flat, dt_arr, use_psi=False, eps_rate=eps_rate)
    elif model is ModelKind.CTRA_3D:
        flat = _propagate_turning(flat, dt_arr, use_psi=True, eps_rate=eps_rate)
    else:
        raise ValueError(f"unknown model {model}")
    return flat.reshape(states.shape)


def propagate(state: UavState, dt: float, model: ModelKind,
              eps_rate: float = EPS_RATE) -> UavState:
    """Propagate a single state by ``dt`` under the given motion model."""
    arr = propagate_array(state.as_array(), float(dt), model, eps_rate)
    return UavState.from_array(arr)


def propagate_dr(state: UavState, dt: float) -> UavState:
    """Straight-line motion at constant v, theta, phi (a, omega, psi ignored)."""
    return propagate(state, dt, ModelKind.DR)


def propagate_ctra_plus(state: UavState, dt: float,
                        eps_rate: float = EPS_RATE) -> UavState:
    """Tilted-plane spiral: constant omega and a, fixed pitch phi."""
    return propagate(state, dt, ModelKind.CTRA_PLUS, eps_rate)


def propagate_3dctra(state: UavState, dt: float,
                     eps_rate: float = EPS_RATE) -> UavState:
    """Curved helix: constant omega and psi, dispatching on the rate regime."""
    return propagate(state, dt, ModelKind.CTRA_3D, eps_rate)


def apply_tilt_decay(state: UavState, eta: float) -> UavState:
    """Shrink the tilt rate by the stabilization factor eta in (0, 1]."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    return replace(state, psi=eta * state.psi)
