"""Platform kinematics for the two-axis (surge/pitch, sway/roll) cueing model.

Each controlled axis pairs a translational triple integrator (s, v, a driven
by jerk) with a rotational one (theta, omega, alpha driven by angular jerk).
Tilt contributes ``g * sin(theta)`` to the specific force on its paired axis.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

GRAVITY = 9.81

AXES = ("long", "lat")
# column order of the (2, 6) state array used by the solver
STATE_FIELDS = ("s", "v", "a", "theta", "omega", "alpha")


class ModelError(ValueError):
    """Raised when the model is evaluated on non-finite data."""


@dataclass(frozen=True)
class AxisState:
    s: float = 0.0
    v: float = 0.0
    a: float = 0.0
    theta: float = 0.0
    omega: float = 0.0
    alpha: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class PlatformState:
    long: AxisState = AxisState()
    lat: AxisState = AxisState()

    def as_array(self) -> np.ndarray:
        """Return a (2, 6) array, rows ordered (long, lat)."""
        return np.vstack([self.long.as_array(), self.lat.as_array()])

    @classmethod
    def from_array(cls, arr) -> "PlatformState":
        arr = np.asarray(arr, dtype=float).reshape(2, 6)
        return cls(AxisState(*map(float, arr[0])), AxisState(*map(float, arr[1])))

    @classmethod
    def zero(cls) -> "PlatformState":
        return cls()


@dataclass(frozen=True)
class ControlInput:
    j_long: float = 0.0
    j_lat: float = 0.0
    jang_long: float = 0.0
    jang_lat: float = 0.0

    def as_array(self) -> np.ndarray:
        """Return a (2, 2) array: rows (long, lat), columns (jerk, angular jerk)."""
        return np.array([[self.j_long, self.jang_long], [self.j_lat, self.jang_lat]])

    @classmethod
    def from_array(cls, arr) -> "ControlInput":
        arr = np.asarray(arr, dtype=float).reshape(2, 2)
        return cls(j_long=float(arr[0, 0]), j_lat=float(arr[1, 0]),
                   jang_long=float(arr[0, 1]), jang_lat=float(arr[1, 1]))


@dataclass(frozen=True)
class SpecificForce:
    f_long: float
    f_lat: float
    g_long: float
    g_lat: float
    a_long: float
    a_lat: float


def integrator_matrices(dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold matrices of a jerk-driven triple integrator."""
    A = np.array([[1.0, dt, dt * dt / 2.0],
                  [0.0, 1.0, dt],
                  [0.0, 0.0, 1.0]])
    B = np.array([dt ** 3 / 6.0, dt * dt / 2.0, dt])
    return A, B


def _check_finite(*arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise ModelError("non-finite value in model input")


def step_array(x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Array form of :func:`step_dynamics` on a (2, 6) state and (2, 2) input."""
    if dt <= 0:
        raise ModelError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float).reshape(2, 6)
    u = np.asarray(u, dtype=float).reshape(2, 2)
    _check_finite(x, u)
    out = np.empty_like(x)
    for col, jerk in ((0, u[:, 0]), (3, u[:, 1])):
        p, q, r = x[:, col], x[:, col + 1], x[:, col + 2]
        out[:, col] = p + q * dt + r * dt * dt / 2.0 + jerk * dt ** 3 / 6.0
        out[:, col + 1] = q + r * dt + jerk * dt * dt / 2.0
        out[:, col + 2] = r + jerk * dt
    return out


def step_dynamics(x: PlatformState, u: ControlInput, dt: float) -> PlatformState:
    """Advance the platform by one sample with jerk held constant over ``dt``."""
    return PlatformState.from_array(step_array(x.as_array(), u.as_array(), dt))


def tilt_component(theta):
    """Specific-force contribution of a tilt angle (rad), in m/s^2."""
    return GRAVITY * np.sin(theta)


def output_array(x: np.ndarray) -> np.ndarray:
    """Return a (2, 3) array of (f, G, a) per axis for a (2, 6) state."""
    x = np.asarray(x, dtype=float).reshape(2, 6)
    g = tilt_component(x[:, 3])
    return np.column_stack([x[:, 2] + g, g, x[:, 2]])


def output_map(x: PlatformState) -> SpecificForce:
    y = output_array(x.as_array())
    return SpecificForce(f_long=y[0, 0], f_lat=y[1, 0], g_long=y[0, 1],
                         g_lat=y[1, 1], a_long=y[0, 2], a_lat=y[1, 2])


def linearize_output(x: PlatformState | np.ndarray) -> np.ndarray:
    """Jacobian of the outputs with respect to the state.

    Returns an array of shape (2, 3, 6): for each axis, the partials of
    (f, G, a) with respect to that axis' (s, v, a, theta, omega, alpha).
    Axes do not interact, so cross-axis partials are zero and omitted.
    """
    arr = x.as_array() if isinstance(x, PlatformState) else np.asarray(x, float).reshape(2, 6)
    jac = np.zeros((2, 3, 6))
    dg = GRAVITY * np.cos(arr[:, 3])
    jac[:, 0, 2] = 1.0
    jac[:, 0, 3] = dg
    jac[:, 1, 3] = dg
    jac[:, 2, 2] = 1.0
    return jac
