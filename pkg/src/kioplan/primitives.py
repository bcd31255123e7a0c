"""Closed-form quintic motion primitives and their analytic jerk cost.

Per axis, a primitive is ``p(t) = sum_i c_i t^i`` for ``i = 0..5`` matching
position, velocity and acceleration at both ends of ``[0, T]``.  Boundary
data for one axis is ``d = [p0, v0, a0, pT, vT, aT]``; the map from ``d`` to
coefficients is linear (``boundary_to_coeffs``), so both the coefficients and
the squared-jerk integral ``d^T R_J(T) d`` are closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_DURATION = 1.5
DEFAULT_WAYPOINTS = 20


@dataclass
class KinodynamicState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        self.acceleration = np.asarray(self.acceleration, dtype=float).reshape(3)
        self.yaw = float(self.yaw)
        if not (np.all(np.isfinite(self.as_vector())) and np.isfinite(self.yaw)):
            raise ValueError("state components must be finite")

    def as_vector(self) -> np.ndarray:
        """The 9-vector ``[p, v, a]``."""
        return np.concatenate([self.position, self.velocity, self.acceleration])

    @classmethod
    def from_vector(cls, x, yaw: float = 0.0) -> "KinodynamicState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], x[3:6], x[6:9], yaw)

    def to_dict(self) -> dict:
        return {"p": self.position.tolist(), "v": self.velocity.tolist(),
                "a": self.acceleration.tolist(), "yaw": self.yaw}


def boundary_to_coeffs(T: float) -> np.ndarray:
    """6x6 matrix mapping boundary data ``d`` to ascending coefficients."""
    T2, T3, T4, T5 = T * T, T ** 3, T ** 4, T ** 5
    return np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
        [-10 / T3, -6 / T2, -1.5 / T, 10 / T3, -4 / T2, 0.5 / T],
        [15 / T4, 8 / T3, 1.5 / T2, -15 / T4, 7 / T3, -1 / T2],
        [-6 / T5, -3 / T4, -0.5 / T3, 6 / T5, -3 / T4, 0.5 / T3],
    ])


def jerk_penalty_matrix(T: float) -> np.ndarray:
    """``R_J(T)`` with ``d^T R_J d = integral_0^T jerk(t)^2 dt`` for one axis."""
    if T <= 0:
        raise ValueError("duration must be positive")
    a, b, c = 1.0 / T, 1.0 / T ** 2, 1.0 / T ** 3
    d, e = 1.0 / T ** 4, 1.0 / T ** 5
    return np.array([
        [720 * e, 360 * d, 60 * c, -720 * e, 360 * d, -60 * c],
        [360 * d, 192 * c, 36 * b, -360 * d, 168 * c, -24 * b],
        [60 * c, 36 * b, 9 * a, -60 * c, 24 * b, -3 * a],
        [-720 * e, -360 * d, -60 * c, 720 * e, -360 * d, 60 * c],
        [360 * d, 168 * c, 24 * b, -360 * d, 192 * c, -36 * b],
        [-60 * c, -24 * b, -3 * a, 60 * c, -36 * b, 9 * a],
    ])


def boundary_data(x0: KinodynamicState, xT: KinodynamicState) -> np.ndarray:
    """Per-axis boundary vectors, shape (3, 6)."""
    return np.stack([x0.position, x0.velocity, x0.acceleration,
                     xT.position, xT.velocity, xT.acceleration], axis=1)


@dataclass
class Primitive:
    coefficients: np.ndarray  # (3, 6), ascending powers of t
    duration: float
    yaw0: float = 0.0

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).reshape(3, 6)
        if not self.duration > 0:
            raise ValueError("primitive duration must be positive")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("primitive coefficients must be finite")

    @property
    def boundary(self) -> np.ndarray:
        """Boundary data ``d`` per axis recovered from the coefficients, shape (3, 6)."""
        p0, v0, a0, _ = evaluate(self, 0.0)
        pT, vT, aT, _ = evaluate(self, self.duration)
        return np.stack([p0, v0, a0, pT, vT, aT], axis=1)

    def to_dict(self) -> dict:
        return {"coefficients": self.coefficients.tolist(), "T_f": float(self.duration)}

    @classmethod
    def from_dict(cls, data: dict) -> "Primitive":
        return cls(np.asarray(data["coefficients"]), float(data["T_f"]))


def solve_obvp(x0: KinodynamicState, xT: KinodynamicState, T_f: float = DEFAULT_DURATION) -> Primitive:
    """Unique quintic per axis joining ``x0`` to ``xT`` in ``T_f`` seconds."""
    if not T_f > 0:
        raise ValueError(f"T_f must be positive, got {T_f}")
    coeffs = boundary_data(x0, xT) @ boundary_to_coeffs(T_f).T
    return Primitive(coeffs, float(T_f), x0.yaw)


def primitive_from_boundary(d: np.ndarray, T_f: float, yaw0: float = 0.0) -> Primitive:
    return Primitive(np.asarray(d, float) @ boundary_to_coeffs(T_f).T, float(T_f), yaw0)


def _derivative_basis(t: np.ndarray, order: int) -> np.ndarray:
    """Row i holds d^order/dt^order of t^i, evaluated at each t; shape (len(t), 6)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (6,))
    for i in range(order, 6):
        fac = 1.0
        for k in range(order):
            fac *= i - k
        out[..., i] = fac * t ** (i - order)
    return out


def evaluate(prim: Primitive, t: float):
    """Position, velocity, acceleration and jerk at time ``t`` via Horner's rule."""
    if t < -1e-12 or t > prim.duration + 1e-12:
        raise ValueError(f"t={t} outside [0, {prim.duration}]")
    c = prim.coefficients
    p = ((((c[:, 5] * t + c[:, 4]) * t + c[:, 3]) * t + c[:, 2]) * t + c[:, 1]) * t + c[:, 0]
    v = (((5 * c[:, 5] * t + 4 * c[:, 4]) * t + 3 * c[:, 3]) * t + 2 * c[:, 2]) * t + c[:, 1]
    a = ((20 * c[:, 5] * t + 12 * c[:, 4]) * t + 6 * c[:, 3]) * t + 2 * c[:, 2]
    j = (60 * c[:, 5] * t + 24 * c[:, 4]) * t + 6 * c[:, 3]
    return p, v, a, j


def evaluate_many(prim: Primitive, times, order: int = 0) -> np.ndarray:
    """Derivative ``order`` of the position at each time, shape (len(times), 3)."""
    return _derivative_basis(np.asarray(times, dtype=float), order) @ prim.coefficients.T


def jerk_cost(prim: Primitive) -> float:
    """Squared-jerk integral over the full duration, summed over axes."""
    d = prim.boundary
    R = jerk_penalty_matrix(prim.duration)
    return float(np.einsum("ai,ij,aj->", d, R, d))


def jerk_integral(prim: Primitive, t_end: float) -> float:
    """Integral of ``|jerk|^2`` over ``[0, t_end]``.

    Jerk is quadratic in ``t``, so three-point Gauss-Legendre is exact.
    """
    if t_end <= 0:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(3)
    ts = 0.5 * t_end * (x + 1.0)
    j = evaluate_many(prim, ts, order=3)
    return float(0.5 * t_end * np.sum(w * np.sum(j * j, axis=1)))


def waypoint_times(T_f: float, M: int) -> np.ndarray:
    if M < 2:
        raise ValueError("need at least two waypoints")
    return np.arange(M) * (T_f / (M - 1))


def waypoint_basis(T_f: float, M: int) -> np.ndarray:
    """(M, 6) matrix ``B`` with waypoint positions ``= B @ d`` per axis."""
    return _derivative_basis(waypoint_times(T_f, M), 0) @ boundary_to_coeffs(T_f)


def sample_waypoints(prim: Primitive, M: int = DEFAULT_WAYPOINTS) -> np.ndarray:
    """Positions at ``t_m = m T_f / (M - 1)``, shape (M, 3)."""
    return evaluate_many(prim, waypoint_times(prim.duration, M))


def max_speed(prim: Primitive, samples: int = 1001) -> float:
    """Grid-approximate maximum of ``|v(t)|``."""
    ts = np.linspace(0.0, prim.duration, samples)
    return float(np.linalg.norm(evaluate_many(prim, ts, 1), axis=1).max())


def max_accel(prim: Primitive, samples: int = 1001) -> float:
    """Grid-approximate maximum of ``|a(t)|``."""
    ts = np.linspace(0.0, prim.duration, samples)
    return float(np.linalg.norm(evaluate_many(prim, ts, 2), axis=1).max())


@dataclass
class PrimitiveSet:
    """K candidate terminal states sharing one start state.

    ``terminals`` rows are world-frame ``[pT, vT, aT]``; ``confidences``
    are the per-candidate scores ``c in (0, 1)``.
    """

    x0: KinodynamicState
    terminals: np.ndarray
    confidences: np.ndarray
    duration: float = DEFAULT_DURATION

    def __post_init__(self):
        self.terminals = np.asarray(self.terminals, dtype=float).reshape(-1, 9)
        self.confidences = np.asarray(self.confidences, dtype=float).reshape(-1)
        if len(self.terminals) != len(self.confidences):
            raise ValueError("terminals and confidences disagree on K")

    def __len__(self) -> int:
        return len(self.terminals)

    def boundary(self, k: int) -> np.ndarray:
        """Boundary data of candidate ``k``, shape (3, 6)."""
        x0 = self.x0.as_vector()
        xT = self.terminals[k]
        return np.stack([x0[0:3], x0[3:6], x0[6:9], xT[0:3], xT[3:6], xT[6:9]], axis=1)

    def primitive(self, k: int) -> Primitive:
        return primitive_from_boundary(self.boundary(k), self.duration, self.x0.yaw)

    def primitives(self) -> list[Primitive]:
        return [self.primitive(k) for k in range(len(self))]

    def subset(self, indices) -> "PrimitiveSet":
        idx = np.asarray(indices, dtype=int)
        return PrimitiveSet(self.x0, self.terminals[idx], self.confidences[idx], self.duration)
