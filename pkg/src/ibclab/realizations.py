"""Time-domain realizations of the impedance pieces.

Each realization is a small state machine attached to one boundary node:

* :class:`DelayLine` realizes exp(-tau s) by transport on (-tau, 0), stepped
  by an exact shift of one cell per time step.
* :class:`DiffusiveBank` realizes a standard (sum w/(s+xi)) or extended
  (sum w s/(s+xi)) diffusive kernel through dphi_k/dt = -xi_k phi_k + u,
  stepped with the implicit midpoint rule.
* :class:`DerivativeState` carries eta = u.n for the z1 s term.

All of them expose an energy and the exact dissipation that goes with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure

__all__ = [
    "DelayLine",
    "DiffusiveBank",
    "DerivativeState",
    "KRange",
    "admissible_k_range",
    "delay_form_matrix",
]


def delay_form_matrix(z0: float, z_tau: float, k: float) -> np.ndarray:
    """Quadratic form whose PSD-ness is equivalent to dissipativity of the delay realization.

    The energy rate is minus the form evaluated at (chi(0), chi(-tau)).
    """
    return np.array([[z0 - k / 2.0, z_tau / 2.0], [z_tau / 2.0, k / 2.0]])


@dataclass(frozen=True)
class KRange:
    """Closed interval of energy weights k for which the delay realization is dissipative."""

    lo: float
    hi: float
    z0: float
    z_tau: float

    def __contains__(self, k: float) -> bool:
        return self.lo <= k <= self.hi

    @property
    def center(self) -> float:
        return self.z0

    def form(self, k: float) -> np.ndarray:
        return delay_form_matrix(self.z0, self.z_tau, k)

    def is_psd(self, k: float, tol: float = 1e-12) -> bool:
        return bool(np.linalg.eigvalsh(self.form(k))[0] >= -tol)


def admissible_k_range(z0: float, z_tau: float) -> KRange:
    if z0 < abs(z_tau):
        raise ValueError(f"need z0 >= |z_tau| for a dissipative delay realization (z0={z0}, z_tau={z_tau})")
    r = math.sqrt(z0 * z0 - z_tau * z_tau)
    return KRange(lo=z0 - r, hi=z0 + r, z0=z0, z_tau=z_tau)


class DelayLine:
    """Transport realization of a pure delay, one boundary node.

    The ring holds chi(theta_j), theta_j = -j*dtheta for j = 0..M, with
    chi(theta_0) the most recent inflow.  Each step shifts by one cell, so the
    time step must equal dtheta = tau/M.  The stored energy uses the M cells
    that still have to leave the line:

        E = k/2 * dtheta * sum_{j=0}^{M-1} chi_j^2
    """

    def __init__(self, tau: float, M: int, k: float, z0: float | None = None,
                 z_tau: float | None = None, dissipative: bool = False):
        if tau <= 0:
            raise ValueError(f"delay tau must be > 0, got {tau}")
        if int(M) != M or M < 1:
            raise ValueError(f"number of delay cells must be an integer >= 1, got {M}")
        if k <= 0:
            raise ValueError(f"energy weight k must be > 0, got {k}")
        if dissipative:
            if z0 is None or z_tau is None:
                raise ValueError("dissipative flag needs z0 and z_tau")
            if k not in admissible_k_range(z0, z_tau):
                raise ValueError(f"k={k} outside the admissible range {admissible_k_range(z0, z_tau)}")
        self.tau = float(tau)
        self.M = int(M)
        self.dtheta = self.tau / self.M
        self.k = float(k)
        self._buf = np.zeros(self.M + 1)
        self._head = 0  # position of chi(theta_0)

    def check_step(self, dt: float, rtol: float = 1e-9) -> None:
        if abs(dt - self.dtheta) > rtol * self.dtheta:
            raise ValueError(
                f"time step {dt!r} must equal tau/M = {self.dtheta!r} for exact delay transport"
            )

    def values(self) -> np.ndarray:
        """chi(theta_j) for j = 0..M."""
        idx = (self._head + np.arange(self.M + 1)) % (self.M + 1)
        return self._buf[idx]

    def peek(self) -> float:
        """Output the next step will return: the inflow received M-1 steps ago."""
        return self._buf[(self._head + self.M - 1) % (self.M + 1)]

    def step(self, u_in: float) -> tuple[float, float]:
        """Shift in ``u_in``; return (chi(-tau), energy increment)."""
        self._head = (self._head - 1) % (self.M + 1)
        self._buf[self._head] = u_in
        out = self._buf[(self._head + self.M) % (self.M + 1)]
        delta = 0.5 * self.k * self.dtheta * (u_in * u_in - out * out)
        return out, delta

    def energy(self) -> float:
        chi = self.values()[:-1]
        return 0.5 * self.k * self.dtheta * float(np.dot(chi, chi))

    def reset(self) -> None:
        self._buf[:] = 0.0


class DiffusiveBank:
    """Bank of first-order relaxations dphi_k/dt = -xi_k phi_k + u.

    ``phi`` may be passed in as a view into a larger state vector; the bank
    then reads and updates that storage in place.
    """

    def __init__(self, measure: DiscreteMeasure, mode: str = "standard", phi: np.ndarray | None = None):
        if mode not in ("standard", "extended"):
            raise ValueError(f"mode must be 'standard' or 'extended', got {mode!r}")
        self.measure = measure
        self.mode = mode
        if phi is None:
            phi = np.zeros(len(measure))
        if phi.shape != (len(measure),):
            raise ValueError("state size does not match the measure")
        self.phi = phi

    @property
    def xi(self) -> np.ndarray:
        return self.measure.xi

    @property
    def w(self) -> np.ndarray:
        return self.measure.w

    @property
    def energy_weights(self) -> np.ndarray:
        # standard: weight 1 against dmu; extended: weight xi
        return self.w if self.mode == "standard" else self.w * self.xi

    def step(self, u_mid: float, dt: float) -> None:
        if dt <= 0:
            raise ValueError("dt must be positive")
        half = 0.5 * dt * self.xi
        self.phi[:] = ((1.0 - half) * self.phi + dt * u_mid) / (1.0 + half)

    def output_standard(self, phi: np.ndarray | None = None) -> float:
        if self.mode != "standard":
            raise ValueError("output_standard called on an extended bank")
        phi = self.phi if phi is None else phi
        return np.dot(self.w, phi)

    def output_extended(self, u: float, phi: np.ndarray | None = None) -> float:
        if self.mode != "extended":
            raise ValueError("output_extended called on a standard bank")
        phi = self.phi if phi is None else phi
        return np.dot(self.w, -self.xi * phi + u)

    def output(self, u: float = 0.0, phi: np.ndarray | None = None) -> float:
        if self.mode == "standard":
            return self.output_standard(phi)
        return self.output_extended(u, phi)

    def norm_sq(self, phi: np.ndarray | None = None) -> float:
        phi = self.phi if phi is None else phi
        return float(np.sum(self.energy_weights * np.abs(phi) ** 2))

    def energy(self) -> float:
        return 0.5 * self.norm_sq()

    def dissipation_residual(self, u: float, phi: np.ndarray | None = None) -> float:
        """Closed-form energy rate of the realization with its output work removed."""
        phi = self.phi if phi is None else phi
        if self.mode == "standard":
            return -float(np.sum(self.w * self.xi * np.abs(phi) ** 2))
        return -float(np.sum(self.w * np.abs(-self.xi * phi + u) ** 2))

    def passivity_lhs(self, u: complex, phi: np.ndarray | None = None) -> float:
        """Re[(A phi + B u, phi)_energy - (u, output)], evaluated from the operators.

        The input terms cancel against the output work, leaving a remainder
        that can be far smaller than either; the sums are accumulated in
        extended precision so that the remainder keeps its relative accuracy.
        """
        phi = self.phi if phi is None else phi
        c = np.clongdouble
        xi, w, phi, u = self.xi.astype(c), self.w.astype(c), np.asarray(phi).astype(c), c(u)
        ew = w if self.mode == "standard" else w * xi
        rate = -xi * phi + u
        inner = np.sum(ew * rate * np.conj(phi))
        y = np.sum(w * phi) if self.mode == "standard" else np.sum(w * rate)
        return float((inner - u * np.conj(y)).real)

    def supply(self, u: float, phi: np.ndarray | None = None) -> float:
        """Power u * output delivered to the realization."""
        return float(u * self.output(u, phi))


class DerivativeState:
    """Auxiliary state eta = u.n carrying the z1 |eta|^2 / 2 energy."""

    def __init__(self, z1: float, eta: float = 0.0):
        if z1 <= 0:
            raise ValueError(f"derivative weight z1 must be > 0, got {z1}")
        self.z1 = float(z1)
        self.eta = float(eta)

    def update(self, un: float) -> None:
        self.eta = float(un)

    def energy(self) -> float:
        return 0.5 * self.z1 * self.eta * self.eta
