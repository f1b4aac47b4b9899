"""Composite impedance kernels in the Laplace domain.

A kernel is the sum of positive-real pieces

    z(s) = z0 + z_tau exp(-tau s) + z1 s + z_std(s) + s z_ext(s)
           [+ z_tau_d exp(-tau_d s) / sqrt(s)]

where the diffusive pieces come from :mod:`ibclab.measures`.  The last term
is the delayed fractional kernel, which has no known dissipative
realization; it is supported here for Laplace-domain checks only.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .measures import DiffusiveDescriptor, eval_extended, eval_standard

__all__ = [
    "KernelSpec",
    "NotPositiveRealError",
    "SamplerConfig",
    "PRReport",
    "RootReport",
    "eval_laplace",
    "check_positive_real",
    "delay_pr_condition",
    "quadratic_halfplane_roots",
    "find_x_tilde",
    "min_z0_delayed_sqrt",
    "TOL_PR",
]

TOL_PR = 1e-10


class NotPositiveRealError(ValueError):
    """Kernel parameters flagged as positive-real violate the closed-form condition."""


def delay_pr_condition(z0: float, z_tau: float, tau: float) -> bool:
    """Exact positive-realness test for z0 + z_tau exp(-tau s)."""
    return bool(z0 >= abs(z_tau) and tau >= 0)


@dataclass(frozen=True)
class KernelSpec:
    z0: float = 0.0
    z_tau: float = 0.0
    tau: float = 0.0
    z1: float = 0.0
    diff_standard: DiffusiveDescriptor | None = None
    diff_extended: DiffusiveDescriptor | None = None
    delayed_diffusive: tuple[float, float] | None = None
    certified_pr: bool = False

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"delay tau must be >= 0, got {self.tau}")
        if self.z1 < 0:
            raise ValueError(f"derivative coefficient z1 must be >= 0, got {self.z1}")
        if self.z0 < 0:
            raise ValueError(f"proportional coefficient z0 must be >= 0, got {self.z0}")
        if self.delayed_diffusive is not None:
            zd, td = self.delayed_diffusive
            if td <= 0:
                raise ValueError("delayed diffusive term needs tau_d > 0")
            object.__setattr__(self, "delayed_diffusive", (float(zd), float(td)))
        if self.certified_pr and self.has_delay and not delay_pr_condition(
            self.z0, self.z_tau, self.tau
        ):
            raise NotPositiveRealError(
                f"delay kernel is positive-real iff z0 >= |z_tau| (z0={self.z0}, z_tau={self.z_tau})"
            )
        if self.has_delay and self.zero_frequency_value() == 0.0:
            warnings.warn(
                "z(0) = 0: the generator is not injective for this kernel",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def has_delay(self) -> bool:
        return self.z_tau != 0.0 and self.tau > 0.0

    @property
    def terms(self) -> list[str]:
        names = []
        if self.z0:
            names.append("proportional")
        if self.has_delay:
            names.append("delay")
        if self.z1:
            names.append("derivative")
        if self.diff_standard is not None:
            names.append("standard_diffusive")
        if self.diff_extended is not None:
            names.append("extended_diffusive")
        if self.delayed_diffusive is not None:
            names.append("delayed_diffusive")
        return names

    def zero_frequency_value(self) -> float:
        """Limit of z(s) as s -> 0+ (inf when a singular term is present)."""
        if self.delayed_diffusive is not None and self.delayed_diffusive[0] != 0:
            return math.inf
        val = self.z0 + self.z_tau
        if self.diff_standard is not None:
            if self.diff_standard.kind == "discrete":
                m = self.diff_standard.measure
                val += float(np.sum(m.w / m.xi))
            else:
                return math.inf
        return val


def _diffusive_value(desc: DiffusiveDescriptor, s, extended: bool):
    if desc.kind == "fractional":
        return desc.exact_extended(s) if extended else desc.exact_standard(s)
    if desc.kind == "discrete":
        fn = eval_extended if extended else eval_standard
        return fn(desc.measure, s)
    raise ValueError("tabulated descriptors must be discretized before evaluation")


def eval_laplace(kernel: KernelSpec, s):
    """Value of the kernel's Laplace transform at ``s`` (scalar or array)."""
    s_arr = np.asarray(s, dtype=complex)
    if np.any(s_arr.real < 0):
        raise ValueError("kernel is only defined for Re(s) >= 0")
    singular_at_zero = (
        kernel.delayed_diffusive is not None
        or (kernel.diff_standard is not None and kernel.diff_standard.kind == "fractional")
    )
    if singular_at_zero and np.any(s_arr == 0):
        raise ValueError("kernel has a fractional-integral term, singular at s = 0")

    z = np.full(s_arr.shape, complex(kernel.z0))
    if kernel.z_tau:
        z = z + kernel.z_tau * np.exp(-kernel.tau * s_arr)
    if kernel.z1:
        z = z + kernel.z1 * s_arr
    if kernel.diff_standard is not None:
        z = z + _diffusive_value(kernel.diff_standard, s_arr, extended=False)
    if kernel.diff_extended is not None:
        z = z + _diffusive_value(kernel.diff_extended, s_arr, extended=True)
    if kernel.delayed_diffusive is not None:
        zd, td = kernel.delayed_diffusive
        z = z + zd * np.exp(-td * s_arr) / np.sqrt(s_arr)
    return complex(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class SamplerConfig:
    """Sample set for falsifying positive-realness.

    Interior grid: Re(s) log-spaced in [eps, R], Im(s) uniform in [-R, R].
    Boundary scan: s = eps + i omega, omega log-spaced in [omega_min,
    omega_max], both signs.  Real-axis scan: s log-spaced in [eps, R].
    """

    eps: float = 1e-8
    R: float = 1e3
    n_re: int = 40
    n_im: int = 81
    omega_min: float = 1e-3
    omega_max: float = 1e4
    n_omega: int = 4000
    n_real: int = 200
    tol: float = TOL_PR
    max_reported: int = 20

    def interior(self) -> np.ndarray:
        re = np.geomspace(max(self.eps, 1e-12), self.R, self.n_re)
        im = np.linspace(-self.R, self.R, self.n_im)
        return (re[:, None] + 1j * im[None, :]).ravel()

    def boundary(self) -> np.ndarray:
        w = np.geomspace(self.omega_min, self.omega_max, self.n_omega)
        return self.eps + 1j * np.concatenate([w, -w])

    def real_axis(self) -> np.ndarray:
        return np.geomspace(max(self.eps, 1e-12), self.R, self.n_real).astype(complex)


@dataclass
class PRReport:
    certified: bool
    violations: list[tuple[complex, float]]
    samples_checked: int
    n_violations: int = 0
    max_imag_on_real_axis: float = 0.0
    min_real_part: float = math.inf
    note: str = "sampling-based falsification test, not a proof of positive-realness"

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "samples_checked": self.samples_checked,
            "n_violations": self.n_violations,
            "min_real_part": self.min_real_part,
            "max_imag_on_real_axis": self.max_imag_on_real_axis,
            "violations": [
                {"s_re": s.real, "s_im": s.imag, "re_z": re} for s, re in self.violations
            ],
            "note": self.note,
        }


def check_positive_real(kernel: KernelSpec, sampler: SamplerConfig | None = None) -> PRReport:
    """Sample Re z(s) on the closed right half-plane and look for negative values."""
    sampler = sampler or SamplerConfig()
    pts = np.concatenate([sampler.interior(), sampler.boundary()])
    z = eval_laplace(kernel, pts)
    re = z.real
    bad = np.flatnonzero(re < -sampler.tol)

    real_pts = sampler.real_axis()
    z_real = eval_laplace(kernel, real_pts)
    max_imag = float(np.max(np.abs(z_real.imag) / np.maximum(1.0, np.abs(z_real.real))))
    real_ok = max_imag <= sampler.tol

    order = bad[np.argsort(re[bad])][: sampler.max_reported]
    violations = [(complex(pts[i]), float(re[i])) for i in order]
    return PRReport(
        certified=bool(bad.size == 0 and real_ok),
        violations=violations,
        samples_checked=int(pts.size + real_pts.size),
        n_violations=int(bad.size),
        max_imag_on_real_axis=max_imag,
        min_real_part=float(np.min(re)),
    )


@dataclass(frozen=True)
class RootReport:
    roots: np.ndarray
    max_re: float


def quadratic_halfplane_roots(a0: float, a1: float, a2: float, z: complex) -> RootReport:
    """Roots of s -> z a2 s^2 + a1 s + z a0 for nonnegative a_i and Re z > 0.

    None of them lies in the open right half-plane.
    """
    if min(a0, a1, a2) < 0:
        raise ValueError("coefficients must be nonnegative")
    z = complex(z)
    if z.real <= 0:
        raise ValueError("z must lie in the open right half-plane")
    if a0 == a1 == a2 == 0:
        raise ValueError("degenerate polynomial: all coefficients are zero")

    if a2 == 0:
        roots = np.array([-(z * a0) / a1]) if a1 != 0 else np.empty(0, dtype=complex)
    elif a0 == 0:
        # s (z a2 s + a1) = 0
        roots = np.array([0j, -(a1 / z) / a2])
    else:
        # s = sigma t turns the polynomial into a0 (t^2 + beta t + 1), whose
        # roots multiply to 1; no intermediate overflows for tiny a0 or a2
        sigma = math.sqrt(a0) / math.sqrt(a2)
        beta = (a1 / math.sqrt(a0)) / math.sqrt(a2) / z
        if abs(beta) > 1e8:
            # well separated roots -beta and -1/beta, exact to rounding since 1/beta^2 < eps
            roots = np.array([-(a1 / z) / a2, -(z * a0) / a1])
        else:
            d = cmath.sqrt(beta * beta - 4.0)
            # pick the sign that avoids cancellation in beta + d
            if (beta.conjugate() * d).real < 0:
                d = -d
            q = -0.5 * (beta + d)
            roots = sigma * np.array([q, 1.0 / q])
    max_re = float(np.max(roots.real)) if roots.size else -math.inf
    return RootReport(roots=roots, max_re=max_re)


def _x_tilde_residual(x: float) -> float:
    return math.tan(x + math.pi / 4) + 1.0 / (2.0 * x)


@lru_cache(maxsize=None)
def find_x_tilde() -> float:
    """Smallest positive root of x -> tan(x + pi/4) + 1/(2x).

    On (0, pi/4) both terms are positive, so the root lies between the poles
    of tan(x + pi/4) at pi/4 and 5 pi/4, where the function increases from
    -inf to +inf.
    """
    lo = math.pi / 4 + 1e-9
    hi = 5 * math.pi / 4 - 1e-9
    x = brentq(_x_tilde_residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(_x_tilde_residual(x)) >= 1e-12:
        raise RuntimeError(f"root refinement stalled at x={x!r}")
    return x


def min_z0_delayed_sqrt(z_tau: float, tau: float) -> float:
    """Smallest z0 making z0 + z_tau exp(-tau s)/sqrt(s) positive-real."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if z_tau < 0:
        raise ValueError("z_tau must be nonnegative")
    x = find_x_tilde()
    return -z_tau * math.cos(x + math.pi / 4) * math.sqrt(tau / x)
