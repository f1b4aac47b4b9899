"""Diffusive measures and their discrete pole/weight banks.

A diffusive measure mu on (0, inf) defines the standard transfer function

    z_std(s) = int 1/(s + xi) dmu(xi)

and the extended one z_ext(s) = s * z_std(s).  In the time domain both are
realized by a continuum of first-order relaxations, which a
:class:`DiscreteMeasure` replaces by finitely many poles ``xi_k`` with
positive weights ``w_k``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

__all__ = [
    "DiffusiveDescriptor",
    "DiscreteMeasure",
    "IntegrabilityReport",
    "fractional_density",
    "tabulated_density",
    "discretize",
    "eval_standard",
    "eval_extended",
    "integrability_report",
    "refinement_growth",
]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite positive measure sum_k w_k delta(xi - xi_k).

    Nodes are strictly positive and strictly increasing, weights strictly
    positive.  The empty measure is allowed.
    """

    xi: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float).reshape(-1)
        w = np.array(self.w, dtype=float).reshape(-1)
        if xi.shape != w.shape:
            raise ValueError(f"xi and w lengths differ ({xi.size} vs {w.size})")
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(w))):
            raise ValueError("nodes and weights must be finite")
        if np.any(xi <= 0.0):
            raise ValueError("nodes must be strictly positive (no atom at 0)")
        if np.any(np.diff(xi) <= 0.0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive")
        xi.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return self.xi.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.xi, other.xi) and np.array_equal(self.w, other.w)

    __hash__ = None

    @classmethod
    def empty(cls) -> DiscreteMeasure:
        return cls(np.empty(0), np.empty(0))

    # -- serialization -----------------------------------------------------
    # %.17g is enough digits for an exact IEEE double round trip.

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("xi,w\n")
        for x, w in zip(self.xi, self.w):
            buf.write(f"{x:.17g},{w:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> DiscreteMeasure:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["xi", "w"]:
            raise ValueError(f"expected CSV header 'xi,w', got {header!r}")
        rows = [r for r in reader if r]
        if not rows:
            return cls.empty()
        data = np.array([[float(a), float(b)] for a, b in rows])
        return cls(data[:, 0], data[:, 1])

    def to_dict(self) -> dict:
        return {"xi": [float(x) for x in self.xi], "w": [float(w) for w in self.w]}

    def to_json(self) -> str:
        # json emits repr(float), the shortest exact round-trip form
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> DiscreteMeasure:
        d = json.loads(text)
        return cls(np.asarray(d["xi"], dtype=float), np.asarray(d["w"], dtype=float))


@dataclass(frozen=True, eq=False)
class DiffusiveDescriptor:
    """Description of a diffusive measure before (or after) discretization.

    ``kind`` is one of ``"fractional"`` (density sin(alpha pi)/pi xi^-alpha),
    ``"tabulated"`` (nonnegative density samples, interpolated piecewise
    linearly, zero outside the sampled range) or ``"discrete"`` (an explicit
    :class:`DiscreteMeasure`).
    """

    kind: str
    alpha: float | None = None
    xi_table: np.ndarray | None = None
    rho_table: np.ndarray | None = None
    measure: DiscreteMeasure | None = None
    # discretization defaults carried along for configs
    n_poles: int = 100
    xi_min: float = 1e-6
    xi_max: float = 1e6

    def __post_init__(self):
        if self.kind == "fractional":
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ValueError(f"fractional order alpha must lie in (0, 1), got {self.alpha}")
        elif self.kind == "tabulated":
            xi = np.asarray(self.xi_table, dtype=float)
            rho = np.asarray(self.rho_table, dtype=float)
            if xi.ndim != 1 or xi.shape != rho.shape or xi.size < 2:
                raise ValueError("tabulated density needs matching 1-D arrays of length >= 2")
            if np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
                raise ValueError("tabulated nodes must be positive and increasing")
            if np.any(rho < 0):
                raise ValueError("tabulated density must be nonnegative")
            object.__setattr__(self, "xi_table", xi)
            object.__setattr__(self, "rho_table", rho)
        elif self.kind == "discrete":
            if not isinstance(self.measure, DiscreteMeasure):
                raise ValueError("discrete descriptor needs a DiscreteMeasure")
        else:
            raise ValueError(f"unknown diffusive descriptor kind {self.kind!r}")

    @property
    def is_analytic(self) -> bool:
        return self.kind == "fractional"

    def density(self, xi):
        """Density of mu with respect to d xi (not defined for discrete measures)."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "fractional":
            a = self.alpha
            return math.sin(a * math.pi) / math.pi * xi ** (-a)
        if self.kind == "tabulated":
            return np.interp(xi, self.xi_table, self.rho_table, left=0.0, right=0.0)
        raise ValueError("a discrete measure has no density")

    def exact_standard(self, s):
        """Closed-form standard transfer s^-alpha (fractional kind only)."""
        if self.kind != "fractional":
            raise ValueError("closed form only available for the fractional density")
        return _principal_power(s, -self.alpha)

    def exact_extended(self, s):
        if self.kind != "fractional":
            raise ValueError("closed form only available for the fractional density")
        return _principal_power(s, 1.0 - self.alpha)


def _principal_power(s, a):
    # numpy's complex power uses the principal branch, cut on (-inf, 0]
    return np.power(np.asarray(s, dtype=complex), a)


def fractional_density(alpha: float, **kwargs) -> DiffusiveDescriptor:
    """Measure of the Riemann-Liouville fractional integral of order ``alpha``.

    Its standard transfer function is s^-alpha and its extended one s^(1-alpha).
    """
    return DiffusiveDescriptor(kind="fractional", alpha=float(alpha), **kwargs)


def tabulated_density(xi, rho, **kwargs) -> DiffusiveDescriptor:
    return DiffusiveDescriptor(kind="tabulated", xi_table=xi, rho_table=rho, **kwargs)


def discretize(
    desc: DiffusiveDescriptor,
    N: int | None = None,
    xi_min: float | None = None,
    xi_max: float | None = None,
    *,
    lump_tails: bool = True,
) -> DiscreteMeasure:
    """Quadrature bank for a diffusive descriptor.

    Nodes are geometric, ``xi_k = xi_min * r**k``.  Each node owns the
    log-cell ``[xi_k r^-1/2, xi_k r^1/2]`` and gets the log-midpoint weight
    ``rho(xi_k) * xi_k * ln r``.  For the fractional density the mass below the
    first cell is lumped onto the first node (exact mass) and the part above
    the last cell onto the last node (matching int dmu/xi); without that the
    truncation error dominates at the ends of the frequency band.

    A discrete descriptor is returned unchanged.
    """
    if desc.kind == "discrete":
        return desc.measure
    N = desc.n_poles if N is None else int(N)
    xi_min = desc.xi_min if xi_min is None else float(xi_min)
    xi_max = desc.xi_max if xi_max is None else float(xi_max)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not (xi_min > 0 and xi_max > 0):
        raise ValueError("support bounds must be strictly positive")
    if N == 1:
        if xi_max < xi_min:
            raise ValueError("xi_min must not exceed xi_max")
        xi = np.array([math.sqrt(xi_min * xi_max)])
        if xi_max == xi_min:
            # degenerate support: one cell of unit log-width
            w = np.atleast_1d(desc.density(xi) * xi)
        else:
            grid = np.geomspace(xi_min, xi_max, 2049)
            w = np.array([trapezoid(desc.density(grid), grid)])
        return DiscreteMeasure(xi, w)
    if not xi_min < xi_max:
        raise ValueError("need 0 < xi_min < xi_max")

    log_r = math.log(xi_max / xi_min) / (N - 1)
    xi = xi_min * np.exp(log_r * np.arange(N))
    xi[-1] = xi_max
    w = desc.density(xi) * xi * log_r

    if lump_tails and desc.kind == "fractional":
        a = desc.alpha
        c = math.sin(a * math.pi) / math.pi
        lo = xi[0] * math.exp(-0.5 * log_r)
        hi = xi[-1] * math.exp(0.5 * log_r)
        w[0] += c * lo ** (1.0 - a) / (1.0 - a)  # int_0^lo dmu
        w[-1] += xi[-1] * c * hi ** (-a) / a  # xi_N * int_hi^inf dmu/xi

    keep = w > 0
    return DiscreteMeasure(xi[keep], w[keep])


def _check_halfplane(s):
    s = np.asarray(s, dtype=complex)
    if np.any(s.real < 0):
        raise ValueError("Laplace variable must satisfy Re(s) >= 0")
    return s


def eval_standard(mu: DiscreteMeasure, s):
    """sum_k w_k / (s + xi_k); accepts scalar or array ``s``."""
    s = _check_halfplane(s)
    out = np.sum(mu.w / (s[..., None] + mu.xi), axis=-1)
    return complex(out) if out.ndim == 0 else out


def eval_extended(mu: DiscreteMeasure, s):
    """sum_k w_k s / (s + xi_k)."""
    s = _check_halfplane(s)
    out = np.sum(mu.w * s[..., None] / (s[..., None] + mu.xi), axis=-1)
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IntegrabilityReport:
    sum_wellposed: float  # sum w/(1+xi), finite analogue of the well-posedness integral
    sum_inv_xi: float  # sum w/xi, diverges under refinement for extended-type measures


def integrability_report(mu: DiscreteMeasure) -> IntegrabilityReport:
    return IntegrabilityReport(
        sum_wellposed=float(np.sum(mu.w / (1.0 + mu.xi))),
        sum_inv_xi=float(np.sum(mu.w / mu.xi)),
    )


def refinement_growth(banks) -> tuple[list[float], bool]:
    """sum w/xi along a refinement sequence and whether it grows strictly.

    A finite bank always has finite sum w/xi, so the divergence required of
    extended-type measures can only be observed as growth under refinement.
    """
    sums = [integrability_report(b).sum_inv_xi for b in banks]
    return sums, all(b > a for a, b in zip(sums, sums[1:]))
