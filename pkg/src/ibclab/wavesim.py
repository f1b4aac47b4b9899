"""1D first-order wave system with impedance boundary conditions.

    du/dt + dp/dx = 0,   dp/dt + du/dx = 0   on (0, L)

Staggered layout: u on the n+1 faces x_i = i h, p on the n cell centers.
The boundary faces carry half a cell of mass, which makes the discrete
derivative pair summation-by-parts: the only energy exchange left is
-p_b (u.n) at each end, with p_b the boundary pressure supplied by the
boundary condition.

For an impedance end p_b = z * (u.n), realized by the state machines in
:mod:`ibclab.realizations`.  Every piece of the semi-discrete system is
written as ``W dy/dt = K y + g`` with ``W`` the (diagonal) energy weight, so
the energy is ``y.W.y / 2`` and the implicit midpoint step

    W (y+ - y) / dt = K (y+ + y)/2 + g

reproduces the continuous energy balance exactly.  The derivative term
z1 d(u.n)/dt is folded into the mass of the boundary face; the delay enters
either as a known forcing (exact shift, time stepping) or as an upwind
transport block (generator assembly, see :mod:`ibclab.spectrum`).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .kernels import KernelSpec
from .measures import DiscreteMeasure, discretize
from .realizations import DelayLine, DiffusiveBank, admissible_k_range

__all__ = [
    "Grid1D",
    "BoundarySpec",
    "BCSpec",
    "CoupledOperator",
    "WaveState",
    "EnergyBreakdown",
    "WaveSimulator",
    "TimeSeriesReport",
    "SingularStepError",
    "kernel_measures",
    "pulse",
    "smooth_random",
    "delay_cells",
    "run",
    "simulate",
    "CSV_HEADER",
]

CSV_HEADER = ["t", "E_total", "E_wave", "E_delay", "E_diff", "E_eta", "u_n", "p_boundary"]
BOUNDARY_KINDS = ("neumann_u0", "dirichlet_p0", "ibc", "driven_u")


class SingularStepError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    L: float = 1.0
    n: int = 200

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"domain length must be > 0, got {self.L}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need at least 2 cells, got {self.n}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def x_faces(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n + 1)

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def face_weights(self) -> np.ndarray:
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True)
class BoundarySpec:
    kind: str = "neumann_u0"
    amplitude: float = 0.0  # driven_u only: u_f(t) = amplitude sin(omega t)
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}; expected one of {BOUNDARY_KINDS}")


@dataclass(frozen=True)
class BCSpec:
    left: BoundarySpec = field(default_factory=BoundarySpec)
    right: BoundarySpec = field(default_factory=lambda: BoundarySpec("ibc"))

    def __post_init__(self):
        for side in ("left", "right"):
            v = getattr(self, side)
            if isinstance(v, str):
                object.__setattr__(self, side, BoundarySpec(v))

    def sides(self):
        return (("left", self.left), ("right", self.right))

    @property
    def has_ibc(self) -> bool:
        return any(b.kind == "ibc" for _, b in self.sides())


def kernel_measures(kernel: KernelSpec) -> tuple[DiscreteMeasure | None, DiscreteMeasure | None]:
    """Discretized (standard, extended) measures of a kernel."""
    std = discretize(kernel.diff_standard) if kernel.diff_standard is not None else None
    ext = discretize(kernel.diff_extended) if kernel.diff_extended is not None else None
    return std, ext


def delay_cells(tau: float, dt: float, rtol: float = 1e-9) -> int:
    """Number of transport cells M with M dt = tau, or ValueError if dt does not divide tau."""
    ratio = tau / dt
    M = int(round(ratio))
    if M < 1 or abs(ratio - M) > rtol * max(1.0, ratio):
        raise ValueError(f"delay alignment: tau/dt = {ratio!r} is not a positive integer")
    return M


@dataclass
class _End:
    side: str
    spec: BoundarySpec
    face: int
    sign: float  # outward normal
    cell: int
    std: slice | None = None
    ext: slice | None = None
    chi: slice | None = None


class CoupledOperator:
    """Energy weight ``W`` and operator ``K`` of the semi-discrete coupled system.

    State layout: [u (n+1) | p (n) | per IBC end: phi_std, phi_ext, chi].
    ``delay="shift"`` leaves the delay out of the state (it is supplied as a
    forcing on the boundary face); ``delay="upwind"`` adds ``delay_M`` upwind
    transport cells per IBC end.
    """

    def __init__(self, grid: Grid1D, bc: BCSpec, kernel: KernelSpec | None = None, *,
                 k: float | None = None, delay: str = "shift", delay_M: int | None = None,
                 measures: tuple | None = None):
        if delay not in ("shift", "upwind"):
            raise ValueError(f"delay mode must be 'shift' or 'upwind', got {delay!r}")
        self.grid = grid
        self.bc = bc
        self.kernel = kernel if kernel is not None else KernelSpec()
        if bc.has_ibc and kernel is None:
            raise ValueError("an impedance boundary needs a kernel")
        if self.kernel.delayed_diffusive is not None and bc.has_ibc:
            raise ValueError("the delayed fractional kernel has no dissipative realization to simulate")
        self.delay_mode = delay
        kz = self.kernel
        self.k = None
        if kz.has_delay and bc.has_ibc:
            self.k = kz.z0 if k is None else float(k)
            if self.k <= 0:
                raise ValueError(f"delay energy weight k must be > 0, got {self.k}")
            if delay == "upwind":
                if delay_M is None:
                    delay_M = max(1, math.ceil(kz.tau / grid.h - 1e-9))
                self.delay_M = int(delay_M)
                self.dtheta = kz.tau / self.delay_M
        self.mu_std, self.mu_ext = measures if measures is not None else kernel_measures(kz)

        n, h = grid.n, grid.h
        self.n_u, self.n_p = n + 1, n
        self.ends: list[_End] = []
        pos = self.n_u + self.n_p
        for side, spec in bc.sides():
            face, sign, cell = (0, -1.0, 0) if side == "left" else (n, 1.0, n - 1)
            end = _End(side, spec, face, sign, cell)
            if spec.kind == "ibc":
                if self.mu_std is not None:
                    end.std = slice(pos, pos + len(self.mu_std))
                    pos += len(self.mu_std)
                if self.mu_ext is not None:
                    end.ext = slice(pos, pos + len(self.mu_ext))
                    pos += len(self.mu_ext)
                if kz.has_delay and delay == "upwind":
                    end.chi = slice(pos, pos + self.delay_M)
                    pos += self.delay_M
            self.ends.append(end)
        self.size = pos

        W = np.zeros(self.size)
        W[: self.n_u] = grid.face_weights()
        W[self.n_u: self.n_u + self.n_p] = h
        rows, cols, vals = [], [], []

        def add(i, j, v):
            rows.append(i)
            cols.append(j)
            vals.append(v)

        P = self.n_u  # offset of p
        for i in range(1, n):
            add(i, P + i, -1.0)
            add(i, P + i - 1, 1.0)
        for j in range(n):
            add(P + j, j + 1, -1.0)
            add(P + j, j, 1.0)

        for end in self.ends:
            f, s, c = end.face, end.sign, end.cell
            kind = end.spec.kind
            if kind == "neumann_u0":
                continue  # face velocity frozen at zero
            add(f, P + c, s)
            if kind != "ibc":
                continue
            W[f] += kz.z1
            feed = kz.z0
            if end.std is not None:
                mu = self.mu_std
                for q, idx in enumerate(range(end.std.start, end.std.stop)):
                    W[idx] = mu.w[q]
                    add(f, idx, -s * mu.w[q])
                    add(idx, idx, -mu.xi[q] * mu.w[q])
                    add(idx, f, s * mu.w[q])
            if end.ext is not None:
                mu = self.mu_ext
                feed += float(np.sum(mu.w))
                for q, idx in enumerate(range(end.ext.start, end.ext.stop)):
                    wt = mu.w[q] * mu.xi[q]
                    W[idx] = wt
                    add(f, idx, s * mu.w[q] * mu.xi[q])
                    add(idx, idx, -mu.xi[q] * wt)
                    add(idx, f, s * wt)
            add(f, f, -feed)
            if end.chi is not None:
                kk, dth = self.k, self.dtheta
                first = end.chi.start
                for j, idx in enumerate(range(end.chi.start, end.chi.stop)):
                    W[idx] = kk * dth
                    add(idx, idx, -kk)
                    add(idx, f if j == 0 else idx - 1, kk * s if j == 0 else kk)
                add(f, end.chi.stop - 1, -s * kz.z_tau)
                del first
        self.W = W
        self.K = sp.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size))
        self.K.sum_duplicates()

    @property
    def u_slice(self) -> slice:
        return slice(0, self.n_u)

    @property
    def p_slice(self) -> slice:
        return slice(self.n_u, self.n_u + self.n_p)

    def ibc_ends(self) -> list[_End]:
        return [e for e in self.ends if e.spec.kind == "ibc"]

    def frozen_indices(self) -> list[int]:
        """Boundary faces whose velocity is not a degree of freedom."""
        return [e.face for e in self.ends if e.spec.kind == "neumann_u0"]

    def energy_parts(self, y: np.ndarray) -> dict:
        W = self.W
        u = y[self.u_slice]
        fw = self.grid.face_weights()
        wave = 0.5 * (np.dot(fw * u, u) + self.grid.h * np.dot(y[self.p_slice], y[self.p_slice]))
        eta = diff = delay = 0.0
        for e in self.ibc_ends():
            eta += 0.5 * self.kernel.z1 * y[e.face] ** 2
            for sl in (e.std, e.ext):
                if sl is not None:
                    diff += 0.5 * np.dot(W[sl] * y[sl], y[sl])
            if e.chi is not None:
                delay += 0.5 * np.dot(W[e.chi] * y[e.chi], y[e.chi])
        return {"wave": float(wave), "eta": float(eta), "diffusive": float(diff), "delay": float(delay)}


@dataclass(frozen=True)
class EnergyBreakdown:
    wave: float
    delay: float
    diffusive: float
    eta: float

    @property
    def total(self) -> float:
        return self.wave + self.delay + self.diffusive + self.eta


@dataclass
class BoundaryState:
    chi: np.ndarray | None = None
    phi_standard: np.ndarray | None = None
    phi_extended: np.ndarray | None = None
    eta: float | None = None


@dataclass
class WaveState:
    u: np.ndarray
    p: np.ndarray
    t: float
    boundary: dict[str, BoundaryState]


def pulse(grid: Grid1D, center: float = 0.5, width: float = 0.05, direction: str = "right"):
    """Gaussian pulse sampled on the staggered grid; returns (u_faces, p_centers)."""
    def g(x):
        return np.exp(-(((x - center) / width) ** 2))

    p = g(grid.x_centers)
    ug = g(grid.x_faces)
    if direction == "right":
        u = ug
    elif direction == "left":
        u = -ug
    elif direction == "standing":
        u = np.zeros_like(ug)
    else:
        raise ValueError(f"unknown pulse direction {direction!r}")
    return u, p


def smooth_random(grid: Grid1D, rng: np.random.Generator, n_modes: int = 4):
    """Random combination of the first few cosine/sine modes."""
    m = np.arange(1, n_modes + 1)
    a = rng.standard_normal(n_modes) / m
    b = rng.standard_normal(n_modes) / m
    kx = np.pi / grid.L
    p = np.cos(np.outer(grid.x_centers, m) * kx) @ a
    u = np.sin(np.outer(grid.x_faces, m) * kx) @ b
    return u, p


class WaveSimulator:
    """Implicit midpoint time stepping of the coupled system.

    The step matrix is factorized once; each step is one sparse solve.
    With a delay term the time step is tied to the transport cells
    (``dt = tau / M``); without one it defaults to ``h/2``.
    """

    def __init__(self, grid: Grid1D, bc: BCSpec, kernel: KernelSpec | None = None, *,
                 dt: float | None = None, k: float | None = None, u0=None, p0=None,
                 t0: float = 0.0, measures: tuple | None = None):
        self.op = op = CoupledOperator(grid, bc, kernel, k=k, delay="shift", measures=measures)
        self.grid, self.bc, self.kernel = grid, bc, op.kernel
        kz = op.kernel
        delayed = kz.has_delay and bc.has_ibc
        if dt is None:
            if delayed:
                M = max(1, math.ceil(kz.tau / (0.5 * grid.h) - 1e-9))
                dt = kz.tau / M
            else:
                dt = 0.5 * grid.h
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.lines: dict[str, DelayLine] = {}
        if delayed:
            M = delay_cells(kz.tau, self.dt)
            for e in op.ibc_ends():
                self.lines[e.side] = DelayLine(kz.tau, M, op.k)

        self.y = np.zeros(op.size)
        if u0 is not None:
            self.y[op.u_slice] = u0
        if p0 is not None:
            self.y[op.p_slice] = p0
        for f in op.frozen_indices():
            self.y[f] = 0.0
        self.t = float(t0)

        self.banks: dict[tuple[str, str], DiffusiveBank] = {}
        for e in op.ibc_ends():
            if e.std is not None:
                self.banks[(e.side, "standard")] = DiffusiveBank(op.mu_std, "standard", self.y[e.std])
            if e.ext is not None:
                self.banks[(e.side, "extended")] = DiffusiveBank(op.mu_ext, "extended", self.y[e.ext])

        Wdt = sp.diags(op.W / self.dt)
        lhs = (Wdt - 0.5 * op.K).tolil()
        rhs = (Wdt + 0.5 * op.K).tolil()
        self._driven = [e for e in op.ends if e.spec.kind == "driven_u"]
        for e in self._driven:
            lhs.rows[e.face], lhs.data[e.face] = [e.face], [1.0]
            rhs.rows[e.face], rhs.data[e.face] = [], []
        self._rhs = rhs.tocsr()
        try:
            self._lu = splu(lhs.tocsc())
        except RuntimeError as exc:
            raise SingularStepError(
                f"step matrix is singular (size {op.size}, dt={self.dt}, terms={kz.terms}): {exc}"
            ) from exc
        self.last_un = 0.0
        self.last_pb = 0.0
        self.last_work = 0.0

    # -- traces ------------------------------------------------------------

    @property
    def trace_end(self):
        ibc = self.op.ibc_ends()
        if ibc:
            return ibc[-1]
        return self.op.ends[-1]

    def _boundary_pressure(self, end, y_mid, dun_dt, out):
        kz, s = self.kernel, end.sign
        if end.spec.kind == "dirichlet_p0":
            return 0.0
        if end.spec.kind != "ibc":
            return float(y_mid[self.op.n_u + end.cell])
        a = s * y_mid[end.face]
        pb = kz.z0 * a + kz.z1 * dun_dt
        if out is not None:
            pb += kz.z_tau * out
        if (end.side, "standard") in self.banks:
            pb += self.banks[(end.side, "standard")].output_standard(y_mid[end.std])
        if (end.side, "extended") in self.banks:
            pb += self.banks[(end.side, "extended")].output_extended(a, y_mid[end.ext])
        return float(pb)

    def _work(self, end, y_mid, out):
        """dt times the exact energy rate contributed by one impedance end."""
        kz, s = self.kernel, end.sign
        a = s * y_mid[end.face]
        rate = -kz.z0 * a * a
        if out is not None:
            k = self.lines[end.side].k
            rate += -kz.z_tau * a * out + 0.5 * k * (a * a - out * out)
        if (end.side, "standard") in self.banks:
            rate += self.banks[(end.side, "standard")].dissipation_residual(a, y_mid[end.std])
        if (end.side, "extended") in self.banks:
            rate += self.banks[(end.side, "extended")].dissipation_residual(a, y_mid[end.ext])
        return self.dt * rate

    # -- stepping ----------------------------------------------------------

    def step(self) -> None:
        op, dt = self.op, self.dt
        y_old = self.y.copy()
        rhs = self._rhs @ self.y
        outs = {}
        for side, line in self.lines.items():
            end = next(e for e in op.ends if e.side == side)
            out = line.peek()
            outs[side] = out
            rhs[end.face] += -end.sign * self.kernel.z_tau * out
        t_new = self.t + dt
        for e in self._driven:
            rhs[e.face] = e.spec.amplitude * math.sin(e.spec.omega * t_new)
        self.y[:] = self._lu.solve(rhs)

        y_mid = 0.5 * (y_old + self.y)
        for side, line in self.lines.items():
            end = next(e for e in op.ends if e.side == side)
            line.step(end.sign * y_mid[end.face])
        work = 0.0
        for e in op.ibc_ends():
            work += self._work(e, y_mid, outs.get(e.side))
        te = self.trace_end
        self.last_un = float(te.sign * y_mid[te.face])
        dun_dt = te.sign * (self.y[te.face] - y_old[te.face]) / dt
        self.last_pb = self._boundary_pressure(te, y_mid, dun_dt, outs.get(te.side))
        self.last_work = work
        self.t = t_new

    def energy(self) -> EnergyBreakdown:
        parts = self.op.energy_parts(self.y)
        delay = sum(line.energy() for line in self.lines.values())
        return EnergyBreakdown(wave=parts["wave"], delay=delay,
                               diffusive=parts["diffusive"], eta=parts["eta"])

    @property
    def state(self) -> WaveState:
        op = self.op
        boundary = {}
        for e in op.ibc_ends():
            bs = BoundaryState()
            if e.side in self.lines:
                bs.chi = self.lines[e.side].values().copy()
            if e.std is not None:
                bs.phi_standard = self.y[e.std].copy()
            if e.ext is not None:
                bs.phi_extended = self.y[e.ext].copy()
            if self.kernel.z1:
                bs.eta = float(e.sign * self.y[e.face])
            boundary[e.side] = bs
        return WaveState(u=self.y[op.u_slice].copy(), p=self.y[op.p_slice].copy(),
                         t=self.t, boundary=boundary)

    def initial_traces(self) -> tuple[float, float]:
        te = self.trace_end
        un = float(te.sign * self.y[te.face])
        if te.spec.kind == "dirichlet_p0":
            return un, 0.0
        return un, float(self.y[self.op.n_u + te.cell])


@dataclass
class TimeSeriesReport:
    t: np.ndarray
    E_total: np.ndarray
    E_wave: np.ndarray
    E_delay: np.ndarray
    E_diff: np.ndarray
    E_eta: np.ndarray
    u_n: np.ndarray
    p_boundary: np.ndarray
    work: np.ndarray  # dt * exact boundary energy rate, one entry per step
    meta: dict = field(default_factory=dict)

    @property
    def max_energy_increase(self) -> float:
        if self.E_total.size < 2:
            return 0.0
        return float(np.max(np.diff(self.E_total)))

    @property
    def max_identity_defect(self) -> float:
        """max |E^{n+1} - E^n - work^n| over the run."""
        if self.E_total.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.E_total) - self.work)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        cols = [self.t, self.E_total, self.E_wave, self.E_delay, self.E_diff,
                self.E_eta, self.u_n, self.p_boundary]
        for row in zip(*cols):
            wr.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        E0 = float(self.E_total[0])
        return {
            **self.meta,
            "steps": int(self.t.size - 1),
            "t_final": float(self.t[-1]),
            "E_initial": E0,
            "E_final": float(self.E_total[-1]),
            "energy_ratio": float(self.E_total[-1] / E0) if E0 > 0 else None,
            "max_energy_increase": self.max_energy_increase,
            "max_identity_defect": self.max_identity_defect,
        }


def simulate(sim: WaveSimulator, T_final: float, record_every: int = 1) -> TimeSeriesReport:
    """Advance ``sim`` to ``T_final`` and collect the energy time series."""
    n_steps = int(round((T_final - sim.t) / sim.dt))
    if n_steps < 0:
        raise ValueError("final time precedes the current time")
    rows = []
    works = []
    un0, pb0 = sim.initial_traces()
    e = sim.energy()
    rows.append((sim.t, e.total, e.wave, e.delay, e.diffusive, e.eta, un0, pb0))
    acc = 0.0
    for i in range(1, n_steps + 1):
        sim.step()
        acc += sim.last_work
        if i % record_every == 0 or i == n_steps:
            e = sim.energy()
            rows.append((sim.t, e.total, e.wave, e.delay, e.diffusive, e.eta, sim.last_un, sim.last_pb))
            works.append(acc)
            acc = 0.0
    data = np.array(rows, dtype=float).T
    return TimeSeriesReport(*data, work=np.array(works, dtype=float),
                            meta={"dt": sim.dt, "n": sim.grid.n, "L": sim.grid.L,
                                  "kernel_terms": sim.kernel.terms})


def run(config) -> TimeSeriesReport:
    """Build a simulator from a :class:`ibclab.config.RunConfig` and run it."""
    from .config import build_simulator

    sim = build_simulator(config)
    report = simulate(sim, config.time.T_final, record_every=config.outputs.record_every)
    report.meta["seed"] = config.seed
    if sim.op.k is not None:
        report.meta["k"] = sim.op.k
        kz = sim.kernel
        if abs(kz.z_tau) <= kz.z0:
            report.meta["k_admissible"] = sim.op.k in admissible_k_range(kz.z0, kz.z_tau)
    return report
