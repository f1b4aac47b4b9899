"""Laplace-domain solvability lab.

For a kernel z and a Laplace variable s, find p with

    (p', psi') + s^2 (p, psi) + s/z(s) (p, psi)_boundary = l(psi)

for all test functions psi, discretized by piecewise-linear elements on a
uniform mesh of [0, L].  In 1D the boundary term is a point evaluation at
each impedance end.  Sweeping s over (0, inf) and the imaginary axis probes
the bijectivity of s - A one sample at a time.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, onenormest, splu

from .kernels import KernelSpec, eval_laplace
from .wavesim import Grid1D

__all__ = [
    "HelmholtzSystem",
    "SolveResult",
    "ScanReport",
    "ZeroImpedanceError",
    "assemble",
    "solve",
    "load_vector",
    "bijectivity_scan",
    "default_samples",
    "manufactured_error",
    "convergence_order",
    "neumann_eigenfrequency",
    "max_workers",
    "RESIDUAL_TOL",
    "COND_LIMIT",
]

RESIDUAL_TOL = 1e-10
COND_LIMIT = 1e14
WORKERS_ENV = "IBCLAB_MAX_WORKERS"


class ZeroImpedanceError(ValueError):
    """z(s) = 0: the Robin coefficient s/z(s) is undefined; use an admittance formulation."""


def max_workers(requested: int | None = None) -> int:
    """Worker count for parallel sweeps: ``requested`` (default: CPU count), capped by ``IBCLAB_MAX_WORKERS``."""
    cap = os.cpu_count() or 1
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(requested or cap, cap))


def _p1_matrices(grid: Grid1D):
    n, h = grid.n, grid.h
    main = np.full(n + 1, 2.0)
    main[0] = main[-1] = 1.0
    off = -np.ones(n)
    K = sp.diags([off, main, off], [-1, 0, 1]) / h
    mm = np.full(n + 1, 4.0)
    mm[0] = mm[-1] = 2.0
    M = sp.diags([np.ones(n), mm, np.ones(n)], [-1, 0, 1]) * (h / 6.0)
    return K.tocsr(), M.tocsr()


@dataclass
class HelmholtzSystem:
    grid: Grid1D
    K: sp.csr_matrix
    Mm: sp.csr_matrix
    Mb: sp.csr_matrix
    s: complex
    robin: complex  # s / z(s); 0 when no impedance end

    @property
    def matrix(self) -> sp.csr_matrix:
        return (self.K + self.s**2 * self.Mm + self.robin * self.Mb).tocsr()


def assemble(grid: Grid1D, kernel: KernelSpec | None, s: complex,
             ends: tuple[str, ...] = ("left", "right")) -> HelmholtzSystem:
    """Assemble the discrete weak form at ``s``.

    ``ends`` lists the impedance endpoints; the others carry the natural
    (Neumann) condition.  ``kernel=None`` drops the boundary term entirely,
    which is the z -> infinity limit.
    """
    s = complex(s)
    if s.real < 0:
        raise ValueError("need Re(s) >= 0")
    if s == 0:
        raise ValueError("s = 0 is excluded from the Laplace-domain problem")
    K, Mm = _p1_matrices(grid)
    mb = np.zeros(grid.n + 1)
    robin = 0j
    if kernel is not None and ends:
        z = complex(eval_laplace(kernel, s))
        scale = 1.0 + kernel.z0 + abs(kernel.z_tau) + kernel.z1 * abs(s)
        if abs(z) <= 1e-13 * scale:
            raise ZeroImpedanceError(f"z(s) = 0 at s = {s}; the impedance form is undefined there")
        robin = s / z
        for e in ends:
            if e not in ("left", "right"):
                raise ValueError(f"unknown endpoint {e!r}")
            mb[0 if e == "left" else -1] = 1.0
    return HelmholtzSystem(grid, K, Mm, sp.diags(mb).tocsr(), s, robin)


@dataclass
class SolveResult:
    p: np.ndarray
    residual: float
    cond_estimate: float
    near_singular: bool


def _cond_estimate(A: sp.csc_matrix, lu) -> float:
    n = A.shape[0]
    inv = LinearOperator(
        (n, n),
        matvec=lambda x: lu.solve(np.asarray(x, dtype=complex)),
        rmatvec=lambda x: lu.solve(np.asarray(x, dtype=complex), trans="H"),
        dtype=complex,
    )
    return float(onenormest(A) * onenormest(inv))


def solve(system: HelmholtzSystem, rhs, refine: int = 3) -> SolveResult:
    """Direct sparse solve with mixed-precision refinement.

    The residual ``||A p - b|| / ||b||`` is accumulated in extended precision
    and fed back through the float64 LU factors.  In plain float64 the
    residual cannot drop below about eps * cond(A), which exceeds 1e-10 on
    fine meshes at small |s| even though the solve itself is fine.  The
    reported residual is that of the refined iterate; ``p`` is its float64
    rounding.  Where long double is no wider than double the refinement
    degrades gracefully to ordinary float64 refinement.
    """
    A = system.matrix.tocsc().astype(complex)
    b = np.asarray(rhs, dtype=complex)
    if b.shape != (A.shape[0],):
        raise ValueError(f"load vector must have length {A.shape[0]}")
    try:
        lu = splu(A)
    except RuntimeError:
        return SolveResult(np.full(A.shape[0], np.nan + 0j), np.inf, np.inf, True)
    A_ext = A.astype(np.clongdouble)
    b_ext = b.astype(np.clongdouble)
    p_ext = lu.solve(b).astype(np.clongdouble)
    r = b_ext - A_ext @ p_ext
    for _ in range(refine):
        p_ext += lu.solve(r.astype(complex))
        r = b_ext - A_ext @ p_ext
    cond = _cond_estimate(A, lu)
    nb = float(np.linalg.norm(b))
    residual = float(np.sqrt(np.sum(np.abs(r) ** 2)))
    if nb > 0:
        residual /= nb
    flagged = (not np.isfinite(cond)) or cond > COND_LIMIT or not residual <= RESIDUAL_TOL
    return SolveResult(p_ext.astype(complex), residual, cond, bool(flagged))


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)


def load_vector(grid: Grid1D, f, boundary=(0.0, 0.0)) -> np.ndarray:
    """P1 load vector for source ``f`` plus point loads at x=0 and x=L."""
    h = grid.h
    x0 = grid.x_faces[:-1]
    xq = x0[:, None] + 0.5 * h * (1.0 + _GAUSS_X[None, :])
    fq = np.asarray(f(xq), dtype=complex) * (0.5 * h * _GAUSS_W[None, :])
    lam = 0.5 * (1.0 + _GAUSS_X[None, :])  # local coordinate of each node
    b = np.zeros(grid.n + 1, dtype=complex)
    b[:-1] += np.sum(fq * (1.0 - lam), axis=1)
    b[1:] += np.sum(fq * lam, axis=1)
    b[0] += boundary[0]
    b[-1] += boundary[1]
    return b


def manufactured_error(n: int, s: complex = 1.0, z: float = 1.0, L: float = 1.0) -> float:
    """L2 error of the P1 solution for p(x) = cos(pi x / L) with proportional impedance z."""
    grid = Grid1D(L, n)
    k = np.pi / L
    kernel = KernelSpec(z0=z)
    sys_ = assemble(grid, kernel, s)
    robin = sys_.robin
    # -p'' + s^2 p = f,  p'(0) = robin p(0),  -p'(L) = robin p(L) up to the sign of the outward normal
    f = lambda x: (k * k + s * s) * np.cos(k * x)  # noqa: E731
    g = (robin * np.cos(0.0), robin * np.cos(k * L))
    b = load_vector(grid, f, g)
    res = solve(sys_, b)
    h = grid.h
    x0 = grid.x_faces[:-1]
    xq = x0[:, None] + 0.5 * h * (1.0 + _GAUSS_X[None, :])
    lam = 0.5 * (1.0 + _GAUSS_X[None, :])
    ph = res.p[:-1, None] * (1.0 - lam) + res.p[1:, None] * lam
    err2 = np.sum(np.abs(ph - np.cos(k * xq)) ** 2 * (0.5 * h * _GAUSS_W[None, :]))
    return float(np.sqrt(err2))


def convergence_order(ns=(50, 100, 200, 400), **kwargs) -> tuple[np.ndarray, np.ndarray]:
    """Errors and observed orders log2(e_h / e_{h/2}) along a halving sequence."""
    errs = np.array([manufactured_error(n, **kwargs) for n in ns])
    hs = 1.0 / np.asarray(ns, dtype=float)
    orders = np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
    return errs, orders


def neumann_eigenfrequency(grid: Grid1D, mode: int = 1) -> float:
    """omega with K p = omega^2 Mm p for the ``mode``-th nonzero discrete Neumann eigenvalue."""
    from scipy.linalg import eigh

    K, Mm = _p1_matrices(grid)
    lam = eigh(K.toarray(), Mm.toarray(), eigvals_only=True)
    return float(np.sqrt(lam[mode]))


@dataclass
class ScanReport:
    s: np.ndarray
    cond_estimate: np.ndarray
    residual: np.ndarray
    flag: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_flags(self) -> int:
        return int(np.sum(self.flag))

    @property
    def max_residual(self) -> float:
        ok = np.isfinite(self.residual)
        return float(np.max(self.residual[ok])) if ok.any() else np.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["s_re", "s_im", "cond_estimate", "residual", "flag"])
        for s, c, r, f in zip(self.s, self.cond_estimate, self.residual, self.flag):
            wr.writerow([f"{s.real:.17g}", f"{s.imag:.17g}", f"{c:.17g}", f"{r:.17g}", int(f)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {**self.meta, "samples": int(self.s.size), "n_flags": self.n_flags,
                "max_residual": self.max_residual,
                "max_cond_estimate": float(np.max(self.cond_estimate)),
                "note": "condition numbers are empirical; no continuum stability constant is claimed"}


def default_samples(n: int = 100, lo: float = 1e-2, hi: float = 1e2) -> np.ndarray:
    """n samples: half on (0, inf), half on the imaginary axis split between both signs."""
    n_real = n // 2
    n_imag = n - n_real
    real = np.geomspace(lo, hi, n_real).astype(complex)
    pos = np.geomspace(lo, hi, (n_imag + 1) // 2)
    neg = np.geomspace(lo, hi, n_imag // 2)
    return np.concatenate([real, 1j * pos, -1j * neg])


def _scan_one(grid, kernel, ends, s, rng_seed):
    sys_ = assemble(grid, kernel, s, ends)
    rng = np.random.default_rng(rng_seed)
    b = rng.standard_normal(grid.n + 1) + 1j * rng.standard_normal(grid.n + 1)
    return solve(sys_, b)


def bijectivity_scan(kernel: KernelSpec | None, s_samples=None, grid: Grid1D | None = None,
                     ends: tuple[str, ...] = ("left", "right"), seed: int = 0,
                     workers: int | None = None) -> ScanReport:
    """Solve with a random load at each sample and collect condition/residual flags."""
    grid = grid or Grid1D(1.0, 100)
    samples = np.asarray(default_samples() if s_samples is None else s_samples, dtype=complex)
    if np.any(samples == 0):
        raise ValueError("s = 0 must not be sampled")
    seeds = np.random.SeedSequence(seed).generate_state(samples.size)
    workers = min(max_workers(workers), samples.size) if samples.size else 1
    args = [(grid, kernel, ends, s, int(sd)) for s, sd in zip(samples, seeds)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda a: _scan_one(*a), args))
    else:
        results = [_scan_one(*a) for a in args]
    return ScanReport(
        s=samples,
        cond_estimate=np.array([r.cond_estimate for r in results]),
        residual=np.array([r.residual for r in results]),
        flag=np.array([r.near_singular for r in results], dtype=bool),
        meta={"n": grid.n, "L": grid.L, "ends": list(ends),
              "kernel_terms": kernel.terms if kernel is not None else ["neumann"]},
    )
