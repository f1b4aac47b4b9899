"""Finite-dimensional generator of the coupled system and its spectral checks.

The generator is ``G = W^-1 K`` from :class:`ibclab.wavesim.CoupledOperator`
with the delay discretized by first-order upwind transport, so it is an
honest matrix.  Dissipativity is measured in the energy inner product
``<x, y>_W``; eigenvalues are computed from the similar matrix
``W^1/2 G W^-1/2 = W^-1/2 K W^-1/2``, which is better scaled.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigvals, eigvalsh, svdvals

from .kernels import KernelSpec
from .wavesim import BCSpec, CoupledOperator, Grid1D

__all__ = [
    "GeneratorMatrix",
    "EigenReport",
    "assemble_generator",
    "eigen_report",
    "dissipativity_check",
    "injectivity_check",
    "spectrum_csv",
    "roundoff_floor",
    "IMAG_AXIS_TOL",
    "MAX_DENSE_DIM",
]

IMAG_AXIS_TOL = 1e-8
MAX_DENSE_DIM = 5000


@dataclass
class GeneratorMatrix:
    G: np.ndarray  # dense W^-1 K with frozen faces removed
    W: np.ndarray  # diagonal of the energy weight
    K: np.ndarray
    labels: list[str]

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def scaled(self) -> np.ndarray:
        """W^-1/2 K W^-1/2, similar to G and skew-adjoint in the Euclidean sense when lossless."""
        r = 1.0 / np.sqrt(self.W)
        return r[:, None] * self.K * r[None, :]

    def with_decoupled_zero(self) -> GeneratorMatrix:
        """Append an unknown with a zero row and column (synthetic singularity)."""
        n = self.dim
        G = np.zeros((n + 1, n + 1))
        G[:n, :n] = self.G
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = self.K
        return GeneratorMatrix(G, np.append(self.W, 1.0), K, self.labels + ["decoupled"])


def assemble_generator(config=None, *, grid: Grid1D | None = None, bc: BCSpec | None = None,
                       kernel: KernelSpec | None = None, k: float | None = None,
                       delay_M: int | None = None) -> GeneratorMatrix:
    """Assemble the generator from a run config or from explicit pieces.

    Velocity unknowns at Neumann faces are identically zero and are removed.
    """
    if config is not None:
        from .config import generator_inputs

        grid, bc, kernel, k, delay_M = generator_inputs(config)
    if grid is None or bc is None:
        raise ValueError("need either a config or grid and boundary conditions")
    if any(b.kind == "driven_u" for _, b in bc.sides()):
        raise ValueError("a driven boundary is not autonomous; it has no generator")
    op = CoupledOperator(grid, bc, kernel, k=k, delay="upwind", delay_M=delay_M)
    labels = [f"u{i}" for i in range(op.n_u)] + [f"p{j}" for j in range(op.n_p)]
    labels += ["aux"] * (op.size - len(labels))
    for e in op.ibc_ends():
        for name, sl in (("phi_std", e.std), ("phi_ext", e.ext), ("chi", e.chi)):
            if sl is not None:
                for q, idx in enumerate(range(sl.start, sl.stop)):
                    labels[idx] = f"{name}_{e.side}{q}"
    keep = np.setdiff1d(np.arange(op.size), op.frozen_indices())
    if keep.size > MAX_DENSE_DIM:
        raise ValueError(f"generator dimension {keep.size} exceeds the dense budget {MAX_DENSE_DIM}")
    K = op.K.toarray()[np.ix_(keep, keep)]
    W = op.W[keep]
    return GeneratorMatrix(K / W[:, None], W, K, [labels[i] for i in keep])


@dataclass
class EigenReport:
    eigenvalues: np.ndarray
    max_re: float
    min_abs: float
    purely_imag_flags: np.ndarray  # |Re lambda| < IMAG_AXIS_TOL

    @property
    def n_flagged_nonzero(self) -> int:
        """Flagged eigenvalues off the origin, i.e. on i R*."""
        lam = self.eigenvalues[self.purely_imag_flags]
        return int(np.sum(np.abs(lam.imag) > IMAG_AXIS_TOL))

    def summary(self) -> dict:
        return {"dim": int(self.eigenvalues.size), "max_re": self.max_re, "min_abs": self.min_abs,
                "n_near_imag_axis": int(np.sum(self.purely_imag_flags)),
                "n_on_imag_axis_nonzero": self.n_flagged_nonzero}


def eigen_report(gen: GeneratorMatrix, tol: float = IMAG_AXIS_TOL) -> EigenReport:
    """Full spectrum through a dense nonsymmetric eigensolve."""
    if gen.dim > MAX_DENSE_DIM:
        raise ValueError(f"generator dimension {gen.dim} exceeds the dense budget {MAX_DENSE_DIM}")
    try:
        lam = eigvals(gen.scaled())
    except LinAlgError as exc:
        raise RuntimeError(f"eigensolve did not converge: {exc}") from exc
    return EigenReport(
        eigenvalues=lam,
        max_re=float(np.max(lam.real)),
        min_abs=float(np.min(np.abs(lam))),
        purely_imag_flags=np.abs(lam.real) < tol,
    )


def dissipativity_check(gen: GeneratorMatrix) -> float:
    """Largest eigenvalue of the W-symmetric part of G, in W-normalized coordinates.

    Nonpositive exactly when Re <G x, x>_W <= 0 for all x.  The symmetric
    part is formed before scaling so that skew couplings cancel exactly.
    """
    r = 1.0 / np.sqrt(gen.W)
    sym = 0.5 * (gen.K + gen.K.T)
    return float(eigvalsh(r[:, None] * sym * r[None, :])[-1])


def roundoff_floor(gen: GeneratorMatrix, tol: float = 1e-10) -> float:
    """Threshold for sign tests on W-normalized quantities: max(tol, 64 eps ||S||).

    Stiff diffusive banks (rates up to 1e6) make ||S|| large enough that
    eigenvalue roundoff alone exceeds a fixed 1e-10.
    """
    return max(tol, 64 * np.finfo(float).eps * float(np.linalg.norm(gen.scaled(), 2)))


def injectivity_check(gen: GeneratorMatrix) -> float:
    """Smallest singular value of G."""
    return float(svdvals(gen.G)[-1])


def spectrum_csv(report: EigenReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["re", "im"])
    for lam in report.eigenvalues:
        wr.writerow([f"{lam.real:.17g}", f"{lam.imag:.17g}"])
    return buf.getvalue()
