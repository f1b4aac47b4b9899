"""Quick invariant suite behind ``ibclab selftest``.

Each check is small enough that the whole suite runs in a few seconds.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .config import parse_config, serialize_config
from .kernels import KernelSpec, check_positive_real, find_x_tilde, quadratic_halfplane_roots
from .measures import DiscreteMeasure, discretize, eval_extended, eval_standard, fractional_density
from .realizations import DiffusiveBank, admissible_k_range
from .resolvent import bijectivity_scan
from .spectrum import assemble_generator, dissipativity_check, eigen_report
from .wavesim import BCSpec, Grid1D, WaveSimulator, pulse, simulate


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _lossless_energy():
    g = Grid1D(1.0, 100)
    u, p = pulse(g, 0.5, 0.05)
    sim = WaveSimulator(g, BCSpec("neumann_u0", "dirichlet_p0"), u0=u, p0=p)
    r = simulate(sim, 2.0)
    drift = float(np.max(np.abs(r.E_total - r.E_total[0])) / r.E_total[0])
    return drift <= 1e-12, f"relative drift {drift:.2e}"


def _delay_monotone():
    g = Grid1D(1.0, 100)
    u, p = pulse(g, 0.5, 0.05)
    kz = KernelSpec(z0=1.0, z_tau=0.5, tau=0.3)
    sim = WaveSimulator(g, BCSpec("neumann_u0", "ibc"), kz, k=1.0, u0=u, p0=p)
    r = simulate(sim, 3.0)
    inc = r.max_energy_increase / r.E_total[0]
    return inc <= 1e-12 and r.max_identity_defect <= 1e-12 * r.E_total[0], \
        f"max increase {inc:.2e} E0, identity defect {r.max_identity_defect:.2e}"


def _passivity():
    rng = np.random.default_rng(1)
    mu = DiscreteMeasure(np.sort(rng.uniform(0.1, 10, 8)) + np.arange(8), rng.uniform(0.1, 1, 8))
    worst = 0.0
    for mode in ("standard", "extended"):
        bank = DiffusiveBank(mu, mode)
        for _ in range(50):
            phi = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            u = complex(rng.standard_normal(), rng.standard_normal())
            a, b = bank.passivity_lhs(u, phi), bank.dissipation_residual(u, phi)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst <= 1e-13, f"max relative mismatch {worst:.2e}"


def _quadrature():
    s = np.array([0.01, 0.1, 1.0, 10.0, 100.0])
    worst = 0.0
    for a in (0.25, 0.5, 0.75):
        mu = discretize(fractional_density(a), 100, 1e-6, 1e6)
        worst = max(worst, float(np.max(np.abs(eval_standard(mu, s) / s**-a - 1))),
                    float(np.max(np.abs(eval_extended(mu, s) / s ** (1 - a) - 1))))
    return worst <= 1e-3, f"max relative error {worst:.2e}"


def _roots():
    rng = np.random.default_rng(2)
    worst = -math.inf
    for _ in range(200):
        a = rng.uniform(0, 5, 3)
        z = complex(rng.uniform(1e-3, 5), rng.uniform(-5, 5))
        worst = max(worst, quadratic_halfplane_roots(*a, z).max_re)
    return worst <= 1e-12, f"max Re root {worst:.2e}"


def _pr_and_k_range():
    ok = check_positive_real(KernelSpec(z0=2, z_tau=1, tau=1)).certified
    bad = not check_positive_real(KernelSpec(z0=1, z_tau=2, tau=1)).certified
    kr = admissible_k_range(1.0, 0.5)
    sharp = kr.is_psd(kr.center) and not kr.is_psd(kr.hi + 1e-3)
    x = find_x_tilde()
    return ok and bad and sharp and abs(x - 2.13) < 0.01, f"x_tilde {x:.6f}"


def _resolvent():
    r = bijectivity_scan(KernelSpec(z0=1.0), workers=1, s_samples=np.array([0.1, 1, 10, 1j, -3j]))
    return r.n_flags == 0, f"flags {r.n_flags}, max residual {r.max_residual:.1e}"


def _spectrum():
    gen = assemble_generator(grid=Grid1D(1.0, 20), bc=BCSpec("neumann_u0", "neumann_u0"))
    d = dissipativity_check(gen)
    rep = eigen_report(gen)
    prop = eigen_report(assemble_generator(grid=Grid1D(1.0, 20), bc=BCSpec("neumann_u0", "ibc"),
                                           kernel=KernelSpec(z0=1.0)))
    ok = abs(d) <= 1e-10 and abs(rep.max_re) <= 1e-10 and prop.max_re < 0
    return ok, f"lossless max_re {rep.max_re:.1e}, proportional max_re {prop.max_re:.2e}"


def _config_roundtrip():
    cfg = parse_config("kernel: {z0: 1.0, z_tau: 0.5, tau: 0.3}\ntime: {dt: 0.1}\n")
    return parse_config(serialize_config(cfg)) == cfg, "parse(serialize(c)) == c"


CHECKS = [
    ("lossless energy conservation", _lossless_energy),
    ("delay IBC energy monotone", _delay_monotone),
    ("diffusive passivity identities", _passivity),
    ("fractional quadrature accuracy", _quadrature),
    ("quadratic roots in closed left half-plane", _roots),
    ("positive-real and k-range checks", _pr_and_k_range),
    ("resolvent scan", _resolvent),
    ("generator spectrum", _spectrum),
    ("config round trip", _config_roundtrip),
]


def run_selftest() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                passed, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results
