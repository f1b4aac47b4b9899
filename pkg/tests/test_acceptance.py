"""Acceptance gate: one test per criterion, each printing a pass/fail line."""

import math
import time

import numpy as np
import pytest

from ibclab.kernels import KernelSpec, eval_laplace, find_x_tilde, min_z0_delayed_sqrt, quadratic_halfplane_roots
from ibclab.measures import DiscreteMeasure, discretize, eval_extended, eval_standard, fractional_density
from ibclab.realizations import DiffusiveBank, admissible_k_range
from ibclab.resolvent import bijectivity_scan, convergence_order, default_samples
from ibclab.spectrum import assemble_generator, eigen_report, injectivity_check
from ibclab.wavesim import BCSpec, Grid1D, WaveSimulator, pulse, simulate, smooth_random

RESULTS: list[str] = []
NEU_IBC = BCSpec("neumann_u0", "ibc")


def record(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_01_delay_energy_monotone():
    g = Grid1D(1.0, 200)
    u, p = pulse(g, 0.5, 0.05)
    t0 = time.perf_counter()
    sim = WaveSimulator(g, NEU_IBC, KernelSpec(z0=1.0, z_tau=0.5, tau=0.3), k=1.0, u0=u, p0=p)
    rep = simulate(sim, 10_000 * sim.dt)
    elapsed = time.perf_counter() - t0
    inc = rep.max_energy_increase / rep.E_total[0]
    ok = rep.t.size == 10_001 and inc <= 1e-12 and elapsed < 10.0
    record(1, ok, f"delay IBC, 1e4 steps: max increase {inc:.2e} E0 (<= 1e-12), {elapsed:.2f} s (< 10 s)")


def test_criterion_02_k_range_sharpness():
    rng = np.random.default_rng(2)
    mismatches = 0
    for _ in range(1000):
        z0 = rng.uniform(0.01, 10.0)
        z_tau = rng.uniform(-1.0, 1.0) * z0
        kr = admissible_k_range(z0, z_tau)
        k = rng.uniform(0.0, 2.0 * kr.hi + 1.0)
        psd = np.linalg.eigvalsh(kr.form(k))[0] >= -1e-12
        mismatches += psd != (k in kr)
        mismatches += not (kr.is_psd(kr.lo) and kr.is_psd(kr.hi))
    witnesses = 0
    for _ in range(100):
        z0 = rng.uniform(0.01, 10.0)
        z_tau = rng.choice([-1.0, 1.0]) * rng.uniform(0.01, 1.0) * z0
        kr = admissible_k_range(z0, z_tau)
        k = rng.uniform(0.0, kr.lo) if rng.random() < 0.5 or kr.lo == 0 else rng.uniform(kr.hi, 3 * kr.hi)
        if k in kr:
            k = kr.hi * 1.5
        F = kr.form(k)
        v = np.linalg.eigh(F)[1][:, 0]
        witnesses += float(v @ F @ v) < 0
    ok = mismatches == 0 and witnesses == 100
    record(2, ok, f"k-range: {mismatches} PSD mismatches in 1000 configs, {witnesses}/100 outside-range witnesses")


def _random_measure(rng) -> DiscreteMeasure:
    n = int(rng.integers(1, 40))
    xi = np.sort(10.0 ** rng.uniform(-4, 4, n))
    xi = np.unique(xi)
    return DiscreteMeasure(xi, 10.0 ** rng.uniform(-3, 1, xi.size))


def test_criterion_03_passivity_identities():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        mu = _random_measure(rng)
        phi = rng.standard_normal(len(mu))
        u = rng.standard_normal()
        std = DiffusiveBank(mu, "standard", phi=phi.copy())
        ext = DiffusiveBank(mu, "extended", phi=phi.copy())
        ref_std = -np.sum(mu.w * mu.xi * phi**2)
        ref_ext = -np.sum(mu.w * (-mu.xi * phi + u) ** 2)
        worst = max(worst,
                    abs(std.passivity_lhs(u) - ref_std) / abs(ref_std),
                    abs(ext.passivity_lhs(u) - ref_ext) / abs(ref_ext))
    record(3, worst <= 1e-13, f"passivity identities on 1000 states: max relative defect {worst:.2e} (<= 1e-13)")


def test_criterion_04_fractional_quadrature():
    s = np.array([0.01, 0.1, 1.0, 10.0, 100.0])
    t0 = time.perf_counter()
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        mu = discretize(fractional_density(alpha), 100, 1e-6, 1e6)
        worst = max(worst,
                    np.max(np.abs(eval_standard(mu, s) / s**-alpha - 1)),
                    np.max(np.abs(eval_extended(mu, s) / s ** (1 - alpha) - 1)))
    elapsed = time.perf_counter() - t0
    record(4, worst <= 1e-3 and elapsed < 1.0,
           f"fractional banks N=100: max relative error {worst:.2e} (<= 1e-3), {elapsed:.3f} s (< 1 s)")


def test_criterion_05_root_location():
    rng = np.random.default_rng(5)
    worst = -math.inf
    for _ in range(1000):
        a = rng.uniform(0, 10, 3) * (rng.random(3) > 0.1)
        if not a.any():
            a[1] = 1.0
        z = complex(rng.uniform(1e-3, 10), rng.uniform(-10, 10))
        worst = max(worst, quadratic_halfplane_roots(*a, z).max_re)
    record(5, worst <= 1e-12, f"1000 random quadratics: max Re root {worst:.2e} (<= 1e-12)")


def test_criterion_06_resolvent_scan():
    t0 = time.perf_counter()
    samples = default_samples(100)
    flags, resid = 0, 0.0
    for kernel in (KernelSpec(z0=1.0), KernelSpec(z0=1.0, z_tau=0.5, tau=0.3, certified_pr=True)):
        rep = bijectivity_scan(kernel, samples, Grid1D(1.0, 200))
        flags += rep.n_flags
        resid = max(resid, rep.max_residual)
    _, orders = convergence_order((50, 100, 200, 400))
    elapsed = time.perf_counter() - t0
    ok = flags == 0 and resid <= 1e-10 and np.all((orders >= 1.9) & (orders <= 2.1)) and elapsed < 30.0
    record(6, ok, f"resolvent scans: {flags} flags, max residual {resid:.1e} (<= 1e-10), "
                  f"orders {np.round(orders, 3).tolist()} in [1.9, 2.1], {elapsed:.2f} s (< 30 s)")


def test_criterion_07_spectrum():
    times, parts = [], []
    t0 = time.perf_counter()
    gen = assemble_generator(grid=Grid1D(1.0, 50), bc=NEU_IBC, kernel=KernelSpec(z0=1.0))
    rep = eigen_report(gen)
    sigma = injectivity_check(gen)
    ok_prop = rep.max_re < 0 and sigma > 0
    times.append(time.perf_counter() - t0)
    parts.append(f"proportional max Re {rep.max_re:.2e} < 0, sigma_min {sigma:.2e} > 0")

    t0 = time.perf_counter()
    gen = assemble_generator(grid=Grid1D(1.0, 50), bc=BCSpec("neumann_u0", "neumann_u0"))
    S = gen.scaled()
    sym = np.linalg.norm(0.5 * (S + S.T), 2)
    off = np.max(np.abs(eigen_report(gen).eigenvalues.real))
    ok_lossless = sym <= 1e-10 and off <= 1e-10
    times.append(time.perf_counter() - t0)
    parts.append(f"lossless sym-part {sym:.1e}, |Re| {off:.1e} (<= 1e-10)")

    t0 = time.perf_counter()
    gen = assemble_generator(grid=Grid1D(1.0, 50), bc=NEU_IBC, kernel=KernelSpec(z0=0.0, z1=1.0))
    off_d = np.max(np.abs(eigen_report(gen).eigenvalues.real))
    ok_deriv = off_d <= 1e-8
    times.append(time.perf_counter() - t0)
    parts.append(f"pure derivative |Re| {off_d:.1e} (<= 1e-8)")

    ok = ok_prop and ok_lossless and ok_deriv and max(times) < 60.0
    record(7, ok, "; ".join(parts) + f"; slowest {max(times):.2f} s (< 60 s)")


DECAY_FAMILIES = {
    "proportional": KernelSpec(z0=1.0),
    "delay": KernelSpec(z0=1.0, z_tau=0.5, tau=0.3),
    "standard a=0.5": KernelSpec(diff_standard=fractional_density(0.5)),
    "extended a=0.5": KernelSpec(diff_extended=fractional_density(0.5)),
    # a larger derivative weight makes high frequencies reflect almost
    # totally and stretches the decay well past T = 50
    "delay+derivative": KernelSpec(z0=1.0, z_tau=0.5, tau=0.3, z1=0.2),
}


@pytest.mark.parametrize("name", list(DECAY_FAMILIES))
def test_criterion_08_decay(name):
    g = Grid1D(1.0, 100)
    u, p = smooth_random(g, np.random.default_rng(8))
    t0 = time.perf_counter()
    sim = WaveSimulator(g, NEU_IBC, DECAY_FAMILIES[name], u0=u, p0=p)
    rep = simulate(sim, 50.0, record_every=100)
    elapsed = time.perf_counter() - t0
    ratio = rep.E_total[-1] / rep.E_total[0]
    ok = ratio < 0.05 and elapsed < 120.0
    record(8, ok, f"E(50)/E(0) = {ratio:.2e} (< 0.05), {elapsed:.2f} s (< 120 s) ({name})")


def test_criterion_09_delayed_sqrt_threshold():
    rng = np.random.default_rng(9)
    omega = np.geomspace(1e-4, 1e4, 2_000_001)
    worst = 0.0
    for _ in range(10):
        z_tau, tau = rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)
        # z0 = 0 isolates the delayed term; the PR boundary is -min Re over the axis
        kernel = KernelSpec(z0=0.0, delayed_diffusive=(z_tau, tau))
        scan = -np.min(eval_laplace(kernel, 1j * omega).real)
        worst = max(worst, abs(min_z0_delayed_sqrt(z_tau, tau) / scan - 1))
    x = find_x_tilde()
    ok = worst <= 0.01 and abs(x - 2.13) <= 0.01
    record(9, ok, f"min z0 vs imaginary-axis scan: max relative gap {worst:.1e} (<= 1e-2); x~ = {x:.6f} (2.13 +- 0.01)")


def test_criterion_10_driven_bank_frequency_response():
    mu = discretize(fractional_density(0.5), 30, 0.1, 1e3)
    dt, T, t_fit = 1e-3, 200.0, 150.0
    n = int(round(T / dt))
    t = dt * np.arange(n + 1)
    win = t >= t_fit
    worst_amp, worst_phase = 0.0, 0.0
    for omega in (0.5, 1.0, 2.0, 5.0, 10.0):
        bank = DiffusiveBank(mu, "standard")
        u = np.sin(omega * t)
        y = np.zeros(n + 1)
        for i in range(n):
            bank.step(0.5 * (u[i] + u[i + 1]), dt)
            y[i + 1] = bank.output_standard()
        A = np.column_stack([np.sin(omega * t[win]), np.cos(omega * t[win])])
        (a, b), *_ = np.linalg.lstsq(A, y[win], rcond=None)
        H = eval_standard(mu, 1j * omega)
        ratio = (a + 1j * b) / H
        worst_amp = max(worst_amp, abs(abs(ratio) - 1))
        worst_phase = max(worst_phase, abs(np.angle(ratio)) / abs(np.angle(H)))
    ok = worst_amp <= 0.01 and worst_phase <= 0.01
    record(10, ok, f"driven standard bank at 5 frequencies: amplitude error {worst_amp:.1e}, "
                   f"relative phase error {worst_phase:.1e} (<= 1e-2)")
