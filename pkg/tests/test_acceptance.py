"""Acceptance criteria, one test each, printing a PASS/FAIL line per criterion."""

import dataclasses
import math
import time

import numpy as np
import pytest

from koopman_inertia.dataio import read_timeseries_csv, write_timeseries_csv
from koopman_inertia.grid_model import (
    CASE_I,
    DEFAULT_LOADING,
    Phase,
    SystemState,
    electrical_power,
    equilibrium_state,
    kron_eliminate,
    kron_reduce,
    load_network,
    operating_point,
    scale_loading,
)
from koopman_inertia.inertia import (
    assemble_system,
    estimate_from_series,
    estimate_inertia,
    leave_each_out,
    window_sweep,
)
from koopman_inertia.kmd import (
    DecompositionSettings,
    KoopmanSpectrum,
    conjugate_partners,
    reconstruct,
    vector_prony,
)
from koopman_inertia.series import POWER_CHANNEL, TimeSeriesSet
from koopman_inertia.simulator import DEFAULT_DT, _vector_field, energy_function, rk4_steps, simulate
from synthetic import (
    T60,
    currents_by_full_solve,
    five_mode_three_channel,
    random_network_admittance,
    random_swing_problem,
    series_from_spectrum,
    smib_network,
)

TRUE_SYSTEM_WIDE = 1.4998
WINDOWS = (2.0, 4.0, 6.0, 8.0, 10.0, 12.0)


@pytest.fixture
def report(capsys):
    def _report(number, name, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return _report


def _rel(x):
    return abs(x - TRUE_SYSTEM_WIDE) / TRUE_SYSTEM_WIDE


def test_criterion_1_case_i_end_to_end(report):
    t0 = time.perf_counter()
    net = scale_loading(load_network("ieee39"), DEFAULT_LOADING)
    data, _ = simulate(net, CASE_I, 10.5)
    est = estimate_from_series(data, 10.0)
    elapsed = time.perf_counter() - t0
    err = _rel(est.system_wide)
    report(1, "case (i) system-wide within 3%", err <= 0.03 and elapsed < 10.0,
           f"M_hat={est.system_wide:.5f}, error={100 * err:.3f}%, runtime={elapsed:.2f} s")


def test_criterion_2_case_ii_end_to_end(report, case_ii):
    est = estimate_from_series(case_ii, 10.0)
    err = _rel(est.system_wide)
    report(2, "case (ii) system-wide within 5%", err <= 0.05,
           f"M_hat={est.system_wide:.5f}, error={100 * err:.3f}%")


def test_criterion_3_window_sweep(report, case_i):
    results = dict(window_sweep(case_i, WINDOWS))
    late = [results[w].system_wide for w in WINDOWS if w >= 10.0]
    spread = (max(late) - min(late)) / min(late)
    worst = max(_rel(v) for v in late)
    table = ", ".join(f"{w:g}s={results[w].system_wide:.4f}" for w in WINDOWS)
    report(3, "window sweep converged after 10 s", spread < 0.02 and worst <= 0.03,
           f"spread={100 * spread:.3f}%, worst error={100 * worst:.3f}%; {table}")


def test_criterion_4_leave_one_out(report, case_i):
    results = leave_each_out(case_i, 10.0)
    errs = {lab: _rel(e.system_wide) for lab, e in results}
    worst = max(errs, key=errs.get)
    ok = len(results) == 9 and all(v <= 0.10 for v in errs.values())
    report(4, "leave-one-out within 10%", ok,
           f"{len(results)} runs, worst {worst} at {100 * errs[worst]:.2f}%")


def test_criterion_5_prony_oracle(report):
    z, V = five_mode_three_channel()
    data = series_from_spectrum(z, V, 120)
    spec = vector_prony(data, 5)
    idx = [int(np.argmin(np.abs(spec.discrete - zj))) for zj in z]
    distinct = sorted(idx) == list(range(5))
    eig_err = np.max(np.abs(spec.discrete[idx] - z) / np.abs(z))
    mode_err = np.max(np.abs(spec.modes[idx] - V)) / np.max(np.abs(V))
    rms = float(np.sqrt(np.mean((reconstruct(spec).values - data.values) ** 2)))
    ok = distinct and eig_err <= 1e-8 and mode_err <= 1e-8 and rms <= 1e-9
    report(5, "Prony oracle recovery", ok,
           f"eigenvalue error={eig_err:.2e}, mode error={mode_err:.2e}, rms={rms:.2e}")


def test_criterion_6_smib_exactness(report):
    # omega = A cos(Omega t), deltaP = M domega/dt written as one conjugate pair
    M, Omega, A = 0.2, 2 * math.pi * 1.1, 0.3
    lam = 1j * Omega
    z = np.exp(np.array([lam, -lam]) * T60)
    V = np.array([[A / 2, lam * M * A / 2], [A / 2, -lam * M * A / 2]])
    spec = KoopmanSpectrum(z, V, T60, ("omega_2", POWER_CHANNEL), 601)
    est = estimate_inertia(assemble_system(spec))
    err = abs(est.M[0] - M)
    report(6, "SMIB analytic exactness", err <= 1e-8, f"M_hat={float(est.M[0])!r}, error={err:.2e}")


def test_criterion_7_kron_equivalence(report):
    rng = np.random.default_rng(20240)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 11))
        Y = random_network_admittance(rng, n)
        keep = sorted(rng.choice(n, int(rng.integers(1, n)), replace=False).tolist())
        V = rng.normal(size=len(keep)) + 1j * rng.normal(size=len(keep))
        I_full = currents_by_full_solve(Y, keep, V)
        I_red = kron_eliminate(Y, keep) @ V
        worst = max(worst, np.max(np.abs(I_red - I_full)) / max(1.0, np.max(np.abs(I_full))))
    report(7, "Kron reduction matches full solve", worst <= 1e-10,
           f"100 networks, worst relative current error={worst:.2e}")


def _smib_final_state(dt, t_end=2.0):
    net = smib_network()
    op = operating_point(net)
    red = kron_reduce(net, op=op)
    x0 = equilibrium_state(op, net).as_vector() + np.array([0.4, 0.0])
    return rk4_steps(_vector_field(red, 0.0), x0, round(t_end / dt), dt)[-1]


def test_criterion_8_property_suites(report, tmp_path, study_net, case_i, case_i_run):
    checks = {}

    spec = vector_prony(case_i.window(10), 100, 5)
    partner = conjugate_partners(spec.discrete)
    closure = max(np.max(np.abs(spec.discrete[partner] - np.conj(spec.discrete))),
                  np.max(np.abs(spec.modes[partner] - np.conj(spec.modes))))
    checks["conjugate closure"] = (closure < 1e-12, f"{closure:.1e}")

    exact = DecompositionSettings(order=10, stride=8, keep=None)
    _, _, _, data = random_swing_problem(np.random.default_rng(6))
    base = estimate_from_series(data, None, exact).M
    up_p = estimate_from_series(data.scaled(POWER_CHANNEL, 3.0), None, exact).M
    vals = data.values.copy()
    vals[:, :-1] *= 3.0
    up_w = estimate_from_series(TimeSeriesSet(data.period, data.labels, vals), None, exact).M
    scaling = max(np.max(np.abs(up_p / (3.0 * base) - 1)), np.max(np.abs(up_w * 3.0 / base - 1)))
    checks["scaling laws"] = (scaling < 1e-8, f"{scaling:.1e}")

    perm = ["omega_7", "omega_2", "omega_10", "omega_5", "omega_3", "omega_9", "omega_4",
            "omega_8", "omega_6"]
    ref = estimate_from_series(case_i, 10.0).as_dict()
    got = estimate_from_series(case_i.select(perm + [POWER_CHANNEL]), 10.0).as_dict()
    equiv = max(abs(got[k] / ref[k] - 1) for k in perm)
    checks["permutation equivariance"] = (equiv < 1e-6, f"{equiv:.1e}")

    ref_state = _smib_final_state(0.02 / 8)
    e1 = np.max(np.abs(_smib_final_state(0.02) - ref_state))
    e2 = np.max(np.abs(_smib_final_state(0.01) - ref_state))
    checks["RK4 order"] = (abs(e1 / e2 - 16.0) < 3.2, f"ratio {e1 / e2:.2f}")

    _, traj = case_i_run
    op = operating_point(study_net)
    red = kron_reduce(study_net, Phase.POST_FAULT, CASE_I, op)
    lossless = dataclasses.replace(red, admittance=1j * red.admittance.imag)
    x_eq = equilibrium_state(op, study_net)
    lossless = dataclasses.replace(lossless, p_mech=electrical_power(lossless, x_eq.delta))
    xs = rk4_steps(_vector_field(lossless, 0.0), traj.x[traj.clear_index], 12000, DEFAULT_DT)
    energy = [energy_function(lossless, SystemState.from_vector(x)) for x in xs[::60]]
    drift = max(energy) - min(energy)
    checks["lossless energy drift"] = (drift < 1e-6, f"{drift:.1e}")

    path = tmp_path / "roundtrip.csv"
    write_timeseries_csv(case_i, path)
    identical = np.array_equal(read_timeseries_csv(path).values, case_i.values)
    checks["CSV round trip"] = (identical, "bit-identical" if identical else "values differ")

    ok = all(flag for flag, _ in checks.values())
    detail = "; ".join(f"{name} {'ok' if flag else 'FAILED'} {info}"
                       for name, (flag, info) in checks.items())
    report(8, "property suites", ok, detail)
