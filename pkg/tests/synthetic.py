"""Signals with a known Koopman spectrum and other constructions used as test oracles."""

import numpy as np

from koopman_inertia.grid_model import Branch, Bus, Generator, NetworkModel
from koopman_inertia.series import POWER_CHANNEL, TimeSeriesSet, omega_label

T60 = 1.0 / 60.0


def series_from_spectrum(z, V, n_samples, period=T60, labels=None):
    """y_k = sum_j z_j^k V_j (real part; the inputs are conjugate closed)."""
    z = np.asarray(z, dtype=complex)
    V = np.asarray(V, dtype=complex)
    k = np.arange(n_samples)
    Y = (z[None, :] ** k[:, None]) @ V
    assert np.max(np.abs(Y.imag)) < 1e-9 * max(1.0, np.max(np.abs(Y.real)))
    labels = labels or tuple(f"c{i}" for i in range(V.shape[1]))
    return TimeSeriesSet(period, tuple(labels), Y.real)


def conjugate_closed(lams, V_half, period=T60):
    """Expand eigenvalues with Im > 0 (and real ones) into a conjugate-closed set."""
    z, V = [], []
    for lam, v in zip(lams, V_half):
        lam = complex(lam)
        z.append(np.exp(lam * period))
        V.append(np.asarray(v, dtype=complex))
        if lam.imag != 0:
            z.append(np.exp(np.conj(lam) * period))
            V.append(np.conj(np.asarray(v, dtype=complex)))
    return np.array(z), np.array(V)


def five_mode_three_channel():
    """Two damped pairs and one decaying real mode over three channels."""
    lams = [complex(-0.3, 2 * np.pi * 0.6), complex(-0.8, 2 * np.pi * 1.3), -2.0]
    V_half = [[1.0 + 0.5j, -0.4 + 0.2j, 0.3 - 0.7j],
              [0.2 - 0.3j, 0.9 + 0.1j, -0.5 + 0.4j],
              [0.7, -0.2, 0.45]]
    return conjugate_closed(lams, V_half)


def swing_consistent(M, lams, Vw_half, period=T60, n_samples=601):
    """Channels omega_i and deltaP built so that sum_i M_i domega_i/dt = deltaP exactly.

    Each mode j has speed vector V_j^omega and power entry lambda_j * M . V_j^omega.
    """
    M = np.asarray(M, dtype=float)
    rows = []
    for lam, vw in zip(lams, Vw_half):
        vw = np.asarray(vw, dtype=complex)
        rows.append(np.concatenate([vw, [complex(lam) * (M @ vw)]]))
    z, V = conjugate_closed(lams, rows, period)
    labels = tuple(omega_label(i + 2) for i in range(len(M))) + (POWER_CHANNEL,)
    return series_from_spectrum(z, V, n_samples, period, labels)


def random_swing_problem(rng, n_gen=4, n_pairs=5, n_samples=601):
    M = rng.uniform(0.1, 0.3, n_gen)
    lams = [complex(-rng.uniform(0.05, 0.5), 2 * np.pi * f)
            for f in np.linspace(0.4, 1.8, n_pairs)]
    Vw = rng.normal(size=(n_pairs, n_gen)) + 1j * rng.normal(size=(n_pairs, n_gen))
    return M, lams, Vw, swing_consistent(M, lams, Vw, n_samples=n_samples)


def smib_network(x_line=0.4, xd=0.2, M=0.2, p=0.5, load=0.0):
    """Generator 2 on bus 2 feeding an infinite bus (generator 1, bus 1)."""
    buses = (Bus(1, "slack", 1.0), Bus(2, "PV", 1.0, p_load=load))
    branches = (Branch(1, 2, 0.0, x_line),)
    gens = (Generator(1, 1, 1e-3, None, 0.0, True), Generator(2, 2, xd, M, p))
    return NetworkModel(buses, branches, gens, name="smib")


def random_network_admittance(rng, n):
    """Connected random network with lossy branches and shunts to ground."""
    Y = np.zeros((n, n), dtype=complex)
    edges = [(k, int(rng.integers(0, k))) for k in range(1, n)]
    edges += [tuple(rng.choice(n, 2, replace=False)) for _ in range(n)]
    for a, b in edges:
        y = 1.0 / complex(rng.uniform(0.0, 0.05), rng.uniform(0.05, 0.5))
        Y[a, a] += y
        Y[b, b] += y
        Y[a, b] -= y
        Y[b, a] -= y
    Y[np.diag_indices(n)] += rng.uniform(0.1, 2.0, n) - 1j * rng.uniform(0.0, 0.5, n)
    return Y


def currents_by_full_solve(Y, keep, V_keep):
    """Solve the whole network for (I_keep, V_interior) with zero interior injections."""
    n = Y.shape[0]
    elim = [k for k in range(n) if k not in keep]
    A = np.zeros((n, n), dtype=complex)
    A[:, :len(elim)] = Y[:, elim]
    for col, k in enumerate(keep):
        A[k, len(elim) + col] = -1.0
    x = np.linalg.solve(A, -Y[:, keep] @ V_keep)
    return x[len(elim):]
