"""Shared test oracles: random stable systems and brute-force simulators.

Everything here works directly from the structural equations, independently
of the production moving-average and stacked-recursion code paths, so tests
can cross-check those paths against plain simulation.
"""

from __future__ import annotations

import numpy as np

from newsvar.regression import ArFit
from newsvar.svar import SvarEstimate, SvarSpec


def random_stable_system(
    rng: np.random.Generator,
    m: int = 4,
    k: int = 1,
    radius: float | None = None,
) -> SvarEstimate:
    """Draw a random recursive system with intervention and global blocks.

    The domestic companion spectral radius is rescaled to ``radius`` (drawn
    from U(0.2, 0.85) when omitted); exogenous AR coefficients stay inside
    the unit circle, so the full stacked system is stationary.
    """
    names = tuple(f"v{i}" for i in range(m))
    controls = tuple(f"g{j}" for j in range(k))
    spec = SvarSpec(ordering=names, lags=2, intervention=(True, True), controls=controls)

    A0 = np.eye(m)
    A0[np.tril_indices(m, -1)] = rng.normal(0.0, 0.4, size=m * (m - 1) // 2)
    Phi1 = rng.normal(0.0, 0.5 / np.sqrt(m), size=(m, m))
    Phi2 = rng.normal(0.0, 0.5 / np.sqrt(m), size=(m, m))
    companion = np.zeros((2 * m, 2 * m))
    companion[:m, :m] = Phi1
    companion[:m, m:] = Phi2
    companion[m:, :m] = np.eye(m)
    spectral = np.max(np.abs(np.linalg.eigvals(companion)))
    target = radius if radius is not None else rng.uniform(0.2, 0.85)
    scale = target / spectral if spectral > 0 else 1.0
    Phi1 *= scale
    Phi2 *= scale**2

    rho_s = rng.uniform(0.2, 0.9)
    s_process = ArFit(
        order=1,
        intercept=rng.normal(0.0, 0.05),
        coefficients=np.array([rho_s]),
        omega=rng.uniform(0.5, 1.5),
    )
    controls_process = tuple(
        ArFit(
            order=1,
            intercept=rng.normal(0.0, 0.05),
            coefficients=np.array([rng.uniform(-0.8, 0.8)]),
            omega=rng.uniform(0.5, 1.5),
        )
        for _ in range(k)
    )
    return SvarEstimate(
        spec=spec,
        variables=names,
        controls=controls,
        A0=A0,
        A1=A0 @ Phi1,
        A2=A0 @ Phi2,
        gamma0s=rng.normal(0.0, 0.4, size=m),
        gamma1s=rng.normal(0.0, 0.4, size=m),
        Dw=rng.normal(0.0, 0.4, size=(m, k)),
        a_q=rng.normal(0.0, 0.1, size=m),
        sigma=rng.uniform(0.5, 1.5, size=m),
        s_process=s_process,
        controls_process=controls_process,
    )


def simulate_structural(
    est: SvarEstimate,
    steps: int,
    eps: np.ndarray,
    eta: np.ndarray,
    v: np.ndarray,
    q_init: np.ndarray | None = None,
    s_init: float = 0.0,
    z_init: np.ndarray | None = None,
) -> np.ndarray:
    """Brute-force recursion over the structural equations, one at a time.

    ``eps`` (steps, m), ``eta`` (steps,), ``v`` (steps, k) are structural
    innovations.  Returns the domestic paths (steps, m).  Works equation by
    equation in the causal order, never inverting the impact matrix, so it is
    an independent oracle for the analytic responses.
    """
    m, k = est.m, est.k
    rho_s = float(est.s_process.coefficients[0])
    a_s = est.s_process.intercept
    if k:
        R, c_a, _ = est.controls_transition()
    q = np.zeros((steps + 2, m))
    if q_init is not None:
        q[0] = q_init[0]
        q[1] = q_init[1]
    s_prev = s_init
    z_prev = np.zeros(k) if z_init is None else np.asarray(z_init, dtype=float)
    out = np.empty((steps, m))
    for t in range(steps):
        s_t = a_s + rho_s * s_prev + eta[t]
        z_t = (c_a + R @ z_prev + v[t]) if k else np.zeros(0)
        row = np.empty(m)
        for i in range(m):
            acc = est.a_q[i]
            for j in range(i):
                acc -= est.A0[i, j] * row[j]
            acc += est.A1[i] @ q[t + 1] + est.A2[i] @ q[t]
            acc += est.gamma0s[i] * s_t + est.gamma1s[i] * s_prev
            if k:
                acc += est.Dw[i] @ z_t
            acc += eps[t, i]
            row[i] = acc
        q[t + 2] = row
        out[t] = row
        s_prev = s_t
        z_prev = z_t
    return out


def oracle_irf(est: SvarEstimate, shock: str, horizon: int) -> np.ndarray:
    """Shocked-minus-baseline simulation for any shock name.

    The shock sizes match the analytic convention: one standard error of the
    corresponding structural innovation at t = 0, nothing after.
    """
    m, k = est.m, est.k
    steps = horizon + 1
    eps = np.zeros((steps, m))
    eta = np.zeros(steps)
    v = np.zeros((steps, k))
    if shock in est.variables:
        eps[0, est.variables.index(shock)] = np.sqrt(est.sigma[est.variables.index(shock)])
    elif shock == est.spec.intervention_name:
        eta[0] = est.s_process.omega
    elif shock in est.controls:
        _, _, omegas = est.controls_transition()
        v[0, est.controls.index(shock)] = omegas[est.controls.index(shock)]
    else:
        raise ValueError(f"unknown shock {shock!r}")
    baseline = simulate_structural(
        est, steps, np.zeros((steps, m)), np.zeros(steps), np.zeros((steps, k))
    )
    shocked = simulate_structural(est, steps, eps, eta, v)
    return shocked - baseline


def stacked_true_matrices(est: SvarEstimate) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(P0inv, B1, B2, intercept) of the one-step form, assembled locally."""
    m, k = est.m, est.k
    n = m + 1 + k
    R, c_a, _ = est.controls_transition()
    P0 = np.eye(n)
    P0[:m, :m] = est.A0
    P0[:m, m] = -est.gamma0s
    if k:
        P0[:m, m + 1 :] = -est.Dw
    P1 = np.zeros((n, n))
    P1[:m, :m] = est.A1
    P1[:m, m] = est.gamma1s
    P1[m, m] = float(est.s_process.coefficients[0])
    if k:
        P1[m + 1 :, m + 1 :] = R
    P2 = np.zeros((n, n))
    P2[:m, :m] = est.A2
    a = np.concatenate([est.a_q, [est.s_process.intercept], c_a])
    P0inv = np.linalg.inv(P0)
    return P0inv, P0inv @ P1, P0inv @ P2, P0inv @ a


def simulate_panel(
    est: SvarEstimate, steps: int, rng: np.random.Generator, burn: int = 100
) -> np.ndarray:
    """Gaussian-innovation sample path of (q, s, controls), after burn-in."""
    m, k = est.m, est.k
    n = m + 1 + k
    P0inv, B1, B2, c = stacked_true_matrices(est)
    scales = np.concatenate(
        [
            np.sqrt(est.sigma),
            [est.s_process.omega],
            est.controls_transition()[2] if k else np.zeros(0),
        ]
    )
    total = steps + burn
    u = rng.normal(size=(total, n)) * scales
    shifted = u @ P0inv.T + c
    Z = np.zeros((total + 2, n))
    for t in range(total):
        Z[t + 2] = shifted[t] + B1 @ Z[t + 1] + B2 @ Z[t]
    return Z[2 + burn :]
