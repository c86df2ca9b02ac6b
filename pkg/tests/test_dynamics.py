import json

import numpy as np
import pytest

from helpers import oracle_irf, random_stable_system, stacked_true_matrices
from newsvar import dynamics as dyn
from newsvar import svar as sv
from newsvar.errors import ModelSpecError, NonstationaryError
from newsvar.regression import ArFit


def diagonal_system(m=3, rho=0.0, gamma0=None, gamma1=None, dw=None, sigma=None, k=1):
    names = tuple(f"v{i}" for i in range(m))
    controls = tuple(f"g{j}" for j in range(k))
    spec = sv.SvarSpec(
        ordering=names, lags=2, intervention=(True, True), controls=controls
    )
    return sv.SvarEstimate(
        spec=spec,
        variables=names,
        controls=controls,
        A0=np.eye(m),
        A1=rho * np.eye(m),
        A2=np.zeros((m, m)),
        gamma0s=np.zeros(m) if gamma0 is None else np.asarray(gamma0, dtype=float),
        gamma1s=np.zeros(m) if gamma1 is None else np.asarray(gamma1, dtype=float),
        Dw=np.zeros((m, k)) if dw is None else np.asarray(dw, dtype=float),
        a_q=np.zeros(m),
        sigma=np.ones(m) if sigma is None else np.asarray(sigma, dtype=float),
        s_process=ArFit(order=1, intercept=0.0, coefficients=np.array([0.5]), omega=1.0),
        controls_process=tuple(
            ArFit(order=1, intercept=0.0, coefficients=np.array([0.4]), omega=1.0)
            for _ in range(k)
        ),
    )


# ---------------------------------------------------------------------------
# moving-average recursion
# ---------------------------------------------------------------------------


def test_g_recursion_geometric():
    G = dyn.g_recursion(0.5 * np.eye(2), np.zeros((2, 2)), 5)
    for h in range(6):
        assert np.allclose(G[h], 0.5**h * np.eye(2))


def test_g_recursion_degenerate():
    G = dyn.g_recursion(np.zeros((3, 3)), np.zeros((3, 3)), 4)
    assert np.array_equal(G[0], np.eye(3))
    assert np.all(G[1:] == 0.0)


def test_g_recursion_matches_difference_equation_simulation():
    rng = np.random.default_rng(0)
    est = random_stable_system(rng, m=3, k=0)
    rf = sv.reduced_form(est)
    H = 12
    G = dyn.g_recursion(rf.Phi1, rf.Phi2, H)
    # simulate the homogeneous equation from each unit initial condition
    for j in range(3):
        x_prev2 = np.zeros(3)
        x_prev1 = np.zeros(3)
        x0 = np.eye(3)[:, j]
        path = [x0]
        x_prev1, x_prev2 = x0, np.zeros(3)
        for _ in range(H):
            x = rf.Phi1 @ x_prev1 + rf.Phi2 @ x_prev2
            path.append(x)
            x_prev2, x_prev1 = x_prev1, x
        for h in range(H + 1):
            assert np.allclose(G[h][:, j], path[h], atol=1e-12)


def test_g_recursion_rejects_bad_shapes():
    with pytest.raises(ValueError):
        dyn.g_recursion(np.eye(2), np.eye(3), 2)
    with pytest.raises(ValueError):
        dyn.g_recursion(np.eye(2), np.eye(2), -1)


# ---------------------------------------------------------------------------
# domestic shocks
# ---------------------------------------------------------------------------


def test_domestic_impact_of_first_variable_is_its_scale():
    rng = np.random.default_rng(1)
    est = random_stable_system(rng, m=4, k=1)
    out = dyn.irf_domestic(est, "v0", 8)
    assert out[0, 0] == pytest.approx(np.sqrt(est.sigma[0]), abs=1e-12)
    # nothing precedes the first variable, so only lags carry it onwards
    assert out.shape == (9, 4)


def test_domestic_identity_system_single_spike():
    est = diagonal_system(sigma=[4.0, 1.0, 1.0])
    out = dyn.irf_domestic(est, "v0", 6)
    assert out[0, 0] == 2.0
    assert np.allclose(out[1:], 0.0)
    assert np.allclose(out[0, 1:], 0.0)


def test_domestic_matches_simulation_oracle():
    rng = np.random.default_rng(2)
    for _ in range(5):
        est = random_stable_system(rng, m=4, k=1)
        for shock in est.variables:
            analytic = dyn.irf_domestic(est, shock, 24)
            assert np.allclose(analytic, oracle_irf(est, shock, 24), atol=1e-8)


def test_unknown_shock_name():
    est = diagonal_system()
    with pytest.raises(ModelSpecError):
        dyn.irf_domestic(est, "nope", 4)


# ---------------------------------------------------------------------------
# intervention shock
# ---------------------------------------------------------------------------


def test_sanction_impact_formula():
    rng = np.random.default_rng(3)
    est = random_stable_system(rng, m=4, k=1)
    out = dyn.irf_sanction(est, 6)
    impact = est.s_process.omega * np.linalg.solve(est.A0, est.gamma0s)
    assert np.allclose(out[0], impact, atol=1e-12)
    # first element: omega_s * gamma0s[0] because A0 is unit lower triangular
    assert out[0, 0] == pytest.approx(est.s_process.omega * est.gamma0s[0], abs=1e-12)


def test_sanction_zero_loadings_zero_path():
    est = diagonal_system(rho=0.5, gamma0=[0, 0, 0], gamma1=[0, 0, 0])
    assert np.all(dyn.irf_sanction(est, 10) == 0.0)


def test_sanction_matches_simulation_oracle():
    rng = np.random.default_rng(4)
    for _ in range(5):
        est = random_stable_system(rng, m=3, k=1)
        analytic = dyn.irf_sanction(est, 24)
        assert np.allclose(analytic, oracle_irf(est, "s", 24), atol=1e-8)


def test_sanction_requires_stationary_process():
    est = diagonal_system()
    bad = sv.SvarEstimate(
        spec=est.spec,
        variables=est.variables,
        controls=est.controls,
        A0=est.A0,
        A1=est.A1,
        A2=est.A2,
        gamma0s=np.ones(3),
        gamma1s=np.zeros(3),
        Dw=est.Dw,
        a_q=est.a_q,
        sigma=est.sigma,
        s_process=ArFit(order=1, intercept=0.0, coefficients=np.array([1.01]), omega=1.0),
        controls_process=est.controls_process,
    )
    with pytest.raises(NonstationaryError):
        dyn.irf_sanction(bad, 4)


# ---------------------------------------------------------------------------
# global shock
# ---------------------------------------------------------------------------


def test_global_zero_loading_zero_path():
    est = diagonal_system(dw=np.zeros((3, 1)))
    assert np.all(dyn.irf_global(est, 8) == 0.0)


def test_global_one_period_passthrough_when_control_is_white_noise():
    m, k = 3, 1
    names = tuple(f"v{i}" for i in range(m))
    spec = sv.SvarSpec(ordering=names, lags=2, intervention=(True, True), controls=("g0",))
    delta = np.array([[0.5], [0.2], [-0.3]])
    est = sv.SvarEstimate(
        spec=spec,
        variables=names,
        controls=("g0",),
        A0=np.eye(m),
        A1=np.zeros((m, m)),
        A2=np.zeros((m, m)),
        gamma0s=np.zeros(m),
        gamma1s=np.zeros(m),
        Dw=delta,
        a_q=np.zeros(m),
        sigma=np.ones(m),
        s_process=ArFit(order=1, intercept=0.0, coefficients=np.array([0.5]), omega=1.0),
        controls_process=(
            ArFit(order=1, intercept=0.0, coefficients=np.array([0.0]), omega=2.0),
        ),
    )
    out = dyn.irf_global(est, 5)
    assert np.allclose(out[0], 2.0 * delta[:, 0])
    assert np.allclose(out[1:], 0.0)


def test_global_matches_simulation_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        est = random_stable_system(rng, m=3, k=2)
        for control in est.controls:
            analytic = dyn.irf_global(est, 24, control)
            assert np.allclose(analytic, oracle_irf(est, control, 24), atol=1e-8)


def test_global_unknown_control():
    est = diagonal_system()
    with pytest.raises(ModelSpecError):
        dyn.irf_global(est, 4, "nope")


# ---------------------------------------------------------------------------
# variance decompositions
# ---------------------------------------------------------------------------


def test_fevd_own_shocks_only():
    est = diagonal_system(rho=0.4, gamma0=[0, 0, 0], gamma1=[0, 0, 0], dw=np.zeros((3, 1)))
    result = dyn.fevd(est, 8)
    for i, var in enumerate(result.variables):
        shares = result.shares[var]
        assert np.allclose(shares[:, i], 1.0)
        others = np.delete(shares, i, axis=1)
        assert np.allclose(others, 0.0)


def test_fevd_rows_sum_to_one():
    rng = np.random.default_rng(6)
    for _ in range(10):
        est = random_stable_system(rng, m=4, k=1)
        result = dyn.fevd(est, 24)
        for var in result.variables:
            assert np.allclose(result.shares[var].sum(axis=1), 1.0, atol=1e-10)


def test_fevd_matches_monte_carlo_variance_shares():
    rng = np.random.default_rng(7)
    est = random_stable_system(rng, m=3, k=1, radius=0.6)
    horizon = 4
    result = dyn.fevd(est, horizon)
    # simulate forecast errors from each shock family separately
    paths = 100_000
    P0inv, B1, B2, _ = stacked_true_matrices(est)
    n = 3 + 1 + 1
    scales = np.concatenate([np.sqrt(est.sigma), [est.s_process.omega], [est.controls_process[0].omega]])
    rng_mc = np.random.default_rng(8)
    # z_h simulated from a zero state with only one shock family active IS the
    # h-step forecast error due to that family, so its variance over paths is
    # the matching term of the decomposition
    contributions = np.zeros((n, horizon + 1, 3))
    for shock in range(n):
        u = np.zeros((paths, horizon + 1, n))
        u[:, :, shock] = rng_mc.normal(size=(paths, horizon + 1)) * scales[shock]
        z1 = np.zeros((paths, n))
        z2 = np.zeros((paths, n))
        for h in range(horizon + 1):
            z = u[:, h, :] @ P0inv.T + z1 @ B1.T + z2 @ B2.T
            contributions[shock, h] = z[:, :3].var(axis=0)
            z2, z1 = z1, z
    total = contributions.sum(axis=0)
    for h in (0, horizon):
        for i, var in enumerate(est.variables):
            mc_shares = contributions[:, h, i] / total[h, i]
            assert np.allclose(result.shares[var][h], mc_shares, atol=0.02)


def test_fevd_refuses_nonstationary_system():
    est = diagonal_system(rho=1.0)
    with pytest.raises(NonstationaryError, match="eigenvalue"):
        dyn.fevd(est, 4)
    with pytest.warns(RuntimeWarning, match="nonstationary"):
        dyn.irf_domestic(est, "v0", 4)


# ---------------------------------------------------------------------------
# stacked route
# ---------------------------------------------------------------------------


def test_stacked_equals_direct_everywhere():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10):
        est = random_stable_system(rng, m=4, k=2)
        worst = max(worst, dyn.max_method_deviation(est, 24))
    assert worst < 1e-10


def test_stacked_sanction_column_equals_direct_sanction():
    rng = np.random.default_rng(10)
    est = random_stable_system(rng, m=3, k=1)
    stacked_irf, _ = dyn.stacked_dynamics(est, 16)
    direct = dyn.irf_sanction(est, 16)
    assert np.allclose(stacked_irf.responses["s"], direct, atol=1e-12)


def test_stacked_fevd_rows_sum_to_one():
    rng = np.random.default_rng(11)
    est = random_stable_system(rng, m=3, k=1)
    _, result = dyn.stacked_dynamics(est, 12)
    for var in result.variables:
        assert np.allclose(result.shares[var].sum(axis=1), 1.0, atol=1e-12)


def test_scale_equivariance():
    rng = np.random.default_rng(12)
    est = random_stable_system(rng, m=3, k=1)
    doubled = sv.SvarEstimate(
        spec=est.spec,
        variables=est.variables,
        controls=est.controls,
        A0=est.A0,
        A1=est.A1,
        A2=est.A2,
        gamma0s=est.gamma0s,
        gamma1s=est.gamma1s,
        Dw=est.Dw,
        a_q=est.a_q,
        sigma=est.sigma * np.array([2.0, 1.0, 1.0]),
        s_process=est.s_process,
        controls_process=est.controls_process,
    )
    base = dyn.irf_all(est, 8)
    new = dyn.irf_all(doubled, 8)
    assert np.allclose(new.responses["v0"], np.sqrt(2.0) * base.responses["v0"])
    for other in ("v1", "v2", "s", "g0"):
        assert np.allclose(new.responses[other], base.responses[other])
    # variance shares shift toward the louder shock but still normalize
    fv = dyn.fevd(doubled, 8)
    for var in fv.variables:
        assert np.allclose(fv.shares[var].sum(axis=1), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def test_irf_csv_and_plot_json(tmp_path):
    rng = np.random.default_rng(13)
    est = random_stable_system(rng, m=2, k=1)
    irf = dyn.irf_all(est, 4)
    path = tmp_path / "irf.csv"
    dyn.write_irf_csv(irf, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "variable,shock,horizon,value"
    assert len(lines) == 1 + len(irf.shocks) * 5 * 2
    payload = dyn.plot_data_json(irf)
    assert payload["horizons"] == [0, 1, 2, 3, 4]
    assert set(payload["shocks"]) == set(irf.shocks)
    json.dumps(payload)
    fv = dyn.fevd(est, 4)
    fevd_path = tmp_path / "fevd.csv"
    dyn.write_fevd_csv(fv, fevd_path)
    assert fevd_path.read_text(encoding="utf-8").startswith("variable,shock,horizon,value")
