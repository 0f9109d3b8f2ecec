"""Smoke test for the rough_ldp_py extension module."""

import math

import rough_ldp_py as rl


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    # kernels and paths
    close(rl.eval_kernel({"kind": "K_fbm", "H": 0.5}, 1.0, 0.5), 1.0, 1e-12)
    f = rl.eval_kernel({"kind": "F_fou", "H": 0.5, "beta": -1.0, "xi": 2.0}, 1.0, 0.25)
    close(f, 2.0 * math.exp(-0.75), 1e-12)
    grid = rl.TimeGrid(8)
    assert len(grid) == 8
    gram = rl.gram_matrix({"kind": "K_fbm", "H": 0.3}, grid)
    t = grid.nodes
    close(gram[7][3], rl.fbm_covariance(0.3, t[7], t[3]), 1e-6)
    paths = rl.sample_fou(0.3, -1.0, 1.0, grid, 1000, 7)
    assert len(paths) == 1000 and len(paths[0]) == 8
    assert paths == rl.sample_fou(0.3, -1.0, 1.0, grid, 1000, 7)

    # rates
    schilder = {
        "kernel": {"kind": "Identity"},
        "vol": {"kind": "constant", "c": 1.0},
        "rho": 0.0,
        "include_drift": False,
        "start": {"kind": "fixed", "u": 0.0},
        "start_response": {"kind": "constant"},
        "constraint": {"level": 1.0, "sense": "ge"},
        "grid": {"n": 16},
    }
    r = rl.solve(schilder)
    assert r.converged
    close(r.value, 0.5, 1e-6)

    const_vol = rl.ModelParams.from_dict(
        {
            "lambda": 0.0,
            "beta": -1.0,
            "xi": 1.0,
            "rho": 0.0,
            "hurst": 0.3,
            "vol": {"sigma": {"kind": "constant", "c": 1.0}, "sigma_tilde": {"kind": "constant", "c": 1.0}, "b": 1.0},
        }
    )
    close(rl.tail_rate(const_vol, 1.0, 1.0, grid_nodes=16).value, 9.0 / 8.0, 1e-6)

    params = rl.ModelParams(0.3, beta=-1.0, xi=1.0, rho=-0.5)
    v1 = rl.smalltime_rate(params, 0.5, 0.2, grid_nodes=12).value
    v2 = rl.smalltime_rate(params, 1.0, 0.2, grid_nodes=12).value
    assert 0.0 < v1 < v2

    # smiles
    s = rl.tail_smile_slope(params, 1.0, grid_nodes=16)
    close(s.limit_value, 0.5 / s.rate, 1e-12)
    st = rl.smalltime_smile(params, 0.3, 0.2, grid_nodes=12)
    assert st.explosion_exponent == 0.2
    price = rl.bs_price(1.0, 1.1, 0.5, 0.25)
    close(rl.bs_implied_vol(price, 1.0, 1.1, 0.5), 0.25, 1e-10)

    # audits and Monte Carlo
    report = rl.check_theta_assumption({"kind": "uniform", "lo": 0.0, "hi": 0.2}, {"kind": "tails", "b": 1.0}, 0.3, [0.5, 0.1])
    assert report["verdict"] == "DIVERGES_TO_MINUS_INFINITY"
    assert all(v == -math.inf for _, v in report["values"])
    fit = rl.ldp_slope(params, {"kind": "point", "value": 0.0}, {"kind": "tails", "b": 1.0}, [0.9, 0.8, 0.7], 0.2, 2000, 3)
    assert len(fit["rows"]) == 3 and math.isfinite(fit["limit"])

    try:
        rl.ModelParams(0.3, beta=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("positive beta accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
