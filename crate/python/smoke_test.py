"""Smoke test for the _srh extension module."""
import json
import math

import _srh

CONFIG = {
    "profile": {"family": "const2", "theta": 0.02, "kappa": 0.01},
    "grid": {"tau0": 0.0, "tau1": 0.25, "lam0": 0.0, "lam1": 1.0, "n_lam": 65},
    "seeds": {"s_fn": "0.01*sin(lambda)", "b0": 0.005, "g0": "auto"},
}


def main():
    p = _srh.Profile("coth")
    e = p.eval(1.0)
    assert abs(e.alpha - 2.0 / math.tanh(1.0)) < 1e-14
    assert e.eps == 1.0

    z = _srh.State(1.0, 0.0, 1.0, 0.0)
    fixture = _srh.ProfileEval.constant(2.0, 0.0)
    jet = _srh.solve_jet(z, fixture, 0.0, 1.0)
    assert jet.to_list() == [0.0, 1.0, 2.0, 0.0, 1.0, 2.0, -1.0, 0.0], jet
    assert max(abs(r) for r in _srh.residuals(z, jet, fixture)) == 0.0
    rate = _srh.phi_map(jet, (0.3, 0.7))
    back = _srh.invert_phi(z, fixture, (0.3, 0.7), rate)
    assert back.max_abs_diff(jet) < 1e-12

    try:
        _srh.invert_phi(z, fixture, (0.0, 0.0), rate)
    except _srh.SrhException as exc:
        assert "DirectionError" in str(exc)
    else:
        raise AssertionError("zero direction accepted")

    cfg = json.dumps(CONFIG)
    grid = _srh.solve(cfg)
    assert not grid.truncated and min(grid.field("Pi")) > 0.0
    rep = json.loads(_srh.verify(grid))
    assert rep["positivity"]["min_q"] > 0.0 and rep["rh_max"] < 1e-2
    ser = json.loads(_srh.series(cfg, grid, 6))
    assert ser["pass"], ser
    print("smoke test ok: rh_max=%.3e theta spread=%.3e series err=%.3e"
          % (rep["rh_max"], rep["theta"]["rel_spread"], ser["max_abs_err"]))


if __name__ == "__main__":
    main()
