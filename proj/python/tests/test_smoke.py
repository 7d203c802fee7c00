import math
import os
from pathlib import Path

import numpy as np
import pytest

import vrpg

FIXTURES = Path(os.environ.get("VRPG_FIXTURE_DIR", Path(__file__).parents[2] / "data" / "fixtures"))


def test_algorithm_names():
    assert vrpg.algorithms() == ["gpomdp", "svrpg", "srvrpg", "storm-pg", "page-pg"]


def test_theory_spot_value():
    c = vrpg.theory_constants(G=1, M=1, R=1, W=0, gamma=0.5)
    assert c["L"] == 20.0
    assert c["C"] == 3104.0
    r = vrpg.recommended_hyperparams(1, 1, 1, 0, 0.5, B=5, N=100)
    assert r["eta"] == pytest.approx(math.sqrt(5 / 620800))
    assert r["satisfied"]


def test_bad_inputs_raise_value_error():
    with pytest.raises(ValueError):
        vrpg.theory_constants(1, 1, 1, 0, 1.0)
    with pytest.raises(ValueError, match="page-pg"):
        vrpg.run("cartpole", "adam", eta=1e-3, large_batch=10)


def test_exact_gradient_on_bandit():
    rep = vrpg.exact_gradient(FIXTURES / "bandit.mdp", np.zeros(2), 0.9)
    np.testing.assert_allclose(rep["gradient"], [0.25, -0.25], atol=1e-15)
    assert rep["value"] == pytest.approx(0.5)
    assert "offpolicy_gpomdp" not in rep
    rep = vrpg.exact_gradient(FIXTURES / "chain.mdp", np.zeros(4), 0.9, behavior=np.full(4, 0.3))
    np.testing.assert_allclose(rep["offpolicy_gpomdp"]["mean"], rep["gradient"], atol=1e-10)


def test_run_is_seeded():
    kw = dict(environment="cartpole", algorithm="page-pg", eta=1e-3, large_batch=20,
              small_batch=4, p=0.5, max_updates=5, hidden=[8])
    a = vrpg.run(seed=3, **kw)
    b = vrpg.run(seed=3, **kw)
    assert a["avg_return"] == b["avg_return"]
    np.testing.assert_array_equal(a["theta"], b["theta"])
    assert a["iteration"] == list(range(6))
    assert set(a["branch"]) <= {"full", "small"}


def test_train_writes_csv(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "[experiment]\n"
        f"environment = {FIXTURES / 'chain.mdp'}\n"
        "algorithm = storm-pg\n"
        "runs = 2\n"
        "max_updates = 10\n"
        "[optimizer]\n"
        "eta = 0.1\nlarge_batch = 10\nsmall_batch = 2\nalpha = 0.5\ngamma = 0.9\n"
    )
    s = vrpg.train(cfg, out_dir=tmp_path / "out")
    assert len(s["runs"]) == 2
    lines = Path(s["runs"][0]["csv"]).read_text().splitlines()
    assert lines[0] == "run_id,iteration,cum_episodes,branch,avg_return,v_norm,ms"
    assert len(lines) == 12


def test_config_error_names_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[experiment]\nruns = 2\nspeed = 9\n")
    with pytest.raises(vrpg.ParseError, match="line 3"):
        vrpg.train(cfg, out_dir=tmp_path)


def test_verify_theory_suite():
    checks = vrpg.verify("theory")
    assert checks and all(c["passed"] for c in checks)
