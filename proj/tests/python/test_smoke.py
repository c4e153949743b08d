import json
import os
import subprocess

import numpy as np
import pytest

import wendy


def test_catalog_lists_models():
    names = [m["name"] for m in wendy.models()]
    assert "logistic" in names
    lv = wendy.model("lv")
    assert lv["dim"] == 2
    assert len(lv["param_labels"]) == len(lv["w_star"])


def test_noiseless_simulation_is_truth():
    t, u, truth = wendy.simulate("logistic", 256)
    assert t.shape == (257,)
    assert u.shape == truth.shape == (257, 1)
    np.testing.assert_array_equal(u, truth)


def test_noise_is_seeded():
    _, a, _ = wendy.simulate("logistic", 256, 0.1, seed=3)
    _, b, _ = wendy.simulate("logistic", 256, 0.1, seed=3)
    _, c, _ = wendy.simulate("logistic", 256, 0.1, seed=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_estimate_recovers_logistic():
    t, u, _ = wendy.simulate("logistic", 512, 0.05, seed=1)
    fit = wendy.estimate(t, u, model="logistic")
    assert fit["E2"] < 0.05
    assert fit["ci"].shape == (2, 2)
    assert np.all(fit["ci"][:, 0] <= fit["w_hat"])
    assert np.all(fit["w_hat"] <= fit["ci"][:, 1])


def test_alpha_one_matches_ols():
    t, u, _ = wendy.simulate("lv", 256, 0.05, seed=2)
    a = wendy.estimate(t, u, model="lv", alpha=1.0)
    b = wendy.estimate(t, u, model="lv", estimator="ols")
    np.testing.assert_array_equal(a["w_hat"], b["w_hat"])


def test_custom_library_matches_model():
    t, u, _ = wendy.simulate("logistic", 256, 0.02, seed=5)
    lib = json.dumps({"dim": 1, "equations": [["u1", "u1^2"]]})
    a = wendy.estimate(t, u, library=lib)
    b = wendy.estimate(t, u, model="logistic")
    np.testing.assert_allclose(a["w_hat"], b["w_hat"], rtol=1e-12)


def test_errors_carry_codes():
    with pytest.raises(wendy.WendyError) as e:
        wendy.model("nope")
    assert e.value.code == "UnknownModel"
    t = np.array([0.0, 0.1, 0.3, 0.4])
    with pytest.raises(wendy.WendyError) as e:
        wendy.estimate(t, np.ones((4, 1)), model="logistic")
    assert e.value.code == "NonUniformGrid"
    with pytest.raises(wendy.WendyError) as e:
        wendy.run_experiment('{"bogus": 1}')
    assert e.value.code == "ConfigError"


def test_experiment_is_deterministic():
    cfg = json.dumps({"experiment": {"model": "logistic", "n_trials": 2, "noise_ratios": [0.05],
                                     "subsample_factors": [8]}})
    a = wendy.run_experiment(cfg)
    b = wendy.run_experiment(cfg, jobs=2)
    assert len(a["trials"]) == 4
    assert a["summary_json"] == b["summary_json"]
    assert a["long_csv"].splitlines()[0] == "model,M,sigma_nr,estimator,metric,value"
    assert json.loads(a["summary_json"])["schema_version"] == 1


@pytest.mark.skipif(not os.environ.get("WENDY_CLI"), reason="CLI binary not provided")
def test_cli_lists_models():
    out = subprocess.run([os.environ["WENDY_CLI"], "models", "list", "--json"],
                         check=True, capture_output=True, text=True).stdout
    doc = json.loads(out)
    assert doc["schema_version"] == 1
    assert {m["name"] for m in doc["models"]} == {m["name"] for m in wendy.models()}
