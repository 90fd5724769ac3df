import math

import numpy as np
import pytest

import spinbell


def chsh_psi():
    psi = np.zeros(8, dtype=complex)
    psi[[0, 2, 6, 7]] = 0.5
    return psi


def prep_config(**extra):
    cfg = {
        "schema_version": 1,
        "experiment": "chsh-prep",
        "name": "smoke",
        "amplitudes": {"B1_G": [25]},
        "dephasing": {"T2_us": [None, 2.4]},
    }
    cfg.update(extra)
    return cfg


def test_chsh_maximum():
    r = spinbell.chsh_maximize(chsh_psi())
    assert r["value"] == pytest.approx(math.sqrt(7), abs=1e-8)
    assert not r["degenerate"]
    for key in ("A", "A_prime", "B", "B_prime"):
        m = r[key]
        assert np.allclose(m @ m, np.eye(m.shape[0]), atol=1e-9)
    reducible, witness = spinbell.reducibility(chsh_psi())
    assert not reducible
    assert abs(witness) == pytest.approx(0.25)


def test_product_state_is_degenerate():
    up = np.zeros(8, dtype=complex)
    up[0] = 1
    r = spinbell.chsh_maximize(up)
    assert r["degenerate"]
    assert r["value"] <= 2 + 1e-6


def test_cglmp():
    assert spinbell.cglmp_ideal() == pytest.approx(2.89624, abs=1e-5)
    flat = [np.eye(16) / 16] * 4
    assert abs(spinbell.cglmp_value(flat)) < 1e-12


def test_fit_decay():
    tau = np.linspace(0, 500, 20)
    f = spinbell.fit_decay(tau, np.exp(-2 * tau / 560))
    assert f["T2_us"] == pytest.approx(560, rel=1e-3)
    with pytest.raises(spinbell.FitRejected):
        spinbell.fit_decay(tau, np.full(20, 0.7))


def test_run_and_report():
    out = spinbell.run(prep_config(), workers=1)
    doc = out["result"]
    assert doc["schema"] == "spinbell.result"
    assert len(doc["cells"]) == 2
    assert doc["config_hash"] in out["csv"]
    rep = spinbell.report(doc)
    assert rep["flags"] == 0
    # the noiseless cell has no published counterpart
    assert len(rep["rows"]) == 1
    assert len(rep["skipped"]) == 1

    again = spinbell.run(prep_config(), workers=2)
    assert again["csv"] == out["csv"]


def test_config_errors_and_hash():
    with pytest.raises(spinbell.ConfigError):
        spinbell.run(prep_config(amplitudes={"B1_G": []}))
    a = spinbell.config_hash(prep_config())
    assert a == spinbell.config_hash(prep_config(workers=4))
    assert a != spinbell.config_hash(prep_config(seed=7))


def test_level_diagram():
    fields, energies = spinbell.level_diagram("trimer", 0.0, 2.0, 5)
    assert len(fields) == 5
    assert energies.shape[0] == 5
    assert np.all(np.diff(energies, axis=1) >= 0)
    with pytest.raises(ValueError):
        spinbell.level_diagram("tetramer", 0.0, 1.0, 3)
