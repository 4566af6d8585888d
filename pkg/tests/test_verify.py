import numpy as np
import pytest

from qhydro.config import RunConfig, load_preset
from qhydro.core import make_grid
from qhydro.verify import (
    is_free_centred_gaussian,
    is_harmonic_ground_state,
    report,
    run_checks,
    sign_change_location,
)


def test_sign_change_location_is_accurate_for_non_periodic_fields():
    g = make_grid(256, 20.0)
    x = g.nodes
    values = x**3 - 2.0  # not periodic: a global trigonometric fit would ring
    assert sign_change_location(g, values, x > -5) == pytest.approx(2 ** (1 / 3), abs=1e-12)
    assert np.isnan(sign_change_location(g, x**2 + 1, x > 0))
    assert sign_change_location(g, np.cos(x), x > 0) == pytest.approx(np.pi / 2, abs=1e-9)


def test_config_classifiers():
    assert is_free_centred_gaussian(RunConfig())
    assert not is_free_centred_gaussian(load_preset("skewed_density"))
    assert is_harmonic_ground_state(load_preset("harmonic_ground"))
    assert not is_harmonic_ground_state(RunConfig())


def test_default_checks_pass():
    checks = run_checks(RunConfig())
    rep = report(checks)
    assert rep["all_passed"], rep["failed"]
    assert rep["eq32_x3f"] == pytest.approx(-1.5, abs=1e-8)
    for name in ("variance_spreading", "oracle_fields_4sigma", "vacuum_pressure_sign_change", "force_crossover", "crossover_density"):
        assert checks[name].passed, name
    assert checks["force_crossover"].value == pytest.approx(np.sqrt(2), abs=1e-9)


def test_skewed_preset_skips_oracle_checks():
    checks = run_checks(load_preset("skewed_density"))
    assert "oracle_fields_4sigma" not in checks
    assert checks["moment_ladder_k0_3"].passed
