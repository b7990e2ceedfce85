import numpy as np
import pytest

from prethermal.presets import PRESETS, build_preset


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_builds_and_validates(name):
    model = build_preset(name)
    assert model.name == name
    assert model.charge.integer_spacings
    assert model.H.hermiticity_defect() < 1e-12
    assert model.omega > 0
    assert model.kappa0 > 0
    if model.theorem == "zn-quasi":
        assert model.H.m == 2
        assert model.twist_order >= 2
    else:
        assert model.H.m == 1


@pytest.mark.parametrize("name", [n for n in sorted(PRESETS)
                                  if n != "zn-twist-demo"])
def test_floquet_presets_pin_nu0_to_omega(name):
    model = build_preset(name)
    nu0 = max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    assert nu0 == pytest.approx(model.omega)


def test_length_override():
    model = build_preset("number-chain", length=4)
    assert model.graph.nsites == 4


def test_unknown_preset():
    with pytest.raises(KeyError):
        build_preset("does-not-exist")
