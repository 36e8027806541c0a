import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tcpwindow.laws import Dirac, DiscreteMixture, Uniform01, kappa1, law_from_dict


@given(st.floats(0, 0.999), st.floats(0.5, 6))
def test_dirac_moment(delta, p):
    assert Dirac(delta).moment(p) == pytest.approx(delta**p)


def test_uniform_moments_match_sampling():
    g = np.random.default_rng(0)
    q = Uniform01().sample(g, 400_000)
    for p in (1, 2, 3):
        assert abs(np.mean(q**p) - Uniform01().moment(p)) < 5 * np.std(q**p) / math.sqrt(q.size)


def test_mixture_moment_and_sup():
    law = DiscreteMixture((0.2, 0.8), (0.25, 0.75))
    assert law.moment(1) == pytest.approx(0.65)
    assert law.essential_sup == 0.8
    assert DiscreteMixture((0.2, 0.8), (1.0, 0.0)).essential_sup == 0.2


@pytest.mark.parametrize(
    "atoms, weights",
    [((0.5,), (0.9,)), ((1.0,), (1.0,)), ((0.2, 0.3), (1.2, -0.2)), ((), ())],
)
def test_mixture_validation(atoms, weights):
    with pytest.raises(ValueError):
        DiscreteMixture(atoms, weights)


@pytest.mark.parametrize("bad", [1.0, -0.1, 2.0])
def test_dirac_range(bad):
    with pytest.raises(ValueError):
        Dirac(bad)


def test_kappa1():
    assert kappa1(Dirac(0.5)) == 0.5
    assert kappa1(Uniform01()) == 0.5


@pytest.mark.parametrize("law", [Dirac(0.5), Uniform01(), DiscreteMixture((0.1, 0.6), (0.5, 0.5))])
def test_dict_round_trip(law):
    assert law_from_dict(law.to_dict()) == law


def test_law_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        law_from_dict({"kind": "beta"})
    with pytest.raises(ValueError):
        law_from_dict({"kind": "dirac", "delta": 0.5, "dleta": 0.5})
