import warnings

import numpy as np
import pytest

from ricci_bvp.config import parse
from ricci_bvp.converge import (converge, observed_order, restrict_cell, restrict_vertex,
                                slab_resolutions)


def test_restrictions():
    fine = np.arange(8.0)
    assert np.array_equal(restrict_cell(fine), [0.5, 2.5, 4.5, 6.5])
    a = np.arange(5 * 4).reshape(5, 4)
    assert restrict_vertex(a, (True, False)).shape == (3, 4)
    assert slab_resolutions(9, 3) == [(9, 3), (17, 6), (33, 12)]


def test_observed_order():
    assert observed_order(4e-3, 1e-3) == pytest.approx(2.0)
    assert np.isnan(observed_order(1e-15, 1e-16))


def test_rotsym_hemisphere_second_order():
    cfg = parse("[run]\nkind=rotsym\nT=0.05\n[geometry]\nchart=radial\nn=2\nN0=25\n"
                "[initial]\nfamily=hemisphere\n[boundary]\neta=constant\n")
    rep = converge(cfg)
    assert not rep.exact and 1.4 <= rep.order <= 2.2
    assert rep.orders["psi"] > 1.8


@pytest.mark.slow
def test_warped_slab_triple():
    cfg = parse("[run]\nT=0.01\n[geometry]\nchart=slab\nn=2\nN0=17\nNt=3\n[initial]\n"
                "family=warped\namplitude=1.0\n[boundary]\neta=compatible\n")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = converge(cfg, tangential=False)
    assert 1.4 <= rep.order <= 2.2
