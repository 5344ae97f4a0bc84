import math
from fractions import Fraction

import pytest

from rcjrp.gridmath import GridConfig, ScaledPower, multipliers, RANDOM
from rcjrp.verify import (
    TARGET_INTERLEAVED,
    TARGET_SHIFTED,
    TARGET_STATIC,
    SweepEntry,
    SweepReport,
    _distinct_grids,
    _interleaved_vj,
    offset_half_base_bound,
    parity_formula_check,
)


def test_targets():
    assert TARGET_STATIC == math.sqrt(2)
    assert TARGET_SHIFTED == pytest.approx(1.3326827, abs=1e-7)
    assert TARGET_INTERLEAVED == pytest.approx(1.2022458674, abs=1e-10)


def test_distinct_grids_dedupes_bases():
    pairs = list(_distinct_grids(4, 4))
    assert (2, 2) in pairs and (4, 4) not in pairs and (4, 2) not in pairs
    assert len({GridConfig(m, k).canonical for m, k in pairs}) == len(pairs)


def test_parity_small():
    res = parity_formula_check(12)
    assert res["checked"] > 10 and res["mismatches"] == []


def test_interleaved_vj_rational_agrees():
    cfg = GridConfig(2, 1)
    for a in (Fraction(3, 2), Fraction(4, 3), Fraction(7, 5)):
        vj = multipliers(GridConfig(2, 1, a, RANDOM))[0]
        assert _interleaved_vj(cfg, ScaledPower(a)) == pytest.approx(vj, rel=1e-14)


def test_half_base_bound():
    assert offset_half_base_bound(501) > TARGET_INTERLEAVED


def test_report_logic():
    e = [SweepEntry(2, 2, Fraction(1), 1.2, 1, 1.4), SweepEntry(3, 1, Fraction(1), 1.4 + 1e-13, 1, 1.0)]
    rep = SweepReport("t", e, (2, 2), 1.4)
    assert rep.argmin == [(2, 2), (3, 1)]
    assert rep.ok
    rep.failures.append("x")
    assert not rep.ok
    assert SweepReport("t", e, (3, 1), 1.4).ok
    assert not SweepReport("t", e, (2, 2), 1.3).ok
