import math

import numpy as np
import pytest

from shiftgen import (BrownResnick, ClusterProfile, ConfigurationError, FieldConfig, GaussianSampler,
                      IdentitySpec, MCEstimate, PointSet, Profile, QuadratureRule, ShiftDensity,
                      ShiftTransform, TailSampler, TiltedSampler, VariogramModel, verify, verify_boll,
                      verify_boll22, verify_do20, verify_tyy, welch)
from shiftgen.verify import decide

CFG = FieldConfig()
BR = BrownResnick()
THETA = TiltedSampler(BR, "exact")
WM = {"kind": "weighted_max", "sites": [0, 1]}
BZ = {"kind": "bounded_zero_hom", "site": 0, "other": 1}


def spec(**kw):
    kw.setdefault("n", 20_000)
    return IdentitySpec(cfg=CFG, **kw)


def test_boll_same_representor_passes():
    r = verify_boll(spec(identity="boll", functional=WM, left_source=BR, right_source=BR, h=[1.0]))
    assert r.verdict == "pass"


def test_boll22_constant_functional():
    r = verify_boll22(spec(identity="boll22", functional={"kind": "constant"}, left_source=BR,
                           right_source=BR, h=[1.0]))
    assert r.verdict == "pass"
    for side in (r.left, r.right):
        assert abs(side.mean - 1.0) <= 4 * side.se


def test_do20_zero_shift_is_exact():
    r = verify_do20(spec(identity="do20", functional={"kind": "constant"}, left_source=THETA,
                         right_source=THETA, h=[0.0]))
    assert r.left.mean == 1.0 and r.right.mean == 1.0 and r.right.se == 0.0
    assert r.verdict == "pass" and r.z == 0.0


def test_do20_bounded_functional():
    r = verify_do20(spec(identity="do20", functional=BZ, left_source=THETA, right_source=THETA, h=[1.0]))
    assert r.verdict == "pass"


def test_tyy_constant():
    y = TailSampler(THETA)
    r = verify_tyy(spec(identity="tyy", functional={"kind": "constant"}, left_source=y, right_source=y,
                        h=[0.0], x=2.0))
    assert r.verdict == "pass"


def test_tyy_unbounded_functional_runs_kurtosis_pilot():
    y = TailSampler(THETA)
    r = verify(spec(identity="tyy", functional={"kind": "weighted_max", "sites": [0]}, left_source=y,
                    right_source=y, h=[1.0], x=2.0))
    assert "pilot_kurtosis_left" in r.diagnostics
    assert r.verdict in ("pass", "inconclusive")
    if max(r.diagnostics["pilot_kurtosis_left"], r.diagnostics["pilot_kurtosis_right"]) > 100:
        assert r.verdict == "inconclusive"


@pytest.mark.parametrize("identity, functional", [
    ("boll", {"kind": "constant"}),
    ("boll22", WM),
    ("do20", WM),
])
def test_degree_mismatch_rejected(identity, functional):
    with pytest.raises(ConfigurationError, match="degree"):
        verify(spec(identity=identity, functional=functional, left_source=BR, right_source=BR, h=[1.0]))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        spec(identity="nope", functional=WM, left_source=BR, right_source=BR)
    with pytest.raises(ConfigurationError):
        spec(identity="tyy", functional=WM, left_source=BR, right_source=BR)
    with pytest.raises(ConfigurationError):
        spec(identity="boll", functional=WM, left_source=BR, right_source=BR, h=[0.3], lattice_step=0.25)
    with pytest.raises(ConfigurationError):
        verify_boll(spec(identity="boll22", functional=WM, left_source=BR, right_source=BR))


def test_negative_control_fails():
    other = BrownResnick(CFG, GaussianSampler(VariogramModel(theta=4.0)))
    r = verify_boll(spec(identity="boll", functional=WM, left_source=BR, right_source=other, h=[0.0]))
    assert r.verdict == "fail"


def test_cluster_construction_boll22_and_scaled_control():
    rule = QuadratureRule.lattice(0.25, 96)
    dens = ShiftDensity("gaussian", sigma=8.0)
    good = ShiftTransform(ClusterProfile(CFG, Profile("gaussian_pdf")), dens, rule, "cluster")
    bad = ShiftTransform(ClusterProfile(CFG, Profile("gaussian_pdf"), scale=2.0, enforce_normalization=False),
                         dens, rule, "cluster")
    ok = verify_boll22(spec(identity="boll22", functional=BZ, left_source=good, right_source=good, h=[1.0]))
    assert ok.verdict == "pass"
    no = verify_boll22(spec(identity="boll22", functional=BZ, left_source=good, right_source=bad, h=[1.0]))
    assert no.verdict == "fail"


def test_calibration_false_failure_rate():
    fails = 0
    for seed in range(100):
        r = verify_boll(spec(identity="boll", functional=WM, left_source=BR, right_source=BR, h=[1.0],
                             n=2000, seed=seed))
        fails += r.verdict == "fail"
    assert fails <= 5


def test_negative_control_power():
    other = BrownResnick(CFG, GaussianSampler(VariogramModel(theta=4.0)))
    fails = sum(
        verify_boll(spec(identity="boll", functional=WM, left_source=BR, right_source=other, h=[0.0],
                         n=5000, seed=seed)).verdict == "fail"
        for seed in range(40))
    assert fails >= 38


def test_report_fields():
    r = verify(spec(identity="boll", functional=WM, left_source=BR, right_source=BR, h=[1.0], seed=3))
    d = r.to_dict()
    for key in ("identity", "functional", "h", "x", "n", "left", "right", "z", "p_value", "verdict",
                "seed", "diagnostics", "spec"):
        assert key in d
    assert d["seed"] == 3 and set(d["left"]) == {"mean", "se"}
    assert 0 <= d["p_value"] <= 1


def test_decide_rules():
    a = MCEstimate.from_samples([1.0, 1.0, 1.0])
    b = MCEstimate.from_samples([1.0, 1.0, 1.0])
    assert decide(a, b, 0.99)[1] == "pass"
    c = MCEstimate.from_samples([2.0, 2.0])
    assert decide(a, c, 0.99)[1] == "fail"
    noisy = MCEstimate.from_samples([0.0, 10.0])
    assert decide(a, noisy, 0.99)[1] == "inconclusive"
    assert decide(a, b, 0.99, force_inconclusive=True)[1] == "inconclusive"
    w = welch(MCEstimate(0.0, 1.0, 101), MCEstimate(0.0, 1.0, 101))
    assert w.z == 0.0 and not w.reject
    assert math.isclose(w.critical, 2.5758293035489, rel_tol=1e-9)
