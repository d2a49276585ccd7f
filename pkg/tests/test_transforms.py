import math

import numpy as np
import pytest

from shiftgen import (BrownResnick, ClusterProfile, ConfigurationError, ConstantRepresentor,
                      DegenerateTiltingError, FieldConfig, ParetoMultiplier, PointSet, Profile,
                      QuadratureRule, ScaledRepresentor, ShiftDensity, ShiftTransform, TailSampler,
                      TiltedSampler, integral_S, sample_tail_Y, sample_theta, sojourn_B, transform_zn,
                      validate_representor)

CFG = FieldConfig()
BR = BrownResnick()
RULE = QuadratureRule.lattice(0.25, 96)
T3 = ShiftDensity("student_t", sigma=4.0, df=3.0)


@pytest.mark.parametrize("mode", ["exact", "sir", "weighted"])
def test_theta_origin_is_one(mode):
    s = TiltedSampler(BR, mode, pool_size=8).sample(PointSet.of([0.0, 1.0]), 500, np.random.default_rng(0))
    w = s.weights_or_ones()
    assert np.allclose(s.values[w > 0, 0, 0], 1.0)


@pytest.mark.parametrize("mode", ["exact", "sir", "weighted"])
def test_theta_norm_mean_bounded(mode):
    n = 20_000
    s = TiltedSampler(BR, mode, pool_size=16).sample(PointSet.of([2.0]), n, np.random.default_rng(1))
    x = s.weights_or_ones() * s.values[:, 0, 0]
    assert x.mean() <= 1 + 4 * x.std() / math.sqrt(n)


def test_tilting_is_scale_invariant():
    sites = PointSet.of([0.0, 1.5])
    a = TiltedSampler(BR, "weighted").sample(sites, 100, np.random.default_rng(2))
    b = TiltedSampler(ScaledRepresentor(BR, 5.0), "weighted").sample(sites, 100, np.random.default_rng(2))
    assert np.allclose(a.values, b.values)
    assert np.allclose(b.weights, 5.0 * a.weights)


def test_sir_matches_weighted_law():
    sites = PointSet.of([1.0])
    base = ClusterProfile(CFG, Profile("gaussian_pdf"))
    shifted = ShiftTransform(base, ShiftDensity("gaussian", sigma=2.0), RULE, "cluster")
    n = 20_000
    w = TiltedSampler(shifted, "weighted").sample(sites, n, np.random.default_rng(3))
    s = TiltedSampler(shifted, "sir", pool_size=64).sample(sites, n, np.random.default_rng(4))
    mw = np.mean(w.weights * w.values[:, 0, 0])
    ms = np.mean(s.values[:, 0, 0])
    se = math.hypot(np.std(w.weights * w.values[:, 0, 0]), np.std(s.values[:, 0, 0])) / math.sqrt(n)
    assert abs(mw - ms) < 4.5 * se


def test_weighted_mode_keeps_zero_weight_rows():
    base = ClusterProfile(CFG, Profile("indicator_box", width=1.0))
    shifted = ShiftTransform(base, ShiftDensity("gaussian", sigma=3.0), RULE, "cluster")
    s = TiltedSampler(shifted, "weighted").sample(PointSet.of([0.2]), 2000, np.random.default_rng(5))
    zero = s.weights == 0
    assert zero.any() and np.all(s.values[zero] == 0.0)
    path, w = sample_theta(PointSet.of([0.0]), TiltedSampler(BR), np.random.default_rng(0))
    assert w == 1.0 and path.values[0, 0] == 1.0


def test_sir_degenerate_pool_raises():
    base = ClusterProfile(CFG, Profile("indicator_box", width=0.1))
    shifted = ShiftTransform(base, ShiftDensity("gaussian", sigma=50.0), RULE, "cluster")
    with pytest.raises(DegenerateTiltingError):
        TiltedSampler(shifted, "sir", pool_size=2).sample(PointSet.of([0.0]), 2000, np.random.default_rng(0))


def test_exact_mode_needs_deterministic_origin():
    shifted = ShiftTransform(BR, T3, RULE, "zn")
    with pytest.raises(ConfigurationError):
        TiltedSampler(shifted, "exact")
    with pytest.raises(ConfigurationError):
        TiltedSampler(BR, "bogus")


def test_pareto_tail():
    r = ParetoMultiplier(1.5).sample(200_000, np.random.default_rng(0))
    assert r.min() >= 1.0
    for s in (2.0, 5.0):
        p = s ** -1.5
        assert abs(np.mean(r > s) - p) < 4 * math.sqrt(p * (1 - p) / r.size)


def test_tail_field_origin_at_least_one():
    y = TailSampler(TiltedSampler(BR, "exact")).sample(PointSet.of([0.0, 1.0]), 5000, np.random.default_rng(1))
    assert np.all(y.values[:, 0, 0] >= 1.0)
    path = sample_tail_Y(PointSet.of([0.0]), TiltedSampler(BR, "exact"), np.random.default_rng(2))
    assert path.values[0, 0] >= 1.0


@pytest.mark.parametrize("variant", ["zn", "zn_prime_finiteS", "zn_boll3", "zn_prime_boll3b"])
def test_transformed_margins(variant):
    t = ShiftTransform(BR, T3, RULE, variant)
    rep = validate_representor(t, 20_000, np.random.default_rng(11))
    assert rep.passed, rep.to_dict()


def test_zn_second_margin_with_light_shift_tails():
    # the output is a shifted Theta, whose second moment e^|N| needs light-tailed shifts
    t = ShiftTransform(BR, ShiftDensity("gaussian", sigma=1.0), RULE, "zn_second")
    rep = validate_representor(t, 20_000, np.random.default_rng(11))
    assert rep.passed, rep.to_dict()


def test_cluster_transform_margin():
    base = ClusterProfile(CFG, Profile("gaussian_pdf"))
    t = ShiftTransform(base, ShiftDensity("gaussian", sigma=8.0), RULE, "cluster")
    rep = validate_representor(t, 20_000, np.random.default_rng(12))
    assert rep.passed, rep.to_dict()


def test_zn_second_with_constant_theta_is_exact_on_the_lattice():
    # Theta = 1 everywhere: the indicator integral is the gamma mass of the window
    t = ShiftTransform(ConstantRepresentor(CFG, 1.0), ShiftDensity("gaussian", sigma=1.0), RULE, "zn_second")
    sites = PointSet.of([0.0, 3.0])
    s = t.sample(sites, 10, np.random.default_rng(0))
    mass = np.sum(ShiftDensity("gaussian", sigma=1.0).quadrature_weights(RULE))
    assert np.allclose(s.values, mass ** -1.0)


def test_variant_base_checks():
    with pytest.raises(ConfigurationError):
        ShiftTransform(TiltedSampler(BR), T3, RULE, "zn")
    with pytest.raises(ConfigurationError):
        ShiftTransform(BR, T3, RULE, "cluster")
    with pytest.raises(ConfigurationError):
        ShiftTransform(BR, T3, QuadratureRule.lattice(0.25, 96).refined(), "zn")
    with pytest.raises(ConfigurationError):
        ShiftTransform(BR, T3, RULE, "zn_third")


def test_window_truncation_check():
    small = ShiftTransform(BR, T3, QuadratureRule.lattice(0.25, 16), "zn")
    with pytest.raises(ConfigurationError, match="enlarge the window"):
        small.check_truncation()
    ok = ShiftTransform(BR, T3, RULE, "zn").check_truncation()
    assert ok["tail_fraction"] < 0.01


def test_transform_reproducible_and_shaped():
    p1 = transform_zn(BR, T3, RULE, "zn", PointSet.of([0.0, 1.0]), np.random.default_rng(4))
    p2 = transform_zn(BR, T3, RULE, "zn", PointSet.of([0.0, 1.0]), np.random.default_rng(4))
    assert p1 == p2 and p1.values.shape == (2, 1)


def test_positivity_of_S_and_B():
    n = 2000
    t = ShiftTransform(BR, T3, RULE, "zn")
    z = t.sample(RULE.nodes, n, np.random.default_rng(6)).values
    assert np.all(integral_S(z, RULE, CFG) > 0)
    y = TailSampler(TiltedSampler(BR, "exact")).sample(RULE.nodes, n, np.random.default_rng(7)).values
    assert np.all(sojourn_B(y, RULE, CFG) > 0)
