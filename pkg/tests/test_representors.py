import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from oracles import lognormal_moment
from shiftgen import (BrownResnick, ClusterProfile, ConfigurationError, ConstantRepresentor, FieldConfig,
                      GaussianSampler, NormKind, PathSample, PointSet, Profile, ScaledRepresentor,
                      SignedSplitRepresentor, VariogramModel, br_sample, cluster_sample, signed_split,
                      validate_representor)
from shiftgen.representors import integer_lattice

CFG = FieldConfig()


def test_br_pinned_at_origin():
    path = br_sample(PointSet.of([0.0, 1.0, -3.0]), GaussianSampler(), CFG, np.random.default_rng(0))
    assert path.at([0.0])[0] == 1.0
    assert np.all(path.values > 0)


def test_br_margins_and_moments():
    sites = PointSet.of([0.5, 1.0, 2.0])
    z = BrownResnick().sample(sites, 200_000, np.random.default_rng(1)).values[:, :, 0]
    for j, t in enumerate((0.5, 1.0, 2.0)):
        se = math.sqrt(lognormal_moment(2, t) - 1) / math.sqrt(z.shape[0])
        assert abs(z[:, j].mean() - 1.0) < 4 * se
        log_mean = np.log(z[:, j]).mean()
        assert abs(log_mean + t / 2) < 4 * math.sqrt(t / z.shape[0])
    # E Z(1)^2 = e for nu(1) = 1
    sq = z[:, 1] ** 2
    assert abs(sq.mean() - math.e) < 5 * sq.std() / math.sqrt(sq.size)


def test_br_alpha_two_margin_grows_off_origin():
    br = BrownResnick(FieldConfig(alpha=2.0))
    sites = PointSet.of([2.0])
    z = br.sample(sites, 100_000, np.random.default_rng(2)).values[:, 0, 0]
    assert (z ** 2).mean() == pytest.approx(lognormal_moment(2, 2.0), rel=0.15)
    # origin margin is still exact; the failure shows away from the origin only
    assert validate_representor(br, 2000, np.random.default_rng(3)).passed


def test_integer_lattice():
    assert integer_lattice(2.5).to_list() == [[-2.0], [-1.0], [0.0], [1.0], [2.0]]
    assert len(integer_lattice(1.0, 2)) == 9


@pytest.mark.parametrize("profile", [Profile("gaussian_pdf", sigma=0.7), Profile("triangle", width=2.0),
                                     Profile("indicator_box", width=3.0)])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_cluster_profile_normalization(profile, alpha):
    q = ClusterProfile(FieldConfig(alpha=alpha), profile)
    assert q.normalization == pytest.approx(1.0, abs=1e-6)
    t = np.linspace(-40, 40, 400_001)
    vals = np.abs(q.evaluate(t[:, None])[:, 0]) ** alpha
    assert trapezoid(vals, t) == pytest.approx(1.0, rel=2e-3)


def test_cluster_examples():
    q = ClusterProfile(CFG, Profile("gaussian_pdf"))
    path = cluster_sample(PointSet.of([0.0]), Profile("gaussian_pdf"), CFG)
    assert path.values[0, 0] == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert q.origin_norm == pytest.approx(1 / math.sqrt(2 * math.pi))
    with pytest.raises(ConfigurationError):
        ClusterProfile(CFG, Profile("gaussian_pdf"), scale=2.0)
    bad = ClusterProfile(CFG, Profile("gaussian_pdf"), scale=2.0, enforce_normalization=False)
    assert bad.normalization == pytest.approx(2.0)


def test_cluster_is_deterministic():
    q = ClusterProfile(CFG, Profile("triangle"))
    a = q.sample(PointSet.of([0.2, 3.0]), 5, np.random.default_rng(0)).values
    b = q.sample(PointSet.of([0.2, 3.0]), 5, np.random.default_rng(1)).values
    assert np.array_equal(a, b)
    assert a[0, 0, 0] == pytest.approx(0.8) and a[0, 1, 0] == 0.0


def test_signed_split():
    path = PathSample(PointSet.of([0.0, 1.0]), [[-2.0], [3.0]])
    s = signed_split(path)
    assert s.values.tolist() == [[0.0, 2.0], [3.0, 0.0]]
    sup = FieldConfig(norm_kind=NormKind.SUP)
    rep = SignedSplitRepresentor(ConstantRepresentor(sup, 2.0))
    assert rep.cfg.dim_d == 2
    v = rep.sample(PointSet.of([0.0]), 3, None).values
    assert np.all(v[:, 0, 0] == 2.0) and np.all(v[:, 0, 1] == 0.0)


def test_scaled_representor():
    r = ScaledRepresentor(BrownResnick(), 3.0)
    assert r.origin_norm == 3.0
    with pytest.raises(ConfigurationError):
        ScaledRepresentor(BrownResnick(), 0.0)


def test_validate_pass_and_fail():
    rng = np.random.default_rng(5)
    assert validate_representor(BrownResnick(), 5000, rng).passed
    assert validate_representor(ClusterProfile(CFG, Profile("gaussian_pdf")), 1000, rng).positivity_pass
    scaled = ScaledRepresentor(BrownResnick(), 2.0)
    rep = validate_representor(scaled, 5000, rng)
    assert not rep.margin_pass and rep.to_dict()["verdict"] == "fail"
    const = validate_representor(ConstantRepresentor(CFG, 1.0), 1000, rng)
    assert const.passed and const.margin.se == 0.0
    with pytest.raises(ConfigurationError):
        validate_representor(BrownResnick(), 10, rng)


def test_br_other_variograms_validate():
    br = BrownResnick(CFG, GaussianSampler(VariogramModel(theta=4.0, hurst=0.8)))
    assert validate_representor(br, 2000, np.random.default_rng(9)).passed
