import numpy as np
import pytest

from ms_steer import engine, fixtures
from ms_steer import schedule as sch
from ms_steer.constraints import ConstraintSet, XlPositive
from ms_steer.structure import ResidueRef

FAST = dict(n_steps=60)


def test_noise_schedule_shape():
    ns = engine.NoiseSchedule()
    s = ns.sigmas()
    assert len(s) == 201 and s[0] == 160.0 and s[-1] == pytest.approx(0.05)
    t = ns.times()
    assert t[0] == 1.0 and t[-1] == 0.0 and len(t) == 200


def test_single_component_posterior_mean(rng):
    m = rng.normal(size=(10, 3))
    den = engine.MixtureDenoiser(m, tau_sq=0.3)
    x = rng.normal(size=(10, 3)) * 4
    sigma = 2.0
    expect = (sigma**2 * m + 0.3 * x) / (sigma**2 + 0.3)
    np.testing.assert_allclose(den.predict_x0(x, sigma), expect)


def test_score_from_x0_matches_analytic_score(rng, basins):
    den = basins.denoiser
    for sigma in (50.0, 3.0, 0.2):
        x = basins.basin_a.coords() + sigma * rng.normal(size=(40, 3))
        via_x0 = engine.score_from_x0(x, den.predict_x0(x, sigma), sigma)
        np.testing.assert_allclose(via_x0, den.score(x, sigma), rtol=1e-8, atol=1e-12)


def test_responsibilities_stable_far_from_references(basins):
    x = np.full((40, 3), 1e4)
    r = basins.denoiser.responsibilities(x, 0.05)
    assert np.all(np.isfinite(r)) and r.sum() == pytest.approx(1.0)


def test_denoiser_validation():
    with pytest.raises(ValueError):
        engine.MixtureDenoiser(np.zeros((2, 5, 3)), [0.7, 0.7])
    with pytest.raises(ValueError):
        engine.MixtureDenoiser(np.zeros((5, 2)))
    with pytest.raises(ValueError):
        engine.MixtureDenoiser(np.zeros((5, 3)), tau_sq=0.0)


def test_guided_score():
    b = np.ones((2, 3))
    g = np.full((2, 3), 2.0)
    np.testing.assert_allclose(engine.guided_score(b, g, 0.25), 0.5)
    with pytest.raises(ValueError):
        engine.guided_score(b, g, -1.0)
    with pytest.raises(ValueError):
        engine.guided_score(b, g[:1], 1.0)


def test_unguided_sample_lands_on_a_reference(basins):
    for seed in range(5):
        res = engine.reverse_sample(basins.denoiser, basins.template, config=engine.SamplerConfig(seed=seed))
        assert fixtures.basin_of(basins, res.coords) in ("A", "B")


def test_same_seed_is_bitwise_reproducible(basins):
    cs = ConstraintSet([XlPositive(ResidueRef("A", 1), ResidueRef("B", 1), 0.0, 15.0)])
    cfg = engine.SamplerConfig(seed=3, **FAST)
    a = engine.reverse_sample(basins.denoiser, basins.template, cs, config=cfg)
    b = engine.reverse_sample(basins.denoiser, basins.template, cs, config=cfg)
    assert np.array_equal(a.coords, b.coords)


def test_zero_weights_equal_unguided(basins):
    cs = ConstraintSet([XlPositive(ResidueRef("A", 1), ResidueRef("B", 20), 0.0, 5.0)])
    zero = dict.fromkeys(("xl_pos", "xl_neg", "hdx_proxy", "hdx_burial"), 0.0)
    a = engine.reverse_sample(basins.denoiser, basins.template, cs,
                              config=engine.SamplerConfig(seed=9, family_weights=zero, record_trajectory=True))
    b = engine.reverse_sample(basins.denoiser, basins.template, None,
                              config=engine.SamplerConfig(seed=9, record_trajectory=True))
    assert np.array_equal(a.trajectory, b.trajectory)


def test_log_records_schedule(basins):
    cs = ConstraintSet([XlPositive(ResidueRef("A", 1), ResidueRef("B", 1), 0.0, 15.0),
                        XlPositive(ResidueRef("A", 2), ResidueRef("B", 2), 0.0, 15.0)])
    res = engine.reverse_sample(basins.denoiser, basins.template, cs, config=engine.SamplerConfig(seed=0))
    assert len(res.log) == 200
    applied = [s.step for s in res.log if s.applied["xl_pos"]]
    assert all(k % 4 == 0 for k in applied)
    assert all(s.t <= 0.75 for s in res.log if s.applied["xl_pos"])
    first = res.log[applied[0]]
    expected = 2.0 * 0.5 * sch.union_lambda(1.0 - first.t)
    assert first.weights["xl_pos"] == pytest.approx(expected)


def test_single_link_skips_union_ramp():
    sizes = {"xl_pos": 1, "xl_neg": 0, "hdx_proxy": 0, "hdx_burial": 0}
    w, applied = engine.family_weights_at(0, 0.5, sch.GuidanceSchedules(), dict.fromkeys(sizes, 1.0), sizes)
    assert w["xl_pos"] == 1.0 and applied["xl_pos"]
    assert w["hdx_proxy"] == 2.0 and not applied["hdx_proxy"]


def test_divergence_is_reported(basins):
    class Broken:
        def predict_x0(self, x, sigma):
            return np.full_like(x, np.nan)

    with pytest.raises(engine.DivergenceError) as e:
        engine.reverse_sample(Broken(), basins.template, config=engine.SamplerConfig(**FAST))
    assert e.value.step == 0


def test_probability_flow_is_deterministic_in_the_seed(basins):
    cfg = engine.SamplerConfig(seed=1, churn=0.0, **FAST)
    a = engine.reverse_sample(basins.denoiser, basins.template, config=cfg)
    b = engine.reverse_sample(basins.denoiser, basins.template, config=cfg)
    assert np.array_equal(a.coords, b.coords)


def test_config_validation():
    with pytest.raises(ValueError):
        engine.SamplerConfig(churn=1.5)
    with pytest.raises(ValueError):
        engine.SamplerConfig(family_weights={"xl_pos": -1.0})
    with pytest.raises(ValueError):
        engine.NoiseSchedule(sigma_max=1.0, sigma_min=2.0)
