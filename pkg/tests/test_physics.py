"""Monopole SPL head, function-problem curves, and source-config round trips."""

from importlib import resources

import numpy as np
import pytest

from optmanet import ConfigError, ContractError, DomainError, Tape, constant, grad_check
from optmanet.physics import (
    P_FLOOR,
    P_REF,
    PhysicsConfig,
    default_partial_config,
    fp1_oracle,
    fp2_inner,
    fp2_oracle,
    gramacy_pp,
    gramacy_pp_np,
    monopole_spl,
    monopole_spl_np,
)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def single_source(phase=0.0, freq=343.0):
    return PhysicsConfig(
        positions=np.zeros((1, 3)),
        frequencies=np.array([freq]),
        phases=np.array([phase]),
    )


def test_single_monopole_reference_level():
    # unit amplitude at r=1 with the cosine pinned to 1: 20*log10(1/2e-5)
    cfg = single_source(phase=-2.0 * np.pi)  # k = 2*pi at f = c, so k*r + phase = 0
    t = Tape()
    spl = monopole_spl(t, np.array([[1.0, 0.0, 0.0]]), np.array([[1.0]]), cfg)
    assert abs(spl.values[0, 0] - 93.97940008672038) < 1e-12


def test_zero_amplitude_hits_floor():
    cfg = single_source()
    t = Tape()
    spl = monopole_spl(t, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0]]), cfg)
    want = 20.0 * np.log10(P_FLOOR / P_REF)
    assert abs(spl.values[0, 0] - want) < 1e-12
    assert abs(want - (-146.02059991327962)) < 1e-10


def test_four_source_origin_level():
    cfg = default_partial_config()
    t = Tape()
    spl = monopole_spl(t, np.zeros((1, 3)), np.ones((1, 4)), cfg)
    assert abs(spl.values[0, 0] - 105.78976591512277) < 1e-6


def test_spherical_spreading():
    # doubling distance with the cosine factor held at 1 drops 20*log10(2)
    cfg = single_source(freq=343.0)  # k*r multiples of 2*pi at integer r
    t = Tape()
    spl = monopole_spl(
        t,
        np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
        np.ones((2, 1)),
        cfg,
    )
    drop = spl.values[0, 0] - spl.values[1, 0]
    assert abs(drop - 20.0 * np.log10(2.0)) < 1e-12


def test_source_permutation_invariance():
    cfg = default_partial_config()
    perm = [2, 0, 3, 1]
    cfg_p = PhysicsConfig(
        positions=cfg.positions[perm],
        frequencies=cfg.frequencies[perm],
        phases=cfg.phases[perm],
    )
    r = rng_for(3)
    pts = r.uniform(-1.0, 1.0, size=(20, 3))
    pts[:, 2] += 2.0  # keep clear of the sources
    amps = r.uniform(0.2, 2.0, size=(20, 4))
    a = monopole_spl_np(pts, amps, cfg)
    b = monopole_spl_np(pts, amps[:, perm], cfg_p)
    assert np.allclose(a, b, rtol=0, atol=1e-9)


def test_tape_and_numpy_twins_agree():
    cfg = default_partial_config()
    r = rng_for(4)
    pts = r.uniform(-1.0, 1.0, size=(50, 3))
    pts[:, 2] += 1.5
    amps = r.uniform(-1.5, 1.5, size=(50, 4))
    t = Tape()
    a = monopole_spl(t, pts, amps, cfg).values
    b = monopole_spl_np(pts, amps, cfg)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-12)


def test_point_too_close_to_source_rejected():
    cfg = default_partial_config()
    t = Tape()
    bad = np.array([[0.176, 0.176, 0.01]])
    with pytest.raises(DomainError):
        monopole_spl(t, bad, np.ones((1, 4)), cfg)
    with pytest.raises(DomainError):
        monopole_spl_np(bad, np.ones(4), cfg)


def test_amplitude_shape_must_match():
    cfg = default_partial_config()
    t = Tape()
    with pytest.raises(ContractError):
        monopole_spl(t, np.zeros((2, 3)), np.ones((2, 3)), cfg)
    with pytest.raises(ContractError):
        monopole_spl(t, np.zeros((2, 3)), np.ones((1, 4)), cfg)


def test_spl_gradients_match_finite_differences():
    cfg = default_partial_config()
    r = rng_for(9)
    pts = r.uniform(0.4, 1.0, size=(3, 3))

    def f_amp(tp, v):
        return tp.mean(monopole_spl(tp, constant(pts), v, cfg))

    rep = grad_check(f_amp, r.uniform(0.3, 1.5, size=(3, 4)))
    assert rep.passed, rep

    amps = r.uniform(0.3, 1.5, size=(3, 4))

    def f_pts(tp, v):
        return tp.mean(monopole_spl(tp, v, constant(amps), cfg))

    rep2 = grad_check(f_pts, pts)
    assert rep2.passed, rep2


def test_gramacy_half_integer_identity():
    # the oscillation vanishes at half integers, leaving the quartic
    xs = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
    got = gramacy_pp_np(xs)
    want = (xs - 1.0) ** 4
    assert np.allclose(got, want, rtol=0, atol=1e-9)
    assert abs(got[0] - 0.0625) < 1e-9
    assert abs(got[3] - 1.0) < 1e-9
    assert abs(got[4] - 5.0625) < 1e-9


def test_gramacy_zero_rejected():
    with pytest.raises(DomainError):
        gramacy_pp_np(np.array([0.0]))
    t = Tape()
    with pytest.raises(DomainError):
        gramacy_pp(t, t.tensor([[0.0]]))


def test_gramacy_tape_matches_numpy_twin():
    r = rng_for(10)
    xs = r.uniform(0.05, 2.5, size=(1000, 1)) * r.choice([-1.0, 1.0], size=(1000, 1))
    t = Tape()
    a = gramacy_pp(t, constant(xs)).values
    assert np.allclose(a, gramacy_pp_np(xs), rtol=1e-12, atol=1e-12)


def test_gramacy_gradient_matches_fd():
    r = rng_for(12)
    x0 = r.uniform(0.4, 2.4, size=(1, 6))
    rep = grad_check(lambda tp, v: tp.mean(gramacy_pp(tp, v)), x0)
    assert rep.passed, rep


def test_fp1_is_reflected_curve():
    r = rng_for(13)
    xs = r.uniform(0.5, 2.5, size=1000)
    assert np.array_equal(fp1_oracle(xs), gramacy_pp_np(3.0 - xs))
    # tape-side composition used by the model head reproduces the oracle
    t = Tape()
    x = constant(xs.reshape(-1, 1))
    head = gramacy_pp(t, t.sub(3.0, x)).values
    assert np.allclose(head[:, 0], fp1_oracle(xs), rtol=1e-12, atol=1e-12)


def test_fp2_anchor_values():
    assert abs(fp2_oracle(0.5) - 13.190279682813094) < 1e-12
    assert abs(fp2_oracle(1.0) - 39.0625) < 1e-9
    assert abs(fp2_oracle(2.0) - 0.0625) < 1e-9
    assert abs(fp2_inner(0.5) - (0.5 - np.sqrt(2.0))) < 1e-15


def test_physics_config_validation():
    with pytest.raises(ConfigError):
        PhysicsConfig(np.zeros((1, 2)), np.array([1.0]), np.array([0.0]))
    with pytest.raises(ConfigError):
        PhysicsConfig(np.zeros((1, 3)), np.array([-5.0]), np.array([0.0]))
    with pytest.raises(ConfigError):
        PhysicsConfig(np.zeros((1, 3)), np.array([1.0]), np.array([0.0, 1.0]))


def test_physics_config_json_roundtrip():
    cfg = default_partial_config()
    doc = cfg.to_json_dict()
    back = PhysicsConfig.from_json_dict(doc)
    assert np.array_equal(back.positions, cfg.positions)
    assert np.array_equal(back.frequencies, cfg.frequencies)
    assert np.array_equal(back.phases, cfg.phases)
    assert back.sound_speed == cfg.sound_speed
    assert back.p_ref == cfg.p_ref


def test_shipped_default_config_matches_code():
    ref = resources.files("optmanet").joinpath("configs/partial_physics.json")
    cfg = PhysicsConfig.from_json_file(str(ref))
    dflt = default_partial_config()
    assert np.array_equal(cfg.positions, dflt.positions)
    assert np.array_equal(cfg.frequencies, dflt.frequencies)
    assert np.array_equal(cfg.phases, dflt.phases)
    assert cfg.sound_speed == dflt.sound_speed
    assert cfg.p_ref == dflt.p_ref


def test_config_arrays_immutable():
    cfg = default_partial_config()
    with pytest.raises(ValueError):
        cfg.positions[0, 0] = 9.9
