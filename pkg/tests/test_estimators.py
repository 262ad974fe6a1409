import numpy as np
import pytest

from selfcal.errors import DegenerateMeasurementError, PropagationSingularityError, StructuralInputError
from selfcal.estimators import (
    estimate_full,
    estimate_full_batch,
    estimate_relative,
    estimate_relative_batch,
    residual_full,
    residual_relative,
)
from selfcal.rfmodel import ChannelModel, MeasurementSet, RfGainSet, edge_measurements, generate_gains, synthesize_measurements
from selfcal.topology import build_combined, build_daisy_chain, build_star, compute_paths

STRATEGIES = [lambda: build_star(9, 4), lambda: build_daisy_chain(9, 4), lambda: build_combined(9, 5, 2)]


@pytest.mark.parametrize("make", STRATEGIES)
def test_noiseless_full_recovery(make):
    s = make()
    g = generate_gains(9, s.reference, 1.5, 0.7, seed=1)
    h = 0.6 + 0.8j
    meas = synthesize_measurements(g, s, ChannelModel(h, 0.0, 0.0))
    est = estimate_full(meas, compute_paths(s), g.known, h)
    np.testing.assert_allclose(est.alpha_hat, g.alpha, atol=1e-12)
    np.testing.assert_allclose(est.beta_hat, g.beta, atol=1e-12)


@pytest.mark.parametrize("make", STRATEGIES)
def test_noiseless_relative_recovery_with_distorted_lines(make):
    s = make()
    g = generate_gains(9, s.reference, seed=2)
    meas = synthesize_measurements(g, s, ChannelModel(1.0, 0.5, 0.0), seed=3)
    est = estimate_relative(meas, compute_paths(s), g.c[s.reference - 1])
    np.testing.assert_allclose(est.c_hat, g.c, atol=1e-12)


@pytest.mark.parametrize("make", STRATEGIES)
def test_estimates_fit_noisy_data_exactly(make):
    s = make()
    g = generate_gains(9, s.reference, seed=4)
    meas = synthesize_measurements(g, s, ChannelModel(1.0, 0.0, 0.1), seed=5)
    paths = compute_paths(s)
    full = estimate_full(meas, paths, g.known, 1.0)
    rel = estimate_relative(meas, paths, g.c[s.reference - 1])
    assert residual_full(full, meas) < 1e-10
    assert residual_relative(rel, meas) < 1e-10


def test_relative_residual_positive_for_wrong_estimate():
    s = build_star(4, 1)
    g = generate_gains(4, 1, seed=0)
    meas = synthesize_measurements(g, s, ChannelModel(1.0, 0.0, 0.0))
    est = estimate_relative(meas, compute_paths(s), g.c[0])
    bumped = type(est)(est.c_hat * np.array([1, 1, 1.1, 1]), 1)
    assert residual_relative(bumped, meas) > 1e-4


def test_relative_estimate_does_not_depend_on_h():
    s = build_daisy_chain(6, 3)
    g = generate_gains(6, 3, seed=6)
    results = []
    for h in (1.0, 0.3 - 2j):
        meas = synthesize_measurements(g, s, ChannelModel(h, 0.0, 0.0))
        results.append(estimate_relative(meas, compute_paths(s), g.c[2]).c_hat)
    np.testing.assert_allclose(results[0], results[1], atol=1e-12)


def test_relative_estimate_scales_with_reference():
    s = build_combined(7, 4, 1)
    g = generate_gains(7, 4, seed=7)
    meas = synthesize_measurements(g, s, ChannelModel(1.0, 0.0, 0.2), seed=1)
    paths = compute_paths(s)
    e1 = estimate_relative(meas, paths, 1.0)
    e2 = estimate_relative(meas, paths, 2.5j)
    np.testing.assert_allclose(e2.c_hat, 2.5j * e1.c_hat, rtol=1e-12)


def test_propagation_singularity_reports_path():
    s = build_daisy_chain(4, 1)
    g = RfGainSet([1, 1e-20, 1, 1], [1, 1e-20, 1, 1], 1)
    meas = synthesize_measurements(g, s, ChannelModel(1.0, 0.0, 0.0))
    with pytest.raises(PropagationSingularityError, match="3-2-1"):
        estimate_full(meas, compute_paths(s), g.known, 1.0)


def test_degenerate_measurement():
    s = build_star(3, 1)
    Y = np.full((3, 3), np.nan, dtype=complex)
    Y[0, 1], Y[1, 0], Y[0, 2], Y[2, 0] = 0.0, 1.0, 1.0, 1.0
    meas = MeasurementSet(Y, s, ChannelModel())
    with pytest.raises(DegenerateMeasurementError):
        estimate_relative(meas, compute_paths(s), 1.0)


def test_path_table_must_match_wiring():
    g = generate_gains(4, 1, seed=0)
    meas = synthesize_measurements(g, build_star(4, 1), ChannelModel(1.0, 0.0, 0.0))
    with pytest.raises(StructuralInputError):
        estimate_full(meas, compute_paths(build_daisy_chain(4, 1)), g.known, 1.0)


def test_zero_h_rejected():
    g = generate_gains(3, 1, seed=0)
    meas = synthesize_measurements(g, build_star(3, 1), ChannelModel(1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        estimate_full(meas, compute_paths(build_star(3, 1)), g.known, 0)


def test_batch_matches_single(rng):
    s = build_combined(9, 5, 2)
    paths = compute_paths(s)
    children, parents = paths.order_arrays()
    g = generate_gains(9, 5, seed=9)
    ch = ChannelModel(1.0, 0.0, 0.05)
    y_down, y_up, _ = edge_measurements(rng, g.alpha[None], g.beta[None], parents, children, ch)
    Y = np.full((9, 9), np.nan, dtype=complex)
    Y[parents, children] = y_down[0]
    Y[children, parents] = y_up[0]
    meas = MeasurementSet(Y, s, ch)
    a_hat, b_hat, bad = estimate_full_batch(paths, y_down, y_up, g.alpha[4:5], g.beta[4:5], 1.0)
    single = estimate_full(meas, paths, g.known, 1.0)
    assert not bad.any()
    np.testing.assert_allclose(a_hat[0], single.alpha_hat, rtol=1e-13)
    np.testing.assert_allclose(b_hat[0], single.beta_hat, rtol=1e-13)
    c_hat, bad = estimate_relative_batch(paths, y_down, y_up, g.c[4:5])
    np.testing.assert_allclose(c_hat[0], estimate_relative(meas, paths, g.c[4]).c_hat, rtol=1e-13)


def test_estimate_serialisation_keys():
    g = generate_gains(3, 2, seed=0)
    meas = synthesize_measurements(g, build_star(3, 2), ChannelModel(1.0, 0.0, 0.0))
    est = estimate_full(meas, compute_paths(build_star(3, 2)), g.known, 1.0)
    d = est.to_dict()
    assert est.alpha(2) == g.known[0]
    assert d["mode"] == "full"
    assert sorted(d["alpha"]) == ["1", "2", "3"]
    assert d["beta"]["2"] == [g.known[1].real, g.known[1].imag]
