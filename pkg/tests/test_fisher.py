import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfcal.errors import AmplitudeAssumptionError, IneffectiveStrategyError, PreconditionError, SingularFisherError
from selfcal.fisher import (
    ParameterIndex,
    batched_trace_objective,
    build_fim,
    crlb_closed_form,
    crlb_numerical,
    elementary_factors,
    elementary_update,
    invert_fim,
    star_rewiring_sequence,
)
from selfcal.rfmodel import ChannelModel, RfGainSet, generate_gains, snr_to_noise_variance
from selfcal.topology import (
    InterconnectionStrategy,
    build_combined,
    build_daisy_chain,
    build_star,
    compute_paths,
    prufer_to_edges,
    rewire,
)


def random_tree(rng, M, f):
    seq = rng.integers(1, M + 1, size=M - 2).tolist()
    return InterconnectionStrategy.from_edges(M, f, prufer_to_edges(seq, M))


def fim_oracle(gains, strategy, channel, eps=1e-6):
    """J = G^H G / sigma^2 with G the finite-difference Jacobian of the noiseless measurement vector."""
    idx = ParameterIndex(gains.M, gains.reference)
    theta0 = idx.theta(gains)
    f = gains.reference - 1
    keep = np.flatnonzero(np.arange(gains.M) != f)
    pairs = np.argwhere(strategy.adjacency)

    def mean(theta):
        alpha = gains.alpha.copy()
        beta = gains.beta.copy()
        n = keep.size
        alpha[keep] = theta[:n]
        beta[keep] = theta[n:]
        return channel.h * beta[pairs[:, 0]] * alpha[pairs[:, 1]]

    G = np.empty((pairs.shape[0], theta0.size), dtype=complex)
    for i in range(theta0.size):
        step = np.zeros_like(theta0)
        step[i] = eps
        G[:, i] = (mean(theta0 + step) - mean(theta0 - step)) / (2 * eps)
    return G.conj().T @ G / channel.sigma_n_sq


def real_fim_oracle(gains, strategy, channel):
    """Real-parameter FIM over (Re, Im) pairs; its CRLB on |error|^2 must match the complex one."""
    idx = ParameterIndex(gains.M, gains.reference)
    Jc = fim_oracle(gains, strategy, channel)
    # for a holomorphic mean the real FIM is 2 [[Re J, -Im J], [Im J, Re J]] in units of sigma^2/2 per component
    R = 2 * np.block([[Jc.real, -Jc.imag], [Jc.imag, Jc.real]])
    inv = np.linalg.inv(R)
    n = idx.size
    return np.diag(inv)[:n] + np.diag(inv)[n:]


def test_fim_matches_jacobian_oracle(rng):
    for M, f in [(2, 1), (5, 3), (7, 1)]:
        s = random_tree(rng, M, f) if M > 2 else build_star(2, 1)
        g = RfGainSet(rng.normal(size=M) + 1j * rng.normal(size=M), rng.normal(size=M) + 1j * rng.normal(size=M), f)
        ch = ChannelModel(0.8 + 0.3j, 0.0, 0.2)
        fim = build_fim(g, s, ch)
        np.testing.assert_allclose(fim.J, fim_oracle(g, s, ch), atol=1e-8)


def test_complex_crlb_matches_real_parameterisation(rng):
    g = generate_gains(6, 2, seed=5)
    s = build_daisy_chain(6, 2)
    ch = ChannelModel(1.0, 0.0, 0.1)
    rep = crlb_numerical(build_fim(g, s, ch))
    idx = ParameterIndex(6, 2)
    expected = real_fim_oracle(g, s, ch)
    got = np.array([rep.crlb_alpha[m] for m in idx.ordinary] + [rep.crlb_beta[m] for m in idx.ordinary])
    np.testing.assert_allclose(got, expected, rtol=1e-6)


def test_star_fim_is_block_diagonal_per_antenna():
    g = generate_gains(6, 4, seed=0)
    fim = build_fim(g, build_star(6, 4), ChannelModel(1.0, 0.0, 0.5))
    A, DH, D, B = fim.blocks()
    np.testing.assert_allclose(A, np.eye(5))
    np.testing.assert_allclose(B, np.eye(5))
    assert np.count_nonzero(np.abs(D) > 1e-14) == 0


def test_two_antenna_bounds():
    g = generate_gains(2, 1, a=2.0, b=0.5, seed=1)
    ch = ChannelModel(1.0, 0.0, 0.3)
    rep = crlb_numerical(build_fim(g, build_star(2, 1), ch))
    assert rep.crlb_alpha[2] == pytest.approx(0.3 / 0.25)
    assert rep.crlb_beta[2] == pytest.approx(0.3 / 4.0)


def test_fim_positive_definite_on_trees(rng):
    for _ in range(20):
        M = int(rng.integers(3, 9))
        s = random_tree(rng, M, int(rng.integers(1, M + 1)))
        fim = build_fim(generate_gains(M, s.reference, seed=int(rng.integers(1 << 30))), s, ChannelModel())
        assert np.allclose(fim.J, fim.J.conj().T)
        assert np.linalg.eigvalsh(fim.J).min() > 0


@settings(max_examples=60, deadline=None)
@given(M=st.integers(3, 8), data=st.data())
def test_closed_form_matches_numerical(M, data):
    f = data.draw(st.integers(1, M))
    seq = data.draw(st.lists(st.integers(1, M), min_size=M - 2, max_size=M - 2))
    s = InterconnectionStrategy.from_edges(M, f, prufer_to_edges(seq, M))
    a = data.draw(st.floats(0.5, 2.0))
    b = data.draw(st.floats(0.5, 2.0))
    g = generate_gains(M, f, a, b, seed=data.draw(st.integers(0, 2**31)))
    ch = ChannelModel(0.9 - 0.4j, 0.0, snr_to_noise_variance(20.0, a, b, 0.9 - 0.4j))
    num = crlb_numerical(build_fim(g, s, ch))
    closed = crlb_closed_form(compute_paths(s), a, b, ch, gains=g)
    for m in num.antennas:
        assert num.crlb_alpha[m] == pytest.approx(closed.crlb_alpha[m], rel=1e-8)
        assert num.crlb_beta[m] == pytest.approx(closed.crlb_beta[m], rel=1e-8)
        assert num.crlb_relative[m] == pytest.approx(closed.crlb_relative[m], rel=1e-8)


def test_relative_bound_is_sum_at_unit_amplitude():
    g = generate_gains(7, 4, seed=2)
    ch = ChannelModel(1.0, 0.0, 0.05)
    rep = crlb_numerical(build_fim(g, build_combined(7, 4, 1), ch))
    for m in rep.antennas:
        assert rep.crlb_relative[m] == pytest.approx(rep.crlb_alpha[m] + rep.crlb_beta[m], rel=1e-10)
    star = crlb_numerical(build_fim(g, build_star(7, 4), ch))
    assert all(v == pytest.approx(2 * 0.05) for v in star.crlb_relative.values())


def test_closed_form_depth_scaling():
    paths = compute_paths(build_daisy_chain(5, 1))
    rep = crlb_closed_form(paths, 1.0, 1.0, ChannelModel(1.0, 0.0, 1.0))
    assert [rep.crlb_alpha[m] for m in range(2, 6)] == [1.0, 2.0, 3.0, 4.0]


def test_closed_form_rejects_unequal_amplitudes():
    g = RfGainSet([1, 1, 2], [1, 1, 1], 1)
    with pytest.raises(AmplitudeAssumptionError):
        crlb_closed_form(compute_paths(build_star(3, 1)), 1.0, 1.0, ChannelModel(), gains=g)


def test_ineffective_strategy_raises():
    g = generate_gains(4, 1, seed=0)
    s = InterconnectionStrategy.from_edges(4, 1, [(1, 2), (3, 4)])
    with pytest.raises(IneffectiveStrategyError):
        build_fim(g, s, ChannelModel())


def test_singular_fim_detected():
    g = RfGainSet([1, 1e-9, 1], [1, 1e-9, 1], 1)
    fim = build_fim(g, build_daisy_chain(3, 1), ChannelModel())
    with pytest.raises(SingularFisherError):
        invert_fim(fim)


def test_elementary_update_matches_rebuilt_fim(rng):
    for _ in range(30):
        M = int(rng.integers(3, 9))
        s = random_tree(rng, M, int(rng.integers(1, M + 1)))
        g = generate_gains(M, s.reference, seed=int(rng.integers(1 << 30)))
        ch = ChannelModel(1.0, 0.0, 0.01)
        fim = build_fim(g, s, ch)
        for n, u in star_rewiring_sequence(s):
            fim = elementary_update(fim, n, u)
            direct = build_fim(g, fim.strategy, ch)
            assert np.max(np.abs(fim.J - direct.J)) / np.max(np.abs(direct.J)) < 1e-12
        assert fim.strategy.is_star()


def test_elementary_factors_are_unit_triangular_pairs():
    g = generate_gains(5, 3, seed=0)
    fim = build_fim(g, build_daisy_chain(5, 3), ChannelModel())
    L, Lp = elementary_factors(fim, 1, 2)
    assert np.linalg.det(L) == pytest.approx(1.0)
    assert np.linalg.det(Lp) == pytest.approx(1.0)
    np.testing.assert_allclose(Lp, L.conj().T)


def test_diagonal_update_identity(rng):
    for _ in range(10):
        M = int(rng.integers(3, 8))
        s = random_tree(rng, M, int(rng.integers(1, M + 1)))
        a, b = float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 2))
        g = generate_gains(M, s.reference, a, b, seed=int(rng.integers(1 << 30)))
        ch = ChannelModel(1.0, 0.0, 0.1)
        idx = ParameterIndex(M, s.reference)
        cur = s
        for n, u in star_rewiring_sequence(s):
            nxt = rewire(cur, n, u)
            inv_k, _ = invert_fim(build_fim(g, cur, ch))
            inv_k1, _ = invert_fim(build_fim(g, nxt, ch))
            nb, nbp, ub, ubp = idx.alpha_row(n), idx.beta_row(n), idx.alpha_row(u), idx.beta_row(u)
            lhs = inv_k[nb, nb].real
            rhs = inv_k1[nb, nb].real + a**2 / b**2 * inv_k1[ubp, ubp].real
            assert lhs == pytest.approx(rhs, rel=1e-10)
            lhs = inv_k[nbp, nbp].real
            rhs = inv_k1[nbp, nbp].real + b**2 / a**2 * inv_k1[ub, ub].real
            assert lhs == pytest.approx(rhs, rel=1e-10)
            cur = nxt


def test_rewiring_step_count():
    # ordinary antennas not adjacent to the reference: 1 and 5
    assert len(star_rewiring_sequence(build_daisy_chain(5, 3))) == 2
    assert star_rewiring_sequence(build_star(6, 2)) == []
    s = build_daisy_chain(7, 1)
    assert len(star_rewiring_sequence(s)) == 5


def test_each_rewiring_lowers_trace():
    g = generate_gains(8, 1, seed=3)
    ch = ChannelModel(1.0, 0.0, 0.1)
    cur = build_daisy_chain(8, 1)
    prev = crlb_numerical(build_fim(g, cur, ch)).trace_objective
    for n, u in star_rewiring_sequence(cur):
        cur = rewire(cur, n, u)
        t = crlb_numerical(build_fim(g, cur, ch)).trace_objective
        assert t < prev
        prev = t


def test_elementary_preconditions():
    g = generate_gains(5, 3, seed=0)
    fim = build_fim(g, build_daisy_chain(5, 3), ChannelModel())
    with pytest.raises(PreconditionError):
        elementary_factors(fim, 2, 1)  # antenna 2 is not a leaf
    with pytest.raises(PreconditionError):
        elementary_factors(fim, 2, 3)  # 3 is the reference
    with pytest.raises(PreconditionError):
        star_rewiring_sequence(InterconnectionStrategy.from_edges(3, 1, [(1, 2), (2, 3), (1, 3)]))


def test_batched_trace_matches_single(rng):
    g = generate_gains(6, 2, seed=8)
    ch = ChannelModel(1.0, 0.0, 0.3)
    trees = [random_tree(rng, 6, 2) for _ in range(12)]
    edges = np.array([[(p - 1, q - 1) for p, q in t.edges] for t in trees])
    batch = batched_trace_objective(edges, g, ch)
    single = [crlb_numerical(build_fim(g, t, ch)).trace_objective for t in trees]
    np.testing.assert_allclose(batch, single, rtol=1e-10)


def test_report_serialisation():
    rep = crlb_closed_form(compute_paths(build_daisy_chain(3, 2)), 1.0, 1.0, ChannelModel(1.0, 0.0, 0.5))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "antenna,d_m,crlb_alpha,crlb_beta,crlb_relative"
    assert lines[1] == "1,0,0.5,0.5,1.0"
    assert rep.mean_full() == pytest.approx(0.5)
