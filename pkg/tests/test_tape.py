"""Tape semantics: recording, backward accumulation, finite-difference agreement."""

import numpy as np
import pytest

from optmanet import ContractError, DomainError, Tape, constant, grad_check


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def test_tensor_construction_shapes():
    t = Tape()
    assert t.tensor([[1.0, 2.0], [3.0, 4.0]]).shape == (2, 2)
    assert t.tensor(3.0).shape == (1, 1)
    assert t.tensor([1.0, 2.0, 3.0]).shape == (1, 3)
    assert constant(5.0).is_constant


def test_nonfinite_construction_rejected():
    t = Tape()
    with pytest.raises(ContractError):
        t.tensor([[np.nan]])
    with pytest.raises(ContractError):
        t.tensor([[np.inf, 1.0]])
    with pytest.raises(ContractError):
        constant([np.nan])


def test_rank3_rejected():
    t = Tape()
    with pytest.raises(ContractError):
        t.tensor(np.zeros((2, 2, 2)))


def test_elementwise_shape_mismatch():
    t = Tape()
    a = t.tensor(np.ones((2, 3)))
    b = t.tensor(np.ones((3, 2)))
    with pytest.raises(ContractError):
        t.add(a, b)


def test_square_gradient():
    t = Tape()
    x = t.tensor(3.0)
    y = t.mul(x, x)
    g = t.backward(y)
    assert y.item() == 9.0
    assert g.wrt(x)[0, 0] == 6.0


def test_x_squared_sin_x():
    t = Tape()
    x = t.tensor(1.0)
    y = t.mul(t.pow(x, 2.0), t.sin(x))
    g = t.backward(y)
    expect_val = np.sin(1.0)
    expect_grad = 2.0 * np.sin(1.0) + np.cos(1.0)
    assert abs(y.item() - expect_val) < 1e-15
    assert abs(g.wrt(x)[0, 0] - expect_grad) < 1e-14


def test_matmul_shapes_and_mismatch():
    t = Tape()
    a = t.tensor(np.ones((2, 3)))
    b = t.tensor(np.ones((3, 4)))
    assert t.matmul(a, b).shape == (2, 4)
    with pytest.raises(ContractError):
        t.matmul(b, a)


def test_matmul_nt_matches_transposed_product():
    r = rng_for(7)
    a = r.normal(size=(4, 5))
    b = r.normal(size=(3, 5))
    t = Tape()
    out = t.matmul_nt(t.tensor(a), t.tensor(b))
    assert np.allclose(out.values, a @ b.T, rtol=1e-13, atol=1e-15)


def test_div_by_exact_zero():
    t = Tape()
    a = t.tensor([[1.0, 2.0]])
    with pytest.raises(DomainError):
        t.div(a, t.tensor([[1.0, 0.0]]))
    with pytest.raises(DomainError):
        t.div(a, 0.0)
    with pytest.raises(DomainError):
        t.div(1.0, t.tensor([[0.0, 1.0]]))


def test_sqrt_negative_rejected():
    t = Tape()
    with pytest.raises(DomainError):
        t.sqrt(t.tensor([[-1.0]]))


def test_fractional_pow_of_negative_rejected():
    t = Tape()
    with pytest.raises(DomainError):
        t.pow(t.tensor([[-1.0]]), 0.5)


def test_abs_gradient_zero_at_zero():
    t = Tape()
    x = t.tensor([[-2.0, 0.0, 3.0]])
    g = t.backward(t.sum(t.abs(x)))
    assert np.array_equal(g.wrt(x), [[-1.0, 0.0, 1.0]])


def test_relu_gradient():
    t = Tape()
    x = t.tensor([[-2.0, 0.0, 3.0]])
    g = t.backward(t.sum(t.relu(x)))
    assert np.array_equal(g.wrt(x), [[0.0, 0.0, 1.0]])


def test_log10_value_and_gradient():
    t = Tape()
    x = t.tensor(1.0)
    y = t.log10(x)
    g = t.backward(y)
    assert y.item() == 0.0
    assert abs(g.wrt(x)[0, 0] - 0.4342944819032518) < 1e-16


def test_log10_clamps_instead_of_diverging():
    t = Tape()
    y = t.log10(t.tensor(0.0))
    assert np.isfinite(y.item())
    assert y.item() == -30.0


def test_fanout_gradient_sums():
    t = Tape()
    a = t.tensor(2.0)
    y = t.add(a, a)
    g = t.backward(y)
    assert g.wrt(a)[0, 0] == 2.0


def test_diamond_graph_each_node_once():
    # b = a*a, y = b + b: double-processing any node would break the value
    t = Tape()
    a = t.tensor(3.0)
    b = t.mul(a, a)
    y = t.add(b, b)
    g = t.backward(y)
    assert g.wrt(a)[0, 0] == 12.0
    # leaf + mul + add reachable
    assert g.n_processed == 3


def test_constant_root_empty_gradients():
    t = Tape()
    y = t.mul(constant(2.0), constant(3.0))
    assert y.is_constant
    g = t.backward(y)
    assert len(g) == 0


def test_constant_folding_records_nothing():
    t = Tape()
    before = t.n_nodes
    out = t.add(constant([[1.0, 2.0]]), constant([[3.0, 4.0]]))
    assert out.is_constant
    assert t.n_nodes == before
    assert np.array_equal(out.values, [[4.0, 6.0]])


def test_node_count_is_ops_plus_leaves():
    t = Tape()
    x = t.tensor(np.ones((2, 2)))
    y = t.tensor(np.ones((2, 2)))
    out = t.add(t.mul(x, y), t.sin(x))
    out = t.sum(out)
    # 2 leaves + mul + sin + add + sum
    assert t.n_nodes == 6
    g = t.backward(out)
    assert g.n_processed == 6


def test_backward_linearity():
    r = rng_for(11)
    x0 = r.normal(size=(2, 3))
    t = Tape()
    x = t.tensor(x0)
    f = t.sum(t.mul(x, x))
    h = t.sum(t.sin(x))
    both = t.backward(t.add(f, h))
    gf = t.backward(f)
    gh = t.backward(h)
    assert np.allclose(
        both.wrt(x), gf.wrt(x) + gh.wrt(x), rtol=1e-13, atol=1e-15
    )


def test_mixed_constant_operand_tracks_one_side():
    t = Tape()
    x = t.tensor([[1.0, 2.0]])
    c = constant([[3.0, 4.0]])
    y = t.sum(t.mul(x, c))
    g = t.backward(y)
    assert np.array_equal(g.wrt(x), [[3.0, 4.0]])
    with pytest.raises(ContractError):
        g.wrt(c)


def test_unreachable_node_has_no_entry():
    t = Tape()
    x = t.tensor(1.0)
    z = t.tensor(5.0)  # never used downstream of y
    y = t.mul(x, x)
    g = t.backward(y)
    assert x in g and z not in g
    with pytest.raises(ContractError):
        g.wrt(z)


def test_cross_tape_mixing_rejected():
    t1, t2 = Tape(), Tape()
    x = t1.tensor(1.0)
    with pytest.raises(ContractError):
        t2.sin(x)
    with pytest.raises(ContractError):
        t2.backward(t1.mul(x, x))


def test_nonscalar_backward_root_rejected():
    t = Tape()
    x = t.tensor([[1.0, 2.0]])
    with pytest.raises(ContractError):
        t.backward(t.relu(x))


def test_sum_mean_backward():
    t = Tape()
    x = t.tensor(np.arange(6.0).reshape(2, 3))
    gs = t.backward(t.sum(x))
    gm = t.backward(t.mean(x))
    assert np.array_equal(gs.wrt(x), np.ones((2, 3)))
    assert np.allclose(gm.wrt(x), np.full((2, 3), 1.0 / 6.0), rtol=0, atol=1e-17)


def test_concat_slice_roundtrip_and_adjoints():
    r = rng_for(3)
    a0 = r.normal(size=(3, 2))
    b0 = r.normal(size=(3, 1))
    t = Tape()
    a, b = t.tensor(a0), t.tensor(b0)
    cat = t.concat_cols([a, b])
    assert cat.shape == (3, 3)
    assert np.array_equal(cat.values, np.concatenate([a0, b0], axis=1))
    col = t.slice_col(cat, 2)
    assert np.array_equal(col.values, b0)
    g = t.backward(t.sum(col))
    assert np.array_equal(g.wrt(b), np.ones((3, 1)))
    assert np.array_equal(g.wrt(a), np.zeros((3, 2)))
    with pytest.raises(ContractError):
        t.slice_col(cat, 3)


def test_broadcast_add_mul_adjoints():
    r = rng_for(5)
    a0 = r.normal(size=(4, 3))
    row0 = r.normal(size=(1, 3))
    t = Tape()
    a, row = t.tensor(a0), t.tensor(row0)
    g = t.backward(t.sum(t.badd(a, row)))
    assert np.array_equal(g.wrt(row), np.full((1, 3), 4.0))
    t2 = Tape()
    a, row = t2.tensor(a0), t2.tensor(row0)
    g2 = t2.backward(t2.sum(t2.bmul(a, row)))
    assert np.allclose(g2.wrt(row), a0.sum(axis=0, keepdims=True), rtol=1e-14, atol=1e-15)
    assert np.allclose(g2.wrt(a), np.broadcast_to(row0, (4, 3)), rtol=0, atol=0)
    with pytest.raises(ContractError):
        t2.badd(t2.tensor(a0), t2.tensor(a0))


def test_scalar_operand_forms():
    t = Tape()
    x = t.tensor([[2.0, 4.0]])
    forms = [
        (t.add(x, 1.0), [[3.0, 5.0]]),
        (t.add(1.0, x), [[3.0, 5.0]]),
        (t.sub(x, 1.0), [[1.0, 3.0]]),
        (t.sub(10.0, x), [[8.0, 6.0]]),
        (t.mul(x, 3.0), [[6.0, 12.0]]),
        (t.div(x, 2.0), [[1.0, 2.0]]),
        (t.div(8.0, x), [[4.0, 2.0]]),
        (t.neg(x), [[-2.0, -4.0]]),
    ]
    for got, want in forms:
        assert np.array_equal(got.values, np.asarray(want))
    g = t.backward(t.sum(t.div(8.0, x)))
    assert np.allclose(g.wrt(x), [[-2.0, -0.5]], rtol=1e-14, atol=0)


# ---- finite-difference agreement for every primitive ----


def _fd_sweep(make_f, x0, tol=1e-5):
    rep = grad_check(make_f, x0)
    assert rep.passed, f"max rel err {rep.max_rel_err:.3e} > {tol}"
    return rep


def test_fd_agreement_unary_ops():
    r = rng_for(23)
    safe = r.uniform(0.2, 2.0, size=(2, 4)) * r.choice([-1.0, 1.0], size=(2, 4))
    pos = np.abs(safe) + 0.1
    cases = [
        (lambda tp, v: tp.mean(tp.sin(v)), safe),
        (lambda tp, v: tp.mean(tp.cos(v)), safe),
        (lambda tp, v: tp.mean(tp.neg(v)), safe),
        (lambda tp, v: tp.mean(tp.abs(v)), safe),
        (lambda tp, v: tp.mean(tp.relu(v)), safe),
        (lambda tp, v: tp.mean(tp.sqrt(v)), pos),
        (lambda tp, v: tp.mean(tp.log10(v)), pos),
        (lambda tp, v: tp.mean(tp.pow(v, 2.0)), safe),
        (lambda tp, v: tp.mean(tp.pow(v, 3.0)), safe),
        (lambda tp, v: tp.mean(tp.pow(v, 0.5)), pos),
        (lambda tp, v: tp.mean(tp.pow(v, -1.0)), pos),
    ]
    for f, x0 in cases:
        _fd_sweep(f, x0)


def test_fd_agreement_binary_ops():
    r = rng_for(29)
    b0 = r.uniform(0.5, 2.0, size=(2, 3)) * r.choice([-1.0, 1.0], size=(2, 3))
    a0 = r.normal(size=(2, 3))
    cases = [
        lambda tp, v: tp.mean(tp.add(v, b0)),
        lambda tp, v: tp.mean(tp.sub(v, b0)),
        lambda tp, v: tp.mean(tp.sub(constant(b0), v)),
        lambda tp, v: tp.mean(tp.mul(v, b0)),
        lambda tp, v: tp.mean(tp.div(v, b0)),
        lambda tp, v: tp.mean(tp.div(constant(b0), tp.add(v, 3.0))),
        lambda tp, v: tp.mean(tp.add(v, 1.5)),
        lambda tp, v: tp.mean(tp.mul(v, -2.5)),
    ]
    for f in cases:
        _fd_sweep(f, a0)


def test_fd_agreement_structural_ops():
    r = rng_for(31)
    a0 = r.normal(size=(2, 3))
    w0 = r.normal(size=(4, 3))
    sq = r.normal(size=(3, 3))
    row = r.normal(size=(1, 3))
    cases = [
        (lambda tp, v: tp.mean(tp.matmul(v, constant(sq))), a0),
        (lambda tp, v: tp.mean(tp.matmul(constant(sq), v)), sq),
        (lambda tp, v: tp.mean(tp.matmul_nt(v, constant(w0))), a0),
        (lambda tp, v: tp.mean(tp.matmul_nt(constant(a0), v)), w0),
        (lambda tp, v: tp.mean(tp.badd(constant(a0), v)), row),
        (lambda tp, v: tp.mean(tp.badd(v, constant(row))), a0),
        (lambda tp, v: tp.mean(tp.bmul(constant(a0), v)), row),
        (lambda tp, v: tp.mean(tp.bmul(v, constant(row))), a0),
        (lambda tp, v: tp.sum(tp.mul(tp.concat_cols([v, constant(a0)]), 0.25)), a0),
        (lambda tp, v: tp.mean(tp.slice_col(v, 1)), a0),
        (lambda tp, v: tp.sum(v), a0),
        (lambda tp, v: tp.mean(v), a0),
    ]
    for f, x0 in cases:
        _fd_sweep(f, x0)


def test_fd_agreement_composite():
    r = rng_for(37)
    x0 = r.uniform(0.3, 1.5, size=(1, 5))

    def f(tp, v):
        # sum(sqrt(v) * sin(v^2) / (v + 2)) exercises chained saved-value rules
        num = tp.mul(tp.sqrt(v), tp.sin(tp.pow(v, 2.0)))
        return tp.sum(tp.div(num, tp.add(v, 2.0)))

    _fd_sweep(f, x0)


# ---- grad_check behaviour itself ----


def test_grad_check_sum_of_squares():
    rep = grad_check(lambda tp, v: tp.sum(tp.pow(v, 2.0)), np.array([1.0, 2.0, 3.0]))
    assert rep.passed
    assert rep.max_rel_err < 1e-6
    assert np.allclose(rep.ad, [[2.0, 4.0, 6.0]], rtol=0, atol=0)


def test_grad_check_flags_abs_kink():
    rep = grad_check(lambda tp, v: tp.sum(tp.abs(v)), np.array([0.0]))
    assert rep.kinks == [0]
    assert rep.passed  # kinked coordinate excluded, nothing else to fail


def test_grad_check_step_range():
    f = lambda tp, v: tp.sum(v)
    with pytest.raises(ContractError):
        grad_check(f, np.array([1.0]), step=1e-2)
    with pytest.raises(ContractError):
        grad_check(f, np.array([1.0]), step=1e-9)


def test_grad_check_cost_asymmetry():
    rep = grad_check(lambda tp, v: tp.sum(tp.pow(v, 2.0)), np.arange(1.0, 8.0))
    assert rep.n_fd_evals == 2 * 7
    assert rep.n_backward == 1


def test_grad_check_domain_error_on_nonfinite():
    # overflow at the evaluation point itself
    with pytest.raises(DomainError):
        grad_check(lambda tp, v: tp.sum(tp.pow(v, 2.0)), np.array([1e200]))
    # FD probe steps outside the sqrt domain
    with pytest.raises(DomainError):
        grad_check(lambda tp, v: tp.sum(tp.sqrt(v)), np.array([5e-6]))
