import numpy as np
import pytest

from tablenet import autodiff as ad


def _fd_check(build, *shapes, seed=0, eps=1e-6):
    """Compare backward() against central differences of sum(w * build(...))."""
    rng = np.random.default_rng(seed)
    values = [rng.standard_normal(s) for s in shapes]
    out_w = None

    def scalar(vals):
        nonlocal out_w
        y = build(*[ad.Tensor(v) for v in vals]).value
        if out_w is None:
            out_w = rng.standard_normal(y.shape)
        return float((out_w * y).sum())

    scalar(values)
    ts = [ad.Tensor(v) for v in values]
    build(*ts).backward(out_w)
    for t, v in zip(ts, values):
        num = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            up = [x.copy() for x in values]
            dn = [x.copy() for x in values]
            i = [id(x) for x in values].index(id(v))
            up[i][idx] += eps
            dn[i][idx] -= eps
            num[idx] = (scalar(up) - scalar(dn)) / (2 * eps)
        assert np.allclose(t.grad, num, atol=1e-7, rtol=1e-6)


@pytest.mark.parametrize("name,build,shapes", [
    ("add-broadcast", lambda a, b: a + b, [(3, 4), (4,)]),
    ("mul-broadcast", lambda a, b: a * b, [(2, 3, 4), (3, 1)]),
    ("sub", lambda a, b: a - b, [(3,), (3,)]),
    ("linear-3d", ad.linear, [(2, 3, 4), (5, 4)]),
    ("tanh", ad.tanh, [(3, 3)]),
    ("sigmoid", ad.sigmoid, [(3, 3)]),
    ("softmax", lambda a: ad.softmax(a, axis=-1), [(2, 5)]),
    ("log_softmax", lambda a: ad.log_softmax(a, axis=-1), [(2, 5)]),
    ("concat", lambda a, b: ad.concat([a, b], axis=-1), [(2, 3), (2, 2)]),
    ("stack", lambda a, b: ad.stack([a, b], axis=1), [(2, 3), (2, 3)]),
    ("getitem-slice", lambda a: a[:, 1:3], [(3, 4)]),
    ("getitem-fancy", lambda a: a[np.array([0, 0, 2])], [(3, 2)]),
    ("expand_dims", lambda a: ad.expand_dims(a, 1), [(3, 2)]),
    ("reduce_sum", lambda a: ad.reduce_sum(a, axis=1), [(3, 4)]),
    ("reduce_sum-all", lambda a: ad.reduce_sum(a), [(3, 4)]),
    ("pick", lambda a: ad.pick(a, [2, 0, 1]), [(3, 3)]),
    ("mean", ad.mean, [(3, 4)]),
    ("neg", ad.neg, [(4,)]),
    ("shared-subgraph", lambda a: ad.tanh(a) * ad.tanh(a) + a, [(3,)]),
])
def test_op_gradients(name, build, shapes):
    _fd_check(build, *shapes)


def test_gradient_accumulates_over_reuse():
    x = ad.Tensor(np.array([2.0]))
    y = x * x * x
    y.backward()
    assert y.value[0] == 8.0 and x.grad[0] == pytest.approx(12.0)


def test_softmax_rows_sum_to_one():
    y = ad.softmax(ad.Tensor(np.array([[1000.0, 0.0, -1000.0], [1.0, 1.0, 1.0]])))
    assert np.allclose(y.value.sum(axis=1), 1.0)
