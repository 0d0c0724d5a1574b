import tracemalloc

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph, two_cliques
from gradcheck import make_instance, max_relative_error
from lrkernel.filters import KernelSpec, build_propagation, filter_values, kernel_matrix, regularize
from lrkernel.model import (
    MODEL_KINDS, ForwardContext, ModelParams, backward, forward, init_params, sensing_form,
)
from lrkernel.representation import build_representation
from lrkernel.spectral import decompose, truncate


def kernel_ctx(n=20, d=6, seed=0, spec=KernelSpec("rbf", 1.0), beta=0.0, factor=0.0,
               directed=False, rep="adjacency"):
    ds = random_graph(n, p=0.3, directed=directed, d=d, seed=seed)
    sys = truncate(decompose(build_representation(ds, rep)), factor)
    return ds, ForwardContext(X=ds.features, system=sys,
                              kernel=kernel_matrix(spec, sys.values), beta=beta)


def test_alpha_zero_beta_one_is_linear():
    ds, ctx = kernel_ctx(beta=1.0)
    p = init_params("kernel", 6, 3, 0, kernel=ctx.kernel)
    p.alpha = np.zeros_like(p.alpha)
    assert np.allclose(forward("kernel", p, ctx), ds.features @ p.W, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_factored_matches_dense(seed):
    for spec in (KernelSpec("id"), KernelSpec("lin"), KernelSpec("sobc"), KernelSpec("sobu", 0.3)):
        ds, ctx = kernel_ctx(seed=seed, spec=spec, beta=0.4, factor=0.3, directed=bool(seed % 2))
        p = init_params("lr_kernel", 6, 3, seed, kernel=ctx.kernel)
        p.alpha += np.random.default_rng(seed).standard_normal(p.alpha.shape)
        P = regularize(build_propagation(ctx.system, ctx.kernel, p.alpha), ctx.beta)
        assert np.allclose(forward("lr_kernel", p, ctx), P @ ds.features @ p.W, atol=1e-8)


def test_prop_linear_constant_on_cliques():
    ds = two_cliques()
    ctx = ForwardContext(X=ds.features, P=build_representation(ds, "adjacency").values)
    W = np.eye(2)
    out = forward("prop_linear", ModelParams(W=W), ctx)
    for b in (0, 1):
        block = out[ds.labels == b]
        assert np.all(block == block[0])
    assert out[0].tolist() == [49.0, 0.0]


@pytest.mark.parametrize("kind", MODEL_KINDS)
@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(kind, seed):
    ds, ctx, params, mask = make_instance(kind, seed, r=3 if kind == "lr_kernel" else None,
                                          beta=0.5 if kind == "kernel" else 0.0)
    assert max_relative_error(kind, params, ctx, ds.labels, mask) <= 1e-4


def test_zero_upstream_gradient():
    for kind in MODEL_KINDS:
        ds, ctx, params, _ = make_instance(kind, 0)
        grads = backward(kind, params, ctx, np.zeros((ds.n, 3)))
        assert all(np.all(g == 0) for g in grads.values())


def test_rank_one_alpha_gradient_by_hand():
    ds, ctx = kernel_ctx(spec=KernelSpec("id"), factor=0.95)
    assert ctx.system.r == 1
    p = init_params("lr_kernel", 6, 3, 1, kernel=ctx.kernel)
    G = np.random.default_rng(2).standard_normal((20, 3))
    u, v = ctx.system.U[:, 0], ctx.system.V[:, 0]
    # L = <G, a u v^T X W>  =>  dL/da = (u^T G) . (v^T X W)
    expected = float((u @ G) @ (v @ ds.features @ p.W))
    assert backward("lr_kernel", p, ctx, G)["alpha"][0] == pytest.approx(expected, rel=1e-12)


def test_init_params():
    ds, ctx = kernel_ctx(spec=KernelSpec("id"), factor=0.5)
    p = init_params("lr_kernel", 6, 3, 0, kernel=ctx.kernel)
    assert np.array_equal(filter_values(ctx.kernel, p.alpha), ctx.system.values)
    assert np.abs(p.W).max() <= 1 / np.sqrt(6)
    q = init_params("lr_kernel", 6, 3, 0, kernel=ctx.kernel)
    assert np.array_equal(p.W, q.W)
    m = init_params("mlp2", 6, 3, 4, hidden=10)
    assert m.W1.shape == (6, 10) and m.W2.shape == (10, 3)
    assert np.all(m.b1 == 0) and np.all(m.b2 == 0)
    assert np.abs(m.W2).max() <= 1 / np.sqrt(10)


@pytest.mark.parametrize("spec", [KernelSpec("rbf", 0.1), KernelSpec("rbf", 10.0),
                                  KernelSpec("sobu", 1.0), KernelSpec("lin"), KernelSpec("sobc")])
def test_alpha_init_residual_no_worse_than_zero(spec):
    _, ctx = kernel_ctx(n=30, spec=spec, rep="laplacian")
    alpha = init_params("kernel", 6, 3, 0, kernel=ctx.kernel).alpha
    vals = ctx.system.values
    assert np.linalg.norm(ctx.kernel.K @ alpha - vals) <= np.linalg.norm(vals)


def test_shape_errors():
    ds, ctx = kernel_ctx()
    with pytest.raises(ValueError):
        forward("kernel", ModelParams(W=np.zeros((3, 2)), alpha=np.zeros(20)), ctx)
    with pytest.raises(ValueError):
        forward("kernel", ModelParams(W=np.zeros((6, 2)), alpha=np.zeros(3)), ctx)
    with pytest.raises(ValueError):
        forward("prop_linear", ModelParams(W=np.zeros((6, 2))), ForwardContext(X=ds.features))
    with pytest.raises(ValueError):
        forward("gcn", ModelParams(W=np.zeros((6, 2))), ctx)


@pytest.mark.parametrize("seed", range(5))
def test_sensing_form_matches_forward(seed):
    for factor in (0.0, 0.6):
        ds, ctx = kernel_ctx(n=10, seed=seed, spec=KernelSpec("sobu", 0.7), factor=factor,
                             directed=bool(seed % 2))
        rng = np.random.default_rng(seed)
        alpha = rng.standard_normal(ctx.system.r)
        w = rng.standard_normal((6, 1))
        out = forward("lr_kernel", ModelParams(W=w, alpha=alpha), ctx)[:, 0]
        got = [sensing_form(ctx.system, ctx.kernel, alpha, w, ds.features, j) for j in range(10)]
        assert np.allclose(got, out, atol=1e-10)


def test_sensing_form_degenerate_cases():
    ds, ctx = kernel_ctx(n=10, spec=KernelSpec("rbf", 1.0), factor=0.9)
    assert ctx.system.r == 1
    w = np.random.default_rng(0).standard_normal(6)
    assert sensing_form(ctx.system, ctx.kernel, np.zeros(1), w, ds.features, 3) == 0.0
    alpha = np.array([1.7])
    k = ctx.system.U[3, 0] * ctx.kernel.K[:, 0]
    x = ds.features.T @ ctx.system.V[:, 0]
    expected = float((k @ alpha) * (x @ w))
    assert sensing_form(ctx.system, ctx.kernel, alpha, w, ds.features, 3) == pytest.approx(expected)
    with pytest.raises(ValueError):
        sensing_form(ctx.system, ctx.kernel, alpha, np.zeros((6, 2)), ds.features, 0)


@pytest.mark.parametrize("directed", [False, True])
def test_equivalence_chain(directed):
    ds = random_graph(20, directed=directed, seed=9)
    M = build_representation(ds, "adjacency")
    sys = decompose(M)
    K = kernel_matrix(KernelSpec("id"), sys.values)
    W = init_params("linear", 7, 3, 0).W
    kern = forward("kernel", ModelParams(W=W, alpha=sys.values.copy()),
                   ForwardContext(X=ds.features, system=sys, kernel=K))
    lr = forward("lr_kernel", ModelParams(W=W, alpha=truncate(sys, 0.0).values.copy()),
                 ForwardContext(X=ds.features, system=truncate(sys, 0.0), kernel=K))
    plin = forward("prop_linear", ModelParams(W=W), ForwardContext(X=ds.features, P=M.values))
    assert np.allclose(kern, lr, atol=1e-8) and np.allclose(kern, plin, atol=1e-8)


def test_factored_forward_allocates_no_square_matrix():
    n, d = 1500, 8
    ds, ctx = kernel_ctx(n=n, d=d, spec=KernelSpec("lin"), factor=0.5)
    p = init_params("lr_kernel", d, 3, 0, kernel=ctx.kernel)
    ctx.projected_features()  # cached constant, not part of the per-step cost
    tracemalloc.start()
    forward("lr_kernel", p, ctx)
    G = np.ones((n, 3))
    backward("lr_kernel", p, ctx, G)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert peak < n * n * 8 / 20
