"""Parity tests between the compiled kernels and their numpy twins.

Every kernel the compiled backend exports must agree with the numpy
reference to near machine precision on random inputs (1e-12 relative),
so a run behaves the same whichever backend got selected at import.
"""
from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest

from ctd4 import backends
from ctd4.backends import pykernels

HAS_CYTHON = "cython" in backends.available()

needs_cython = pytest.mark.skipif(not HAS_CYTHON, reason="compiled kernels not built")


@pytest.fixture
def ck():
    if not HAS_CYTHON:
        pytest.skip("compiled kernels not built")
    from ctd4.backends import _ckernels

    return _ckernels


def _close(a, b, tol=1e-12):
    a = np.asarray(a)
    b = np.asarray(b)
    assert a.shape == b.shape
    scale = np.maximum(1.0, np.abs(b))
    assert np.all(np.abs(a - b) <= tol * scale), float(np.max(np.abs(a - b) / scale))


def test_registry_and_selection():
    assert "python" in backends.available()
    mod = backends.get()
    assert mod.NAME == backends.name()
    prev = backends.name()
    try:
        assert backends.use("python") is pykernels
        assert backends.name() == "python"
    finally:
        backends.use(prev)
    with pytest.raises(ValueError, match="unknown backend"):
        backends.use("fortran")


def test_env_var_forces_backend():
    code = "import ctd4.backends as b; print(b.name())"
    env = dict(os.environ, CTD4_KERNELS="python")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "python"


def test_env_var_rejects_unknown_backend():
    code = "import ctd4.backends"
    env = dict(os.environ, CTD4_KERNELS="gpu")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode != 0
    assert "CTD4_KERNELS" in out.stderr


@needs_cython
def test_matmul_parity(ck, rng):
    for m, k, n in [(1, 1, 1), (7, 3, 5), (64, 256, 256), (33, 17, 1)]:
        a = rng.normal(size=(m, k))
        b = rng.normal(size=(k, n))
        _close(ck.matmul(a, b), pykernels.matmul(a, b))
        bt = rng.normal(size=(n, k))
        _close(ck.matmul_nt(a, bt), pykernels.matmul_nt(a, bt))
        c = rng.normal(size=(m, n))
        _close(ck.matmul_tn(a, c), pykernels.matmul_tn(a, c))


@needs_cython
def test_bias_and_activation_parity(ck, rng):
    for shape in [(1, 1), (5, 7), (64, 256)]:
        z0 = rng.normal(size=shape) * 3
        b = rng.normal(size=shape[1])

        for fn in ("add_bias_", "add_bias_relu_", "tanh_"):
            zc, zp = z0.copy(), z0.copy()
            if fn.startswith("add_bias"):
                getattr(ck, fn)(zc, b)
                getattr(pykernels, fn)(zp, b)
            else:
                getattr(ck, fn)(zc)
                getattr(pykernels, fn)(zp)
            _close(zc, zp)

        zc, zp = z0.copy(), z0.copy()
        ck.softplus_shift_(zc, 1e-4)
        pykernels.softplus_shift_(zp, 1e-4)
        _close(zc, zp)


@needs_cython
def test_backward_kernel_parity(ck, rng):
    for shape in [(1, 1), (5, 7), (64, 256)]:
        d0 = rng.normal(size=shape)
        post = np.maximum(rng.normal(size=shape), 0.0)
        dc, dp = d0.copy(), d0.copy()
        ck.relu_bwd_(dc, post)
        pykernels.relu_bwd_(dp, post)
        _close(dc, dp)

        tanh_post = np.tanh(rng.normal(size=shape))
        dc, dp = d0.copy(), d0.copy()
        ck.tanh_bwd_(dc, tanh_post)
        pykernels.tanh_bwd_(dp, tanh_post)
        _close(dc, dp)

        pre = rng.normal(size=shape) * 2
        dc, dp = d0.copy(), d0.copy()
        ck.softplus_bwd_(dc, pre)
        pykernels.softplus_bwd_(dp, pre)
        _close(dc, dp)

        _close(ck.colsum(d0), pykernels.colsum(d0))


@needs_cython
def test_adam_and_polyak_parity(ck, rng):
    shape = (32, 16)
    p0 = rng.normal(size=shape)
    g = rng.normal(size=shape)
    m0 = np.zeros(shape)
    v0 = np.zeros(shape)

    pc, mc, vc = p0.copy(), m0.copy(), v0.copy()
    pp, mp, vp = p0.copy(), m0.copy(), v0.copy()
    for t in range(1, 6):
        ok_c = ck.adam_(pc, g, mc, vc, t, 3e-4, 0.9, 0.999, 1e-8)
        ok_p = pykernels.adam_(pp, g, mp, vp, t, 3e-4, 0.9, 0.999, 1e-8)
        assert ok_c and ok_p
    _close(pc, pp, tol=1e-15)
    _close(mc, mp, tol=1e-15)
    _close(vc, vp, tol=1e-15)

    bad = g.copy()
    bad[0, 0] = np.nan
    assert not ck.adam_(pc, bad, mc, vc, 6, 3e-4, 0.9, 0.999, 1e-8)
    assert not pykernels.adam_(pp, bad, mp, vp, 6, 3e-4, 0.9, 0.999, 1e-8)

    tc, tp = p0.copy(), p0.copy()
    src = rng.normal(size=shape)
    ck.polyak_(tc, src, 0.005)
    pykernels.polyak_(tp, src, 0.005)
    _close(tc, tp, tol=1e-15)


@needs_cython
def test_forward_backward_parity_through_nn(rng):
    """End to end: a full forward/backward must agree across backends."""
    from ctd4 import nn

    spec = nn.critic_spec(4, 2, (32, 32))
    params = nn.init_mlp(spec, np.random.default_rng(3))
    x = rng.normal(size=(16, 6))
    upstream = {"mu": rng.normal(size=(16, 1)), "sigma": rng.normal(size=(16, 1))}

    prev = backends.name()
    results = {}
    try:
        for name in backends.available():
            backends.use(name)
            outs, cache = nn.forward(params, x)
            grads, ig = nn.backward(params, cache, upstream)
            results[name] = (outs, grads, ig)
    finally:
        backends.use(prev)

    ref_outs, ref_grads, ref_ig = results["python"]
    outs, grads, ig = results["cython"]
    _close(outs["mu"], ref_outs["mu"])
    _close(outs["sigma"], ref_outs["sigma"])
    for a, b in zip(grads, ref_grads):
        _close(a, b)
    _close(ig, ref_ig)
