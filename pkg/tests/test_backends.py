import numpy as np
import pytest

from fourthmoment import _kernels
from fourthmoment._kernels import _fallback
from fourthmoment.chaos_eval import _compile


def test_backend_name():
    assert _kernels.BACKEND in ("cython", "numpy")


needs_core = pytest.mark.skipif(_kernels.BACKEND != "cython", reason="compiled extension not built")


@needs_core
def test_hermite_backends_agree():
    x = np.linspace(-4, 4, 101)
    for m in range(20):
        np.testing.assert_allclose(_kernels.hermite_e(m, x), _fallback.hermite_e(m, x), rtol=1e-13, atol=1e-10)


@needs_core
def test_eval_terms_backends_agree(random_kernel):
    f = random_kernel(4, 3)
    c = _compile(f)
    xi = np.ascontiguousarray(np.random.default_rng(0).normal(size=(50, 4)))
    args = (c.term_ptr, c.labels, c.powers, c.weights, xi, c.max_power)
    np.testing.assert_allclose(_kernels.eval_terms(*args), _fallback.eval_terms(*args), rtol=1e-13)


@needs_core
def test_banded_quadform_backends_agree():
    gen = np.random.default_rng(1)
    v = np.ascontiguousarray(gen.normal(size=(5, 300)))
    rho = np.ascontiguousarray(gen.normal(size=40))
    np.testing.assert_allclose(_kernels.banded_quadform(v, rho), _fallback.banded_quadform(v, rho), rtol=1e-12)


def test_banded_quadform_matches_dense():
    gen = np.random.default_rng(2)
    v = np.ascontiguousarray(gen.normal(size=(3, 60)))
    rho = np.ascontiguousarray(gen.normal(size=10))
    idx = np.arange(60)
    lag = np.abs(idx[:, None] - idx[None, :])
    R = np.where(lag < 10, rho[np.minimum(lag, 9)], 0.0)
    for back in (_kernels, _fallback):
        np.testing.assert_allclose(back.banded_quadform(v, rho), np.einsum("mi,ij,mj->m", v, R, v), rtol=1e-12)


def test_pure_mode_selects_fallback():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import fourthmoment; print(fourthmoment.BACKEND)"],
        env={"FOURTHMOMENT_PURE": "1", "PATH": ""},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
