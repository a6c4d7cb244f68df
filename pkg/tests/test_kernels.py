import os
import subprocess
import sys

import numpy as np
import pytest

from pathpdf import _fallback, kernels

compiled = pytest.importorskip("pathpdf._kernel")

CASES = [(1.0, 2.0), (1.0, 1.0), (0.5, 1.5), (0.2, 1.3), (0.8, 1.7), (1.0, 1.15)]


def _args(p, gamma, sigma=0.1, D=10, r=0.01):
    dt = 1.0 / D
    f = p - (p / 2) ** gamma / gamma
    return dt, r, p, gamma, 1 / (2 * sigma ** p), dt ** f


@pytest.mark.parametrize("gamma,p", CASES)
def test_path_exponents_agree(gamma, p):
    rng = np.random.default_rng(1)
    inner = np.ascontiguousarray(rng.normal(0, 0.05, (500, 9)))
    a = compiled.path_exponents(inner, 0.01, -0.03, *_args(p, gamma))
    b = _fallback.path_exponents(inner, 0.01, -0.03, *_args(p, gamma))
    np.testing.assert_allclose(a, b, rtol=1e-13)


@pytest.mark.parametrize("gamma,p", CASES)
def test_bridge_weights_agree(gamma, p):
    rng = np.random.default_rng(2)
    y = np.ascontiguousarray(rng.standard_normal((500, 9)))
    q = rng.standard_normal(500)
    a = compiled.bridge_log_weights(y, q, 0.03, 0.07, *_args(p, gamma))
    b = _fallback.bridge_log_weights(y, q, 0.03, 0.07, *_args(p, gamma))
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_bridge_with_unit_scale_reproduces_path_exponents():
    rng = np.random.default_rng(3)
    y = np.ascontiguousarray(rng.normal(0, 0.05, (50, 4)))
    args = _args(1.5, 0.5, D=5)
    e = compiled.path_exponents(y + 0.2 * np.arange(1, 5) / 5, 0.0, 0.2, *args)
    lw = compiled.bridge_log_weights(y, np.zeros(50), 1.0, 0.2, *args)
    np.testing.assert_allclose(-lw, e, rtol=1e-13)


@pytest.mark.parametrize("mod", [compiled, _fallback])
def test_huge_exponents_are_capped(mod):
    inner = np.ascontiguousarray(np.full((3, 2), 1e200))
    e = mod.path_exponents(inner, 0.0, 0.0, *_args(2.0, 1.0, sigma=1e-3))
    assert np.all(e == 1e300)


def test_compiled_backend_selected_by_default():
    assert kernels.BACKEND == "compiled"


def test_pure_python_backend_can_be_forced():
    env = dict(os.environ, PATHPDF_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from pathpdf import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backends_give_the_same_curve():
    code = (
        "import numpy as np\n"
        "from pathpdf.integrator import pdf_curve, SamplingConfig\n"
        "from pathpdf.model import ModelParams\n"
        "m = ModelParams(0.5, 1.3, 0.05, D=6)\n"
        "c = pdf_curve(0.0, np.linspace(-0.3, 0.3, 9), m, SamplingConfig(n=512))\n"
        "print(' '.join(repr(float(v)) for v in c.density))\n"
    )
    res = {}
    for pure in ("0", "1"):
        env = dict(os.environ, PATHPDF_PURE=pure)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        res[pure] = np.array([float(v) for v in out.stdout.split()])
    np.testing.assert_allclose(res["0"], res["1"], rtol=1e-11)
