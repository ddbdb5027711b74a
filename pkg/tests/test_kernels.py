import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfmmbatch import kernels

compiled = kernels.compiled_backend()
needs_compiled = pytest.mark.skipif(compiled is None, reason="extension not built")

pos = st.floats(1e-3, 1e3, allow_nan=False)


@st.composite
def halves(draw, n=None):
    n = n or draw(st.integers(1, 12))
    kind = np.array(draw(st.lists(st.sampled_from([0, 1]), min_size=n, max_size=n)), dtype=np.int64)
    p0 = np.array(draw(st.lists(pos, min_size=n, max_size=n)))
    p1 = np.array(draw(st.lists(pos, min_size=n, max_size=n)))
    return kind, p0, p1


def term_scale(p0, p1):
    # magnitude of the cancelling terms inside negg
    return 1.0 + p0 * (np.abs(np.log(p0)) + np.abs(np.log(p1)) + 1.0)


def close(a, b, scale=1.0):
    a, b = np.asarray(a), np.asarray(b)
    both_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    both_nan = np.isnan(a) & np.isnan(b)
    with np.errstate(invalid="ignore"):
        ok = both_inf | both_nan | (np.abs(a - b) <= 1e-13 * np.abs(b) + 1e-13 * scale)
    return bool(np.all(ok))


def test_selected_backend_name():
    assert kernels.BACKEND in ("python", "cython")
    if compiled is not None:
        assert kernels.BACKEND == "cython"


def test_python_hyperbolic_values():
    py = kernels.python_backend
    kind, a, b = np.array([1]), np.array([0.5]), np.array([5.0])
    assert py.half_sold(kind, a, b, np.array([40.0]))[0] == 0.375
    assert py.half_sold(kind, a, b, np.array([10.0]))[0] == 0.0
    assert py.half_lnq(kind, a, b, np.array([0.375]))[0] == pytest.approx(np.log(40.0), rel=1e-15)


def test_python_jump_values():
    py = kernels.python_backend
    kind, a, b = np.array([0, 0]), np.array([5.0, 5.0]), np.array([2.0, 2.0])
    assert py.half_sold(kind, a, b, np.array([2.0, 2.5])).tolist() == [0.0, 5.0]
    kind, a, b = kind[:1], a[:1], b[:1]
    assert py.half_negg(kind, a, b, np.array([6.0]))[0] == np.inf
    assert py.half_negg(kind, a, b, np.array([5.0 * (1 + 1e-13)]))[0] == pytest.approx(5.0 * np.log(2.0))


@needs_compiled
@settings(max_examples=200, deadline=None)
@given(halves(), st.data())
def test_pointwise_kernels_agree(h, data):
    kind, p0, p1 = h
    n = kind.size
    z = np.array(data.draw(st.lists(pos, min_size=n, max_size=n)))
    frac = np.array(data.draw(st.lists(st.floats(0.0, 1.2), min_size=n, max_size=n)))
    x = frac * p0
    py = kernels.python_backend
    for name, arg in (("half_sold", z), ("half_phi", z), ("half_negg", x), ("half_lnq", x)):
        got = getattr(compiled, name)(kind, p0, p1, arg)
        assert close(getattr(py, name)(kind, p0, p1, arg), got, term_scale(p0, p1)), name


@needs_compiled
@settings(max_examples=200, deadline=None)
@given(halves(), st.data())
def test_convex_terms_agree(h, data):
    kind, p0, p1 = h
    n = kind.size
    pa = np.array(data.draw(st.lists(pos, min_size=n, max_size=n)))
    pb = np.array(data.draw(st.lists(pos, min_size=n, max_size=n)))
    frac = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n)))
    y = frac * p0 * pa
    for u, v in zip(kernels.python_backend.convex_terms(kind, p0, p1, pa, pb, y),
                    compiled.convex_terms(kind, p0, p1, pa, pb, y)):
        assert close(u, v, term_scale(p0, p1) * np.maximum(pa, 1.0))


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(halves(), st.data())
def test_excess_grid_agrees(h, data):
    kind, p0, p1 = h
    side = np.array(data.draw(st.lists(st.sampled_from([0, 1]), min_size=kind.size, max_size=kind.size)), dtype=np.int64)
    grid = np.geomspace(1e-3, 1e3, 64)
    a = kernels.python_backend.excess_grid(kind, p0, p1, side, grid)
    b = compiled.excess_grid(kind, p0, p1, side, grid)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-12)


def test_generic_entries_are_nan():
    py = kernels.python_backend
    out = py.half_sold(np.array([2, 1]), np.array([1.0, 1.0]), np.array([1.0, 1.0]), np.array([3.0, 3.0]))
    assert np.isnan(out[0]) and out[1] == pytest.approx(2.0 / 3.0)


def test_pure_fallback_end_to_end():
    import os
    import subprocess
    import sys

    code = (
        "import numpy as np\n"
        "from cfmmbatch import BACKEND\n"
        "from cfmmbatch.convex import solve_convex\n"
        "from cfmmbatch.functions import Lmsr\n"
        "from cfmmbatch.market import BatchInstance, CfmmDecl, LimitSellOffer\n"
        "inst = BatchInstance.from_symbols('AB', [CfmmDecl('m', (0, 1), [1.0, 1.0], Lmsr()),"
        " LimitSellOffer(0, 1, 100.0, 0.5)])\n"
        "p = np.asarray(solve_convex(inst).prices, float)\n"
        "print(BACKEND, round(p[0] / p[1], 9))\n"
    )
    env = dict(os.environ, CFMMBATCH_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "0.5"]
