import os
import subprocess
import sys

import numpy as np
import pytest

from pulledsaw import _pykernels, kernels

needs_compiled = pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="compiled kernels not built")


@needs_compiled
@pytest.mark.parametrize("cls", [kernels.POSITIVE, kernels.UNFOLDED, kernels.FULL])
@pytest.mark.parametrize("d,n", [(1, 9), (2, 9), (3, 6)])
def test_count_parity(cls, d, n):
    if d == 1 and cls != kernels.FULL:
        pytest.skip("half-space classes need d >= 2")
    a = kernels.compiled.count_walks(d, n, cls, (), False, 0)
    b = kernels.pure.count_walks(d, n, cls, (), False, 0)
    assert a.dtype == b.dtype == np.uint64
    assert np.array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("prefix", [(), (0,), (2, 0), (0, 1), (3,), (2, 2, 1, 3)])
def test_count_parity_with_prefix_and_symmetry(prefix):
    for sym in (False, True):
        a = kernels.compiled.count_walks(2, 8, kernels.POSITIVE, prefix, sym, 0)
        b = kernels.pure.count_walks(2, 8, kernels.POSITIVE, prefix, sym, 0)
        assert np.array_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("d,n,tours,key", [(2, 6, 50, 1), (2, 9, 200, 2**63 + 5), (3, 7, 60, 99)])
def test_flatperm_bitwise_parity(d, n, tours, key):
    a = kernels.compiled.flatperm_batch(d, n, tours, key)
    b = kernels.pure.flatperm_batch(d, n, tours, key)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_python_kernel_detects_overflow(monkeypatch):
    monkeypatch.setattr(_pykernels, "UINT64_MAX", 5)
    with pytest.raises(_pykernels.KernelOverflow) as info:
        _pykernels.count_walks(2, 4, _pykernels.POSITIVE)
    n, v, h = info.value.cell
    assert 0 <= n <= 4


def test_node_limit_in_both_kernels():
    impls = [kernels.pure] + ([kernels.compiled] if kernels.HAVE_COMPILED else [])
    for impl in impls:
        with pytest.raises(kernels.NodeLimitExceeded):
            impl.count_walks(2, 10, kernels.POSITIVE, (), False, 100)


def test_invalid_prefix_counts_nothing():
    # W then E revisits the origin
    arr = kernels.count_walks(2, 5, kernels.POSITIVE, (1, 0))
    assert not arr.any()
    # first step down leaves the half-space
    assert not kernels.count_walks(2, 5, kernels.POSITIVE, (3,)).any()


def test_first_flatperm_level_is_deterministic():
    wsum, wcomp, samples = kernels.flatperm_batch(2, 1, 10, 3)
    total = wsum - wcomp
    assert total[1, 1, 0] == 20.0 and total[1, 0, 1] == 10.0
    assert samples[0, 0, 0] == 10


def test_pure_python_selected_by_environment():
    env = dict(os.environ, PULLEDSAW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from pulledsaw import kernels; print(kernels.IMPLEMENTATION)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
