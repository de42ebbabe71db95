from __future__ import annotations

import os
import subprocess
import sys

import pytest

SNIPPET = """
from fracldg._accel import backend
from fracldg.harness import make_spec, run_point
spec = make_spec(dict(case="ex3", beta=1.4, N=2, sweep="K", values=[8], dt="T/40"))
print(backend(), repr(run_point(spec, 8)["l2_error"]))
"""


def _run(flag):
    env = dict(os.environ, FRACLDG_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    return out[0], float(out[1])


def test_env_flag_selects_backend_and_results_agree():
    pytest.importorskip("numba")
    name_np, err_np = _run("1")
    name_nb, err_nb = _run("0")
    assert (name_np, name_nb) == ("numpy", "numba")
    assert err_np == pytest.approx(err_nb, rel=1e-10)


def test_shim_is_identity_without_numba(monkeypatch):
    import fracldg._accel as accel

    monkeypatch.setattr(accel, "HAVE_NUMBA", False)

    def f(x):
        return x + 1

    assert accel.njit(f) is f
    assert accel.njit(cache=True)(f) is f
    assert accel.backend() == "numpy"
