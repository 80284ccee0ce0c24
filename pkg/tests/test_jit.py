"""The pure-numpy fallback must reproduce the compiled kernels."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from rotortrap import USING_NUMBA, kernels
from rotortrap._jit import py_func

PROBE = r"""
import json, math
from rotortrap import USING_NUMBA
from rotortrap.model import fig3_body, fig3_trap
from rotortrap.rotor1d import integrate_pendulum, librating_state
from rotortrap.rotor3d import BodyState, integrate_rigid
from rotortrap.floquet import mathieu_system, monodromy
trap = fig3_trap(800.0, 2 * math.pi * 6000.0)
body = fig3_body()
a = integrate_pendulum(trap, body, librating_state(trap.omega_d), 20 * trap.period).alpha
q = integrate_rigid(trap, body, BodyState.from_euler(0.01, 1.6, 0.01), 5 * trap.period, sample_dt=trap.period).quat
m = monodromy(mathieu_system(0.1, 0.5))
print(json.dumps({"numba": USING_NUMBA, "a": a.tolist(), "q": q.tolist(), "m": m.tolist()}))
"""


def _probe(disable):
    env = dict(os.environ, ROTORTRAP_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@pytest.mark.skipif(not USING_NUMBA, reason="numba not active")
def test_fallback_matches_compiled():
    jit, pure = _probe(False), _probe(True)
    assert jit["numba"] and not pure["numba"]
    for key in ("a", "q", "m"):
        np.testing.assert_allclose(np.array(pure[key]), np.array(jit[key]), rtol=1e-12, atol=1e-14)


def test_py_func_unwraps():
    f = py_func(kernels._pend_rhs)
    assert f(0.0, 0.3, 1.0, 2.0, 0.0, 1.0, 0.1, 0.0) == pytest.approx((1.0, -0.1 - 2.0 * np.sin(0.6)))


def test_kernel_status_codes():
    # a zero step cap can never advance: reported, not raised inside the kernel
    a, b, status = kernels.pendulum_dp5(0.0, 1.0, 1.0, 0.0, 0.0, 0.1, 0.0, 0.0, np.array([1.0]), 1e-300, 1e-10,
                                        1e-12)
    assert status != kernels.OK
