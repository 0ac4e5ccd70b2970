"""The numba kernels and the pure-numpy fallback must give identical results."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from kernel_r2 import NUMBA_ENABLED

SCRIPT = """
import json
import numpy as np
from kernel_r2 import NUMBA_ENABLED, estimate
from kernel_r2.neighbours import neighbour_table
from kernel_r2.simgen import gen_heteroscedastic, gen_so3
s = gen_heteroscedastic(150, 0.25, 11)
r = gen_so3(80, 0.5, 2)
grid = np.repeat(np.arange(15.0), 4)
print(json.dumps({
    "numba": NUMBA_ENABLED,
    "knn": estimate(s, "knn", seed=3).numerators.tolist(),
    "so3": estimate(r, "knn", seed=1).d_hat,
    "eta": estimate(s, "eta-knn").d_hat,
    "table": neighbour_table(grid, 6, seed=9).indices.tolist(),
}))
"""


def run_with(disable):
    env = dict(os.environ)
    env.pop("KERNEL_R2_DISABLE_NUMBA", None)
    if disable:
        env["KERNEL_R2_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


@pytest.mark.slow
def test_numba_and_numpy_paths_agree():
    fast, slow = run_with(False), run_with(True)
    assert fast["numba"] is True and slow["numba"] is False
    np.testing.assert_allclose(fast["knn"], slow["knn"], rtol=0, atol=1e-12)
    assert fast["so3"] == pytest.approx(slow["so3"], abs=1e-12)
    assert fast["eta"] == pytest.approx(slow["eta"], abs=1e-12)
    assert fast["table"] == slow["table"]


def test_flag_read_in_process():
    flag = os.environ.get("KERNEL_R2_DISABLE_NUMBA", "").strip().lower()
    assert NUMBA_ENABLED == (flag not in {"1", "true", "yes"})
