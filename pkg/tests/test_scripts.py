import subprocess
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


@pytest.mark.parametrize("name, args, expect", [
    ("string_convergence.py", ["--meshes", "16,32", "--H", "32"], "fitted order"),
    ("kepler_compare.py", ["--K-eta", "20"], "Laplace limit"),
    ("tree_identity.py", ["--trials", "2", "--kmax", "4"], "0 mismatches"),
    ("lindstedt_residual.py", ["--system", "pendulum1d", "--K", "3", "--dps", "0"], "decay envelope"),
])
def test_script_runs(name, args, expect):
    out = subprocess.run([sys.executable, str(SCRIPTS / name), *args], capture_output=True, text=True, timeout=300)
    assert out.returncode == 0, out.stderr
    assert expect in out.stdout
