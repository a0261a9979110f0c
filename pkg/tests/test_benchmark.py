import runpy
from pathlib import Path

import pytest

from hierprox import _kernels

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
def test_benchmark_script_runs(capsys):
    mod = runpy.run_path(str(BENCH))
    mod["main"](["--iters", "200", "--problems", "nested3"])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[0] == "problem" and lines[1].split()[:3] == ["nested3", "3", "200"]
    assert float(lines[1].split()[-1]) <= 1e-12
