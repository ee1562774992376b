import runpy

from conftest import ROOT


def test_benchmark_script_runs(capsys):
    bench = runpy.run_path(str(ROOT / "benchmarks" / "bench_kernels.py"))
    bench["main"](["--n", "16", "--repeat", "2"])
    out = capsys.readouterr().out
    for name in ("gc_sup", "lg_unsup", "disc_unsup"):
        assert name in out
