"""
Writing a result bundle
=======================

A water sweep written to disk: traces, steady-state tables, theory, metadata
and a gnuplot script. The metadata alone is enough to rerun it.
"""

import filecmp
from pathlib import Path

from uvlc_diffusion.experiments import BUILTIN, load_spec, run_experiment

spec = BUILTIN["fig7"].replace(ensemble=40, theory=True)
out = Path("bundle_fig7")
run_experiment(spec, out)
for p in sorted(out.iterdir()):
    print(p.name)
print((out / "summary.csv").read_text())

# rerun from the recorded metadata and compare byte for byte
run_experiment(load_spec(out / "meta.json"), Path("bundle_fig7_rerun"))
same = filecmp.cmpfiles(out, "bundle_fig7_rerun", ["summary.csv", "steady_state.csv", "theory.json"], shallow=False)
print("identical:", same[0])
