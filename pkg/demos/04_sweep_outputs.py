"""A small sweep through the harness, writing CSV, NPZ and SVG figures."""
import sys

from linattack import bench
from linattack.bench import ExperimentSpec

out = sys.argv[1] if len(sys.argv) > 1 else "results_demo"
spec = ExperimentSpec(attack="rankone", index=3, etas=[0.3, 0.6, 0.9], eta_as_fraction=True, seeds=[0, 1])
rows, paths = bench.run(spec, out_dir=out)
for r in rows:
    print(f"eta {r.eta:.4f}  objective {r.objective:.5f}")
for key, p in sorted(paths.items()):
    print(f"{key:>12}: {p}")
