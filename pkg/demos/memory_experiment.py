"""d=3 memory experiment under circuit-level depolarizing noise, decoded with MWPM.

Samples both prepared states at a handful of round counts, prints the
state-averaged logical fidelity and fits the per-round logical error rate.

    python demos/memory_experiment.py [p] [shots]
"""

import sys

from qmemlab import analysis
from qmemlab.noise import NoiseParams
from qmemlab.studies import memory_curve, mwpm_decoder

p = float(sys.argv[1]) if len(sys.argv) > 1 else 2e-3
shots = int(sys.argv[2]) if len(sys.argv) > 2 else 20_000
rounds = [3, 10, 20, 40, 60]

curves = memory_curve(3, rounds, NoiseParams(p), shots, seed=1, decoders={"mwpm": mwpm_decoder})
pts = curves["mwpm"]
print(f"p = {p:g}, {shots} shots per round count")
print("   r     F_L      err")
for pt in pts:
    print(f"{pt.rounds:4d}  {pt.fidelity:.4f}  {pt.err:.4f}")

fit = analysis.fit_fidelity(pts)
lo, hi = fit.interval()
print(f"eps_L = {fit.eps:.3e} per round (95% [{lo:.3e}, {hi:.3e}]), r0 = {fit.r0:.2f}")
