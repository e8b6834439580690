"""Logical error rate versus code distance and the fitted suppression factor.

Small-shot version of the d=3,5,7 MWPM study; expect a few minutes on one core.

    python demos/suppression_factor.py [p] [shots]
"""

import sys

from qmemlab import analysis
from qmemlab.noise import NoiseParams
from qmemlab.studies import memory_curve, mwpm_decoder

p = float(sys.argv[1]) if len(sys.argv) > 1 else 1e-3
shots = int(sys.argv[2]) if len(sys.argv) > 2 else 20_000

pairs = []
for d in (3, 5, 7):
    pts = memory_curve(d, [5, 20, 40, 80], NoiseParams(p), shots, seed=d, decoders={"mwpm": mwpm_decoder})["mwpm"]
    fit = analysis.fit_fidelity(pts)
    pairs.append((d, fit.eps, fit.eps_err))
    print(f"d={d}: eps_L = {fit.eps:.3e} +- {fit.eps_err:.1e}")

lam = analysis.fit_lambda(pairs)
print(f"Lambda = {lam.lam:.2f} +- {lam.lam_err:.2f} (95% lower bound {lam.lower_bound():.2f})")
