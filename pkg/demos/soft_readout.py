"""Hard versus soft-information MWPM with noisy analog ancilla readout.

Ancilla assignment error 1% and data assignment error 0.1% on top of
depolarizing noise.  Soft MWPM reweights measurement edges per shot from the
posterior of each analog outcome, so confident readouts make time edges
expensive and ambiguous ones cheap.

    python demos/soft_readout.py [shots]
"""

import sys

from qmemlab import analysis
from qmemlab.noise import NoiseParams, SoftReadoutParams
from qmemlab.studies import memory_curve, mwpm_decoder, soft_mwpm_decoder

shots = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
params = NoiseParams(1e-3, soft=SoftReadoutParams.from_error_rates(0.01, 0.001))
print(f"readout sigma: ancilla {params.soft.sigma_ancilla:.3f}, data {params.soft.sigma_data:.3f}")

curves = memory_curve(
    3, [10, 30, 50, 70], params, shots, seed=5, decoders={"hard": mwpm_decoder, "soft": soft_mwpm_decoder}, soft=True
)
fits = {k: analysis.fit_fidelity(v) for k, v in curves.items()}
for k, f in fits.items():
    print(f"{k:5s} MWPM: eps_L = {f.eps:.3e} +- {f.eps_err:.1e}")
print(f"relative reduction {1 - fits['soft'].eps / fits['hard'].eps:+.1%}")
