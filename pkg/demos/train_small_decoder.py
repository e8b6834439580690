"""Train a small LSTM decoder for d=3 and compare it with MWPM.

Minutes-scale: 2e5 training shots and a fixed number of mini-epochs.  The
full study (scripts/reproduce.py train) uses 5.6e6 shots and hours of
training; at this size the network is usually slightly behind MWPM.

    python demos/train_small_decoder.py
"""

import numpy as np

from qmemlab import analysis, nn
from qmemlab.noise import NoiseParams
from qmemlab.studies import generate_dataset, memory_curve, mwpm_decoder, nn_decoder, rounds_pattern

params = NoiseParams(3e-3)
data, _ = generate_dataset(3, rounds_pattern(1, 21, 4), params, shots_per_point=16_000, seed=2)
train, val = data.split(0.1, np.random.default_rng(0))
cfg = nn.TrainConfig(learning_rate=1e-3, batch_size=256, dropout=0.2, max_epochs=15, patience=5, seed=3)
model, hist = nn.train(train, val, cfg, hidden=32)
for row in hist.rows:
    print(f"epoch {row['epoch']:2d}  train {row['train_loss']:.4f}  val {row['val_loss']:.4f}")

curves = memory_curve(3, [10, 20, 40], params, 20_000, seed=9, decoders={"mwpm": mwpm_decoder, "nn": nn_decoder(model)})
for name, pts in curves.items():
    fit = analysis.fit_fidelity(pts)
    print(f"{name:4s}: eps_L = {fit.eps:.3e} +- {fit.eps_err:.1e}")
