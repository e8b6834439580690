"""Run the long statistical studies behind the acceptance suite.

Usage: python scripts/reproduce.py STUDY [--out results]

Studies (run in this order; later ones reuse the trained d=3 model):
  train     generate 5.6e6 d=3 shots at p=0.1% and train the decoder (hours)
  lambda    MWPM at d=3,5,7 and the suppression factor
  nn-eval   NN vs MWPM at d=3 for r=10..290
  bias      NN vs MWPM on Y-biased noise, eta in {0,1,100}
  soft-train  fine-tune hard-input and soft-input decoders on analog-readout data
  soft-eval   soft vs hard MWPM and soft vs hard NN
  smoke     d=5 and d=7 NN pipeline at 1e3-shot scale
"""

import argparse
import logging
import sys

from qmemlab.studies import STUDIES

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s", stream=sys.stdout)

parser = argparse.ArgumentParser()
parser.add_argument("study", choices=sorted(STUDIES))
parser.add_argument("--out", default="results")
args = parser.parse_args()
STUDIES[args.study](args.out)
