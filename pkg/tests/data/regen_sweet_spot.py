"""Regenerate sweet_spot_L8.json from the dense Kronecker oracle.

Run from the tests directory: python data/regen_sweet_spot.py
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
from oracle import dense_features, dense_hamiltonian  # noqa: E402

L = 8
h = dense_hamiltonian(t=1.0, delta_pair=1.0, u=0.0, delta_nh=0.0, eta=0.0, L=L)
w, v = np.linalg.eigh(h)
chi = float(np.exp(-200 * np.abs(w[:16] - w[0])).sum())
states = v[:, :2].T
window = [3, 4, 5, 6]
feats = dense_features(states, L, window)
out = {"L": L, "chi": chi, "window": window}
out.update({k: np.round(a, 14).tolist() for k, a in feats.items()})
Path(__file__).with_name("sweet_spot_L8.json").write_text(json.dumps(out, indent=1) + "\n")
