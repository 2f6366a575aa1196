"""Verify the hand-written autodiff engine against central differences.

Every trainable parameter of a small LSTM head and a small transformer head
is perturbed by +/- h and the finite-difference slope is compared against the
gradient produced by the reverse-mode tape.  Run with:

    python3 demos/01_gradcheck.py
"""

import numpy as np

from vidembed import tensor as tn
from vidembed.data import l2_normalize, stream_rng
from vidembed.heads import HeadSpec, head_forward, init_params
from vidembed.optim import grad_check
from vidembed.tensor import Tensor

rng = stream_rng(0, "demo-gradcheck")
frames = l2_normalize(rng.standard_normal((4, 6)))

for spec in (
    HeadSpec(kind="lstm", d_in=6),
    HeadSpec(kind="transformer", d_in=6, layers=1, heads=2),
):
    # 64-bit parameters: finite differences need the head-room
    params = init_params(spec, seed=0, dtype=np.float64)

    def loss_fn(p):
        emb = head_forward(Tensor(frames), params)
        return tn.softmax_cross_entropy(tn.scale(emb, 10.0), 0)

    report = grad_check(loss_fn, params.tensors)
    print(f"--- {spec.kind} head ---")
    print(report)
    print()
