"""Walkthrough: sizing slices at one O-RU, then dividing a slice among clients.

Run with ``python3 notebooks/02_slicing_and_scheduling.py``.
"""

import numpy as np

from oranfl.controller import compute_load, slice_split, split_objective
from oranfl.mac import Status, UploadState, apply_allocation, schedule

B = 1.5e6

# Two services share one O-RU. Service 1 has three clients with 1 Mbit left,
# service 2 one client with 1.6 Mbit left.
assignment = np.zeros(4, dtype=int)
service_of = np.array([0, 0, 0, 1])
remaining = np.array([1e6, 1e6, 1e6, 1.6e6])
se = np.array([[6.0], [4.0], [2.0], [5.0]])
K = compute_load(assignment, service_of, remaining, np.ones(4, bool), se, np.array([B]), 2)
print("load K (s):", K.round(4).tolist())

# The split grows like sqrt(a * K): a heavier weight buys a bigger share.
for a2 in (10, 30, 100, 300):
    f = slice_split([30, a2], K[0], f_min=0.05)
    print(f"a2={a2:3d}: fractions {f.round(3).tolist()}, "
          f"objective {split_objective([30, a2], K[0], f):.3g}")

# Inside service 1's slice, the MAC serves the best channel first with just
# enough bandwidth to meet the deadline; the rest is shared equally.
W = slice_split([30, 100], K[0], 0.05)[0] * B
uploads = [UploadState(c, 1e6, 0.0, deadline_t=12.0) for c in range(3)]
se_now = {0: 6.0, 1: 4.0, 2: 2.0}
alloc = schedule(uploads, W, se_now, now=0.0)
print(f"\nslice of {W:.4g} Hz ->", {c: round(v) for c, v in alloc.items()})

t = 0.0
while any(u.status == Status.UPLOADING for u in uploads):
    alloc = schedule(uploads, W, se_now, now=t)
    uploads = apply_allocation(uploads, alloc, se_now, now=t, dt=0.01)
    t += 0.01
print("after upload:", [(u.client_id, u.status.value) for u in uploads], f"at t={t:.2f} s")
