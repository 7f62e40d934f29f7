"""Imaging a binary presence series as Gramian Angular Fields.

A service's on/off pattern becomes rolling windows; each window is
rescaled to [-1, 1], read as angles psi = arccos(v), and rendered as the
summation field cos(psi_i + psi_j) and difference field sin(psi_i -
psi_j). The steps after the window give the multi-step class label.
"""

import numpy as np

from availcast import (
    decode_label,
    gadf,
    gasf,
    make_label,
    paa,
    perturb_zero_series,
    rescale_to_unit,
    roll_windows,
    to_polar,
)

series = np.array([0, 0, 1, 1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 1, 0, 0], dtype=np.uint8)
print(f"--- presence series ({len(series)} steps): {''.join(map(str, series))}")

windows = roll_windows(series, window_len=8, stride=2, horizon=3)
print(f"--- rolling windows (k=8, stride 2, 3 steps ahead): {len(windows)} windows")
for window, future in windows:
    label = make_label(future)
    print(f"  {''.join(str(int(v)) for v in window)} -> next {''.join(str(int(v)) for v in future)}"
          f"  class {label.class_index}")

window, future = windows[0]
unit = rescale_to_unit(perturb_zero_series(window))
psi, rho = to_polar(unit)
print("\n--- polar encoding of the first window")
print("  values :", " ".join(f"{v:5.2f}" for v in unit))
print("  psi    :", " ".join(f"{v:5.2f}" for v in psi))
print("  rho    :", " ".join(f"{v:5.2f}" for v in rho))

g, d = gasf(unit), gadf(unit)
print("\n--- summation field (symmetric, diagonal = 2v^2 - 1)")
for row in g:
    print("  " + " ".join(f"{v:5.2f}" for v in row))
print("--- difference field (antisymmetric, zero diagonal)")
for row in d:
    print("  " + " ".join(f"{v:5.2f}" for v in row))

print("\n--- piecewise aggregate approximation to length 4")
print("  paa:", paa(window.astype(float), 4))

print("\n--- the 8 classes for 3 steps ahead decode back to bit patterns")
print(" ", {c: "".join(map(str, decode_label(c, 3).bits)) for c in range(8)})
