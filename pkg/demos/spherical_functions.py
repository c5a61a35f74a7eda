"""Print spherical functions on H^2, H^3 and H^4 next to the H^3 closed form."""
import numpy as np

from hyperharm import ModelParams, spherical_fn

t = np.linspace(0.0, 5.0, 11)
lam = 1.5
print("t      " + "  ".join(f"p={p:<12d}" for p in (2, 3, 4)) + "  closed form (p=3)")
rows = [spherical_fn(1j * lam, t, ModelParams(p)).real for p in (2, 3, 4)]
closed = np.where(t == 0, 1.0, np.sin(lam * t) / (lam * np.sinh(np.where(t == 0, 1.0, t))))
for i, ti in enumerate(t):
    print(f"{ti:4.1f}  " + "  ".join(f"{r[i]:+.10f}" for r in rows) + f"  {closed[i]:+.10f}")
