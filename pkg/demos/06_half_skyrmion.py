"""Half-integer topological charge of the spike-vortex states.

Builds the unit-sphere map from (v1, v2, u) and computes the charge both by
the radial boundary-term shortcut and by 2D quadrature of the pullback area
form; both land on d/2.
"""

import numpy as np

from spikevortex.charge import build_nmap, charge_2d, charge_radial
from spikevortex.radial import newton_radial

OUT = __file__.replace("06_half_skyrmion.py", "output")


def main():
    for d in (1, 2):
        st = newton_radial(-0.5, d, 40.0)
        rr = charge_radial(st)
        r2 = charge_2d(st)
        print(f"d={d}: Q_radial = {rr.Q:.6f} (deficit {rr.quadrature_error:.1e}); "
              f"Q_2d = {r2.Q:.6f} (error est {r2.quadrature_error:.1e})")

    st = newton_radial(-0.5, 1, 40.0)
    field, n = build_nmap(st)
    print(f"unit-norm defect of the sphere map: {np.abs((n**2).sum(axis=0)-1).max():.1e}")
    print(f"n at the origin: ({n[0][0,0]:.3f}, {n[1][0,0]:.3f}, {n[2][0,0]:.3f})")
    print(f"n at the rim   : ({n[0][-1,0]:.3f}, {n[1][-1,0]:.3f}, {n[2][-1,0]:.3f})")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        import os

        os.makedirs(OUT, exist_ok=True)
        r = st.mesh.nodes
        from spikevortex.charge import sin_phi

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(r, sin_phi(st), label="n3 = sin(phi)")
        ax.plot(r, np.sqrt(1 - sin_phi(st) ** 2), label="|n12| = cos(phi)")
        ax.set_xlim(0, 15)
        ax.set_xlabel("r")
        ax.legend()
        fig.tight_layout()
        fig.savefig(f"{OUT}/half_skyrmion.png", dpi=120)
        print(f"figure written to {OUT}/half_skyrmion.png")
    except ImportError:
        print("matplotlib not available; skipped the figure")


if __name__ == "__main__":
    main()
