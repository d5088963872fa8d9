"""Planar spike-vortex state: projected Newton from the polygon ansatz.

Solves the coupled system at small beta > 0 with the soft ring-translation
mode projected out, then checks the winding and the correction sizes.
"""

import numpy as np

from spikevortex.planar import (
    build_ansatz,
    correction_norms,
    newton_planar,
    sector_mesh_for,
    winding_number,
)
from spikevortex.profiles import solve_spike
from spikevortex.reduction import find_root

OUT = __file__.replace("05_planar_state.py", "output")


def main():
    beta, k, d = 1e-4, 2, 1
    l_beta, _ = find_root(beta, k, d)
    print(f"reduced-force root: l_beta = {l_beta:.4f}")

    spike = solve_spike()
    mesh = sector_mesh_for(l_beta, k, m_theta=96, h_core=0.06)
    ans = build_ansatz(l_beta, k, d, mesh=mesh, spike=spike)
    info = {}
    field = newton_planar(ans, beta, info=info)
    du, psi_star = correction_norms(field, ans)
    print(f"Newton: {info['steps']} steps, residual {info['residual']:.2e}, "
          f"multiplier c = {info['multiplier']:+.2e}")
    print(f"winding on r = 2 : {winding_number(field):.1f}")
    print(f"corrections      : max|u - u_l| = {du:.3e}, |psi|_* = {psi_star:.3e}")
    print(f"theory scale     : beta l^(2+alpha) = {beta * l_beta**2.25:.3e}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        import os

        os.makedirs(OUT, exist_ok=True)
        # assemble the full disk from the sector copies
        r = mesh.radial.nodes
        pieces_u, pieces_v, thetas = [], [], []
        phase = np.exp(1j * d * 2 * np.pi / k)
        v = field.v
        for j in range(k):
            pieces_u.append(field.u)
            pieces_v.append(np.abs(v))
            thetas.append(mesh.thetas + j * 2 * np.pi / k)
        th = np.concatenate(thetas)
        U = np.concatenate(pieces_u, axis=1)
        V = np.concatenate(pieces_v, axis=1)
        TH, RR = np.meshgrid(th, r)
        X, Y = RR * np.cos(TH), RR * np.sin(TH)
        fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
        for ax, Z, title in ((axes[0], U, "u"), (axes[1], V, "|v|")):
            pc = ax.contourf(X, Y, Z, levels=40)
            ax.set_aspect("equal")
            ax.set_title(title)
            ax.set_xlim(-l_beta - 6, l_beta + 6)
            ax.set_ylim(-l_beta - 6, l_beta + 6)
            fig.colorbar(pc, ax=ax)
        fig.tight_layout()
        fig.savefig(f"{OUT}/planar_state.png", dpi=120)
        print(f"figure written to {OUT}/planar_state.png")
    except ImportError:
        print("matplotlib not available; skipped the figure")


if __name__ == "__main__":
    main()
