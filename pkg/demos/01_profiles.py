"""The two scalar building blocks: the spike and the vortex amplitude.

Solves both profiles, prints the printed-asymptotics checks, and saves a
figure of the profiles and the tail fit.
"""

import numpy as np

from spikevortex.profiles import fit_decay, solve_spike, solve_vortex

OUT = __file__.replace("01_profiles.py", "output")


def main():
    w = solve_spike()
    a0, rate = fit_decay(w, (10.0, 15.0))
    print(f"spike height w(0)        : {w.values[0]:.6f}")
    print(f"decay fit over [10, 15]  : A0 = {a0:.4f}, rate = {rate:.6f} (theory: -1)")

    vortices = {d: solve_vortex(d) for d in (1, 2, 3)}
    for d, s in vortices.items():
        ev = s.interpolator()
        coeff = 30.0**2 * (1.0 - float(ev(30.0)))
        print(f"vortex d={d}: r^2 (1 - S) at r=30 = {coeff:.4f}   (theory: {d*d/2})")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        import os

        os.makedirs(OUT, exist_ok=True)
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        ax1.plot(w.mesh.nodes, w.values, label="spike w")
        for d, s in vortices.items():
            ax1.plot(s.mesh.nodes, s.values, label=f"S_{d}")
        ax1.set_xlim(0, 15)
        ax1.set_xlabel("r")
        ax1.legend()
        sel = (w.mesh.nodes > 5) & (w.mesh.nodes < 18)
        r = w.mesh.nodes[sel]
        ax2.semilogy(r, w.values[sel], label="w(r)")
        ax2.semilogy(r, a0 * r**-0.5 * np.exp(-r), "--", label="A0 r^{-1/2} e^{-r}")
        ax2.set_xlabel("r")
        ax2.legend()
        fig.tight_layout()
        fig.savefig(f"{OUT}/profiles.png", dpi=120)
        print(f"figure written to {OUT}/profiles.png")
    except ImportError:
        print("matplotlib not available; skipped the figure")


if __name__ == "__main__":
    main()
