"""The reduced force and the polygon radius it selects.

Sweeps c(l) across the bracket around the balance radius and locates the
root; the balance equation predicts the radius up to an O(1) shift.
"""

import numpy as np

from spikevortex.profiles import solve_spike
from spikevortex.reduction import find_root, reduced_force, solve_lhat

OUT = __file__.replace("04_reduced_force.py", "output")


def main():
    beta, k, d = 1e-5, 2, 1
    lhat = solve_lhat(beta, k).lhat
    print(f"balance radius lhat({beta}, k={k}) = {lhat:.6f}")

    spike = solve_spike()
    ls = np.linspace(lhat - 2.0, lhat + 2.0, 17)
    cs = []
    for l in ls:
        rf = reduced_force(l, beta, k, d, spike=spike)
        cs.append(rf.c_of_l)
        print(f"  l = {l:6.3f}: I1 = {rf.I1:+.3e}  I2 = {rf.I2:+.3e}  c = {rf.c_of_l:+.3e}")

    l_root, rf_root = find_root(beta, k, d)
    print(f"root l_beta = {l_root:.6f}  (|l_beta - lhat| = {abs(l_root - lhat):.3f})")
    print("note: attraction gives I1 < 0 and the vortex barrier I2 > 0, so c")
    print("crosses from negative to positive; see the package notes on the")
    print("sign conventions of the source derivation.")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        import os

        os.makedirs(OUT, exist_ok=True)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(ls, cs, "o-")
        ax.axhline(0.0, color="k", lw=0.5)
        ax.axvline(l_root, color="r", ls="--", label=f"l_beta = {l_root:.3f}")
        ax.axvline(lhat, color="g", ls=":", label=f"lhat = {lhat:.3f}")
        ax.set_xlabel("l")
        ax.set_ylabel("c(l)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(f"{OUT}/reduced_force.png", dpi=120)
        print(f"figure written to {OUT}/reduced_force.png")
    except ImportError:
        print("matplotlib not available; skipped the figure")


if __name__ == "__main__":
    main()
