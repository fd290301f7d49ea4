"""Transfer a contact patch between two planar grids of different density.

Charts both surfaces with the heat-method log map, carries a square ring
of contacts from the coarse grid to the fine one, and reports how far
each landed match sits from its ideal polar target.

Usage: python3 demos/transfer_walkthrough.py [output.json]
"""

import json
import sys

import numpy as np

from graspmap import ContactPatch, LogmapSolver, TransferSpec, transfer_patch
from graspmap.shapes import planar_grid


def center(n):
    return (n // 2) * n + n // 2


def square_ring(n, radius):
    ij = np.array([(i, j) for j in range(n) for i in range(n)])
    cheb = np.maximum(np.abs(ij[:, 0] - n // 2), np.abs(ij[:, 1] - n // 2))
    return np.nonzero(cheb == radius)[0]


def main():
    coarse = planar_grid(21, spacing=1.0)
    fine = planar_grid(41, spacing=0.5)
    patch = ContactPatch(coarse, center(21), square_ring(21, 4),
                         label="ring")

    # one factorization per surface, reusable for any number of roots
    chart_coarse = LogmapSolver(coarse).chart(center(21), [1.0, 0.0, 0.0])
    chart_fine = LogmapSolver(fine).chart(center(41), [1.0, 0.0, 0.0])

    spec = TransferSpec(center(21), center(41), [1.0, 0.0, 0.0],
                        [1.0, 0.0, 0.0])
    corr = transfer_patch(patch, spec, chart_coarse, chart_fine)

    print("transferred %d contacts (%d unreachable)"
          % (len(corr.pairs), int((~corr.reachable).sum())))
    print("residuals: max %.4f, mean %.4f (fine spacing is 0.5)"
          % (corr.residuals.max(), corr.residuals.mean()))
    for (a, b), res in list(zip(corr.pairs, corr.residuals))[:5]:
        print("  coarse %4d -> fine %4d  residual %.4f" % (a, b, res))

    out = sys.argv[1] if len(sys.argv) > 1 else "correspondence.json"
    with open(out, "w") as fh:
        json.dump(corr.to_json_dict(), fh, indent=2)
    print("wrote", out)


if __name__ == "__main__":
    main()
