#!/usr/bin/env python3
"""Scan hbar and record the two quantized oscillator spectra side by side.

For each hbar the prequantum angular modes give the two-sided lattice
n*hbar (n in -K..K) while the Bargmann space gives the one-sided k*hbar
(k in 0..K); the CSV records the max deviation of each from its lattice.

Usage:
    python scripts/spectrum_scan.py --K 5 --hbar 0.25,0.5,1,2 --output scan.csv
"""

import argparse
import sys

import numpy as np

from geomquant.expr import PhaseSpace
from geomquant.polarize import bargmann_vs_prequant_crosscheck
from geomquant.prequant import prequantum_ho_spectrum


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=5)
    ap.add_argument("--hbar", default="0.25,0.5,1,2")
    ap.add_argument("--output", default=None)
    ns = ap.parse_args(argv)

    rows = ["hbar,prequantum_lattice_dev,bargmann_diag_dev,prequantum_min_eig"]
    for hb in (float(v) for v in ns.hbar.split(",")):
        space = PhaseSpace(1, hbar=hb)
        pairs = prequantum_ho_spectrum(ns.K, space)
        values = np.array([v for v, _ in pairs])
        lattice = hb * np.arange(-ns.K, ns.K + 1)
        pre_dev = float(np.max(np.abs(values - lattice)))
        barg_dev = bargmann_vs_prequant_crosscheck(min(ns.K, 20), hb)
        rows.append(f"{hb!r},{pre_dev!r},{barg_dev!r},{float(values.min())!r}")

    text = "\n".join(rows) + "\n"
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
