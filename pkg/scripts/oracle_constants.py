#!/usr/bin/env python3
"""Recompute the brute-force oracle constants frozen in the test suite.

Everything here is deliberately independent of the library quadrature:
plain dense trapezoid grids, so the numbers can be used as regression
targets for the Gauss-Hermite paths.

Usage:
    python scripts/oracle_constants.py
"""

import math

import numpy as np


def bargmann_gram_diagonal(k_max=10, hbar=1.0, half_width=12.0, nodes=4001):
    """G_kk = integral of |z|^{2k} exp(-(x^2+p^2)/(2 hbar)) over the plane,
    by 2-D trapezoid on [-half_width, half_width]^2."""
    x = np.linspace(-half_width, half_width, nodes)
    rows = np.empty(nodes)
    out = []
    for k in range(k_max + 1):
        for i in range(0, nodes, 500):
            xs = x[i:i + 500, None]
            r2 = xs ** 2 + x[None, :] ** 2
            vals = r2 ** k * np.exp(-r2 / (2.0 * hbar))
            rows[i:i + 500] = np.trapezoid(vals, x, axis=1)
        out.append(float(np.trapezoid(rows, x)))
    return out


def halfform_gaussian_norm(nodes=2_000_001, half_width=10.0):
    """<a, a> for a = pi^{-1/4} e^{-x^2/2} sqrt(dx), by 1-D trapezoid."""
    xs = np.linspace(-half_width, half_width, nodes)
    return float(np.trapezoid(np.exp(-xs ** 2) / math.sqrt(math.pi), xs))


def hermite_ladder_entry(nodes=4001, half_width=10.0):
    """<h_0, x h_1> for the first two normalized oscillator eigenfunctions;
    the three-term recurrence predicts sqrt(1/2)."""
    xs = np.linspace(-half_width, half_width, nodes)
    h0 = math.pi ** -0.25 * np.exp(-xs ** 2 / 2)
    h1 = math.pi ** -0.25 * math.sqrt(2.0) * xs * np.exp(-xs ** 2 / 2)
    return float(np.trapezoid(h0 * xs * h1, xs))


def main():
    diag = bargmann_gram_diagonal()
    print("# Bargmann Gram diagonal, hbar = 1 (trapezoid oracle vs pi k! 2^{k+1})")
    for k, g in enumerate(diag):
        closed = math.pi * math.factorial(k) * 2.0 ** (k + 1)
        print(f"G_{k}{k} = {g!r}   closed = {closed!r}   rel diff = {abs(g - closed) / closed:.2e}")
    print()
    print(f"frozen regression constant G_00 = {diag[0]!r}")
    print(f"monotone increasing: {all(b > a for a, b in zip(diag, diag[1:]))}")
    print()
    print(f"half-form Gaussian norm  = {halfform_gaussian_norm()!r}  (target 1)")
    print(f"Hermite ladder <0|x|1>   = {hermite_ladder_entry()!r}  (target sqrt(1/2) = {math.sqrt(0.5)!r})")


if __name__ == "__main__":
    main()
