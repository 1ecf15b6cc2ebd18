"""Independent reference computations used only by the tests."""

import itertools

import numpy as np
from scipy import integrate


def direct_dft(vals, nodes, ks, dv):
    """(2 pi)^{-d/2} sum_j u_j exp(-i k.x_j) dV by explicit double loop over nodes."""
    d = vals.ndim
    out = np.zeros(vals.shape, dtype=complex)
    idx = list(itertools.product(range(len(nodes)), repeat=d))
    for m in idx:
        kvec = np.array([ks[i] for i in m])
        acc = 0j
        for j in idx:
            xvec = np.array([nodes[i] for i in j])
            acc += vals[j] * np.exp(-1j * kvec @ xvec)
        out[m] = acc * dv / (2 * np.pi) ** (d / 2)
    return out


def direct_idft(coef, nodes, ks, dk):
    d = coef.ndim
    out = np.zeros(coef.shape, dtype=complex)
    idx = list(itertools.product(range(len(nodes)), repeat=d))
    for j in idx:
        xvec = np.array([nodes[i] for i in j])
        acc = 0j
        for m in idx:
            kvec = np.array([ks[i] for i in m])
            acc += coef[m] * np.exp(1j * kvec @ xvec)
        out[j] = acc * dk / (2 * np.pi) ** (d / 2)
    return out


def kernel_integral_1d(u, x, t, lo=-12.0, hi=12.0):
    """(4 pi i t)^{-1/2} int exp(i (x-y)^2 / 4t) u(y) dy by adaptive quadrature."""
    pref = (4j * np.pi * t) ** -0.5

    def part(f):
        return integrate.quad(f, lo, hi, limit=2000, epsabs=1e-14, epsrel=1e-13)[0]

    re = part(lambda y: (np.exp(1j * (x - y) ** 2 / (4 * t)) * u(y)).real)
    im = part(lambda y: (np.exp(1j * (x - y) ** 2 / (4 * t)) * u(y)).imag)
    return pref * (re + 1j * im)
