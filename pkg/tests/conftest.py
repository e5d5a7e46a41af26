"""Shared brute-force oracles for the sampler test suites.

The enumeration helper scores every latent configuration of a small
stream directly from the per-step factor definitions (straight-line
products, no recursion shared with the library) so sampled marginals can
be checked against exact ones.
"""

from itertools import product

import numpy as np

from immc.model import ModelParams


def toy_params() -> ModelParams:
    """Hand-set two-state, three-code (two symbols + boundary) parameters."""
    beta = np.array([0.6, 0.4])
    pi = np.array([[0.7, 0.3], [0.2, 0.8]])
    psi = np.full((2, 3), 1.0 / 3.0)
    theta = np.array(
        [
            [[0.5, 0.3, 0.2], [0.4, 0.4, 0.2], [0.55, 0.35, 0.1]],
            [[0.1, 0.6, 0.3], [0.25, 0.25, 0.5], [0.3, 0.6, 0.1]],
        ]
    )
    return ModelParams(beta=beta, pi=pi, psi=psi, theta=theta)


def enumerate_latent_marginals(codes, params):
    """Exact per-position super-state marginals and change probabilities.

    Enumerates every (z, omega) assignment over positions 1..n-1, scoring
    each with the product of per-step factors: sequence entries pay the
    global weight times the entry emission, observed exits pay the exit
    cell, within-segment steps pay the sub-transition, and segment changes
    pay the super-state transition with the implied exit and entry.
    Assignments violating a forced rule score zero.  Returns
    (z_marginals, omega_means) with position 0 mirroring position 1.
    """
    codes = np.asarray(codes)
    n = codes.size
    L = params.L
    B = params.boundary
    beta, pi, theta = params.beta, params.pi, params.theta

    z_mass = np.zeros((n, L))
    w_mass = np.zeros(n)
    total = 0.0
    steps = range(1, n)
    for zs in product(range(L), repeat=n - 1):
        for ws in product((0, 1), repeat=n - 1):
            weight = 1.0
            for t in steps:
                z_t = zs[t - 1]
                w_t = ws[t - 1]
                p_t = codes[t - 1] if t >= 1 else B
                y_t = codes[t]
                z_prev = zs[t - 2] if t >= 2 else None
                if y_t == B:
                    if w_t != 0 or z_t != z_prev:
                        weight = 0.0
                        break
                    weight *= theta[z_t, p_t, B]
                elif p_t == B:
                    if w_t != 1:
                        weight = 0.0
                        break
                    weight *= beta[z_t] * theta[z_t, B, y_t]
                elif w_t == 0:
                    if z_t != z_prev:
                        weight = 0.0
                        break
                    weight *= theta[z_t, p_t, y_t]
                else:
                    weight *= pi[z_prev, z_t] * theta[z_prev, p_t, B] * theta[z_t, B, y_t]
            if weight > 0.0:
                total += weight
                for t in steps:
                    z_mass[t, zs[t - 1]] += weight
                    w_mass[t] += weight * ws[t - 1]
    z_mass /= total
    w_mass /= total
    z_mass[0] = z_mass[1]
    w_mass[0] = 0.0
    return z_mass, w_mass
