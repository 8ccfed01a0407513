"""Independent reference computations used as test oracles.

Written without importing the package: SI constants are typed in from the
CODATA 2022 recommended set, loops are explicit, and nothing is vectorised.
"""

import math

# CODATA 2022 (exact where the SI defines them)
H = 6.62607015e-34  # J s
E = 1.602176634e-19  # C
C = 299792458.0  # m/s
HBAR = H / (2.0 * math.pi)
AMU = 1.66053906892e-27  # kg
EPS0 = 8.8541878188e-12  # F/m
M_E = 9.1093837139e-31  # kg
ANGSTROM = 1e-10
DEBYE = 1e-21 / C  # C m


def hr_factor(hbar_omega_mev, q_amu_angstrom):
    """s = omega q^2 / (2 hbar) with omega from meV and q from amu^1/2 A, all in SI."""
    omega = hbar_omega_mev * 1e-3 * E / HBAR
    q = q_amu_angstrom * math.sqrt(AMU) * ANGSTROM
    return omega * q * q / (2.0 * HBAR)


def radiative_rate(zpl_ev, mu_coulomb_m, n_d):
    """Spontaneous emission rate in 1/s for a dipole given in C m."""
    e0 = zpl_ev * E
    return n_d * e0**3 * mu_coulomb_m**2 / (3.0 * math.pi * EPS0 * HBAR**4 * C**3)


def eA_to_coulomb_m(mu_ea):
    return mu_ea * E * ANGSTROM


def wavelength_nm(zpl_ev):
    return H * C / (zpl_ev * E) * 1e9


def poisson(s, n):
    return math.exp(-s) * s**n / math.factorial(n)


def momentum_sum(kpoint, g_f, c_f, g_i, c_i):
    """sum over shared G of conj(c_f) (k + G) c_i, matching G by exact tuple equality."""
    lookup = {}
    for g, c in zip(g_f, c_f):
        lookup[tuple(float(x) for x in g)] = complex(c)
    total = [0j, 0j, 0j]
    for g, c in zip(g_i, c_i):
        key = tuple(float(x) for x in g)
        if key not in lookup:
            continue
        w = lookup[key].conjugate() * complex(c)
        for a in range(3):
            total[a] += w * (float(kpoint[a]) + key[a])
    return total


def stable_scan(intercepts, gap, step=1e-3):
    """Brute-force lowest formation line on a dense Fermi grid.

    ``intercepts`` maps charge -> formation energy at the VBM. Returns the grid,
    the stable charge at each point and the midpoints where the winner changes.
    """
    n = int(round(gap / step))
    grid = [i * step for i in range(n + 1)]
    winners = []
    for x in grid:
        best_q, best_e = None, None
        for q, a in intercepts.items():
            e = a + q * x
            if best_e is None or e < best_e:
                best_q, best_e = q, e
        winners.append(best_q)
    changes = []
    for i in range(1, len(grid)):
        if winners[i] != winners[i - 1]:
            changes.append((winners[i - 1], winners[i], 0.5 * (grid[i] + grid[i - 1])))
    return grid, winners, changes
