"""Independent scripted evaluation of the limit-law coefficients and
density, written before and kept separate from the package: plain
transliteration of the defining formulas, float arithmetic, no shared
code.  Trusted as the oracle in tests; keep it dumb."""

import math


def coefficients(levels, drift, sigma2):
    """Return (beta, xi, c, d) for per-level thresholds/drift/variance.

    beta[i] = 2 drift[i] / sigma2[i]
    xi[0] = 1, xi[j] = prod_{i<=j} exp(beta_i * (l_i - l_{i-1}))
    c[i]  = (1 - exp(beta_i w_i)) / drift_i * xi[i-1]   (drift != 0)
            -2 w_i / sigma2_i * xi[i-1]                 (drift == 0)
    c[K]  = xi[K-1] / drift[K]
    d[i]  = c[i] / sum(c)
    """
    k = len(drift)
    ell = [0.0] + list(levels)
    beta = [2.0 * drift[i] / sigma2[i] for i in range(k)]
    xi = [1.0]
    for j in range(1, k):
        xi.append(xi[j - 1] * math.exp(beta[j - 1] * (ell[j] - ell[j - 1])))
    c = []
    for i in range(k - 1):
        w = ell[i + 1] - ell[i]
        if drift[i] == 0.0:
            c.append(2.0 / sigma2[i] * (-w) * xi[i])
        else:
            c.append((1.0 - math.exp(beta[i] * w)) / drift[i] * xi[i])
    c.append(xi[k - 1] / drift[k - 1])
    total = sum(c)
    d = [ci / total for ci in c]
    return beta, xi, c, d


def density(levels, drift, sigma2, x):
    """Mixture density at a point, by cases."""
    k = len(drift)
    ell = [0.0] + list(levels)
    beta, xi, c, d = coefficients(levels, drift, sigma2)
    if x < 0.0:
        return 0.0
    i = k - 1
    for j in range(k - 1):
        if x <= ell[j + 1]:
            i = j
            break
    if i == k - 1:
        return d[i] * (-beta[i]) * math.exp(beta[i] * (x - ell[i]))
    w = ell[i + 1] - ell[i]
    if drift[i] == 0.0:
        return d[i] / w
    return d[i] * beta[i] * math.exp(beta[i] * (x - ell[i])) / (math.exp(beta[i] * w) - 1.0)


def cdf(levels, drift, sigma2, x):
    """Mixture CDF at a point, by cases."""
    k = len(drift)
    ell = [0.0] + list(levels)
    beta, xi, c, d = coefficients(levels, drift, sigma2)
    if x < 0.0:
        return 0.0
    total = 0.0
    for i in range(k):
        lo = ell[i]
        hi = ell[i + 1] if i < k - 1 else math.inf
        if x > hi:
            total += d[i]
            continue
        if i == k - 1:
            total += d[i] * (1.0 - math.exp(beta[i] * (x - lo)))
        elif drift[i] == 0.0:
            total += d[i] * (x - lo) / (hi - lo)
        else:
            total += d[i] * (math.exp(beta[i] * (x - lo)) - 1.0) / (
                math.exp(beta[i] * (hi - lo)) - 1.0
            )
        return total
    return total


# Hand-checked benchmark values (unit-rate clocks, both variances 1):
#   E1: threshold 1, drift (0, -1), variance (2, 2)
#       -> beta (0, -1), xi_1 = 1, c = (-1, -1), d = (1/2, 1/2)
#          h = 1/2 on [0, 1], (1/2) e^{-(x-1)} above
#   E2: drift (1, -1) -> beta (1, -1), xi_1 = e, c = (1 - e, -e),
#       d_1 = (e - 1) / (2e - 1)
E1 = {"levels": [1.0], "drift": [0.0, -1.0], "sigma2": [2.0, 2.0]}
E2 = {"levels": [1.0], "drift": [1.0, -1.0], "sigma2": [2.0, 2.0]}
