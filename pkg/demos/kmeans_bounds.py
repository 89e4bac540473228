"""Compare the misclassification rate of k-means and the radius cover with
their deterministic upper bounds on a perturbed planted clustering.

Run with: python3 demos/kmeans_bounds.py
"""
import math

import numpy as np

from bispectral.kmeans import KMeansConfig, kmeans_objective, lloyd_pp, lqc_certificate, radius_cover
from bispectral.metrics import misclassification
from bispectral.types import KMeansMatrix, Membership, center_separation

rng = np.random.default_rng(0)
k, dim = 3, 2
sizes = np.array([40, 50, 60])
centers = rng.normal(scale=40.0, size=(k, dim))
labels = rng.permutation(np.repeat(np.arange(1, k + 1), sizes))
x_star = KMeansMatrix(Membership(labels, k), centers)

# Gaussian noise on every point.
x_hat = centers[labels - 1] + rng.normal(scale=0.5, size=(labels.size, dim))
eps = kmeans_objective(x_hat, x_star)
delta, delta_min = center_separation(x_star)
print(f"perturbation size {eps:.2f}, center separations {np.round(delta, 2)}")

fit = lloyd_pp(x_hat, KMeansConfig(k, seed_substream=(1,)))
rep = lqc_certificate(x_star, x_hat, fit.kmm)
print("separation condition met:", rep.condition_met, "achieved ratio", round(rep.kappa, 3))
print("per-cluster Mis ", np.round(rep.mis_r, 4))
print("per-cluster bound", np.round(rep.bound_r, 4))

# Radius cover over its admissible window.
gamma = 0.15
lo, hi = 2 * eps / math.sqrt(gamma * sizes.min()), delta_min / 3
if lo < hi:
    for rho in np.linspace(lo, hi, 4, endpoint=False):
        found, _ = radius_cover(x_hat, k, rho)
        rate = misclassification(labels, found).mis_bar
        print(f"rho={rho:.2f}: Mis {rate:.4f} <= {8 * eps**2 / (labels.size * rho**2):.4f}")
else:
    print("noise too large for the radius-cover window")
