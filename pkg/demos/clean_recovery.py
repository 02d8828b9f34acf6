"""Estimate a mean in the unit disk from corrupted Gaussian data.

Compares the tree-tournament estimate with the sample mean when a tenth of
the rows are moved far outside the disk.
"""
import numpy as np

from starrobust.adversary import corrupt_oracle_shift
from starrobust.geometry import EuclideanBall
from starrobust.hypotests import NoiseModel
from starrobust.tournament import EstimatorConfig, run_estimator


def main() -> None:
    rng = np.random.default_rng(7)
    K = EuclideanBall([0.0, 0.0], 1.0)
    mu = np.array([0.35, -0.2])
    sigma, N, eps = 0.2, 200, 0.1
    clean = mu + sigma * rng.normal(size=(N, 2))
    data = corrupt_oracle_shift(clean, mu, K, eps, 100 * sigma)
    config = EstimatorConfig(noise=NoiseModel(sigma=sigma, epsilon=eps), kappa=0.1, depth=5, iterations="full")
    estimate, state = run_estimator(data, K, config)
    naive = data.observed.mean(axis=0)
    print(f"true mean       {mu}")
    print(f"estimate        {np.round(estimate, 4)}  error {np.linalg.norm(estimate - mu):.4f}")
    print(f"sample mean     {np.round(naive, 4)}  error {np.linalg.norm(naive - mu):.4f}")
    print(f"levels descended {state.steps} (stopping level J* = {state.J_star})")


if __name__ == "__main__":
    main()
