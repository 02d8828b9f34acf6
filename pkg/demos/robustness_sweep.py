"""Monte Carlo risk on the unit square as the corruption level grows.

Prints the empirical risk next to the rate envelope max(eta*^2, sigma^2 eps^2)
and the two lower bounds for each corruption level.
"""
from starrobust.harness import RobustConfig, sweep


def main() -> None:
    base = RobustConfig.from_dict({
        "set": {"kind": "box", "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
        "sigma": 0.1, "N": 200, "trials": 30, "seed": 1, "depth": 6, "iterations": "full", "kappa": 0.1,
        "adversary": {"kind": "oracle_shift", "magnitude_sigma": 100},
    })
    levels = [0.0, 0.1, 0.2, 0.3]
    print(f"{'eps':>5} {'risk':>10} {'envelope':>10} {'fano':>10} {'corruption':>10}")
    for eps, rep in zip(levels, sweep(base, "epsilon", levels)):
        lb = rep.lower_bounds
        print(f"{eps:5.2f} {rep.risk:10.3g} {rep.envelope['rate']:10.3g} {lb['fano']:10.3g} {lb['corruption']:10.3g}")


if __name__ == "__main__":
    main()
