# The classical data-side jackknife and its upward bias.

import numpy as np

import jackvar as jv

# The resampled spread statistic: sum of squared deviations of the n+1
# leave-one-in values.  It satisfies an exact pairwise identity that the
# library re-verifies on every call.
values = [1.0, 2.0, 3.0]
print("classical jackknife of (1,2,3):", jv.classical_jackknife(values))

rng = np.random.Generator(np.random.Philox(key=99))
sample = rng.normal(size=8)
print("of a random sample:", jv.classical_jackknife(sample))

# Its expectation dominates Var S: the estimate is biased upwards.  Check
# the bias estimator against the exact engine for max of three 0/1 coins.
bit = jv.DiscreteDistribution.uniform([0.0, 1.0])
space = jv.build_space([bit] * 3)
stat = jv.Statistic.coordinate_max()

cache = jv.CondExpCache(jv.tabulate(stat, space))
jack = jv.jackknife_spectrum(cache)
var = jv.variance(cache.base)
print(f"\nmax of three 0/1 coins: Var = {var:.6f}, first-order bound = {jack.ej[0]:.6f}")
print(f"exact bias = {jack.ej[0] - var:.6f}")

est = jv.efron_stein_bias(space, stat, jv.McConfig(seed=3, outer_samples=100_000))
print(f"sampled bias = {est.mean:.6f} +- {est.std_error:.6f}")

# For a linear statistic the first-order bound is tight and the bias is 0.
rad = jv.DiscreteDistribution.rademacher()
space4 = jv.build_space([rad] * 4)
mean4 = jv.Statistic.linear([0.25] * 4)
est0 = jv.efron_stein_bias(space4, mean4, jv.McConfig(seed=4, outer_samples=100_000))
print(f"\nsample mean of 4 coins: sampled bias = {est0.mean:.6f} +- {est0.std_error:.6f}")
