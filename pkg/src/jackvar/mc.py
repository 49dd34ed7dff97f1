"""Monte Carlo estimators for spaces too large to enumerate.

Randomness discipline
---------------------
All draws come from Philox4x64-10 counter-based generators (numpy's
``np.random.Philox``).  The stream for logical purpose `tag` under seed `s`
uses the 128-bit key  ``(s & 2^64-1) | (tag << 64)``; sample index i uses
that key with the 256-bit counter preset to ``i << 128``.  Consequences:

  * streams for outer draws, copies, subset choices, and inner completions
    are independent by construction (distinct tags / counter blocks);
  * every per-sample contribution depends only on (seed, tag, i), so
    splitting a run into blocks [0,a), [a,b), ... and concatenating the
    per-sample contribution arrays reproduces the single-block arrays
    bit-for-bit for any partition;
  * merging is one pairwise ``np.sum`` over the concatenated contribution
    array (mean = sum / N), hence identical for any block partition of the
    same total.

Estimator constructions
-----------------------
Order-k total moment: draw the coordinates and one independent copy per
coordinate, pick a sorted k-subset, form the alternating replace-on-subset
difference D, and contribute weight * D^2 / 2^k.  With enumerated subsets
the weight is k!; with a uniformly sampled subset it is k! * C(n,k).

Order-k projected moment: the degenerate component h of a subset I is
estimated by the same alternating sum run the other way around (keep the
drawn coordinates on J, fill the rest from a fresh completion); two such
sums with independent completions are conditionally independent given the
kept coordinates, so their product is unbiased for h^2.  Products are
averaged over `inner_pairs` completion pairs.  A nested mean-then-square
would be biased; the pair-product form is exact in expectation, which is
the point of this library.  Point estimates can come out negative on finite
samples; they are reported unclamped and flagged.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelError, ProductSpace, Statistic, as_index_set

_MASK64 = (1 << 64) - 1

TAG_OUTCOME = 1
TAG_VAR = 2
TAG_BIAS = 3
TAG_TOTAL_BASE = 1 << 16  # + k
TAG_PROJECTED_BASE = 2 << 16  # + k
TAG_DIFF_BASE = 3 << 16  # + subset bitmask

ENUMERATE_SUBSET_LIMIT = 64


@dataclass(frozen=True)
class McConfig:
    """Estimation settings; seed is a 64-bit integer."""

    seed: int
    outer_samples: int
    inner_pairs: int = 1
    ks: tuple[int, ...] | None = None
    subset_mode: str = "auto"

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _MASK64:
            raise ModelError("seed must fit in 64 bits")
        if self.outer_samples < 2:
            raise ModelError("outer_samples must be >= 2")
        if self.inner_pairs < 1:
            raise ModelError("inner_pairs must be >= 1")
        if self.subset_mode not in ("auto", "enumerate", "sample"):
            raise ModelError(f"unknown subset_mode {self.subset_mode!r}")
        if self.ks is not None:
            object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int
    flagged_negative: bool = False


@dataclass(frozen=True)
class BracketEstimate:
    """Point estimates with propagated standard errors for one bracket."""

    p: int
    lower_j: McEstimate
    lower_jk: McEstimate
    upper_jk: McEstimate
    upper_j: McEstimate


def stream_rng(seed: int, tag: int, index: int) -> np.random.Generator:
    """Generator for one (purpose, sample index) pair; see module docstring."""
    key = (int(seed) & _MASK64) | (int(tag) << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=int(index) << 128))


def _uniform_block(seed: int, tag: int, start: int, count: int, width: int) -> np.ndarray:
    out = np.empty((count, width))
    for r in range(count):
        out[r] = stream_rng(seed, tag, start + r).random(width)
    return out


def _cdfs(space: ProductSpace) -> list[np.ndarray]:
    return [np.cumsum(space.axis_probs(c)) for c in range(1, space.n + 1)]


def _indices_from_uniform(cdfs, space, u: np.ndarray, coords=None) -> np.ndarray:
    """Inverse-CDF per column; column j maps to coords[j] (1-based), default 1..n."""
    if coords is None:
        coords = range(1, u.shape[-1] + 1)
    idx = np.empty(u.shape, dtype=np.int64)
    for j, c in enumerate(coords):
        cdf = cdfs[c - 1]
        idx[..., j] = np.minimum(
            np.searchsorted(cdf, u[..., j], side="right"), cdf.size - 1
        )
    return idx


def sample_outcome(space: ProductSpace, rng: np.random.Generator) -> tuple[float, ...]:
    """One joint outcome drawn from the product law."""
    cdfs = _cdfs(space)
    u = rng.random(space.n)
    vals = []
    for c in range(1, space.n + 1):
        i = min(int(np.searchsorted(cdfs[c - 1], u[c - 1], side="right")), space.shape[c - 1] - 1)
        vals.append(space.dists[c - 1].support[i])
    return tuple(vals)


def sample_outcomes(space: ProductSpace, count: int, seed: int, start: int = 0) -> np.ndarray:
    """(count, n) outcome values; row i depends only on (seed, start + i)."""
    cdfs = _cdfs(space)
    u = _uniform_block(seed, TAG_OUTCOME, start, count, space.n)
    idx = _indices_from_uniform(cdfs, space, u)
    vals = np.empty_like(u)
    for c in range(space.n):
        vals[:, c] = space.axis_values(c + 1)[idx[:, c]]
    return vals


def _alternating_eval(space, statistic, base_idx, repl_idx, positions) -> np.ndarray:
    """sum_{J subset of row's position set} (-1)^|J| S(base with J columns replaced).

    positions: (N, k) 0-based coordinate columns, possibly different per row.
    """
    count, k = positions.shape
    rows = np.arange(count)[:, None]
    total = np.zeros(count)
    for bits in range(1 << k):
        chosen = positions[:, [t for t in range(k) if bits >> t & 1]]
        mix = base_idx.copy()
        if chosen.shape[1]:
            mix[rows, chosen] = repl_idx[rows, chosen]
        sign = -1.0 if bin(bits).count("1") % 2 else 1.0
        total += sign * statistic.on_indices(space, mix)
    return total


def _unrank_combination(rank: int, n: int, k: int) -> tuple[int, ...]:
    """Lexicographic unranking of a k-combination of {0..n-1}."""
    out = []
    c = 0
    for remaining in range(k, 0, -1):
        while math.comb(n - c - 1, remaining - 1) <= rank:
            rank -= math.comb(n - c - 1, remaining - 1)
            c += 1
        out.append(c)
        c += 1
    return tuple(out)


def _enumerate_subsets(cfg: McConfig, n: int, k: int) -> bool:
    if cfg.subset_mode == "enumerate":
        return True
    if cfg.subset_mode == "sample":
        return False
    return math.comb(n, k) <= ENUMERATE_SUBSET_LIMIT


def _check_k(space: ProductSpace, k: int):
    if not 1 <= k <= space.n:
        raise ModelError(f"order k={k} out of range 1..{space.n}")


def _estimate_from(contribs: np.ndarray, flag_negative: bool = False) -> McEstimate:
    count = contribs.size
    mean = float(np.sum(contribs) / count)
    var = float(np.sum((contribs - mean) ** 2) / (count - 1)) if count > 1 else 0.0
    se = math.sqrt(max(var, 0.0) / count)
    return McEstimate(
        mean=mean,
        std_error=se,
        samples=count,
        flagged_negative=bool(flag_negative and mean < 0.0),
    )


def _total_contributions(space, statistic, k, cfg, start, count) -> np.ndarray:
    n = space.n
    cdfs = _cdfs(space)
    u = _uniform_block(cfg.seed, TAG_TOTAL_BASE + k, start, count, 2 * n + 1)
    x = _indices_from_uniform(cdfs, space, u[:, :n])
    y = _indices_from_uniform(cdfs, space, u[:, n : 2 * n])
    kf = float(math.factorial(k))
    if _enumerate_subsets(cfg, n, k):
        total = np.zeros(count)
        for subset in itertools.combinations(range(n), k):
            pos = np.broadcast_to(np.asarray(subset), (count, k))
            d = _alternating_eval(space, statistic, x, y, pos)
            total += d * d
        return (kf / 2.0**k) * total
    n_subsets = math.comb(n, k)
    ranks = np.minimum((u[:, 2 * n] * n_subsets).astype(np.int64), n_subsets - 1)
    pos = np.asarray([_unrank_combination(int(r), n, k) for r in ranks])
    d = _alternating_eval(space, statistic, x, y, pos)
    return (kf * n_subsets / 2.0**k) * d * d


def estimate_iterated_jackknife(
    space: ProductSpace, statistic: Statistic, k: int, cfg: McConfig
) -> McEstimate:
    """Unbiased estimate of the order-k total jackknife moment."""
    _check_k(space, k)
    statistic.validate(space)
    return _estimate_from(
        _total_contributions(space, statistic, k, cfg, 0, cfg.outer_samples)
    )


def _projected_contributions(space, statistic, k, cfg, start, count) -> np.ndarray:
    n = space.n
    m = cfg.inner_pairs
    cdfs = _cdfs(space)
    u = _uniform_block(cfg.seed, TAG_PROJECTED_BASE + k, start, count, n + 2 * m * n + 1)
    x = _indices_from_uniform(cdfs, space, u[:, :n])
    completions = _indices_from_uniform(
        cdfs, space, u[:, n : n + 2 * m * n].reshape(count, 2 * m, n),
        coords=list(range(1, n + 1)),
    )
    kf = float(math.factorial(k))
    sign = (-1.0) ** k  # h = (-1)^k * alternating sum with completion as base

    def pair_products(pos):
        acc = np.zeros(count)
        for pair in range(m):
            h1 = sign * _alternating_eval(space, statistic, completions[:, 2 * pair], x, pos)
            h2 = sign * _alternating_eval(space, statistic, completions[:, 2 * pair + 1], x, pos)
            acc += h1 * h2
        return acc / m

    if _enumerate_subsets(cfg, n, k):
        total = np.zeros(count)
        for subset in itertools.combinations(range(n), k):
            total += pair_products(np.broadcast_to(np.asarray(subset), (count, k)))
        return kf * total
    n_subsets = math.comb(n, k)
    ranks = np.minimum((u[:, -1] * n_subsets).astype(np.int64), n_subsets - 1)
    pos = np.asarray([_unrank_combination(int(r), n, k) for r in ranks])
    return (kf * n_subsets) * pair_products(pos)


def estimate_projected_jackknife(
    space: ProductSpace, statistic: Statistic, k: int, cfg: McConfig
) -> McEstimate:
    """Unbiased estimate of the order-k projected jackknife moment.

    May be negative on finite samples even though the target is >= 0; such
    estimates are returned unclamped with flagged_negative set.
    """
    _check_k(space, k)
    statistic.validate(space)
    contribs = _projected_contributions(space, statistic, k, cfg, 0, cfg.outer_samples)
    return _estimate_from(contribs, flag_negative=True)


def _variance_contributions(space, statistic, cfg, start, count) -> np.ndarray:
    n = space.n
    cdfs = _cdfs(space)
    u = _uniform_block(cfg.seed, TAG_VAR, start, count, 2 * n)
    x = _indices_from_uniform(cdfs, space, u[:, :n])
    x2 = _indices_from_uniform(cdfs, space, u[:, n:])
    d = statistic.on_indices(space, x) - statistic.on_indices(space, x2)
    return 0.5 * d * d


def estimate_variance(space: ProductSpace, statistic: Statistic, cfg: McConfig) -> McEstimate:
    """Unbiased variance estimate from independent-draw half squared differences."""
    statistic.validate(space)
    return _estimate_from(
        _variance_contributions(space, statistic, cfg, 0, cfg.outer_samples)
    )


def _diff_contributions(space, statistic, iset, cfg, start, count) -> np.ndarray:
    n = space.n
    k = len(iset)
    cdfs = _cdfs(space)
    u = _uniform_block(cfg.seed, TAG_DIFF_BASE + iset.mask, start, count, n + k)
    x = _indices_from_uniform(cdfs, space, u[:, :n])
    copies = _indices_from_uniform(cdfs, space, u[:, n:], coords=iset.indices)
    repl = x.copy()
    cols = [i - 1 for i in iset.indices]
    repl[:, cols] = copies
    pos = np.broadcast_to(np.asarray(cols), (count, k))
    d = _alternating_eval(space, statistic, x, repl, pos)
    return d * d


def estimate_difference_moment(
    space: ProductSpace, statistic: Statistic, indices, cfg: McConfig
) -> McEstimate:
    """Sampled second moment of the iterated replace-on-subset difference."""
    iset = as_index_set(indices).check_range(space.n)
    if len(iset) == 0:
        raise ModelError("difference moment needs a nonempty index set")
    statistic.validate(space)
    return _estimate_from(
        _diff_contributions(space, statistic, iset, cfg, 0, cfg.outer_samples)
    )


def estimate_bracket(
    space: ProductSpace, statistic: Statistic, p: int, cfg: McConfig
) -> BracketEstimate:
    """Bracket scalars assembled from independent per-order estimation runs.

    Each order uses its own stream, so the runs are independent and the
    propagated variance of a signed combination is the coefficient-weighted
    sum of the per-run variances.
    """
    n = space.n
    if not 1 <= p <= n // 2:
        raise ModelError(f"p={p} out of range 1..{n // 2}")
    ej = {k: estimate_iterated_jackknife(space, statistic, k, cfg) for k in range(1, 2 * p + 1)}
    ek = {2 * p: estimate_projected_jackknife(space, statistic, 2 * p, cfg)}
    if 2 * p + 1 <= n:
        ek[2 * p + 1] = estimate_projected_jackknife(space, statistic, 2 * p + 1, cfg)

    def combine(parts) -> McEstimate:
        mean = sum(coef * est.mean for coef, est in parts)
        var = sum((coef * est.std_error) ** 2 for coef, est in parts)
        return McEstimate(mean=float(mean), std_error=math.sqrt(var), samples=cfg.outer_samples)

    lower_parts = [((-1.0) ** (k + 1) / math.factorial(k), ej[k]) for k in range(1, 2 * p + 1)]
    upper_parts = lower_parts[: 2 * p - 1]
    lower_jk_parts = list(lower_parts)
    if 2 * p + 1 in ek:
        lower_jk_parts.append((1.0 / math.factorial(2 * p + 1), ek[2 * p + 1]))
    upper_jk_parts = upper_parts + [(-1.0 / math.factorial(2 * p), ek[2 * p])]
    return BracketEstimate(
        p=p,
        lower_j=combine(lower_parts),
        lower_jk=combine(lower_jk_parts),
        upper_jk=combine(upper_jk_parts),
        upper_j=combine(upper_parts),
    )


def _bias_contributions(space, statistic, cfg, start, count) -> np.ndarray:
    n = space.n
    cdfs = _cdfs(space)
    u = _uniform_block(cfg.seed, TAG_BIAS, start, count, 2 * n + 1)
    x = _indices_from_uniform(cdfs, space, u[:, :n])
    copy = _indices_from_uniform(cdfs, space, u[:, n : n + 1], coords=[1])
    x2 = _indices_from_uniform(cdfs, space, u[:, n + 1 :])
    base_vals = statistic.on_indices(space, x)
    resampled = np.empty((count, n + 1))
    for i in range(n):
        mix = x.copy()
        mix[:, i] = copy[:, 0]
        resampled[:, i] = statistic.on_indices(space, mix)
    resampled[:, n] = base_vals
    centered = resampled - resampled.mean(axis=1, keepdims=True)
    leave_one_spread = (centered * centered).sum(axis=1)
    half_sq = 0.5 * (base_vals - statistic.on_indices(space, x2)) ** 2
    return leave_one_spread - half_sq


def efron_stein_bias(space: ProductSpace, statistic: Statistic, cfg: McConfig) -> McEstimate:
    """Estimated upward bias of the classical resampled variance estimate.

    Draws the n coordinates plus a single shared replacement, forms the
    n+1 leave-one-in resampled values, and subtracts an independent
    half-squared-difference variance estimate.  The target is >= 0 for a
    symmetric statistic of iid coordinates; symmetry is the caller's
    responsibility, iid-ness is checked here because the construction is
    only stated for identical laws.
    """
    if not space.iid():
        raise ModelError("bias construction requires identically distributed coordinates")
    statistic.validate(space)
    return _estimate_from(
        _bias_contributions(space, statistic, cfg, 0, cfg.outer_samples)
    )
