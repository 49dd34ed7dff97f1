"""Hoeffding (functional ANOVA) decomposition and the degree spectrum.

Any square-integrable function of independent coordinates splits uniquely as

    S = E S + sum over nonempty subsets I of h_I,

where h_I depends only on the coordinates in I and every h_I is degenerate:
averaging it over any single one of its own coordinates gives zero.  The
components are pairwise orthogonal, so the variance splits by degree:

    Var S = sum_d Var f_d,   Var f_d = sum_{|I|=d} E h_I^2.

Components are computed by Moebius inclusion-exclusion over conditional
means, h_I = sum_{J subset I} (-1)^{|I|-|J|} E[S | X_J], one pass over the
memo cache and trivially order-independent.  (The test suite checks this
against the recursive peel-off construction.)

The degree spectrum is the discrete analogue of Sobol variance components;
the cross-identities with the jackknife moments,

    total_k / k!     = sum_{j>=k} C(j,k) Var f_j
    projected_k / k! = Var f_k
    total_k          = sum_{j>=k} projected_j / (j-k)!

are the strongest global consistency checks the library has, and
`spectrum_identities` evaluates all three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .conditional import CondExpCache
from .jackknife import JackknifeSpectrum
from .model import FieldTable, IndexSet, ModelError, as_index_set


def hoeffding_component(cache: CondExpCache, indices) -> FieldTable:
    """The degenerate component attached to one nonempty coordinate subset."""
    iset = as_index_set(indices).check_range(cache.space.n)
    k = len(iset)
    if k == 0:
        raise ModelError("components are indexed by nonempty subsets")
    full = (1 << cache.space.n) - 1
    mask = iset.mask
    acc = np.zeros(cache.space.shape)
    sub = mask
    while True:
        # E[S | X_J] averages out the complement of J
        sign = 1.0 if (k - bin(sub).count("1")) % 2 == 0 else -1.0
        acc = acc + sign * cache._expect_mask(full & ~sub).array
        if sub == 0:
            break
        sub = (sub - 1) & mask
    return FieldTable(cache.space, acc, iset.complement(cache.space.n).indices)


@dataclass(frozen=True, eq=False)
class HoeffdingDecomposition:
    """Full set of components plus the variance-by-degree spectrum."""

    mean: float
    components: Mapping[IndexSet, FieldTable]
    spectrum: tuple[float, ...]
    masses: Mapping[IndexSet, float]  # E h_I^2 per subset

    @property
    def n(self) -> int:
        return len(self.spectrum)

    def component(self, indices) -> FieldTable:
        return self.components[as_index_set(indices)]

    def mass(self, indices) -> float:
        return self.masses[as_index_set(indices)]

    def superset_mass(self, indices) -> float:
        """Sum of E h_J^2 over supersets J of the given subset."""
        iset = as_index_set(indices)
        target = set(iset.indices)
        vals = [m for s, m in self.masses.items() if target <= set(s.indices)]
        return float(np.sum(np.asarray(vals))) if vals else 0.0

    def subset_sum_table(self, indices) -> FieldTable:
        """mean + sum of components over subsets of the given set.

        Equals the base averaged over the complement of the set, which the
        tests verify against the conditional cache directly.
        """
        iset = as_index_set(indices)
        target = set(iset.indices)
        space = next(iter(self.components.values())).space if self.components else None
        if space is None:
            raise ModelError("decomposition has no components (n = 0?)")
        acc = np.full(space.shape, self.mean)
        for s, tab in self.components.items():
            if set(s.indices) <= target:
                acc = acc + tab.array
        return FieldTable(space, acc, iset.complement(space.n).indices)

    def reconstruction(self) -> FieldTable:
        return self.subset_sum_table(range(1, self.n + 1))


def decompose(cache: CondExpCache) -> HoeffdingDecomposition:
    """Compute every component and the degree spectrum in one sweep."""
    space = cache.space
    n = space.n
    w = space.joint_weights()
    components: dict[IndexSet, FieldTable] = {}
    masses: dict[IndexSet, float] = {}
    per_degree: list[list[float]] = [[] for _ in range(n)]
    for mask in range(1, 1 << n):
        iset = IndexSet.from_mask(mask)
        tab = hoeffding_component(cache, iset)
        m = float(np.sum(w * tab.array * tab.array))
        components[iset] = tab
        masses[iset] = m
        per_degree[len(iset) - 1].append(m)
    spectrum = tuple(float(np.sum(np.asarray(v))) if v else 0.0 for v in per_degree)
    return HoeffdingDecomposition(
        mean=cache.mean(), components=components, spectrum=spectrum, masses=masses
    )


def degree_spectrum(cache: CondExpCache) -> tuple[float, ...]:
    """Variance carried by each interaction degree d = 1..n."""
    return decompose(cache).spectrum


@dataclass(frozen=True)
class SpectrumResiduals:
    """Residuals of the three jackknife/spectrum cross-identities, per order."""

    total_vs_spectrum: tuple[float, ...]
    projected_vs_spectrum: tuple[float, ...]
    total_vs_projected: tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(
            max(self.total_vs_spectrum),
            max(self.projected_vs_spectrum),
            max(self.total_vs_projected),
        )

    def passes(self, scale: float, tol: float = 1e-9) -> bool:
        return self.max_residual <= tol * scale


def spectrum_identities(spectrum, jack: JackknifeSpectrum) -> SpectrumResiduals:
    """Check the spectrum against both jackknife families at every order."""
    spectrum = tuple(float(x) for x in spectrum)
    n = jack.n
    if len(spectrum) != n:
        raise ModelError(f"spectrum has {len(spectrum)} degrees for n={n}")
    a, b, c = [], [], []
    for k in range(1, n + 1):
        kf = math.factorial(k)
        from_spectrum = sum(math.comb(j, k) * spectrum[j - 1] for j in range(k, n + 1))
        a.append(abs(jack.ej[k - 1] / kf - from_spectrum))
        b.append(abs(jack.ek[k - 1] / kf - spectrum[k - 1]))
        mix = sum(jack.ek[j - 1] / math.factorial(j - k) for j in range(k, n + 1))
        c.append(abs(jack.ej[k - 1] - mix))
    return SpectrumResiduals(tuple(a), tuple(b), tuple(c))
