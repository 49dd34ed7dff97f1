"""Two-sided variance brackets, exact identities, and the report object.

The alternating series sum_k (-1)^(k+1) total_k / k! equals Var S exactly
when run to k = n; truncating after an odd number of terms gives an upper
bound, after an even number a lower bound (valid for p = 1..floor(n/2)).
Each bracket is tightened by one projected-moment correction:

    lower:  partial sum to 2p   + projected_{2p+1} / (2p+1)!
    upper:  partial sum to 2p-1 - projected_{2p}   / (2p)!

The statement ranges p up to floor(n/2) but the lower correction references
order 2p+1; when 2p+1 > n (even n, p = n/2) the correction is defined as 0,
the unique value consistent with the exact identities.

Whether brackets are nested as p grows is not asserted anywhere: every
bracket is reported and only each p's own validity is guaranteed.

Residual scale is max(1, E S^2) throughout, so relative tolerances degrade
gracefully for tiny statistics.  Reports carry raw and clamped copies of
every non-negative quantity for debuggability of floating-point near-zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .conditional import CondExpCache
from .hoeffding import decompose, spectrum_identities
from .jackknife import JackknifeSpectrum, jackknife_spectrum
from .model import ConsistencyError, ModelError, expectation, variance

SPECTRUM_ZERO_REL = 1e-12
INEQ_TOL_REL = 1e-10


@dataclass(frozen=True)
class Bracket:
    """One two-sided bracket: plain bounds and their tightened versions."""

    p: int
    lower_j: float
    lower_jk: float
    upper_jk: float
    upper_j: float


@dataclass(frozen=True)
class P0Chain:
    """The depth-zero inequality chains.

    0 <= ek1 <= var <= ej1   and   0 <= half_ek2 <= bias <= half_ej2,
    where bias = ej1 - var is the upward bias of the first-order bound.
    """

    ek1: float
    var: float
    ej1: float
    half_ek2: float
    bias: float
    half_ej2: float


@dataclass(frozen=True)
class IdentityResiduals:
    """Absolute residuals of the exact variance identities.

    alternating_series: var = sum (-1)^(k+1) ej_k / k!
    mixed_series:       var = ej_1 - sum_{k>=2} (k-1)/k! ek_k
    projected_series:   var = sum ek_k / k!
    prefix_recursion:   worst residual of the er telescoping chain
    spectrum_cross:     worst residual of the jackknife/spectrum identities
    """

    alternating_series: float
    mixed_series: float
    projected_series: float
    prefix_recursion: float
    spectrum_cross: float

    @property
    def max_residual(self) -> float:
        return max(
            self.alternating_series,
            self.mixed_series,
            self.projected_series,
            self.prefix_recursion,
            self.spectrum_cross,
        )


@dataclass(frozen=True)
class DegreeBound:
    """Bound pair from the lowest active interaction degree.

    If every degree below d carries no variance, then
    ek_d / d! <= Var S <= ej_d / d!.
    """

    degree: int
    lower: float
    upper: float


def _alternating_partial(jack: JackknifeSpectrum, upto: int) -> float:
    return sum(
        (-1.0) ** (k + 1) * jack.ej[k - 1] / math.factorial(k)
        for k in range(1, upto + 1)
    )


def partial_sum_bracket(jack: JackknifeSpectrum, p: int) -> Bracket:
    """The four bracket scalars for one truncation depth p."""
    n = jack.n
    if not 1 <= p <= n // 2:
        raise ModelError(f"p={p} out of range 1..{n // 2}")
    lower_j = _alternating_partial(jack, 2 * p)
    upper_j = _alternating_partial(jack, 2 * p - 1)
    upper_jk = upper_j - jack.ek[2 * p - 1] / math.factorial(2 * p)
    correction = jack.ek[2 * p] if 2 * p + 1 <= n else 0.0
    lower_jk = lower_j + correction / math.factorial(2 * p + 1)
    return Bracket(p=p, lower_j=lower_j, lower_jk=lower_jk, upper_jk=upper_jk, upper_j=upper_j)


def all_brackets(jack: JackknifeSpectrum) -> tuple[Bracket, ...]:
    return tuple(partial_sum_bracket(jack, p) for p in range(1, jack.n // 2 + 1))


def p0_chain(jack: JackknifeSpectrum, var_exact: float) -> P0Chain:
    ej2 = jack.ej[1] if jack.n >= 2 else 0.0
    ek2 = jack.ek[1] if jack.n >= 2 else 0.0
    return P0Chain(
        ek1=jack.ek[0],
        var=var_exact,
        ej1=jack.ej[0],
        half_ek2=0.5 * ek2,
        bias=jack.ej[0] - var_exact,
        half_ej2=0.5 * ej2,
    )


def variance_identities(jack: JackknifeSpectrum, var_exact: float) -> tuple[float, float, float]:
    """Residuals of the three exact series for Var S (alternating, mixed, projected)."""
    n = jack.n
    alternating = abs(var_exact - _alternating_partial(jack, n))
    mixed = abs(
        var_exact
        - (jack.ej[0] - sum((k - 1) / math.factorial(k) * jack.ek[k - 1] for k in range(2, n + 1)))
    )
    projected = abs(var_exact - sum(jack.ek[k - 1] / math.factorial(k) for k in range(1, n + 1)))
    return alternating, mixed, projected


def recursion_check(jack: JackknifeSpectrum, var_exact: float) -> float:
    """Worst residual of the prefix-moment telescoping chain.

    er_1 = var, er_k = ej_{k-1}/(k-1)! - er_{k-1} for k = 2..n, and the
    terminal identity n! er_n = ej_n.  The er values are computed from
    their definition, so this genuinely cross-checks the recursion.
    """
    n = jack.n
    residuals = [abs(jack.er[0] - var_exact)]
    for k in range(2, n + 1):
        residuals.append(
            abs(jack.er[k - 1] - (jack.ej[k - 2] / math.factorial(k - 1) - jack.er[k - 2]))
        )
    residuals.append(abs(math.factorial(n) * jack.er[n - 1] - jack.ej[n - 1]))
    return max(residuals)


def degree_bound(
    spectrum, jack: JackknifeSpectrum, var_exact: float, scale: float
) -> Optional[DegreeBound]:
    """Locate the lowest variance-carrying degree and its bound pair.

    Returns None for a constant statistic.  The pair is verified against
    the exact variance before being returned.
    """
    spectrum = tuple(float(x) for x in spectrum)
    d = None
    for i, v in enumerate(spectrum, start=1):
        if v > SPECTRUM_ZERO_REL * scale:
            d = i
            break
    if d is None:
        return None
    df = math.factorial(d)
    out = DegreeBound(degree=d, lower=jack.ek[d - 1] / df, upper=jack.ej[d - 1] / df)
    tol = INEQ_TOL_REL * scale
    if out.lower > var_exact + tol or var_exact > out.upper + tol:
        raise ConsistencyError(
            f"degree bound violated: {out.lower} <= {var_exact} <= {out.upper} fails"
        )
    return out


@dataclass(frozen=True)
class BoundsReport:
    """Everything the exact engine knows about one instance."""

    n: int
    mean: float
    var_exact: float
    scale: float
    ej: tuple[float, ...]
    ej_raw: tuple[float, ...]
    ek: tuple[float, ...]
    ek_raw: tuple[float, ...]
    er: tuple[float, ...]
    er_raw: tuple[float, ...]
    spectrum: tuple[float, ...]
    spectrum_raw: tuple[float, ...]
    brackets: tuple[Bracket, ...]
    p0: P0Chain
    residuals: IdentityResiduals
    corollary: Optional[DegreeBound]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "var_exact": self.var_exact,
            "scale": self.scale,
            "ej": list(self.ej),
            "ej_raw": list(self.ej_raw),
            "ek": list(self.ek),
            "ek_raw": list(self.ek_raw),
            "er": list(self.er),
            "er_raw": list(self.er_raw),
            "spectrum": list(self.spectrum),
            "spectrum_raw": list(self.spectrum_raw),
            "brackets": [
                {
                    "p": b.p,
                    "lower_j": b.lower_j,
                    "lower_jk": b.lower_jk,
                    "upper_jk": b.upper_jk,
                    "upper_j": b.upper_j,
                }
                for b in self.brackets
            ],
            "p0_chain": {
                "ek1": self.p0.ek1,
                "var": self.p0.var,
                "ej1": self.p0.ej1,
                "half_ek2": self.p0.half_ek2,
                "bias": self.p0.bias,
                "half_ej2": self.p0.half_ej2,
            },
            "identity_residuals": {
                "alternating_series": self.residuals.alternating_series,
                "mixed_series": self.residuals.mixed_series,
                "projected_series": self.residuals.projected_series,
                "prefix_recursion": self.residuals.prefix_recursion,
                "spectrum_cross": self.residuals.spectrum_cross,
            },
            "corollary": (
                None
                if self.corollary is None
                else {
                    "degree": self.corollary.degree,
                    "lower": self.corollary.lower,
                    "upper": self.corollary.upper,
                }
            ),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundsReport":
        cor = d["corollary"]
        return cls(
            n=int(d["n"]),
            mean=float(d["mean"]),
            var_exact=float(d["var_exact"]),
            scale=float(d["scale"]),
            ej=tuple(d["ej"]),
            ej_raw=tuple(d["ej_raw"]),
            ek=tuple(d["ek"]),
            ek_raw=tuple(d["ek_raw"]),
            er=tuple(d["er"]),
            er_raw=tuple(d["er_raw"]),
            spectrum=tuple(d["spectrum"]),
            spectrum_raw=tuple(d["spectrum_raw"]),
            brackets=tuple(
                Bracket(
                    p=int(b["p"]),
                    lower_j=b["lower_j"],
                    lower_jk=b["lower_jk"],
                    upper_jk=b["upper_jk"],
                    upper_j=b["upper_j"],
                )
                for b in d["brackets"]
            ),
            p0=P0Chain(**d["p0_chain"]),
            residuals=IdentityResiduals(**d["identity_residuals"]),
            corollary=None if cor is None else DegreeBound(**cor),
        )


def exact_report(cache: CondExpCache, p_values=None) -> BoundsReport:
    """Run the whole exact engine on one cached instance."""
    jack = jackknife_spectrum(cache)
    decomp = decompose(cache)
    var_exact = variance(cache.base)
    mean = expectation(cache.base)
    scale = cache.scale

    snap = tuple(
        0.0 if abs(v) < SPECTRUM_ZERO_REL * scale else v for v in decomp.spectrum
    )
    alternating, mixed, projected = variance_identities(jack, var_exact)
    residuals = IdentityResiduals(
        alternating_series=alternating,
        mixed_series=mixed,
        projected_series=projected,
        prefix_recursion=recursion_check(jack, var_exact),
        spectrum_cross=spectrum_identities(decomp.spectrum, jack).max_residual,
    )
    if p_values is None:
        brackets = all_brackets(jack)
    else:
        brackets = tuple(partial_sum_bracket(jack, p) for p in p_values)
    return BoundsReport(
        n=jack.n,
        mean=mean,
        var_exact=var_exact,
        scale=scale,
        ej=jack.ej,
        ej_raw=jack.ej_raw,
        ek=jack.ek,
        ek_raw=jack.ek_raw,
        er=jack.er,
        er_raw=jack.er_raw,
        spectrum=snap,
        spectrum_raw=decomp.spectrum,
        brackets=brackets,
        p0=p0_chain(jack, var_exact),
        residuals=residuals,
        corollary=degree_bound(decomp.spectrum, jack, var_exact, scale),
    )
