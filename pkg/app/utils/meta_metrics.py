# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Mapping, Sequence, Tuple, TypeVar

import numpy as np

from utils.permutations import PValueMatrix

__all__ = [
    "META_CHOICES",
    "DistinctValues",
    "MetaScore",
    "PairBreakdown",
    "binarize",
    "distinct_value_stats",
    "kendall_from_pa",
    "kendall_tau",
    "meta_score",
    "meta_scores",
    "meta_value",
    "pa",
    "pa_fraction",
    "pair_breakdown",
    "spa",
]

META_CHOICES: Tuple[str, ...] = ("spa", "pa")

Number = TypeVar("Number", float, Fraction)


@dataclass(frozen=True)
class MetaScore:
    """SPA, PA and Kendall's tau of one metric against the human judgments.

    `concordant` / `n_pairs` is the exact PA; `tau` is derived from it as a rational.
    """

    metric_name: str
    spa: float
    pa: float
    tau: float
    concordant: int
    n_pairs: int

    @property
    def pa_fraction(self) -> Fraction:
        return Fraction(self.concordant, self.n_pairs)

    def value(self, meta: str) -> float:
        if meta not in META_CHOICES:
            raise ValueError(f"unknown meta-metric '{meta}', expected one of {META_CHOICES}")
        return self.spa if meta == "spa" else self.pa


@dataclass(frozen=True)
class PairBreakdown:
    system_i: str
    system_j: str
    p_h: float
    p_m: float
    spa_term: float
    pa_term: int


@dataclass(frozen=True)
class DistinctValues:
    n_metrics: int
    pa: int
    spa: int
    # Upper bound on distinct PA values for this number of systems: C(N, 2) + 1
    max_pa_values: int


def binarize(x: float) -> int:
    """1 when x >= 0.5, else 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binarize expects a value in [0, 1], got {x}")
    return int(x >= 0.5)


def _check_pair(ph: PValueMatrix, pm: PValueMatrix) -> None:
    if ph.system_names != pm.system_names:
        raise ValueError(
            f"p-value matrices cover different systems ({ph.n_systems} human vs {pm.n_systems} metric systems)"
        )
    if ph.n_systems < 2:
        raise ValueError("at least 2 systems are required")


def _spa_terms(ph: PValueMatrix, pm: PValueMatrix) -> np.ndarray:
    _check_pair(ph, pm)
    return 1.0 - np.abs(ph.upper() - pm.upper())


def _pa_terms(ph: PValueMatrix, pm: PValueMatrix) -> np.ndarray:
    _check_pair(ph, pm)
    return (ph.upper() >= 0.5) == (pm.upper() >= 0.5)


def spa(ph: PValueMatrix, pm: PValueMatrix) -> float:
    """Soft pairwise accuracy: mean over pairs i < j of 1 - |ph[i, j] - pm[i, j]|."""
    return float(np.mean(_spa_terms(ph, pm)))


def pa_fraction(ph: PValueMatrix, pm: PValueMatrix) -> Fraction:
    """Pairwise accuracy as an exact rational k / C(N, 2)."""
    terms = _pa_terms(ph, pm)
    return Fraction(int(np.count_nonzero(terms)), terms.size)


def pa(ph: PValueMatrix, pm: PValueMatrix) -> float:
    """Pairwise accuracy over binarized p-values."""
    return float(pa_fraction(ph, pm))


def kendall_from_pa(pa: Number) -> Number:
    """tau = 2 * PA - 1; exact when given a Fraction."""
    if not 0 <= pa <= 1:
        raise ValueError(f"PA must lie in [0, 1], got {pa}")
    return 2 * pa - 1


def kendall_tau(ph: PValueMatrix, pm: PValueMatrix) -> Fraction:
    """Kendall's tau from concordant and discordant binarized preferences, as an exact rational."""
    terms = _pa_terms(ph, pm)
    concordant = int(np.count_nonzero(terms))
    discordant = terms.size - concordant
    return Fraction(concordant - discordant, terms.size)


def meta_value(meta: str, ph: PValueMatrix, pm: PValueMatrix) -> float:
    if meta == "spa":
        return spa(ph, pm)
    if meta == "pa":
        return pa(ph, pm)
    raise ValueError(f"unknown meta-metric '{meta}', expected one of {META_CHOICES}")


def meta_score(metric_name: str, ph: PValueMatrix, pm: PValueMatrix) -> MetaScore:
    pa_terms = _pa_terms(ph, pm)
    concordant = int(np.count_nonzero(pa_terms))
    pa_exact = Fraction(concordant, pa_terms.size)
    return MetaScore(
        metric_name=metric_name,
        spa=spa(ph, pm),
        pa=float(pa_exact),
        tau=float(kendall_from_pa(pa_exact)),
        concordant=concordant,
        n_pairs=pa_terms.size,
    )


def meta_scores(ph: PValueMatrix, pms: Mapping[str, PValueMatrix]) -> List[MetaScore]:
    """Scores of every metric, sorted by SPA (descending) then name."""
    scores = [meta_score(name, ph, pm) for name, pm in pms.items()]
    return sorted(scores, key=lambda s: (-s.spa, s.metric_name))


def pair_breakdown(ph: PValueMatrix, pm: PValueMatrix) -> List[PairBreakdown]:
    """Per-pair SPA and PA terms; their means reproduce spa() and pa()."""
    spa_terms = _spa_terms(ph, pm)
    pa_terms = _pa_terms(ph, pm)
    rows, cols = np.triu_indices(ph.n_systems, k=1)
    p_h, p_m = ph.upper(), pm.upper()
    return [
        PairBreakdown(
            system_i=ph.system_names[i],
            system_j=ph.system_names[j],
            p_h=float(p_h[k]),
            p_m=float(p_m[k]),
            spa_term=float(spa_terms[k]),
            pa_term=int(pa_terms[k]),
        )
        for k, (i, j) in enumerate(zip(rows, cols))
    ]


def distinct_value_stats(scores: Sequence[MetaScore]) -> DistinctValues:
    """Distinct PA (exact rationals) and SPA (exact floats) values across metrics."""
    if len(scores) == 0:
        raise ValueError("at least one meta-score is required")
    return DistinctValues(
        n_metrics=len(scores),
        pa=len({s.pa_fraction for s in scores}),
        spa=len({s.spa for s in scores}),
        max_pa_values=scores[0].n_pairs + 1,
    )
