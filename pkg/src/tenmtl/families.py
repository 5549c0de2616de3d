"""Exponential-family definitions for canonical-link GLMs.

A family is the cumulant ``b`` plus its first two derivatives; with the
canonical link the negative log-likelihood of responses ``y`` at linear
predictor ``eta`` is ``sum(-y * eta + b(eta))`` (data-independent terms
dropped).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class Family:
    """Cumulant triple ``(b, b', b'')`` for a canonical-link GLM."""

    name: str
    b: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    b_prime: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    b_double_prime: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _bernoulli_b(eta):
    # log(1 + exp(eta)) without overflow for large |eta|
    return np.logaddexp(0.0, eta)


GAUSSIAN = Family(
    name="gaussian",
    b=lambda eta: 0.5 * np.square(eta),
    b_prime=lambda eta: np.asarray(eta, dtype=np.float64),
    b_double_prime=lambda eta: np.ones_like(np.asarray(eta, dtype=np.float64)),
)

BERNOULLI = Family(
    name="bernoulli",
    b=_bernoulli_b,
    b_prime=lambda eta: expit(eta),
    b_double_prime=lambda eta: expit(eta) * (1.0 - expit(eta)),
)

_FAMILIES = {f.name: f for f in (GAUSSIAN, BERNOULLI)}


def get_family(family: str | Family) -> Family:
    """Resolve a family given by name or instance."""
    if isinstance(family, Family):
        return family
    try:
        return _FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}"
        ) from None
