# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Probability primitives: Normal and Beta distribution functions and a bivariate Gaussian copula.

All random streams come from numpy's PCG64 bit generator, which yields the same sequence on every
platform for a given seed.
"""
import math
from dataclasses import dataclass
from typing import List

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence
from scipy import special

from errors import DomainError

SEED_MAX = 2 ** 64 - 1


@dataclass(frozen=True)
class NormalParams:
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not self.sd > 0:
            raise DomainError(f"Normal standard deviation must be positive, got {self.sd}.")


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta_shape: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta_shape > 0):
            raise DomainError(f"Beta shapes must be positive, got ({self.alpha}, {self.beta_shape}).")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta_shape)


@dataclass(frozen=True)
class CopulaSpec:
    rho: float

    def __post_init__(self) -> None:
        if not -1.0 < self.rho < 1.0:
            raise DomainError(f"Copula correlation must lie in (-1, 1), got {self.rho}.")


def make_rng(seed: int) -> Generator:
    """
    Create a generator for a 64-bit seed.
    """
    if not 0 <= int(seed) <= SEED_MAX:
        raise DomainError(f"Seed must be an unsigned 64-bit integer, got {seed}.")
    return Generator(PCG64(int(seed)))


def spawn_seeds(seed: int, n: int) -> List[int]:
    """
    Derive n independent child seeds from a parent seed, so each pipeline stage owns its own stream.
    @return: Returns a list of n unsigned 64-bit integers.
    """
    children = SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"Probability must lie in (0, 1), got {p}.")
    return p


def normal_cdf(z: float) -> float:
    return float(special.ndtr(z))


def normal_inv_cdf(p: float) -> float:
    """
    Standard normal quantile function.
    @param p: Probability in (0, 1).
    @return: Returns z with normal_cdf(z) == p.
    """
    p = _check_probability(p)
    if p == 0.5:
        return 0.0
    return float(special.ndtri(p))


def normal_quantile_clamped(p: np.ndarray, params: NormalParams) -> np.ndarray:
    """
    Quantile of N(mean, sd^2), clamped to [0, 1] so it is usable as a normalized demand.
    """
    return np.clip(params.mean + params.sd * special.ndtri(p), 0.0, 1.0)


def beta_cdf(x: float, params: BetaParams) -> float:
    """
    Regularized incomplete beta function I_x(alpha, beta).
    """
    if math.isnan(x):
        raise DomainError("Beta CDF argument is NaN.")
    return float(special.betainc(params.alpha, params.beta_shape, min(max(x, 0.0), 1.0)))


def beta_inv_cdf(p: float, params: BetaParams) -> float:
    """
    Quantile function of the Beta distribution.
    @param p: Probability in (0, 1).
    @param params: Shape parameters.
    @return: Returns x in [0, 1] with beta_cdf(x) == p.
    """
    p = _check_probability(p)
    return float(special.betaincinv(params.alpha, params.beta_shape, p))


def sample_gaussian_copula(spec: CopulaSpec, n: int, seed: int) -> np.ndarray:
    """
    Draw n pairs of uniforms coupled by a bivariate Gaussian copula.
    @param spec: The copula correlation.
    @param n: Number of pairs, at least 1.
    @param seed: Unsigned 64-bit seed.
    @return: Returns an (n, 2) array with entries in the open interval (0, 1).
    """
    if n < 1:
        raise DomainError(f"Number of copula samples must be at least 1, got {n}.")
    rng = make_rng(seed)
    z = rng.standard_normal((n, 2))
    chol = np.array([[1.0, 0.0], [spec.rho, math.sqrt(1.0 - spec.rho ** 2)]])
    u = special.ndtr(z @ chol.T)

    # ndtr saturates to exactly 0 or 1 for |z| > ~38
    tiny = np.finfo(float).tiny
    return np.clip(u, tiny, 1.0 - np.finfo(float).epsneg)
