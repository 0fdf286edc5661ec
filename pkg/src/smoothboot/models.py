"""Parent distributions for coverage studies, with closed-form f, f' and quantiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from .quantiles import Sample


@dataclass(frozen=True)
class DataModel:
    tag: str
    draw: Callable[[np.random.Generator, int], np.ndarray]
    true_quantile: Callable[[float], float]
    pdf: Callable[[float], float]
    pdf_prime: Callable[[float], float]
    cdf: Callable[[float], float]


def _laplace_quantile(u):
    u = np.asarray(u, dtype=float)
    return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))


def _laplace_pdf_prime(x: float) -> float:
    # the kink at 0 takes the average of one-sided slopes, which is 0
    return -math.copysign(0.5 * math.exp(-abs(x)), x) if x != 0 else 0.0


def _lognormal_pdf(x: float) -> float:
    return norm.pdf(math.log(x)) / x if x > 0 else 0.0


def _lognormal_pdf_prime(x: float) -> float:
    if x <= 0:
        return 0.0
    z = math.log(x)
    return -(1.0 + z) * norm.pdf(z) / (x * x)


STD_NORMAL = DataModel(
    tag="std_normal",
    draw=lambda rng, n: rng.standard_normal(n),
    true_quantile=lambda q: float(norm.ppf(q)),
    pdf=lambda x: float(norm.pdf(x)),
    pdf_prime=lambda x: float(-x * norm.pdf(x)),
    cdf=lambda x: float(norm.cdf(x)),
)

DOUBLE_EXPONENTIAL = DataModel(
    tag="double_exponential_unit",
    draw=lambda rng, n: _laplace_quantile(rng.random(n)),
    true_quantile=lambda q: float(_laplace_quantile(q)),
    pdf=lambda x: 0.5 * math.exp(-abs(x)),
    pdf_prime=_laplace_pdf_prime,
    cdf=lambda x: 0.5 * math.exp(x) if x < 0 else 1.0 - 0.5 * math.exp(-x),
)

STD_LOGNORMAL = DataModel(
    tag="std_lognormal",
    draw=lambda rng, n: np.exp(rng.standard_normal(n)),
    true_quantile=lambda q: float(math.exp(norm.ppf(q))),
    pdf=_lognormal_pdf,
    pdf_prime=_lognormal_pdf_prime,
    cdf=lambda x: float(norm.cdf(math.log(x))) if x > 0 else 0.0,
)

MODELS = {m.tag: m for m in (STD_NORMAL, DOUBLE_EXPONENTIAL, STD_LOGNORMAL)}
MODEL_ALIASES = {"normal": "std_normal", "laplace": "double_exponential_unit",
                 "double_exponential": "double_exponential_unit", "lognormal": "std_lognormal"}


def get_model(tag: str) -> DataModel:
    tag = MODEL_ALIASES.get(tag, tag)
    try:
        return MODELS[tag]
    except KeyError:
        raise ValueError(f"unknown data model {tag!r}; known: {sorted(MODELS)}") from None


def register_model(model: DataModel) -> None:
    MODELS[model.tag] = model


def draw_sample(model: DataModel, n: int, rng: np.random.Generator) -> Sample:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Sample(model.draw(rng, n))
