"""Attribute, label and noise vector spaces.

Everything here is value-level plumbing around plain numpy arrays: encoding a
named attribute map into an ordered vector, composing it with a one-hot
modality code into the target label the estimator head predicts, sampling the
generator's input noise, and the linear interpolations used for attribute and
noise manipulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import MalformedLabelError, SchemaError, ValidationError

NOISE_DIM = 512


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute names; the order defines the vector layout."""

    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 1:
            raise SchemaError("schema needs at least one attribute")
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"duplicate attribute names: {self.names}")

    @property
    def d_a(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown attribute: {name!r}") from None


@dataclass
class AttributeVector:
    """d_a attribute values, each in [-1, 1].

    Binary attributes are encoded as exactly -1 or +1; values strictly inside
    the interval arise only from interpolation.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if self.values.size < 1:
            raise ValidationError("attribute vector must not be empty")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("attribute values must be finite")
        if np.any(np.abs(self.values) > 1.0):
            raise ValidationError(
                f"attribute values must lie in [-1, 1], got {self.values.tolist()}"
            )

    @property
    def d_a(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ModalityCode:
    """Index of one modality out of `count`."""

    index: int
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValidationError("modality count must be >= 1")
        if not 0 <= self.index < self.count:
            raise ValidationError(
                f"modality index {self.index} out of range for count {self.count}"
            )

    def one_hot(self) -> np.ndarray:
        v = np.zeros(self.count, dtype=np.float32)
        v[self.index] = 1.0
        return v


@dataclass
class TargetLabel:
    """Concatenation [attributes, one-hot modality] of length d_a + c."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)


@dataclass
class NoiseVector:
    """512 generator input noise values."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if self.values.size != NOISE_DIM:
            raise ValidationError(
                f"noise vector must have length {NOISE_DIM}, got {self.values.size}"
            )


def encode_attributes(raw: Mapping[str, float], schema: AttributeSchema) -> AttributeVector:
    """Order the named values per the schema and range-check them."""
    unknown = set(raw) - set(schema.names)
    if unknown:
        raise SchemaError(f"unknown attributes: {sorted(unknown)}")
    missing = [n for n in schema.names if n not in raw]
    if missing:
        raise SchemaError(f"missing attributes: {missing}")
    return AttributeVector(np.array([raw[n] for n in schema.names], dtype=np.float32))


def compose_target_label(y_a: AttributeVector, m: ModalityCode) -> TargetLabel:
    """Concatenate the attribute vector with the one-hot modality code."""
    return TargetLabel(np.concatenate([y_a.values, m.one_hot()]))


def decompose_target_label(y: TargetLabel, d_a: int, c: int) -> tuple[AttributeVector, ModalityCode]:
    """Exact inverse of compose_target_label; rejects non-one-hot tails."""
    if y.values.size != d_a + c:
        raise MalformedLabelError(
            f"label length {y.values.size} != d_a + c = {d_a + c}"
        )
    tail = y.values[d_a:]
    hot = np.flatnonzero(tail == 1.0)
    if hot.size != 1 or not np.all((tail == 0.0) | (tail == 1.0)):
        raise MalformedLabelError(f"modality tail is not one-hot: {tail.tolist()}")
    return AttributeVector(y.values[:d_a].copy()), ModalityCode(int(hot[0]), c)


def sample_noise(seed: int, dist: str = "normal") -> NoiseVector:
    """Deterministic noise vector for a seed.

    `dist` selects standard normal draws (default) or uniform draws on
    [-1, 1]; both readings of the input-code range are supported behind the
    `noise` config key.
    """
    rng = np.random.default_rng(seed)
    if dist == "normal":
        v = rng.standard_normal(NOISE_DIM, dtype=np.float32)
    elif dist == "uniform":
        v = rng.random(NOISE_DIM, dtype=np.float32) * 2.0 - 1.0
    else:
        raise ValidationError(f"unknown noise distribution: {dist!r}")
    return NoiseVector(v)


def _check_beta(beta: float) -> float:
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta must lie in [0, 1], got {beta}")
    return float(beta)


def interpolate_attributes(
    y_a: AttributeVector, y_a_star: AttributeVector, beta: float
) -> AttributeVector:
    """beta * y_a + (1 - beta) * y_a_star, elementwise."""
    beta = _check_beta(beta)
    if y_a.d_a != y_a_star.d_a:
        raise ValidationError("attribute vectors must have equal length")
    if beta == 1.0:
        return AttributeVector(y_a.values.copy())
    if beta == 0.0:
        return AttributeVector(y_a_star.values.copy())
    blend = beta * y_a.values + (1.0 - beta) * y_a_star.values
    # rounding can push a blend of two exact endpoints one ulp past +-1
    return AttributeVector(np.clip(blend, -1.0, 1.0))


def interpolate_noise(z1: NoiseVector, z2: NoiseVector, beta: float) -> NoiseVector:
    """beta * z1 + (1 - beta) * z2."""
    beta = _check_beta(beta)
    if beta == 1.0:
        return NoiseVector(z1.values.copy())
    if beta == 0.0:
        return NoiseVector(z2.values.copy())
    return NoiseVector(beta * z1.values + (1.0 - beta) * z2.values)
