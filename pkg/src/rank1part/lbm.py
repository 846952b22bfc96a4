"""Gaussian latent block model: configurations, generation and noise injection.

Random streams come from numpy's counter-based ``Philox`` bit generator;
each array draw gets its own child of ``SeedSequence(seed)`` so that adding
or reordering draws never shifts another stream.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import GenerationError
from .matrix import DataMatrix, as_data_matrix

PRESETS = ("D1", "D2", "D3", "D4")
DEFAULT_NOISE = 1.5
SHIFT_MARGIN = 0.01
LABEL_RETRIES = 100
_NOISE_STREAM = 1000


class ConfigError(ValueError):
    """Invalid block model configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class LbmConfig:
    name: str
    m: int
    n: int
    k_r: int
    k_c: int
    row_props: tuple
    col_props: tuple
    block_means: tuple
    block_std: float = 1.0

    def __post_init__(self):
        for key in ("m", "n", "k_r", "k_c"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(key, f"must be a positive integer, got {value!r}")
        if self.k_r > self.m:
            raise ConfigError("k_r", "more row clusters than rows")
        if self.k_c > self.n:
            raise ConfigError("k_c", "more column clusters than columns")
        object.__setattr__(self, "row_props", _props(self.row_props, self.k_r, "row_props"))
        object.__setattr__(self, "col_props", _props(self.col_props, self.k_c, "col_props"))
        try:
            means = np.asarray(self.block_means, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("block_means", "must be a k_r x k_c numeric array") from None
        if means.shape != (self.k_r, self.k_c):
            raise ConfigError("block_means", f"expected shape ({self.k_r}, {self.k_c}), got {means.shape}")
        if not np.isfinite(means).all():
            raise ConfigError("block_means", "must be finite")
        object.__setattr__(self, "block_means", tuple(tuple(float(v) for v in row) for row in means))
        if not (isinstance(self.block_std, (int, float)) and self.block_std > 0):
            raise ConfigError("block_std", "must be a positive number")

    @property
    def alpha(self) -> np.ndarray:
        return np.array(self.block_means)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["row_props"] = list(self.row_props)
        d["col_props"] = list(self.col_props)
        d["block_means"] = [list(r) for r in self.block_means]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "LbmConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        required = ("m", "n", "k_r", "k_c", "row_props", "col_props", "block_means")
        for key in required:
            if key not in data:
                raise ConfigError(key, "missing")
        known = set(required) | {"name", "block_std"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        return cls(
            name=str(data.get("name", "custom")),
            m=data["m"],
            n=data["n"],
            k_r=data["k_r"],
            k_c=data["k_c"],
            row_props=data["row_props"],
            col_props=data["col_props"],
            block_means=data["block_means"],
            block_std=data.get("block_std", 1.0),
        )

    @classmethod
    def from_json(cls, path) -> "LbmConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", f"line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data)


def _props(values, k, key):
    try:
        props = tuple(float(p) for p in values)
    except (TypeError, ValueError):
        raise ConfigError(key, "must be a list of numbers") from None
    if len(props) != k:
        raise ConfigError(key, f"expected {k} proportions, got {len(props)}")
    if any(not (p > 0) for p in props):
        raise ConfigError(key, "proportions must be positive")
    if abs(sum(props) - 1.0) > 1e-9:
        raise ConfigError(key, f"proportions must sum to 1 (sum is {sum(props):.6g})")
    return props


def preset_configs() -> list:
    """The four benchmark configurations D1-D4, read from the packaged JSON files."""
    return [load_preset(name) for name in PRESETS]


def load_preset(name: str) -> LbmConfig:
    if name not in PRESETS:
        raise ConfigError("name", f"unknown preset {name!r} (expected one of {', '.join(PRESETS)})")
    text = resources.files("rank1part.configs").joinpath(f"{name}.json").read_text()
    return LbmConfig.from_dict(json.loads(text))


def resolve_config(ref) -> LbmConfig:
    """Accept a preset name, a JSON path, a dict, or an existing config."""
    if isinstance(ref, LbmConfig):
        return ref
    if isinstance(ref, dict):
        return LbmConfig.from_dict(ref)
    if str(ref) in PRESETS:
        return load_preset(str(ref))
    return LbmConfig.from_json(ref)


@dataclass(frozen=True)
class GeneratedDataset:
    A: DataMatrix
    z_R: np.ndarray
    z_C: np.ndarray
    config: LbmConfig
    seed: int


def _generator(seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seq))


def _draw_labels(rng, size, props, what):
    k = len(props)
    for _ in range(LABEL_RETRIES):
        z = rng.choice(k, size=size, p=np.asarray(props))
        if np.bincount(z, minlength=k).min() > 0:
            return z
    raise GenerationError(f"could not draw {what} labels with every cluster nonempty in {LABEL_RETRIES} tries")


def generate_lbm(config: LbmConfig, seed: int = 0) -> GeneratedDataset:
    """Draw labels from the cluster proportions, then ``A_ij ~ N(alpha[z_R_i, z_C_j], std^2)``."""
    rows_seq, cols_seq, values_seq = np.random.SeedSequence(seed).spawn(3)
    z_R = _draw_labels(_generator(rows_seq), config.m, config.row_props, "row")
    z_C = _draw_labels(_generator(cols_seq), config.n, config.col_props, "column")
    means = config.alpha[np.ix_(z_R, z_C)]
    values = means + config.block_std * _generator(values_seq).standard_normal((config.m, config.n))
    return GeneratedDataset(DataMatrix(values), z_R, z_C, config, seed)


def add_noise(A, sigma_noise: float, seed: int = 0) -> DataMatrix:
    """Add i.i.d. ``N(0, sigma_noise^2)`` white noise to every entry."""
    D = as_data_matrix(A)
    X = D.require_full("add_noise")
    if sigma_noise < 0:
        raise ValueError("sigma_noise must be nonnegative")
    if sigma_noise == 0:
        return D
    seq = np.random.SeedSequence(seed, spawn_key=(_NOISE_STREAM,))
    return DataMatrix(X + sigma_noise * _generator(seq).standard_normal(X.shape))


def nonnegative_shift(A) -> tuple:
    """Shift a matrix with negative entries to be positive: ``A + (-min(A) + 0.01)``.

    Nonnegative input is returned unchanged with shift 0.
    """
    D = as_data_matrix(A)
    low = float(np.nanmin(D.values))
    if low >= 0:
        return D, 0.0
    shift = -low + SHIFT_MARGIN
    return DataMatrix(D.values + shift, D.mask), shift
