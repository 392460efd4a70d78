"""Seeded random feature maps from input space into hypervector space.

Two map families are supported:

* ``onlinehd``: component k is ``cos(<x, W[:, k]> + phase_k) * sin(<x, W[:, k]>)``
  with a Gaussian projection matrix and uniform phases.
* ``rff``: random Fourier features ``sqrt(2/D) * [cos(x W'), sin(x W')]`` whose
  dot products are unbiased estimates of the Gaussian kernel
  ``exp(-||x - y||^2 / (2 sigma^2))``.

An encoder is fully determined by ``(kind, input_dim, dim, sigma, seed)``:
construction draws the projection matrix first (row-major), then the phase
vector, from a single PCG64 generator, so identical parameters always
reproduce identical maps within this implementation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

ONLINEHD = "onlinehd"
RFF = "rff"
KINDS = (ONLINEHD, RFF)

_KIND_TAG = {ONLINEHD: 0, RFF: 1}
_TAG_KIND = {v: k for k, v in _KIND_TAG.items()}

_HEADER = struct.Struct("<QQQdQ")  # kind tag, input_dim, dim, sigma, seed

ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class Encoder:
    """Immutable encoder; ``encode`` is pure and thread-safe on a shared instance."""

    kind: str
    input_dim: int
    dim: int
    sigma: float
    seed: int
    proj: np.ndarray
    phase: np.ndarray  # empty for rff


def new_encoder(kind: str, input_dim: int, dim: int, sigma: float = 1.0,
                seed: int = 0) -> Encoder:
    """Sample a fresh encoder. Same arguments yield element-wise identical maps."""
    if kind not in KINDS:
        raise ValueError(f"unknown encoder kind {kind!r}; expected one of {KINDS}")
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    if kind == ONLINEHD:
        proj = rng.standard_normal((input_dim, dim))
        phase = rng.uniform(0.0, 2.0 * np.pi, dim)
    else:
        if dim % 2 != 0:
            raise ValueError(f"rff requires an even dim, got {dim}")
        if not sigma > 0:
            raise ValueError(f"rff requires sigma > 0, got {sigma}")
        proj = rng.standard_normal((input_dim, dim // 2)) / sigma
        phase = np.empty(0)
    proj.setflags(write=False)
    phase.setflags(write=False)
    return Encoder(kind, input_dim, dim, float(sigma), int(seed), proj, phase)


def encode(enc: Encoder, x: np.ndarray) -> np.ndarray:
    """Map one point ``(input_dim,)`` or a batch ``(n, input_dim)`` to hypervectors.

    onlinehd components always lie in [-1, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != enc.input_dim:
        raise ValueError(
            f"expected input with {enc.input_dim} features, got shape {x.shape}")
    z = x @ enc.proj
    if enc.kind == ONLINEHD:
        return np.cos(z + enc.phase) * np.sin(z)
    scale = np.sqrt(2.0 / enc.dim)
    return scale * np.concatenate([np.cos(z), np.sin(z)], axis=-1)


def normalize_l2(x: np.ndarray) -> np.ndarray:
    """Scale a vector (or each row of a matrix) to unit L2 norm.

    Inputs with norm <= 1e-12 are returned unchanged instead of dividing by
    (near) zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        n = float(np.linalg.norm(x))
        return x / n if n > ZERO_NORM_EPS else x.copy()
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms > ZERO_NORM_EPS, norms, 1.0)


def write_encoder(f, enc: Encoder) -> None:
    """Append the encoder block: header, then proj and phase as little-endian f64."""
    f.write(_HEADER.pack(_KIND_TAG[enc.kind], enc.input_dim, enc.dim,
                         enc.sigma, enc.seed))
    f.write(np.ascontiguousarray(enc.proj, dtype="<f8").tobytes())
    f.write(np.ascontiguousarray(enc.phase, dtype="<f8").tobytes())


def read_encoder(f) -> Encoder:
    """Read an encoder block written by :func:`write_encoder`.

    The stored matrices are used as-is; nothing is re-sampled.
    """
    header = f.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise ValueError("truncated encoder header")
    tag, input_dim, dim, sigma, seed = _HEADER.unpack(header)
    if tag not in _TAG_KIND:
        raise ValueError(f"unknown encoder kind tag {tag}")
    kind = _TAG_KIND[tag]
    proj_cols = dim if kind == ONLINEHD else dim // 2
    phase_len = dim if kind == ONLINEHD else 0
    proj = _read_f64(f, input_dim * proj_cols).reshape(input_dim, proj_cols)
    phase = _read_f64(f, phase_len)
    proj.setflags(write=False)
    phase.setflags(write=False)
    return Encoder(kind, int(input_dim), int(dim), float(sigma), int(seed),
                   proj, phase)


def save_encoder(path, enc: Encoder) -> None:
    with open(path, "wb") as f:
        write_encoder(f, enc)


def load_encoder(path) -> Encoder:
    with open(path, "rb") as f:
        return read_encoder(f)


def _read_f64(f, count: int) -> np.ndarray:
    raw = f.read(8 * count)
    if len(raw) != 8 * count:
        raise ValueError("truncated encoder data")
    return np.frombuffer(raw, dtype="<f8").copy()
