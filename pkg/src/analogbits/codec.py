"""Codecs between discrete symbols and real-valued bit vectors.

A symbol in [0, K) is mapped to a short vector of "soft bits" taking the
two values {-scale, +scale}. Four encodings are provided:

- ``base2``: plain binary expansion, least-significant bit first.
- ``gray``: binary-reflected Gray code, so adjacent symbols differ in
  exactly one bit.
- ``permuted_base2``: binary expansion of ``permutation[v]``, which
  destroys the ordinal structure of the symbols. The shipped 256-entry
  table lives in ``data/uint8_rand_permutation.txt``.
- ``onehot``: a K-long vector with one slot at +scale, the rest at -scale.

Decoding thresholds each value at zero (strictly positive -> 1) and
inverts the mapping; one-hot decodes by argmax. All functions are pure.
"""

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, InvariantViolation

BASE2 = "base2"
GRAY = "gray"
PERMUTED_BASE2 = "permuted_base2"
ONEHOT = "onehot"

BIT_KINDS = (BASE2, GRAY, PERMUTED_BASE2)
KINDS = BIT_KINDS + (ONEHOT,)

# Largest vocabulary for which pairwise code statistics are enumerated.
MAX_ENUMERABLE_VOCAB = 4096

PERMUTATION_RESOURCE = "uint8_rand_permutation.txt"


def bits_for(vocab_size: int) -> int:
    """Number of bits needed for ``vocab_size`` distinct symbols: ceil(log2 K)."""
    return max(1, math.ceil(math.log2(vocab_size)))


def int_to_bits(values, n_bits: int) -> np.ndarray:
    """Expand non-negative integers into their binary bits, LSB first.

    The last axis of the result indexes bits: bit j of value v is
    ``(v >> j) & 1``. Values must lie in [0, 2**n_bits).
    """
    v = np.asarray(values)
    if not np.issubdtype(v.dtype, np.integer):
        raise ValueError("int_to_bits expects integer input")
    if v.size and (v.min() < 0 or v.max() >= 2 ** n_bits):
        raise ValueError(
            f"values must lie in [0, {2 ** n_bits}) for {n_bits} bits; "
            f"got range [{v.min()}, {v.max()}]"
        )
    shifts = np.arange(n_bits, dtype=v.dtype)
    return ((v[..., None] >> shifts) & 1).astype(np.uint8)


def bit_to_int(bits) -> np.ndarray:
    """Collapse the last axis of a {0,1} array into integers (LSB first).

    Exact inverse of :func:`int_to_bits` for in-range values.
    """
    b = np.asarray(bits)
    if b.size and not np.isin(b, (0, 1)).all():
        raise ValueError("bit_to_int expects entries in {0, 1}")
    weights = 2 ** np.arange(b.shape[-1], dtype=np.int64)
    return (b.astype(np.int64) * weights).sum(axis=-1)


def gray_encode(values: np.ndarray) -> np.ndarray:
    """Binary-reflected Gray code: g(v) = v XOR (v >> 1)."""
    v = np.asarray(values)
    return v ^ (v >> 1)


def gray_decode(codes: np.ndarray) -> np.ndarray:
    """Invert :func:`gray_encode` via the prefix-XOR doubling trick."""
    v = np.asarray(codes).copy()
    shift = 1
    while (v >> shift).any():
        v ^= v >> shift
        shift *= 2
    return v


@dataclass(frozen=True)
class CodecSpec:
    """How symbols in [0, vocab_size) map to soft-bit vectors.

    ``permutation`` is required iff kind is ``permuted_base2`` and must be
    a bijection on [0, vocab_size). ``scale`` is the magnitude b of the
    two nominal bit values {-b, +b}.
    """

    kind: str
    vocab_size: int
    scale: float = 1.0
    permutation: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown codec kind {self.kind!r}; known: {KINDS}")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be at least 2")
        if not self.scale > 0:
            raise ConfigError("scale must be positive")
        if self.kind == PERMUTED_BASE2:
            if self.permutation is None:
                raise ConfigError("permuted_base2 requires a permutation table")
            object.__setattr__(self, "permutation", tuple(int(p) for p in self.permutation))
            perm = np.asarray(self.permutation)
            if perm.shape != (self.vocab_size,):
                raise InvariantViolation(
                    f"permutation has {perm.size} entries, expected vocab_size={self.vocab_size}"
                )
            if not np.array_equal(np.sort(perm), np.arange(self.vocab_size)):
                raise InvariantViolation(
                    f"permutation is not a bijection on [0, {self.vocab_size})"
                )
        elif self.permutation is not None:
            raise ConfigError(f"permutation only applies to kind={PERMUTED_BASE2!r}")

    @property
    def n_bits(self) -> int:
        """Soft bits per symbol: ceil(log2 K) for bit codes, K for one-hot."""
        if self.kind == ONEHOT:
            return self.vocab_size
        return bits_for(self.vocab_size)

    def permutation_array(self) -> np.ndarray:
        return np.asarray(self.permutation, dtype=np.int64)


def load_permutation_table(path) -> np.ndarray:
    """Read a permutation table file: one header line, then one integer per line."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise InvariantViolation("permutation table must start with a '#' header line")
    try:
        entries = np.array([int(ln) for ln in lines[1:]], dtype=np.int64)
    except ValueError as exc:
        raise InvariantViolation(f"permutation table has a non-integer entry: {exc}") from None
    if len(entries) < 2 or not np.array_equal(np.sort(entries), np.arange(len(entries))):
        raise InvariantViolation(
            "permutation table entries must be a permutation of 0..n-1 with n >= 2")
    return entries


def uint8_rand_permutation() -> np.ndarray:
    """The shipped 256-entry table (generated once by a seeded numpy shuffle)."""
    ref = resources.files(__package__) / "data" / PERMUTATION_RESOURCE
    with resources.as_file(ref) as path:
        return load_permutation_table(path)


def uint8_rand_spec(scale: float = 1.0) -> CodecSpec:
    """CodecSpec for the shipped randomly permuted 8-bit code."""
    return CodecSpec(PERMUTED_BASE2, 256, scale, tuple(uint8_rand_permutation().tolist()))


def symbol_codes(spec: CodecSpec) -> np.ndarray:
    """Integer code assigned to each symbol 0..K-1 (bit-code kinds only)."""
    symbols = np.arange(spec.vocab_size)
    if spec.kind == BASE2:
        return symbols
    if spec.kind == GRAY:
        return gray_encode(symbols)
    if spec.kind == PERMUTED_BASE2:
        return spec.permutation_array()
    raise ConfigError(f"{spec.kind!r} has no integer code representation")


def encode(values, spec: CodecSpec) -> np.ndarray:
    """Encode symbols into soft bits in {-b, +b}.

    The last axis of ``values`` indexes positions; the result replaces it
    with positions * n_bits soft-bit values (bits of each position stay
    contiguous, LSB first).
    """
    v = np.asarray(values)
    if v.size and (v.min() < 0 or v.max() >= spec.vocab_size):
        raise ValueError(
            f"symbol out of range: values must lie in [0, {spec.vocab_size})"
        )
    if spec.kind == ONEHOT:
        bits = np.zeros(v.shape + (spec.vocab_size,), dtype=np.uint8)
        np.put_along_axis(bits, v[..., None], 1, axis=-1)
    else:
        bits = int_to_bits(symbol_codes(spec)[v], spec.n_bits)
    analog = (bits.astype(np.float64) * 2.0 - 1.0) * spec.scale
    return analog.reshape(v.shape[:-1] + (-1,)) if v.ndim else analog


def decode(analog, spec: CodecSpec) -> np.ndarray:
    """Decode soft bits back into symbols.

    Thresholds at zero (strictly positive -> 1), inverts the code mapping,
    and clamps results with no assigned symbol (possible only when K is
    not a power of two) into the valid range, so decoding is total on all
    finite inputs. One-hot decodes by argmax with ties going to the
    lowest index.
    """
    x = np.asarray(analog, dtype=np.float64)
    if x.shape[-1] % spec.n_bits != 0:
        raise ValueError(
            f"last axis ({x.shape[-1]}) is not a multiple of n_bits ({spec.n_bits})"
        )
    positions = x.shape[-1] // spec.n_bits
    grouped = x.reshape(x.shape[:-1] + (positions, spec.n_bits))
    if spec.kind == ONEHOT:
        return np.argmax(grouped, axis=-1)
    codes = bit_to_int((grouped > 0).astype(np.uint8))
    top = spec.vocab_size - 1
    if spec.kind == BASE2:
        return np.minimum(codes, top)
    if spec.kind == GRAY:
        return np.minimum(gray_decode(codes), top)
    inverse = np.argsort(spec.permutation_array())
    return inverse[np.minimum(codes, top)]


def hamming_correlation(spec: CodecSpec, chunk: int = 256) -> float:
    """Pearson correlation between symbol distance and code distance.

    Enumerates every pair of distinct symbols (i, j) and correlates
    |i - j| with the Hamming distance between their codes. Near zero for
    the permuted code, clearly positive for the ordered ones. Returns 0.0
    when the statistic is degenerate (fewer than two distinct pairs, or a
    constant column).
    """
    if spec.kind == ONEHOT:
        raise ConfigError("hamming correlation is not defined for one-hot codes "
                          "(all pairwise distances equal 2)")
    if spec.vocab_size > MAX_ENUMERABLE_VOCAB:
        raise ValueError(
            f"vocab_size {spec.vocab_size} exceeds enumeration cap {MAX_ENUMERABLE_VOCAB}"
        )
    k = spec.vocab_size
    bits = int_to_bits(symbol_codes(spec), spec.n_bits)
    symbols = np.arange(k)

    # Pearson r over ordered pairs i != j equals r over unordered pairs,
    # so accumulate moments over the full off-diagonal in row chunks.
    n = 0
    sx = sy = sxx = syy = sxy = 0.0
    for start in range(0, k, chunk):
        stop = min(start + chunk, k)
        ham = (bits[start:stop, None, :] != bits[None, :, :]).sum(axis=-1)
        dist = np.abs(symbols[start:stop, None] - symbols[None, :])
        mask = symbols[start:stop, None] != symbols[None, :]
        x = dist[mask].astype(np.float64)
        y = ham[mask].astype(np.float64)
        n += x.size
        sx += x.sum()
        sy += y.sum()
        sxx += (x * x).sum()
        syy += (y * y).sum()
        sxy += (x * y).sum()
    if n < 2:
        return 0.0
    var_x = n * sxx - sx * sx
    var_y = n * syy - sy * sy
    if var_x <= 0 or var_y <= 0:
        return 0.0
    return float((n * sxy - sx * sy) / math.sqrt(var_x * var_y))
