"""Encode/decode gradient vectors under the scaled-sign, sparse b-bit and ternary schemes.

Wire formats (all integers and floats little-endian)::

    GRDV  b"GRDV" | 0x01 | u64 d | d x f32
    GRDQ  b"GRDQ" | 0x01 | u8 tag | payload

    tag 1 scaled sign     u64 d | f32 scale | ceil(d/8) bytes sign bitmap
    tag 2 sparse b-bit    u64 d | u8 b | u64 K | f32 lo | f32 hi | u8 index mode
                          | index block | value block
    tag 3 ternary         u64 d | f32 scale | ceil(d/5) bytes of base-3 trits

Bit fields are packed LSB-first.  Sign bitmap: 1 means ``u_i >= 0``.  Sparse
index block: mode 0 is a d-bit occupancy bitmap, mode 1 is ``u8 w`` followed
by K gaps of w bits each (gap = index - previous index - 1, previous = -1).
The value block holds, per retained entry, one sign bit then ``b - 1``
magnitude bits indexing a uniform grid on [lo, hi] of retained magnitudes;
for ``b == 32`` it holds raw f32 values instead.  Ternary trits are packed
five per byte as ``sum t_j 3^j`` with digit 0 = zero, 1 = plus, 2 = minus.
"""
import io
import math
import struct
from dataclasses import dataclass

import numpy as np

from .gauss import RdPoint, binary_entropy, discrete_entropy

GRDV_MAGIC = b"GRDV"
GRDQ_MAGIC = b"GRDQ"
VERSION = 1

TAG_SCALED_SIGN = 1
TAG_SPARSE = 2
TAG_TERNARY = 3

INDEX_BITMAP = 0
INDEX_DELTA = 1
BITMAP_DENSITY = 1.0 / 16

# hard cap on the declared length of a decoded vector (guards corrupt headers)
MAX_DIM = 1 << 26

_F32 = np.dtype("<f4")


class CodecFormatError(ValueError):
    """Malformed encoded data; ``offset`` is the byte position of the first violation."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


# --------------------------------------------------------------------------
# encoded representations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaledSign:
    d: int
    scale: float
    signs: np.ndarray  # bool, True where u_i >= 0

    tag = TAG_SCALED_SIGN

    def payload_bits(self):
        return 32 + self.d

    def entropy_bits(self):
        return self.d * binary_entropy(float(np.mean(self.signs)))

    def same_as(self, other):
        return (type(other) is ScaledSign and self.d == other.d and _f32eq(self.scale, other.scale)
                and np.array_equal(self.signs, other.signs))


@dataclass(frozen=True)
class SparseBbit:
    d: int
    b: int
    indices: np.ndarray  # int64, strictly increasing
    codes: np.ndarray    # uint32: sign bit << (b-1) | magnitude code, or raw f32 bits for b=32
    lo: float
    hi: float

    tag = TAG_SPARSE

    @property
    def K(self):
        return len(self.indices)

    @property
    def index_mode(self):
        return INDEX_BITMAP if self.K > BITMAP_DENSITY * self.d else INDEX_DELTA

    def index_bits(self):
        if self.index_mode == INDEX_BITMAP:
            return self.d
        return 8 + self.K * _gap_width(self.indices)

    def payload_bits(self):
        return 64 + self.index_bits() + self.K * self.b

    def entropy_bits(self):
        return self.d * binary_entropy(self.K / self.d) + self.K * self.b

    def same_as(self, other):
        return (type(other) is SparseBbit and self.d == other.d and self.b == other.b
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.codes, other.codes)
                and _f32eq(self.lo, other.lo) and _f32eq(self.hi, other.hi))


@dataclass(frozen=True)
class TernaryThreshold:
    d: int
    scale: float
    symbols: np.ndarray  # int8 in {-1, 0, 1}

    tag = TAG_TERNARY

    def payload_bits(self):
        return 32 + 8 * _ceil_div(self.d, 5)

    def entropy_bits(self):
        counts = np.bincount(self.symbols.astype(np.int64) + 1, minlength=3)
        return self.d * discrete_entropy(counts / self.d)

    def same_as(self, other):
        return (type(other) is TernaryThreshold and self.d == other.d
                and _f32eq(self.scale, other.scale) and np.array_equal(self.symbols, other.symbols))


def _f32eq(a, b):
    return np.float32(a).tobytes() == np.float32(b).tobytes()


def _ceil_div(a, b):
    return -(-a // b)


def _as_vector(u):
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size < 1:
        raise ValueError("gradient vector must have at least one component")
    if not np.all(np.isfinite(u)):
        raise ValueError("gradient vector must be finite")
    return u


def _f32(x):
    return float(np.float32(x))


def _f32_up(x):
    f = np.float32(x)
    if float(f) < x:
        f = np.nextafter(f, np.float32(np.inf))
    return float(f)


# --------------------------------------------------------------------------
# encoders
# --------------------------------------------------------------------------

def encode_scaled_sign(u):
    u = _as_vector(u)
    scale = _f32(np.abs(u).sum() / u.size)
    return ScaledSign(u.size, scale, u >= 0)


def _grid_codes(values, b):
    """Sign-magnitude codes of ``values`` on a uniform grid over their magnitudes."""
    if b == 32:
        raw = values.astype(_F32)
        return raw.view(np.uint32).copy(), 0.0, 0.0
    mag = np.abs(values)
    # lo rounds up so every decoded magnitude stays >= the smallest kept one
    lo = _f32_up(mag.min()) if mag.size else 0.0
    hi = max(_f32(mag.max()), lo) if mag.size else 0.0
    top = (1 << (b - 1)) - 1
    if hi > lo:
        q = np.rint((mag - lo) / (hi - lo) * top)
        q = np.clip(q, 0, top).astype(np.uint32)
    else:
        q = np.zeros(mag.size, dtype=np.uint32)
    sign = (values < 0).astype(np.uint32) << np.uint32(b - 1)
    return sign | q, lo, hi


def _grid_values(codes, b, lo, hi):
    if b == 32:
        return codes.astype(np.uint32).view(_F32).astype(np.float64)
    top = (1 << (b - 1)) - 1
    q = (codes & np.uint32(top)).astype(np.float64)
    t = q / top
    # endpoint-exact interpolation: t=0 gives lo, t=1 gives hi
    mag = lo * (1.0 - t) + hi * t
    neg = (codes >> np.uint32(b - 1)) & np.uint32(1)
    return np.where(neg == 1, -mag, mag)


def _check_b(b):
    b = int(b)
    if not 2 <= b <= 32:
        raise ValueError(f"b must be in [2, 32], got {b}")
    return b


def encode_topk_largest(u, K, b):
    """Keep the K largest-magnitude entries (ties to the lower index) at b bits."""
    u = _as_vector(u)
    K = int(K)
    if not 1 <= K <= u.size:
        raise ValueError(f"K must be in [1, {u.size}], got {K}")
    b = _check_b(b)
    order = np.argsort(-np.abs(u), kind="stable")
    idx = np.sort(order[:K])
    codes, lo, hi = _grid_codes(u[idx], b)
    return SparseBbit(u.size, b, idx.astype(np.int64), codes, lo, hi)


def encode_threshold_bbit(u, tau, b):
    """Zero every entry with ``|u_i| < tau``; keep the rest at b bits."""
    u = _as_vector(u)
    if not tau > 0:
        raise ValueError("tau must be positive")
    b = _check_b(b)
    idx = np.flatnonzero(np.abs(u) >= tau)
    codes, lo, hi = _grid_codes(u[idx], b)
    return SparseBbit(u.size, b, idx.astype(np.int64), codes, lo, hi)


def encode_ternary_threshold(u, tau, reconstruction="average"):
    """Ternary symbols by thresholding at ``tau``.

    ``reconstruction="average"`` scales by the mean magnitude of the retained
    entries; ``"threshold"`` uses ``tau`` itself as the scale.
    """
    u = _as_vector(u)
    if not tau > 0:
        raise ValueError("tau must be positive")
    keep = np.abs(u) >= tau
    symbols = np.where(keep, np.where(u >= 0, 1, -1), 0).astype(np.int8)
    if reconstruction == "average":
        scale = _f32(np.abs(u[keep]).mean()) if keep.any() else 0.0
    elif reconstruction == "threshold":
        scale = _f32(tau) if keep.any() else 0.0
    else:
        raise ValueError("reconstruction must be 'average' or 'threshold'")
    return TernaryThreshold(u.size, scale, symbols)


def decode(enc):
    """Reconstructed gradient (float64) of an encoded representation."""
    if isinstance(enc, ScaledSign):
        return np.where(enc.signs, enc.scale, -enc.scale).astype(np.float64)
    if isinstance(enc, SparseBbit):
        out = np.zeros(enc.d)
        if enc.K:
            if enc.indices[-1] >= enc.d or enc.indices[0] < 0 or np.any(np.diff(enc.indices) <= 0):
                raise CodecFormatError("sparse indices must be strictly increasing and < d")
            out[enc.indices] = _grid_values(enc.codes, enc.b, enc.lo, enc.hi)
        return out
    if isinstance(enc, TernaryThreshold):
        return enc.scale * enc.symbols.astype(np.float64)
    raise CodecFormatError(f"unknown encoding type {type(enc).__name__}")


@dataclass(frozen=True)
class EmpiricalRd:
    rate_raw: float
    rate_entropy: float
    distortion: float

    @property
    def point(self):
        return RdPoint(self.rate_entropy, self.distortion)


def measure_empirical_rd(u, enc):
    """Per-component raw and entropy-coded rate, and distortion relative to var(u)."""
    u = _as_vector(u)
    if u.size != enc.d:
        raise ValueError("encoding length does not match the vector")
    err = u - decode(enc)
    mse = float(np.mean(err * err))
    var = float(np.var(u))
    dist = mse / var if var > 0 else (0.0 if mse == 0 else math.inf)
    return EmpiricalRd(enc.payload_bits() / enc.d, enc.entropy_bits() / enc.d, dist)


# --------------------------------------------------------------------------
# bit packing
# --------------------------------------------------------------------------

def _gap_width(indices):
    if len(indices) == 0:
        return 1
    gaps = np.diff(np.concatenate(([-1], indices))) - 1
    return max(1, int(gaps.max()).bit_length())


def _pack_fields(values, width):
    """Pack unsigned ints of ``width`` bits each, LSB-first, into bytes."""
    values = np.asarray(values, dtype=np.uint64)
    if values.size == 0:
        return b""
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def _unpack_fields(buf, count, width, offset=0):
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    pad = np.flatnonzero(bits[count * width:])
    if pad.size:
        raise CodecFormatError("non-zero padding bits", offset + (count * width + int(pad[0])) // 8)
    if count == 0:
        return np.zeros(0, dtype=np.uint64)
    bits = bits[: count * width].reshape(count, width).astype(np.uint64)
    shifts = np.arange(width, dtype=np.uint64)
    return (bits << shifts[None, :]).sum(axis=1, dtype=np.uint64)


def _pack_trits(symbols):
    digits = np.where(symbols < 0, 2, symbols).astype(np.uint16)
    pad = (-len(digits)) % 5
    digits = np.concatenate((digits, np.zeros(pad, dtype=np.uint16))).reshape(-1, 5)
    weights = np.array([1, 3, 9, 27, 81], dtype=np.uint16)
    return (digits * weights).sum(axis=1).astype(np.uint8).tobytes()


def _unpack_trits(buf, d, offset):
    raw = np.frombuffer(buf, dtype=np.uint8).astype(np.int64)
    bad = np.flatnonzero(raw >= 243)
    if bad.size:
        raise CodecFormatError("trit byte out of range", offset + int(bad[0]))
    digits = (raw[:, None] // np.array([1, 3, 9, 27, 81])[None, :]) % 3
    digits = digits.ravel()
    if np.any(digits[d:]):
        raise CodecFormatError("non-zero padding trits", offset + d // 5)
    digits = digits[:d]
    return np.where(digits == 2, -1, digits).astype(np.int8)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def to_bytes(enc):
    out = io.BytesIO()
    out.write(GRDQ_MAGIC)
    out.write(struct.pack("<BB", VERSION, enc.tag))
    out.write(struct.pack("<Q", enc.d))
    if isinstance(enc, ScaledSign):
        out.write(struct.pack("<f", enc.scale))
        out.write(np.packbits(enc.signs.astype(np.uint8), bitorder="little").tobytes())
    elif isinstance(enc, SparseBbit):
        out.write(struct.pack("<BQffB", enc.b, enc.K, enc.lo, enc.hi, enc.index_mode))
        if enc.index_mode == INDEX_BITMAP:
            occ = np.zeros(enc.d, dtype=np.uint8)
            occ[enc.indices] = 1
            out.write(np.packbits(occ, bitorder="little").tobytes())
        else:
            width = _gap_width(enc.indices)
            gaps = np.diff(np.concatenate(([-1], enc.indices))) - 1
            out.write(struct.pack("<B", width))
            out.write(_pack_fields(gaps, width))
        out.write(_pack_fields(enc.codes, enc.b))
    elif isinstance(enc, TernaryThreshold):
        out.write(struct.pack("<f", enc.scale))
        out.write(_pack_trits(enc.symbols))
    else:
        raise TypeError(f"cannot serialize {type(enc).__name__}")
    return out.getvalue()


class _Reader:
    def __init__(self, data):
        self.data = bytes(data)
        self.pos = 0

    def take(self, n, what):
        if n < 0 or self.pos + n > len(self.data):
            raise CodecFormatError(f"truncated {what}: need {n} bytes, "
                                   f"{len(self.data) - self.pos} left", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def finish(self):
        if self.pos != len(self.data):
            raise CodecFormatError(f"{len(self.data) - self.pos} trailing bytes", self.pos)


def _read_header(r, magic):
    got = r.take(4, "magic")
    if got != magic:
        raise CodecFormatError(f"bad magic {got!r}, expected {magic!r}", 0)
    (version,) = r.unpack("<B", "version")
    if version != VERSION:
        raise CodecFormatError(f"unsupported version {version}", 4)


def _read_length(r):
    at = r.pos
    (d,) = r.unpack("<Q", "length")
    if d < 1 or d > MAX_DIM:
        raise CodecFormatError(f"vector length {d} outside [1, {MAX_DIM}]", at)
    return d


def _check_finite(value, what, at):
    if not math.isfinite(value):
        raise CodecFormatError(f"{what} is not finite", at)


def from_bytes(data):
    """Parse a GRDQ document; raises CodecFormatError on any violation."""
    r = _Reader(data)
    _read_header(r, GRDQ_MAGIC)
    tag_at = r.pos
    (tag,) = r.unpack("<B", "scheme tag")
    d = _read_length(r)
    if tag == TAG_SCALED_SIGN:
        at = r.pos
        (scale,) = r.unpack("<f", "scale")
        _check_finite(scale, "scale", at)
        if scale < 0:
            raise CodecFormatError("negative scale", at)
        at = r.pos
        packed = np.frombuffer(r.take(_ceil_div(d, 8), "sign bitmap"), dtype=np.uint8)
        bits = np.unpackbits(packed, bitorder="little")
        if np.any(bits[d:]):
            raise CodecFormatError("non-zero bitmap padding", at + d // 8)
        enc = ScaledSign(d, scale, bits[:d].astype(bool))
    elif tag == TAG_SPARSE:
        enc = _read_sparse(r, d)
    elif tag == TAG_TERNARY:
        at = r.pos
        (scale,) = r.unpack("<f", "scale")
        _check_finite(scale, "scale", at)
        if scale < 0:
            raise CodecFormatError("negative scale", at)
        at = r.pos
        symbols = _unpack_trits(r.take(_ceil_div(d, 5), "trits"), d, at)
        enc = TernaryThreshold(d, scale, symbols)
    else:
        raise CodecFormatError(f"unknown scheme tag {tag}", tag_at)
    r.finish()
    return enc


def _read_sparse(r, d):
    at = r.pos
    b, K, lo, hi, mode = r.unpack("<BQffB", "sparse header")
    if not 2 <= b <= 32:
        raise CodecFormatError(f"bit width {b} outside [2, 32]", at)
    if K > d:
        raise CodecFormatError(f"K={K} exceeds d={d}", at + 1)
    for val, name, off in ((lo, "lo", 9), (hi, "hi", 13)):
        _check_finite(val, name, at + off)
    if b < 32 and not 0 <= lo <= hi:
        raise CodecFormatError("value grid needs 0 <= lo <= hi", at + 9)
    expected_mode = INDEX_BITMAP if K > BITMAP_DENSITY * d else INDEX_DELTA
    if mode != expected_mode:
        raise CodecFormatError(f"index mode {mode} inconsistent with K/d", at + 17)
    at = r.pos
    if mode == INDEX_BITMAP:
        bits = np.unpackbits(np.frombuffer(r.take(_ceil_div(d, 8), "index bitmap"), dtype=np.uint8),
                             bitorder="little")
        if np.any(bits[d:]):
            raise CodecFormatError("non-zero bitmap padding", at + d // 8)
        indices = np.flatnonzero(bits[:d]).astype(np.int64)
        if len(indices) != K:
            raise CodecFormatError(f"bitmap marks {len(indices)} entries, header says {K}", at)
    else:
        (width,) = r.unpack("<B", "gap width")
        if not 1 <= width <= 63:
            raise CodecFormatError(f"gap width {width} outside [1, 63]", at)
        at = r.pos
        gaps = _unpack_fields(r.take(_ceil_div(K * width, 8), "index gaps"), K, width, at)
        indices = np.cumsum(gaps.astype(np.float64) + 1.0) - 1.0
        if K and indices[-1] >= d:
            raise CodecFormatError("sparse index out of range", at)
        indices = indices.astype(np.int64)
        if width != _gap_width(indices):
            raise CodecFormatError("gap width is not minimal", at - 1)
    at = r.pos
    codes = _unpack_fields(r.take(_ceil_div(K * b, 8), "values"), K, b, at).astype(np.uint32)
    if b == 32:
        vals = codes.view(_F32)
        if not np.all(np.isfinite(vals)):
            raise CodecFormatError("non-finite stored value", at)
        if lo != 0 or hi != 0:
            raise CodecFormatError("raw values carry no grid", at)
    return SparseBbit(d, b, indices, codes, lo, hi)


def gradient_to_bytes(u):
    u = _as_vector(u)
    return GRDV_MAGIC + struct.pack("<BQ", VERSION, u.size) + u.astype(_F32).tobytes()


def gradient_from_bytes(data):
    r = _Reader(data)
    _read_header(r, GRDV_MAGIC)
    d = _read_length(r)
    at = r.pos
    vals = np.frombuffer(r.take(4 * d, "values"), dtype=_F32)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise CodecFormatError("non-finite value", at + 4 * int(bad[0]))
    r.finish()
    return vals.astype(np.float64)


def encode(u, scheme, **params):
    """Dispatch by scheme name: scaled-sign, topk, threshold, ternary."""
    if scheme == "scaled-sign":
        return encode_scaled_sign(u)
    if scheme == "topk":
        return encode_topk_largest(u, params["k"], params.get("b", 32))
    if scheme == "threshold":
        return encode_threshold_bbit(u, params["tau"], params.get("b", 32))
    if scheme == "ternary":
        return encode_ternary_threshold(u, params["tau"], params.get("reconstruction", "average"))
    raise ValueError(f"unknown codec scheme {scheme!r}")
