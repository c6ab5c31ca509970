"""Threshold selection, k-bit LSB embedding/extraction and the stego-key sidecar.

Selected channel values are visited channel by channel, then row by row,
then column by column. Each visited value carries ``k`` message bits in its
``k`` least significant bits; the first bit of each group goes to the most
significant of those positions.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .similarity import SimilarityMethod

MAGIC = b"ITS2"
VERSION = 1
_HEADER = struct.Struct(">4sBBBBIIdQ")
_CRC = struct.Struct(">I")


class CapacityError(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(f"message needs {required} bits but only {available} bits are available")
        self.required = required
        self.available = available


class KeyFormatError(ValueError):
    """Malformed, truncated or corrupted stego key."""


class ShapeMismatchError(ValueError):
    pass


def indicator(smap: np.ndarray, th: float) -> np.ndarray:
    if not (0.0 <= th <= 1.0):
        raise ValueError(f"threshold {th} outside [0, 1]")
    return np.asarray(smap) >= th


def capacity_bits(ind: np.ndarray, k: int) -> int:
    return 3 * k * int(np.count_nonzero(ind))


def capacity(ind: np.ndarray, k: int) -> float:
    """Embeddable bits as a percentage of all bits of the (H, W, 3) 8-bit image."""
    h, w = ind.shape
    return 100.0 * k * int(np.count_nonzero(ind)) / (8.0 * h * w)


def _check_k(k: int) -> None:
    if not (1 <= int(k) <= 8):
        raise ValueError(f"k must be in [1, 8], got {k}")


@dataclass(frozen=True, eq=False)
class StegoKey:
    height: int
    width: int
    k: int
    th: float
    method: SimilarityMethod
    message_bit_length: int
    mask: np.ndarray

    def __post_init__(self):
        _check_k(self.k)
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.height, self.width):
            raise ShapeMismatchError(f"mask shape {m.shape} != ({self.height}, {self.width})")
        object.__setattr__(self, "mask", m)
        if self.message_bit_length > capacity_bits(m, self.k):
            raise CapacityError(self.message_bit_length, capacity_bits(m, self.k))

    def __eq__(self, other):
        if not isinstance(other, StegoKey):
            return NotImplemented
        return (self.height, self.width, self.k, self.th, self.method, self.message_bit_length) == (
            other.height, other.width, other.k, other.th, other.method, other.message_bit_length
        ) and np.array_equal(self.mask, other.mask)

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, VERSION, self.method.code, self.k, 0,
                            self.height, self.width, float(self.th), self.message_bit_length)
        body = head + np.packbits(self.mask.ravel(), bitorder="big").tobytes()
        return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)

    @classmethod
    def from_bytes(cls, data: bytes) -> "StegoKey":
        if len(data) < _HEADER.size + _CRC.size:
            raise KeyFormatError(f"key is truncated ({len(data)} bytes)")
        magic, version, method, k, _, h, w, th, nbits = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise KeyFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise KeyFormatError(f"unsupported key version {version}")
        mask_len = (h * w + 7) // 8
        expected = _HEADER.size + mask_len + _CRC.size
        if len(data) != expected:
            raise KeyFormatError(f"key is {len(data)} bytes, expected {expected} for a {h}x{w} mask")
        body, (crc,) = data[:-_CRC.size], _CRC.unpack(data[-_CRC.size:])
        if zlib.crc32(body) & 0xFFFFFFFF != crc:
            raise KeyFormatError("checksum mismatch; key is corrupted")
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8, offset=_HEADER.size),
                             count=h * w, bitorder="big")
        try:
            return cls(h, w, k, th, SimilarityMethod.from_code(method), nbits, bits.reshape(h, w).astype(bool))
        except (ValueError, CapacityError) as e:
            raise KeyFormatError(str(e)) from e


def key_serialize(key: StegoKey) -> bytes:
    return key.to_bytes()


def key_deserialize(data: bytes) -> StegoKey:
    return StegoKey.from_bytes(data)


def _carrier_index(shape: tuple[int, int], ind: np.ndarray) -> np.ndarray:
    """Flat (H, W, 3) indices of the selected values in traversal order."""
    h, w = shape
    pix = np.flatnonzero(ind.ravel())
    return (pix[None, :] * 3 + np.arange(3)[:, None]).ravel()


def embed(cover: np.ndarray, ind: np.ndarray, k: int, bits, th: float = 0.0,
          method=SimilarityMethod.IT2FLS) -> tuple[np.ndarray, StegoKey]:
    """Hide the 0/1 sequence ``bits`` in the k LSBs of the selected channel values."""
    _check_k(k)
    cover = np.asarray(cover)
    if cover.dtype != np.uint8 or cover.ndim != 3 or cover.shape[2] != 3:
        raise ValueError("cover must be an (H, W, 3) uint8 array")
    ind = np.asarray(ind, dtype=bool)
    if ind.shape != cover.shape[:2]:
        raise ShapeMismatchError(f"indicator {ind.shape} does not match cover {cover.shape[:2]}")
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size and bits.max() > 1:
        raise ValueError("message must be a sequence of 0/1 bits")
    avail = capacity_bits(ind, k)
    if bits.size > avail:
        raise CapacityError(bits.size, avail)

    stego = cover.copy()
    n_full, rest = divmod(bits.size, k)
    n_vals = n_full + (1 if rest else 0)
    idx = _carrier_index(ind.shape, ind)[:n_vals]
    flat = stego.reshape(-1)
    weights = (1 << np.arange(k - 1, -1, -1)).astype(np.uint16)
    if n_full:
        groups = bits[:n_full * k].reshape(n_full, k).astype(np.uint16) @ weights
        low = np.uint8((1 << k) - 1)
        flat[idx[:n_full]] = (flat[idx[:n_full]] & ~low) | groups.astype(np.uint8)
    if rest:
        # Partial last group fills the top `rest` of the k positions; lower bits are untouched.
        v = int(flat[idx[-1]])
        for j, b in enumerate(bits[n_full * k:]):
            pos = k - 1 - j
            v = (v & ~(1 << pos)) | (int(b) << pos)
        flat[idx[-1]] = v
    key = StegoKey(cover.shape[0], cover.shape[1], k, float(th), SimilarityMethod.parse(method), int(bits.size), ind)
    return stego, key


def extract(stego: np.ndarray, key: StegoKey) -> np.ndarray:
    stego = np.asarray(stego)
    if stego.shape != (key.height, key.width, 3):
        raise ShapeMismatchError(f"stego image {stego.shape} does not match key ({key.height}, {key.width}, 3)")
    k = key.k
    n_vals = -(-key.message_bit_length // k)
    idx = _carrier_index(key.mask.shape, key.mask)[:n_vals]
    vals = stego.reshape(-1)[idx]
    shifts = np.arange(k - 1, -1, -1, dtype=np.uint8)
    bits = (vals[:, None] >> shifts[None, :]) & 1
    return bits.ravel()[:key.message_bit_length].astype(np.uint8)


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")


def bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="big").tobytes()
