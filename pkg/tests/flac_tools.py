"""Tiny FLAC encoder used only to exercise the decoder in tests.

Writes legal mono 16-bit streams with a choice of subframe strategies:
constant, verbatim, fixed-predictor orders 1/2 with Rice residuals (plus an
escaped-partition variant) and a first-order LPC subframe.
"""

from __future__ import annotations

import numpy as np


def crc8(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


def crc16(data: bytes) -> int:
    crc = 0
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x8005) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


class BitWriter:
    def __init__(self):
        self._bytes = bytearray()
        self._acc = 0
        self._nbits = 0

    def write_uint(self, value: int, n: int) -> None:
        assert 0 <= value < (1 << n)
        self._acc = (self._acc << n) | value
        self._nbits += n
        while self._nbits >= 8:
            self._nbits -= 8
            self._bytes.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def write_sint(self, value: int, n: int) -> None:
        self.write_uint(value & ((1 << n) - 1), n)

    def write_unary(self, q: int) -> None:
        for _ in range(q):
            self.write_uint(0, 1)
        self.write_uint(1, 1)

    def align(self) -> None:
        if self._nbits:
            self.write_uint(0, 8 - self._nbits)

    def getvalue(self) -> bytes:
        assert self._nbits == 0
        return bytes(self._bytes)


def _utf8_number(value: int) -> bytes:
    if value < 0x80:
        return bytes([value])
    if value < 0x800:
        return bytes([0xC0 | (value >> 6), 0x80 | (value & 0x3F)])
    return bytes([0xE0 | (value >> 12), 0x80 | ((value >> 6) & 0x3F),
                  0x80 | (value & 0x3F)])


def _rice_write(w: BitWriter, residuals, param: int) -> None:
    for v in residuals:
        u = (v << 1) ^ (v >> 63) if v >= 0 else ((-v) << 1) - 1
        u = (v << 1) if v >= 0 else ((-v) << 1) - 1
        w.write_unary(u >> param)
        if param:
            w.write_uint(u & ((1 << param) - 1), param)


def _pick_rice_param(residuals) -> int:
    mean_abs = float(np.mean(np.abs(residuals))) if len(residuals) else 0.0
    return int(min(max(np.ceil(np.log2(mean_abs + 1.0)), 0), 14))


def _write_residual(w: BitWriter, residuals, escape_bits: int | None) -> None:
    w.write_uint(0, 2)   # 4-bit Rice parameters
    w.write_uint(0, 4)   # partition order 0
    if escape_bits is not None:
        w.write_uint(0xF, 4)
        w.write_uint(escape_bits, 5)
        for v in residuals:
            w.write_sint(int(v), escape_bits)
    else:
        param = _pick_rice_param(residuals)
        w.write_uint(param, 4)
        _rice_write(w, [int(v) for v in residuals], param)


_FIXED_COEFFS = {1: [1], 2: [2, -1]}


def _write_subframe(w: BitWriter, block: np.ndarray, mode: str) -> None:
    w.write_uint(0, 1)
    if mode == "constant" and np.all(block == block[0]):
        w.write_uint(0, 6)
        w.write_uint(0, 1)
        w.write_sint(int(block[0]), 16)
        return
    if mode.startswith("fixed") or mode == "escape":
        order = 2 if mode in ("fixed2", "escape") else 1
        w.write_uint(8 + order, 6)
        w.write_uint(0, 1)
        for s in block[:order]:
            w.write_sint(int(s), 16)
        coeffs = _FIXED_COEFFS[order]
        residuals = []
        for t in range(order, len(block)):
            pred = sum(c * int(block[t - 1 - i]) for i, c in enumerate(coeffs))
            residuals.append(int(block[t]) - pred)
        _write_residual(w, residuals, 18 if mode == "escape" else None)
        return
    if mode == "lpc1":
        # x[t] ~ (24 * x[t-1]) >> 5, coefficient precision 6 bits
        w.write_uint(0x20, 6)  # LPC order 1
        w.write_uint(0, 1)
        w.write_sint(int(block[0]), 16)
        w.write_uint(6 - 1, 4)
        w.write_sint(5, 5)
        coeff = 24
        w.write_sint(coeff, 6)
        residuals = [int(block[t]) - ((coeff * int(block[t - 1])) >> 5)
                     for t in range(1, len(block))]
        _write_residual(w, residuals, None)
        return
    # verbatim fallback
    w.write_uint(1, 6)
    w.write_uint(0, 1)
    for s in block:
        w.write_sint(int(s), 16)


def encode_flac(samples, sample_rate: int, blocksize: int = 256,
                mode: str = "verbatim") -> bytes:
    """Encode int16 mono samples; ``mode`` picks the subframe strategy."""
    samples = np.asarray(samples, dtype=np.int64)
    assert samples.ndim == 1 and samples.size > 0

    out = bytearray(b"fLaC")
    info = BitWriter()
    info.write_uint(blocksize, 16)
    info.write_uint(blocksize, 16)
    info.write_uint(0, 24)
    info.write_uint(0, 24)
    info.write_uint(sample_rate, 20)
    info.write_uint(0, 3)    # channels - 1
    info.write_uint(15, 5)   # bits per sample - 1
    info.write_uint(samples.size, 36)
    info_bytes = info.getvalue() + b"\x00" * 16
    out += bytes([0x80]) + len(info_bytes).to_bytes(3, "big") + info_bytes

    frame_idx = 0
    for start in range(0, samples.size, blocksize):
        block = samples[start:start + blocksize]
        header = BitWriter()
        header.write_uint(0x3FFE, 14)
        header.write_uint(0, 1)
        header.write_uint(0, 1)  # fixed-blocksize stream
        header.write_uint(7, 4)  # 16-bit blocksize - 1 follows
        header.write_uint(13, 4)  # 16-bit sample rate in Hz follows
        header.write_uint(0, 4)  # mono
        header.write_uint(4, 3)  # 16-bit samples
        header.write_uint(0, 1)
        header_bytes = header.getvalue() + _utf8_number(frame_idx)
        tail = BitWriter()
        tail.write_uint(block.size - 1, 16)
        tail.write_uint(sample_rate, 16)
        header_bytes += tail.getvalue()
        header_bytes += bytes([crc8(header_bytes)])

        body = BitWriter()
        sub_mode = mode if block.size > 2 else "verbatim"
        if mode == "constant" and not np.all(block == block[0]):
            sub_mode = "verbatim"
        _write_subframe(body, block, sub_mode)
        body.align()
        frame = header_bytes + body.getvalue()
        frame += crc16(frame).to_bytes(2, "big")
        out += frame
        frame_idx += 1
    return bytes(out)
