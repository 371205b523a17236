"""Minimal native-FLAC decoder.

Supports the subset needed for this toolkit's corpora: single-channel
streams with constant, verbatim, fixed-predictor and LPC subframes and
Rice-coded residuals (both 4- and 5-bit parameter variants, including
escaped partitions). Frame CRCs are parsed but not verified; structural
corruption and truncation are detected instead.
"""

from __future__ import annotations

import numpy as np


class FlacError(ValueError):
    """Malformed, truncated or unsupported FLAC stream."""


_BLOCKSIZE_FROM_CODE = {1: 192}
_BLOCKSIZE_FROM_CODE.update({c: 576 << (c - 2) for c in range(2, 6)})
_BLOCKSIZE_FROM_CODE.update({c: 256 << (c - 8) for c in range(8, 16)})

_SAMPLE_SIZE_FROM_CODE = {1: 8, 2: 12, 4: 16, 5: 20, 6: 24, 7: 32}

_FIXED_COEFFS = {
    0: [],
    1: [1],
    2: [2, -1],
    3: [3, -3, 1],
    4: [4, -6, 4, -1],
}


class _BitReader:
    """MSB-first bit cursor over an immutable byte buffer."""

    def __init__(self, data: bytes):
        self._data = data
        self._nbits = 8 * len(data)
        self.pos = 0  # bit position

    def remaining(self) -> int:
        return self._nbits - self.pos

    def read_uint(self, n: int) -> int:
        if self.pos + n > self._nbits:
            raise FlacError("truncated stream")
        value = 0
        pos = self.pos
        data = self._data
        need = n
        while need > 0:
            byte_idx, bit_off = divmod(pos, 8)
            take = min(8 - bit_off, need)
            chunk = data[byte_idx] >> (8 - bit_off - take)
            value = (value << take) | (chunk & ((1 << take) - 1))
            pos += take
            need -= take
        self.pos = pos
        return value

    def read_sint(self, n: int) -> int:
        v = self.read_uint(n)
        if v >= 1 << (n - 1):
            v -= 1 << n
        return v

    def read_unary(self) -> int:
        count = 0
        while True:
            if self.pos >= self._nbits:
                raise FlacError("truncated stream")
            if self.read_uint(1):
                return count
            count += 1

    def align_to_byte(self) -> None:
        self.pos = (self.pos + 7) & ~7


def _parse_streaminfo(reader: _BitReader):
    reader.read_uint(16)  # min blocksize
    reader.read_uint(16)  # max blocksize
    reader.read_uint(24)  # min framesize
    reader.read_uint(24)  # max framesize
    sample_rate = reader.read_uint(20)
    channels = reader.read_uint(3) + 1
    bits = reader.read_uint(5) + 1
    total = reader.read_uint(36)
    reader.read_uint(128)  # MD5, unverified
    if sample_rate == 0:
        raise FlacError("invalid sample rate in STREAMINFO")
    return sample_rate, channels, bits, total


def _read_utf8_number(reader: _BitReader) -> int:
    b0 = reader.read_uint(8)
    if b0 < 0x80:
        return b0
    extra = 0
    mask = 0x40
    while b0 & mask:
        extra += 1
        mask >>= 1
    if extra == 0 or extra > 6:
        raise FlacError("bad frame number coding")
    value = b0 & (mask - 1)
    for _ in range(extra):
        cont = reader.read_uint(8)
        if cont & 0xC0 != 0x80:
            raise FlacError("bad frame number coding")
        value = (value << 6) | (cont & 0x3F)
    return value


def _read_residual(reader: _BitReader, blocksize: int, order: int) -> list[int]:
    method = reader.read_uint(2)
    if method not in (0, 1):
        raise FlacError("reserved residual coding method")
    param_bits = 4 if method == 0 else 5
    escape = (1 << param_bits) - 1
    part_order = reader.read_uint(4)
    n_parts = 1 << part_order
    if blocksize % n_parts or blocksize // n_parts <= (order if n_parts == 1 else 0):
        raise FlacError("invalid residual partitioning")
    out: list[int] = []
    for p in range(n_parts):
        count = blocksize // n_parts
        if p == 0:
            count -= order
        param = reader.read_uint(param_bits)
        if param == escape:
            raw_bits = reader.read_uint(5)
            if raw_bits:
                out.extend(reader.read_sint(raw_bits) for _ in range(count))
            else:
                out.extend([0] * count)
        else:
            for _ in range(count):
                q = reader.read_unary()
                u = (q << param) | reader.read_uint(param)
                out.append((u >> 1) ^ -(u & 1))
    return out


def _decode_subframe(reader: _BitReader, blocksize: int, bps: int) -> list[int]:
    if reader.read_uint(1):
        raise FlacError("bad subframe padding bit")
    sf_type = reader.read_uint(6)
    wasted = 0
    if reader.read_uint(1):
        wasted = reader.read_unary() + 1
    eff_bps = bps - wasted
    if eff_bps <= 0:
        raise FlacError("invalid wasted-bits count")

    if sf_type == 0:
        samples = [reader.read_sint(eff_bps)] * blocksize
    elif sf_type == 1:
        samples = [reader.read_sint(eff_bps) for _ in range(blocksize)]
    elif 8 <= sf_type <= 12:
        order = sf_type - 8
        samples = [reader.read_sint(eff_bps) for _ in range(order)]
        residual = _read_residual(reader, blocksize, order)
        coeffs = _FIXED_COEFFS[order]
        for e in residual:
            pred = 0
            for i, c in enumerate(coeffs):
                pred += c * samples[-1 - i]
            samples.append(e + pred)
    elif sf_type >= 32:
        order = (sf_type & 0x1F) + 1
        samples = [reader.read_sint(eff_bps) for _ in range(order)]
        precision = reader.read_uint(4) + 1
        if precision == 16:
            raise FlacError("invalid LPC precision code")
        shift = reader.read_sint(5)
        if shift < 0:
            raise FlacError("negative LPC shift")
        coeffs = [reader.read_sint(precision) for _ in range(order)]
        residual = _read_residual(reader, blocksize, order)
        for e in residual:
            acc = 0
            for i, c in enumerate(coeffs):
                acc += c * samples[-1 - i]
            samples.append(e + (acc >> shift))
    else:
        raise FlacError(f"reserved subframe type {sf_type}")

    if wasted:
        samples = [s << wasted for s in samples]
    return samples


def _decode_frame(reader: _BitReader, default_rate: int, default_bps: int):
    sync = reader.read_uint(14)
    if sync != 0x3FFE:
        raise FlacError("lost frame sync")
    if reader.read_uint(1):
        raise FlacError("bad frame reserved bit")
    reader.read_uint(1)  # blocking strategy
    bs_code = reader.read_uint(4)
    sr_code = reader.read_uint(4)
    ch_assign = reader.read_uint(4)
    ss_code = reader.read_uint(3)
    if reader.read_uint(1):
        raise FlacError("bad frame reserved bit")
    _read_utf8_number(reader)

    if bs_code == 0:
        raise FlacError("reserved blocksize code")
    elif bs_code == 6:
        blocksize = reader.read_uint(8) + 1
    elif bs_code == 7:
        blocksize = reader.read_uint(16) + 1
    else:
        blocksize = _BLOCKSIZE_FROM_CODE[bs_code]

    if sr_code == 12:
        reader.read_uint(8)
    elif sr_code in (13, 14):
        reader.read_uint(16)
    elif sr_code == 15:
        raise FlacError("invalid sample-rate code")

    if ss_code == 0:
        bps = default_bps
    elif ss_code in _SAMPLE_SIZE_FROM_CODE:
        bps = _SAMPLE_SIZE_FROM_CODE[ss_code]
    else:
        raise FlacError("reserved sample-size code")

    if ch_assign != 0:
        raise FlacError("multi-channel FLAC frames are not supported")

    reader.read_uint(8)  # header CRC-8, unverified
    samples = _decode_subframe(reader, blocksize, bps)
    reader.align_to_byte()
    reader.read_uint(16)  # frame CRC-16, unverified
    return samples, bps


def decode(data: bytes):
    """Decode a mono FLAC byte stream.

    Returns ``(samples, sample_rate, bits_per_sample)`` with samples as an
    ``int32`` array. Raises :class:`FlacError` on anything outside the
    supported subset.
    """
    if len(data) < 4 or data[:4] != b"fLaC":
        raise FlacError("not a FLAC stream")
    reader = _BitReader(data)
    reader.pos = 32

    streaminfo = None
    while True:
        header = reader.read_uint(8)
        last = bool(header & 0x80)
        block_type = header & 0x7F
        length = reader.read_uint(24)
        if block_type == 0:
            streaminfo = _parse_streaminfo(reader)
        else:
            if reader.remaining() < 8 * length:
                raise FlacError("truncated metadata block")
            reader.pos += 8 * length
        if last:
            break
    if streaminfo is None:
        raise FlacError("missing STREAMINFO block")
    sample_rate, channels, bits, total = streaminfo
    if channels != 1:
        raise FlacError(f"got {channels} channels, only mono is supported")

    decoded: list[int] = []
    while reader.remaining() >= 16:
        samples, bps = _decode_frame(reader, sample_rate, bits)
        if bps != bits:
            raise FlacError("frame sample size disagrees with STREAMINFO")
        decoded.extend(samples)

    if total and len(decoded) != total:
        raise FlacError(
            f"decoded {len(decoded)} samples, STREAMINFO promised {total}"
        )
    return np.asarray(decoded, dtype=np.int32), sample_rate, bits
