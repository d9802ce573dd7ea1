"""
Baseline JPEG parser returning quantized DCT coefficients and quantization tables.

Only sequential Huffman-coded 8-bit files (SOF0/SOF1) are handled.  The
entropy decoder stops before dequantization, so the returned coefficients are
exactly the integers stored in the file.

Coefficient layout follows the usual "block grid" convention: for a component
with ``by x bx`` blocks the array has shape ``(8*by, 8*bx)`` and element
``(8*i + u, 8*j + v)`` holds frequency ``(u, v)`` of block ``(i, j)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptStream, NotAJpeg, UnsupportedJpeg


def _zigzag_order() -> np.ndarray:
    cells = [(r, c) for r in range(8) for c in range(8)]
    cells.sort(key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else -rc[0]))
    return np.array([r * 8 + c for r, c in cells], dtype=np.intp)


# ZIGZAG[k] is the natural (row-major) index of the k-th coefficient in scan order
ZIGZAG = _zigzag_order()

_SOF_SUPPORTED = {0xC0, 0xC1}
_SOF_UNSUPPORTED = {
    0xC2: "progressive",
    0xC3: "lossless",
    0xC5: "differential sequential",
    0xC6: "differential progressive",
    0xC7: "differential lossless",
    0xC9: "arithmetic sequential",
    0xCA: "arithmetic progressive",
    0xCB: "arithmetic lossless",
    0xCD: "arithmetic differential sequential",
    0xCE: "arithmetic differential progressive",
    0xCF: "arithmetic differential lossless",
}
_RST = range(0xD0, 0xD8)


@dataclass
class Component:
    ident: int
    h: int
    v: int
    qtable_id: int
    blocks_y: int = 0
    blocks_x: int = 0


class HuffmanTable:
    """Canonical Huffman table with a 16-bit lookahead decoding table."""

    def __init__(self, counts: list[int], symbols: bytes):
        if sum(counts) != len(symbols):
            raise CorruptStream("Huffman table symbol count mismatch")
        lengths = np.zeros(1 << 16, dtype=np.int64)
        values = np.zeros(1 << 16, dtype=np.int64)
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(counts[length - 1]):
                if code >= (1 << length):
                    raise CorruptStream("over-subscribed Huffman table")
                lo = code << (16 - length)
                hi = (code + 1) << (16 - length)
                lengths[lo:hi] = length
                values[lo:hi] = symbols[k]
                code += 1
                k += 1
            code <<= 1
        # plain lists index faster than numpy arrays from the Python decode loop
        self.lengths = lengths.tolist()
        self.values = values.tolist()


@dataclass
class JpegData:
    width: int
    height: int
    components: list[Component]
    coefficients: list[np.ndarray]
    qtables: dict[int, np.ndarray] = field(default_factory=dict)
    frame_qtables: dict[int, np.ndarray] = field(default_factory=dict)

    def component_qtable(self, index: int) -> np.ndarray:
        """Quantization table in effect for component ``index`` when the frame was decoded."""
        return self.frame_qtables[self.components[index].qtable_id]


def _u16(buf: bytes, pos: int) -> int:
    return (buf[pos] << 8) | buf[pos + 1]


def _find_scan_end(buf: bytes, start: int) -> int:
    """Offset of the first marker after ``start`` that is neither stuffing nor RSTn."""
    pos = start
    n = len(buf)
    while True:
        pos = buf.find(b"\xff", pos)
        if pos < 0 or pos + 1 >= n:
            return n
        nxt = buf[pos + 1]
        if nxt == 0x00 or nxt in _RST or nxt == 0xFF:
            pos += 1
            continue
        return pos


def _split_restart_intervals(ecs: bytes) -> list[bytes]:
    parts = []
    start = 0
    pos = 0
    while True:
        pos = ecs.find(b"\xff", pos)
        if pos < 0 or pos + 1 >= len(ecs):
            break
        if ecs[pos + 1] in _RST:
            parts.append(ecs[start:pos])
            start = pos + 2
            pos = start
        else:
            pos += 1
    parts.append(ecs[start:])
    return [p.replace(b"\xff\x00", b"\xff") for p in parts]


class _Decoder:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.qtables: dict[int, np.ndarray] = {}
        self.dc_tables: dict[int, HuffmanTable] = {}
        self.ac_tables: dict[int, HuffmanTable] = {}
        self.restart_interval = 0
        self.frame: tuple[int, int, list[Component]] | None = None
        self.frame_qtables: dict[int, np.ndarray] = {}
        self.coef_lists: list[list[int]] = []
        self.padded: list[tuple[int, int]] = []
        self.hmax = self.vmax = 1

    def run(self) -> JpegData:
        buf = self.buf
        if len(buf) < 4 or buf[0] != 0xFF or buf[1] != 0xD8:
            raise NotAJpeg("missing SOI marker")
        pos = 2
        n = len(buf)
        saw_scan = False
        while pos < n:
            if buf[pos] != 0xFF:
                raise CorruptStream(f"expected marker at offset {pos}")
            while pos < n and buf[pos] == 0xFF:
                pos += 1
            if pos >= n:
                break
            marker = buf[pos]
            pos += 1
            if marker == 0xD9:
                break
            if marker in _RST or marker == 0x01:
                continue
            if pos + 2 > n:
                raise CorruptStream("truncated segment header")
            length = _u16(buf, pos)
            if length < 2 or pos + length > n:
                raise CorruptStream(f"bad segment length for marker 0x{marker:02X}")
            seg = buf[pos + 2:pos + length]
            pos += length
            if marker == 0xDB:
                self._dqt(seg)
            elif marker == 0xC4:
                self._dht(seg)
            elif marker == 0xDD:
                if len(seg) < 2:
                    raise CorruptStream("short DRI segment")
                self.restart_interval = _u16(seg, 0)
            elif marker in _SOF_SUPPORTED:
                self._sof(seg)
            elif marker in _SOF_UNSUPPORTED:
                raise UnsupportedJpeg(f"{_SOF_UNSUPPORTED[marker]} JPEG is not supported")
            elif marker == 0xCC:
                raise UnsupportedJpeg("arithmetic coding is not supported")
            elif marker == 0xDA:
                end = _find_scan_end(buf, pos)
                self._scan(seg, buf[pos:end])
                saw_scan = True
                pos = end
        if self.frame is None:
            raise CorruptStream("no frame header found")
        if not saw_scan:
            raise CorruptStream("no scan found")
        return self._finish()

    def _dqt(self, seg: bytes) -> None:
        i = 0
        while i < len(seg):
            pq, tq = seg[i] >> 4, seg[i] & 15
            i += 1
            if pq == 0:
                raw = np.frombuffer(seg[i:i + 64], dtype=np.uint8).astype(np.uint16)
                i += 64
            else:
                raw = np.frombuffer(seg[i:i + 128], dtype=">u2").astype(np.uint16)
                i += 128
            if raw.size != 64:
                raise CorruptStream("truncated quantization table")
            table = np.empty(64, dtype=np.uint16)
            table[ZIGZAG] = raw
            if (table == 0).any():
                raise CorruptStream("quantization step of zero")
            self.qtables[tq] = table.reshape(8, 8)

    def _dht(self, seg: bytes) -> None:
        i = 0
        while i < len(seg):
            tc, th = seg[i] >> 4, seg[i] & 15
            counts = list(seg[i + 1:i + 17])
            if len(counts) != 16:
                raise CorruptStream("truncated Huffman table")
            total = sum(counts)
            symbols = seg[i + 17:i + 17 + total]
            if len(symbols) != total:
                raise CorruptStream("truncated Huffman table")
            table = HuffmanTable(counts, symbols)
            if tc == 0:
                self.dc_tables[th] = table
            else:
                self.ac_tables[th] = table
            i += 17 + total

    def _sof(self, seg: bytes) -> None:
        if len(seg) < 6:
            raise CorruptStream("short SOF segment")
        precision = seg[0]
        if precision != 8:
            raise UnsupportedJpeg(f"{precision}-bit JPEG is not supported")
        height, width, ncomp = _u16(seg, 1), _u16(seg, 3), seg[5]
        if height == 0:
            raise UnsupportedJpeg("DNL-defined height is not supported")
        if width == 0:
            raise CorruptStream("zero image width")
        if ncomp not in (1, 3):
            raise UnsupportedJpeg(f"{ncomp}-component JPEG is not supported")
        comps = []
        for c in range(ncomp):
            off = 6 + 3 * c
            if off + 3 > len(seg):
                raise CorruptStream("short SOF segment")
            h, v = seg[off + 1] >> 4, seg[off + 1] & 15
            if not (1 <= h <= 4 and 1 <= v <= 4):
                raise CorruptStream("invalid sampling factors")
            comps.append(Component(seg[off], h, v, seg[off + 2]))
        self.hmax = max(c.h for c in comps)
        self.vmax = max(c.v for c in comps)
        mcux = -(-width // (8 * self.hmax))
        mcuy = -(-height // (8 * self.vmax))
        for c in comps:
            c.blocks_x = -(-(-(-width * c.h // self.hmax)) // 8)
            c.blocks_y = -(-(-(-height * c.v // self.vmax)) // 8)
            py, px = mcuy * c.v, mcux * c.h
            self.padded.append((py, px))
            self.coef_lists.append([0] * (py * px * 64))
        self.frame = (width, height, comps)

    def _scan(self, header: bytes, data: bytes) -> None:
        if self.frame is None:
            raise CorruptStream("scan before frame header")
        width, height, comps = self.frame
        if not self.frame_qtables:
            for c in comps:
                if c.qtable_id not in self.qtables:
                    raise CorruptStream(f"missing quantization table {c.qtable_id}")
                self.frame_qtables[c.qtable_id] = self.qtables[c.qtable_id].copy()
        ns = header[0]
        if ns < 1 or len(header) < 1 + 2 * ns + 3:
            raise CorruptStream("bad scan header")
        by_id = {c.ident: k for k, c in enumerate(comps)}
        scan = []
        for s in range(ns):
            cid, tables = header[1 + 2 * s], header[2 + 2 * s]
            if cid not in by_id:
                raise CorruptStream(f"scan references unknown component {cid}")
            td, ta = tables >> 4, tables & 15
            if td not in self.dc_tables or ta not in self.ac_tables:
                raise CorruptStream("scan references undefined Huffman table")
            scan.append((by_id[cid], self.dc_tables[td], self.ac_tables[ta]))
        ss, se = header[1 + 2 * ns], header[2 + 2 * ns]
        if ss != 0 or se != 63:
            raise UnsupportedJpeg("spectral selection is not supported")

        # unit list: (component index, block row, block col) per MCU, relative to MCU origin
        if ns == 1:
            k = scan[0][0]
            c = comps[k]
            units = [(0, 0, 0)]
            mcu_rows, mcu_cols = c.blocks_y, c.blocks_x
            steps = [(1, 1)]
        else:
            units = []
            for idx, (k, _, _) in enumerate(scan):
                c = comps[k]
                units += [(idx, v, h) for v in range(c.v) for h in range(c.h)]
            mcu_cols = -(-width // (8 * self.hmax))
            mcu_rows = -(-height // (8 * self.vmax))
            steps = [(comps[k].v, comps[k].h) for k, _, _ in scan]

        intervals = _split_restart_intervals(data)
        self._decode_units(scan, units, steps, mcu_rows, mcu_cols, intervals)

    def _decode_units(self, scan, units, steps, mcu_rows, mcu_cols, intervals) -> None:
        zz = ZIGZAG.tolist()
        coef = [self.coef_lists[k] for k, _, _ in scan]
        row_blocks = [self.padded[k][1] for k, _, _ in scan]
        dc_len = [t.lengths for _, t, _ in scan]
        dc_val = [t.values for _, t, _ in scan]
        ac_len = [t.lengths for _, _, t in scan]
        ac_val = [t.values for _, _, t in scan]
        pred = [0] * len(scan)
        ri = self.restart_interval
        total = mcu_rows * mcu_cols

        interval = 0
        data = intervals[0] + b"\x00\x00\x00\x00"
        nbits = (len(data) - 4) * 8
        pos = 0
        for m in range(total):
            if ri and m and m % ri == 0:
                interval += 1
                if interval >= len(intervals):
                    raise CorruptStream("missing restart marker")
                data = intervals[interval] + b"\x00\x00\x00\x00"
                nbits = (len(data) - 4) * 8
                pos = 0
                pred = [0] * len(scan)
            my, mx = divmod(m, mcu_cols)
            for idx, dv, dh in units:
                sv, sh = steps[idx]
                brow = my * sv + dv
                bcol = mx * sh + dh
                base = (brow * row_blocks[idx] + bcol) * 64
                out = coef[idx]

                b = pos >> 3
                peek = (((data[b] << 16) | (data[b + 1] << 8) | data[b + 2]) >> (8 - (pos & 7))) & 0xFFFF
                ln = dc_len[idx][peek]
                if not ln:
                    raise CorruptStream("invalid Huffman code")
                s = dc_val[idx][peek]
                pos += ln
                diff = 0
                if s:
                    if s > 11:
                        raise CorruptStream("DC magnitude category out of range")
                    b = pos >> 3
                    bits = (((data[b] << 16) | (data[b + 1] << 8) | data[b + 2]) >> (8 - (pos & 7))) & 0xFFFF
                    diff = bits >> (16 - s)
                    if diff < (1 << (s - 1)):
                        diff -= (1 << s) - 1
                    pos += s
                pred[idx] += diff
                out[base] = pred[idx]

                k = 1
                al = ac_len[idx]
                av = ac_val[idx]
                while k < 64:
                    b = pos >> 3
                    peek = (((data[b] << 16) | (data[b + 1] << 8) | data[b + 2]) >> (8 - (pos & 7))) & 0xFFFF
                    ln = al[peek]
                    if not ln:
                        raise CorruptStream("invalid Huffman code")
                    rs = av[peek]
                    pos += ln
                    s = rs & 15
                    r = rs >> 4
                    if s == 0:
                        if r == 15:
                            k += 16
                            continue
                        break
                    k += r
                    if k > 63:
                        raise CorruptStream("AC coefficient index out of range")
                    b = pos >> 3
                    bits = (((data[b] << 16) | (data[b + 1] << 8) | data[b + 2]) >> (8 - (pos & 7))) & 0xFFFF
                    val = bits >> (16 - s)
                    if val < (1 << (s - 1)):
                        val -= (1 << s) - 1
                    pos += s
                    out[base + zz[k]] = val
                    k += 1
                if pos > nbits:
                    raise CorruptStream("entropy-coded data ended prematurely")

    def _finish(self) -> JpegData:
        width, height, comps = self.frame
        arrays = []
        for c, flat, (py, px) in zip(comps, self.coef_lists, self.padded):
            blocks = np.array(flat, dtype=np.int32).reshape(py, px, 8, 8)
            if blocks.min(initial=0) < -32768 or blocks.max(initial=0) > 32767:
                raise CorruptStream("coefficient outside the int16 range")
            blocks = blocks[:c.blocks_y, :c.blocks_x]
            grid = blocks.transpose(0, 2, 1, 3).reshape(c.blocks_y * 8, c.blocks_x * 8)
            arrays.append(grid.astype(np.int16))
        return JpegData(
            width=width,
            height=height,
            components=comps,
            coefficients=arrays,
            qtables={k: v.copy() for k, v in sorted(self.qtables.items())},
            frame_qtables=self.frame_qtables,
        )


def parse_jpeg(source: str | Path | bytes) -> JpegData:
    """Parse a baseline JPEG from a path or an in-memory byte string."""
    if isinstance(source, (bytes, bytearray)):
        buf = bytes(source)
    else:
        buf = Path(source).read_bytes()
    if not buf.startswith(b"\xff\xd8"):
        raise NotAJpeg("missing SOI marker")
    try:
        return _Decoder(buf).run()
    except IndexError as exc:
        raise CorruptStream("unexpected end of data") from exc


def blocks_view(coefficients: np.ndarray) -> np.ndarray:
    """Reshape a ``(8*by, 8*bx)`` coefficient grid to ``(by, bx, 8, 8)``."""
    h, w = coefficients.shape
    return coefficients.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)


def dct_matrix() -> np.ndarray:
    """Orthonormal 8-point DCT-II matrix, ``D @ x`` transforms a column vector."""
    n = np.arange(8)
    d = np.cos((2 * n[None, :] + 1) * n[:, None] * np.pi / 16) / 2
    d[0] /= np.sqrt(2)
    return d


def dequantize_to_pixels(coefficients: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    """Dequantize, inverse-DCT and level-shift a coefficient grid back to 8-bit samples."""
    d = dct_matrix()
    blocks = blocks_view(coefficients.astype(np.float64)) * qtable
    pix = d.T @ blocks @ d + 128.0
    by, bx = blocks.shape[:2]
    pix = pix.transpose(0, 2, 1, 3).reshape(by * 8, bx * 8)
    return np.clip(np.round(pix), 0, 255).astype(np.uint8)
