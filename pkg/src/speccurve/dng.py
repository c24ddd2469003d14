"""Read color-calibration tags out of DNG (TIFF) files.

Only IFD0 and SubIFD chains are visited; image data, maker notes and the
EXIF IFD are never touched. ColorMatrix tags store an XYZ -> camera matrix
for column vectors; records hold the transpose, which maps XYZ rows onto
camera rows.
"""

from __future__ import annotations

import json
import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .colorsystem import (ColorMatrixRecord, Illuminant, decode_illuminant,
                          encode_illuminant)
from .errors import (MalformedTag, MissingColorMatrix, NotTiff, TruncatedTiff,
                     ZeroDenominator)

logger = logging.getLogger(__name__)

TAG_MAKE = 0x010F
TAG_MODEL = 0x0110
TAG_SUBIFDS = 0x014A
TAG_UNIQUE_CAMERA_MODEL = 0xC614
TAG_COLOR_MATRIX1 = 0xC621
TAG_COLOR_MATRIX2 = 0xC622
TAG_CALIBRATION_ILLUMINANT1 = 0xC65A
TAG_CALIBRATION_ILLUMINANT2 = 0xC65B

# TIFF6 field type -> (struct code, byte size of one value)
FIELD_TYPES = {
    1: ("B", 1),    # BYTE
    2: ("s", 1),    # ASCII
    3: ("H", 2),    # SHORT
    4: ("I", 4),    # LONG
    5: ("II", 8),   # RATIONAL
    6: ("b", 1),    # SBYTE
    7: ("s", 1),    # UNDEFINED
    8: ("h", 2),    # SSHORT
    9: ("i", 4),    # SLONG
    10: ("ii", 8),  # SRATIONAL
    11: ("f", 4),   # FLOAT
    12: ("d", 8),   # DOUBLE
    13: ("I", 4),   # IFD
}
ASCII, SHORT, LONG, RATIONAL, SRATIONAL = 2, 3, 4, 5, 10

MAX_IFDS = 64
MAX_ENTRIES = 4096
DEFAULT_PAIRING = (17, 21)
QUANTUM = 1_000_000


@dataclass
class IfdEntry:
    tag: int
    field_type: int
    count: int
    value_or_offset: int
    # absolute file offset of the value bytes (inline or pointed-to)
    data_offset: int = 0


@dataclass
class CameraRecord:
    make: str
    model: str
    unique_camera_model: str | None = None
    matrices: list[ColorMatrixRecord] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list, compare=False)

    @property
    def camera_id(self) -> str:
        return camera_key(self.make, self.model)


def camera_key(make: str, model: str) -> str:
    """Grouping key: lowercased make + model, whitespace collapsed."""
    make = " ".join(make.split()).lower()
    model = " ".join(model.split()).lower()
    if not make or model.startswith(make):
        return model
    return f"{make} {model}".strip()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        if len(buf) < 8:
            raise NotTiff("file shorter than a TIFF header")
        order = buf[:2]
        if order == b"II":
            self.bo = "<"
        elif order == b"MM":
            self.bo = ">"
        else:
            raise NotTiff(f"bad byte-order mark {order!r}")
        if self.unpack("H", 2) != 42:
            raise NotTiff("bad TIFF magic number")

    def unpack(self, fmt: str, offset: int):
        size = struct.calcsize(self.bo + fmt)
        if offset < 0 or offset + size > len(self.buf):
            raise TruncatedTiff(f"read of {size} bytes at {offset} past end of file")
        vals = struct.unpack_from(self.bo + fmt, self.buf, offset)
        return vals[0] if len(vals) == 1 else vals

    def read_ifd(self, offset: int) -> tuple[dict[int, IfdEntry], int]:
        n = self.unpack("H", offset)
        if n > MAX_ENTRIES:
            raise MalformedTag(f"IFD at {offset} claims {n} entries")
        entries = {}
        for i in range(n):
            pos = offset + 2 + 12 * i
            tag, ftype, count, value = self.unpack("HHII", pos)
            if ftype not in FIELD_TYPES:
                continue
            size = FIELD_TYPES[ftype][1] * count
            data_offset = pos + 8 if size <= 4 else value
            if data_offset + size > len(self.buf):
                raise TruncatedTiff(f"tag 0x{tag:04X} points past end of file")
            entries.setdefault(tag, IfdEntry(tag, ftype, count, value, data_offset))
        nxt = self.unpack("I", offset + 2 + 12 * n)
        return entries, nxt

    def values(self, e: IfdEntry):
        code, size = FIELD_TYPES[e.field_type]
        if code == "s":
            return self.buf[e.data_offset:e.data_offset + e.count]
        flat = self.unpack(code * e.count, e.data_offset) if e.count else ()
        return flat if isinstance(flat, tuple) else (flat,)


def _decode_string(raw: bytes) -> str:
    return raw.split(b"\0", 1)[0].decode("ascii", errors="replace").strip()


def _walk(r: _Reader) -> list[dict[int, IfdEntry]]:
    """IFD0 first, then every SubIFD chain reachable from it."""
    ifd0_offset = r.unpack("I", 4)
    ifd0, _ = r.read_ifd(ifd0_offset)
    found = [ifd0]
    seen = {ifd0_offset}
    stack = []
    if TAG_SUBIFDS in ifd0:
        stack.extend(reversed(r.values(ifd0[TAG_SUBIFDS])))
    while stack and len(found) < MAX_IFDS:
        off = stack.pop()
        if off == 0 or off in seen:
            continue
        seen.add(off)
        ifd, nxt = r.read_ifd(off)
        found.append(ifd)
        if nxt:
            stack.append(nxt)
        if TAG_SUBIFDS in ifd:
            stack.extend(reversed(r.values(ifd[TAG_SUBIFDS])))
    return found


def _lookup(ifds, tag):
    for ifd in ifds:
        if tag in ifd:
            return ifd[tag]
    return None


def _matrix(r: _Reader, e: IfdEntry) -> np.ndarray:
    if e.field_type not in (SRATIONAL, RATIONAL) or e.count != 9:
        raise MalformedTag(f"ColorMatrix tag 0x{e.tag:04X} has type {e.field_type} "
                           f"and count {e.count}; expected 9 rationals")
    vals = r.values(e)
    out = []
    for num, den in zip(vals[0::2], vals[1::2]):
        if den == 0:
            raise ZeroDenominator(f"ColorMatrix tag 0x{e.tag:04X} has a zero denominator")
        out.append(num / den)
    return np.array(out, dtype=np.float64).reshape(3, 3)


def _illuminant_code(r: _Reader, e: IfdEntry) -> int:
    if e.field_type not in (SHORT, LONG) or e.count < 1:
        raise MalformedTag(f"CalibrationIlluminant tag 0x{e.tag:04X} is malformed")
    return int(r.values(e)[0])


def parse_dng(buf: bytes) -> CameraRecord:
    """Extract make, model and color matrices from a DNG byte buffer."""
    r = _Reader(bytes(buf))
    ifds = _walk(r)

    def text(tag):
        e = _lookup(ifds, tag)
        if e is None:
            return None
        if FIELD_TYPES[e.field_type][0] != "s" and e.field_type != 1:
            raise MalformedTag(f"tag 0x{tag:04X} is not a string")
        return _decode_string(bytes(r.values(e)))

    cm = [_lookup(ifds, TAG_COLOR_MATRIX1), _lookup(ifds, TAG_COLOR_MATRIX2)]
    ci = [_lookup(ifds, TAG_CALIBRATION_ILLUMINANT1), _lookup(ifds, TAG_CALIBRATION_ILLUMINANT2)]
    if cm[0] is None and cm[1] is None:
        raise MissingColorMatrix("no ColorMatrix1/ColorMatrix2 tag found")

    notes = []
    both = cm[0] is not None and cm[1] is not None
    matrices = []
    for slot in (0, 1):
        if cm[slot] is None:
            continue
        if ci[slot] is not None:
            code = _illuminant_code(r, ci[slot])
        elif both:
            code = DEFAULT_PAIRING[slot]
            notes.append(f"CalibrationIlluminant{slot + 1} missing; assumed code {code}")
        else:
            code = 0
            notes.append(f"CalibrationIlluminant{slot + 1} missing; illuminant unknown")
        stored = _matrix(r, cm[slot])
        matrices.append(ColorMatrixRecord(stored.T.copy(), decode_illuminant(code), "DNG"))

    rec = CameraRecord(make=text(TAG_MAKE) or "", model=text(TAG_MODEL) or "",
                       unique_camera_model=text(TAG_UNIQUE_CAMERA_MODEL),
                       matrices=matrices, warnings=notes)
    for note in notes:
        logger.warning("%s: %s", rec.camera_id or "<unnamed>", note)
    return rec


def read_dng(path) -> CameraRecord:
    return parse_dng(Path(path).read_bytes())


# -- writer -------------------------------------------------------------------

def _ascii(s: str) -> bytes:
    return s.encode("ascii", errors="replace") + b"\0"


def write_minimal_dng(record: CameraRecord, endianness: str = "little") -> bytes:
    """Serialize ``record`` as a TIFF holding only the tags ``parse_dng`` reads.

    Matrix entries are quantized to rationals with denominator 10**6.
    """
    bo = {"little": "<", "big": ">"}[endianness]
    if not 1 <= len(record.matrices) <= 2:
        raise ValueError("a DNG holds one or two color matrices")
    entries = [(TAG_MAKE, ASCII, _ascii(record.make)),
               (TAG_MODEL, ASCII, _ascii(record.model))]
    if record.unique_camera_model is not None:
        entries.append((TAG_UNIQUE_CAMERA_MODEL, ASCII, _ascii(record.unique_camera_model)))
    for slot, m in enumerate(record.matrices):
        stored = np.asarray(m.matrix, dtype=np.float64).T.reshape(-1)
        nums = [int(round(v * QUANTUM)) for v in stored]
        payload = b"".join(struct.pack(bo + "ii", k, QUANTUM) for k in nums)
        entries.append((TAG_COLOR_MATRIX1 + slot, SRATIONAL, payload))
        code = encode_illuminant(m.illuminant)
        entries.append((TAG_CALIBRATION_ILLUMINANT1 + slot, SHORT,
                        struct.pack(bo + "H", code)))
    entries.sort(key=lambda e: e[0])

    ifd_offset = 8
    data_offset = ifd_offset + 2 + 12 * len(entries) + 4
    ifd = bytearray(struct.pack(bo + "H", len(entries)))
    blob = bytearray()
    for tag, ftype, payload in entries:
        count = len(payload) // FIELD_TYPES[ftype][1]
        if len(payload) <= 4:
            ifd += struct.pack(bo + "HHI", tag, ftype, count) + payload.ljust(4, b"\0")
        else:
            ifd += struct.pack(bo + "HHII", tag, ftype, count, data_offset + len(blob))
            blob += payload
            if len(blob) % 2:
                blob += b"\0"
    ifd += struct.pack(bo + "I", 0)
    header = (b"II" if bo == "<" else b"MM") + struct.pack(bo + "HI", 42, ifd_offset)
    return bytes(header + ifd + blob)


# -- JSON ---------------------------------------------------------------------

def record_to_dict(rec: CameraRecord) -> dict:
    return {
        "make": rec.make,
        "model": rec.model,
        "unique_camera_model": rec.unique_camera_model,
        "matrices": [{"illuminant": m.illuminant,
                      "matrix": [float(v) for v in np.asarray(m.matrix).reshape(-1)]}
                     for m in rec.matrices],
    }


def record_from_dict(d: dict) -> CameraRecord:
    matrices = []
    for m in d.get("matrices", []):
        ill: Illuminant = m["illuminant"]
        if isinstance(ill, str) and ill not in ("A", "D65"):
            ill = int(ill) if re.fullmatch(r"\d+", ill) else ill
        matrices.append(ColorMatrixRecord(np.array(m["matrix"], dtype=np.float64).reshape(3, 3),
                                          ill, "JSON"))
    if not matrices:
        raise ValueError(f"record for {d.get('model')!r} has no matrices")
    return CameraRecord(d.get("make", ""), d.get("model", ""),
                        d.get("unique_camera_model"), matrices)


def save_records_json(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([record_to_dict(r) for r in records], fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_records_json(path) -> list[CameraRecord]:
    with open(path, encoding="utf-8") as fh:
        return [record_from_dict(d) for d in json.load(fh)]
