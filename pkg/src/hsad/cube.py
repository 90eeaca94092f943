"""Hyperspectral cube model and ENVI-style I/O.

A cube is held as a C-contiguous ``(lines, samples, bands)`` float64 array
regardless of how it was stored on disk.  Only the subset of the ENVI header
needed to decode a headerless raw file is interpreted; every other key
(wavelength lists, map info, ...) is skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidValue, MissingKey, NonFiniteValue, OutOfBounds, SizeMismatch

__all__ = [
    "DATA_TYPES",
    "CubeHeader",
    "HyperCube",
    "parse_envi_header",
    "format_envi_header",
    "read_cube",
    "write_cube",
    "get_pixel_spectrum",
    "load_cube",
    "save_cube",
]

# ENVI "data type" code -> numpy base type
DATA_TYPES = {
    1: np.dtype(np.uint8),
    2: np.dtype(np.int16),
    4: np.dtype(np.float32),
    5: np.dtype(np.float64),
    12: np.dtype(np.uint16),
}

INTERLEAVES = ("bsq", "bil", "bip")

_REQUIRED = ("samples", "lines", "bands", "interleave", "data type")


@dataclass(frozen=True)
class CubeHeader:
    samples: int
    lines: int
    bands: int
    interleave: str = "bsq"
    data_type_code: int = 5
    byte_order: int = 0

    def __post_init__(self):
        for name in ("samples", "lines", "bands"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidValue(f"{name} must be a positive integer, got {value!r}")
        interleave = str(self.interleave).lower()
        if interleave not in INTERLEAVES:
            raise InvalidValue(f"unsupported interleave {self.interleave!r}")
        object.__setattr__(self, "interleave", interleave)
        if self.data_type_code not in DATA_TYPES:
            raise InvalidValue(f"unsupported data type code {self.data_type_code!r}")
        if self.byte_order not in (0, 1):
            raise InvalidValue(f"byte order must be 0 or 1, got {self.byte_order!r}")

    @property
    def dtype(self) -> np.dtype:
        return DATA_TYPES[self.data_type_code].newbyteorder("<" if self.byte_order == 0 else ">")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.lines, self.samples, self.bands)

    @property
    def expected_size(self) -> int:
        return self.samples * self.lines * self.bands * DATA_TYPES[self.data_type_code].itemsize


@dataclass(frozen=True)
class HyperCube:
    """Immutable ``(lines, samples, bands)`` float64 cube plus its header."""

    header: CubeHeader
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != self.header.shape:
            raise InvalidValue(f"values shape {values.shape} does not match header {self.header.shape}")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            raise NonFiniteValue(tuple(int(i) for i in bad[0]))
        if values is self.values or np.shares_memory(values, self.values):
            values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, interleave="bsq") -> "HyperCube":
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3:
            raise InvalidValue(f"expected a 3-D (lines, samples, bands) array, got ndim={values.ndim}")
        lines, samples, bands = values.shape
        header = CubeHeader(samples=samples, lines=lines, bands=bands, interleave=interleave, data_type_code=5)
        return cls(header, values)

    @property
    def lines(self) -> int:
        return self.header.lines

    @property
    def samples(self) -> int:
        return self.header.samples

    @property
    def bands(self) -> int:
        return self.header.bands

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def _strip_braces(text: str) -> str:
    """Collapse balanced ``{...}`` blocks (possibly multi-line) onto one line."""
    out = []
    depth = 0
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth = max(depth - 1, 0)
        elif ch == "\n" and depth > 0:
            ch = " "
        out.append(ch)
    return "".join(out)


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise InvalidValue(f"header key {key!r} is not an integer: {raw.strip()!r}") from None


def parse_envi_header(text: str) -> CubeHeader:
    """Parse the contents of an ENVI ``.hdr`` file.

    Keys are matched case-insensitively with internal whitespace collapsed,
    so ``Data  Type`` and ``data type`` are equivalent. ``byte order``
    defaults to 0 (little-endian).
    """
    entries: dict[str, str] = {}
    for line in _strip_braces(text).splitlines():
        if "=" not in line:
            continue
        key, _, value = line.partition("=")
        key = re.sub(r"\s+", " ", key.strip().lower())
        entries[key] = value.strip()

    for key in _REQUIRED:
        if key not in entries:
            raise MissingKey(key)

    interleave = entries["interleave"].lower()
    if interleave not in INTERLEAVES:
        raise InvalidValue(f"unsupported interleave {entries['interleave']!r}")
    code = _parse_int("data type", entries["data type"])
    if code not in DATA_TYPES:
        raise InvalidValue(f"unsupported data type code {code}")
    byte_order = _parse_int("byte order", entries["byte order"]) if "byte order" in entries else 0

    counts = {k: _parse_int(k, entries[k]) for k in ("samples", "lines", "bands")}
    return CubeHeader(interleave=interleave, data_type_code=code, byte_order=byte_order, **counts)


def format_envi_header(header: CubeHeader) -> str:
    return (
        "ENVI\n"
        f"samples = {header.samples}\n"
        f"lines = {header.lines}\n"
        f"bands = {header.bands}\n"
        "header offset = 0\n"
        "file type = ENVI Standard\n"
        f"data type = {header.data_type_code}\n"
        f"interleave = {header.interleave}\n"
        f"byte order = {header.byte_order}\n"
    )


# axis order of the on-disk array for each interleave, in (line, sample, band) terms
_DISK_AXES = {"bsq": (2, 0, 1), "bil": (0, 2, 1), "bip": (0, 1, 2)}


def read_cube(header: CubeHeader, raw: bytes) -> HyperCube:
    """Decode headerless raw bytes into a cube laid out ``(line, sample, band)``."""
    expected = header.expected_size
    if len(raw) != expected:
        raise SizeMismatch(len(raw), expected)
    flat = np.frombuffer(raw, dtype=header.dtype)
    axes = _DISK_AXES[header.interleave]
    disk_shape = tuple(header.shape[a] for a in axes)
    values = flat.reshape(disk_shape).transpose(np.argsort(axes)).astype(np.float64)
    return HyperCube(header, values)


def write_cube(cube: HyperCube, interleave: str = "bsq", data_type_code: int = 5,
               byte_order: int = 0) -> tuple[str, bytes]:
    """Serialize a cube to ``(header text, raw bytes)``.

    With the default float64 storage the round trip through
    :func:`parse_envi_header` and :func:`read_cube` is bit-exact.
    Narrower storage types are cast (integers are rounded and clipped).
    """
    header = CubeHeader(samples=cube.samples, lines=cube.lines, bands=cube.bands,
                        interleave=interleave, data_type_code=data_type_code, byte_order=byte_order)
    disk = cube.values.transpose(_DISK_AXES[header.interleave])
    dtype = header.dtype
    if dtype.kind in "ui":
        info = np.iinfo(dtype)
        disk = np.clip(np.rint(disk), info.min, info.max)
    return format_envi_header(header), np.ascontiguousarray(disk, dtype=dtype).tobytes()


def get_pixel_spectrum(cube: HyperCube, row: int, col: int) -> np.ndarray:
    if not (0 <= row < cube.lines and 0 <= col < cube.samples):
        raise OutOfBounds(f"pixel ({row}, {col}) outside {cube.lines}x{cube.samples} cube")
    return cube.values[row, col, :].copy()


def _split_prefix(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix.lower() in (".hdr", ".img") else path


def _with(prefix: Path, suffix: str) -> Path:
    return prefix.with_name(prefix.name + suffix)


def load_cube(path) -> HyperCube:
    """Load ``<prefix>.hdr`` + ``<prefix>.img``; ``path`` may name either file or the prefix."""
    prefix = _split_prefix(path)
    header = parse_envi_header(_with(prefix, ".hdr").read_text())
    return read_cube(header, _with(prefix, ".img").read_bytes())


def save_cube(prefix, cube: HyperCube, interleave: str = "bsq", data_type_code: int = 5) -> tuple[Path, Path]:
    prefix = _split_prefix(prefix)
    text, raw = write_cube(cube, interleave, data_type_code)
    hdr, img = _with(prefix, ".hdr"), _with(prefix, ".img")
    hdr.write_text(text)
    img.write_bytes(raw)
    return hdr, img
