"""Synthetic scenes with implanted, ground-truthed anomalies.

Targets are mixed into a background by linear sub-pixel mixing, and their
neighbours are contaminated by a Gaussian-attenuated version of the same
mixture (adjacency effect).  Only footprint pixels are marked in the truth
mask.

Random numbers come from numpy's PCG64 bit generator (stream-stable across
numpy releases) and are turned into Gaussians with the Box-Muller transform,
so a seed fully determines a scene.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cube import HyperCube, load_cube
from .errors import FractionOutOfRange, LengthMismatch, OutOfBoundsImplant

__all__ = [
    "MATERIALS",
    "reference_spectrum",
    "ImplantSpec",
    "Background",
    "SceneConfig",
    "implant_subpixel",
    "adjacency_blend",
    "gaussian_field",
    "render_background",
    "generate_scene",
    "benchmark_scene_config",
    "write_pgm_mask",
    "read_pgm_mask",
]

# Smooth synthetic reflectance shapes: base level plus Gaussian features
# (centre and width in units of normalised wavelength 0..1).
MATERIALS = {
    "soil": (0.18, [(0.75, 0.35, 0.12), (0.15, 0.10, -0.05)]),
    "vegetation": (0.05, [(0.55, 0.08, 0.25), (0.85, 0.20, 0.30), (0.25, 0.05, 0.04)]),
    "concrete": (0.30, [(0.50, 0.40, 0.08)]),
    "asphalt": (0.08, [(0.60, 0.50, 0.04)]),
    "metal": (0.22, [(0.30, 0.12, 0.15), (0.80, 0.10, -0.08)]),
    "paint_red": (0.07, [(0.45, 0.06, 0.30), (0.90, 0.25, 0.10)]),
    "paint_green": (0.06, [(0.25, 0.07, 0.22), (0.70, 0.15, 0.12)]),
    "fabric": (0.15, [(0.15, 0.10, 0.20), (0.65, 0.12, -0.07)]),
    "roof": (0.12, [(0.35, 0.20, 0.10), (0.95, 0.10, 0.15)]),
}


def reference_spectrum(name: str, bands: int) -> np.ndarray:
    """Evaluate one of :data:`MATERIALS` on ``bands`` evenly spaced samples."""
    try:
        base, features = MATERIALS[name]
    except KeyError:
        raise ValueError(f"unknown material {name!r}; known: {sorted(MATERIALS)}") from None
    t = np.linspace(0.0, 1.0, bands)
    out = np.full(bands, base)
    for centre, width, amplitude in features:
        out += amplitude * np.exp(-0.5 * ((t - centre) / width) ** 2)
    return out


def implant_subpixel(background, target, f: float) -> np.ndarray:
    """Linear mixture ``f * target + (1 - f) * background``."""
    b = np.asarray(background, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if b.shape != t.shape:
        raise LengthMismatch(f"background length {b.shape} != target length {t.shape}")
    if not 0.0 <= f <= 1.0:
        raise FractionOutOfRange(f"fill fraction must lie in [0, 1], got {f}")
    return f * t + (1.0 - f) * b


def adjacency_blend(background, target, f: float, rho: float, w: float) -> np.ndarray:
    """Neighbour contamination: ``g*f*t + (1 - g*f)*b`` with ``g = exp(-rho^2 / w^2)``."""
    b = np.asarray(background, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if b.shape != t.shape:
        raise LengthMismatch(f"background length {b.shape} != target length {t.shape}")
    if w <= 0:
        raise ValueError(f"adjacency width must be positive, got {w}")
    if rho < 0:
        raise ValueError(f"distance must be nonnegative, got {rho}")
    gf = math.exp(-(rho * rho) / (w * w)) * f
    return gf * t + (1.0 - gf) * b


@dataclass
class ImplantSpec:
    location: tuple[int, int]
    target: np.ndarray
    footprint: tuple[tuple[int, int], ...] = ((0, 0),)
    fraction: float = 0.55
    width: float = 1.0
    radius: int = 1
    name: str = ""

    def __post_init__(self):
        self.location = (int(self.location[0]), int(self.location[1]))
        self.footprint = tuple((int(a), int(b)) for a, b in self.footprint)
        self.target = np.asarray(self.target, dtype=np.float64)
        if not self.footprint:
            raise ValueError("implant footprint must not be empty")
        if not 0.0 <= self.fraction <= 1.0:
            raise FractionOutOfRange(f"fill fraction must lie in [0, 1], got {self.fraction}")
        if self.width <= 0:
            raise ValueError(f"adjacency width must be positive, got {self.width}")
        if self.radius < 0:
            raise ValueError(f"adjacency radius must be nonnegative, got {self.radius}")

    def pixels(self):
        r, c = self.location
        return [(r + dr, c + dc) for dr, dc in self.footprint]


@dataclass
class Background:
    """Background model.

    ``kind`` is ``"iid"`` (independent Gaussian noise per band),
    ``"correlated"`` (first-order autoregressive noise along the spectral
    axis with lag-one correlation ``correlation``) or ``"cube"`` (a crop of
    a donor cube starting at ``(row, col)``).
    """

    kind: str = "correlated"
    mean: np.ndarray | None = None
    stddev: float | np.ndarray = 0.01
    correlation: float = 0.95
    donor: str | None = None
    row: int = 0
    col: int = 0


@dataclass
class SceneConfig:
    lines: int
    samples: int
    bands: int
    background: Background = field(default_factory=Background)
    implants: list = field(default_factory=list)
    seed: int = 0

    def validate(self):
        for k, imp in enumerate(self.implants):
            label = imp.name or f"#{k}"
            if imp.target.shape != (self.bands,):
                raise LengthMismatch(f"implant {label}: target has {imp.target.shape[0]} bands, scene has {self.bands}")
            for r, c in imp.pixels():
                if not (0 <= r < self.lines and 0 <= c < self.samples):
                    raise OutOfBoundsImplant(f"implant {label}: pixel ({r}, {c}) lies outside the "
                                             f"{self.lines}x{self.samples} scene")

    # -- text serialisation --------------------------------------------
    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["scene"] = {"lines": str(self.lines), "samples": str(self.samples), "bands": str(self.bands),
                       "seed": str(self.seed)}
        bg = self.background
        section = {"model": bg.kind}
        if bg.kind == "cube":
            section.update(path=str(bg.donor), row=str(bg.row), col=str(bg.col))
        else:
            section["mean"] = _format_vector(bg.mean)
            section["stddev"] = _format_vector(bg.stddev)
            if bg.kind == "correlated":
                section["correlation"] = repr(float(bg.correlation))
        cp["background"] = section
        for k, imp in enumerate(self.implants):
            cp[f"target {k}"] = {
                "name": imp.name,
                "row": str(imp.location[0]),
                "col": str(imp.location[1]),
                "footprint": "; ".join(f"{a},{b}" for a, b in imp.footprint),
                "spectrum": _format_vector(imp.target),
                "fraction": repr(float(imp.fraction)),
                "width": repr(float(imp.width)),
                "radius": str(imp.radius),
            }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, base_dir: Path | None = None) -> "SceneConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        scene = cp["scene"]
        lines, samples, bands = (scene.getint(k) for k in ("lines", "samples", "bands"))
        seed = scene.getint("seed", fallback=0)
        bsec = cp["background"] if cp.has_section("background") else {}
        kind = bsec.get("model", "correlated")
        if kind == "cube":
            donor = Path(bsec["path"])
            if base_dir is not None and not donor.is_absolute():
                donor = base_dir / donor
            background = Background(kind="cube", donor=str(donor), row=int(bsec.get("row", 0)),
                                    col=int(bsec.get("col", 0)))
        elif kind in ("iid", "correlated"):
            background = Background(
                kind=kind,
                mean=_parse_vector(bsec.get("mean", "material:soil"), bands),
                stddev=_parse_vector(bsec.get("stddev", "0.01"), bands, allow_scalar=True),
                correlation=float(bsec.get("correlation", 0.95)),
            )
        else:
            raise ValueError(f"unknown background model {kind!r}")
        implants = []
        for name in cp.sections():
            if not name.startswith("target"):
                continue
            sec = cp[name]
            footprint = tuple(tuple(int(v) for v in item.split(",")) for item in sec.get("footprint", "0,0").split(";")
                              if item.strip())
            implants.append(ImplantSpec(
                location=(sec.getint("row"), sec.getint("col")),
                target=_parse_vector(sec["spectrum"], bands),
                footprint=footprint,
                fraction=sec.getfloat("fraction", fallback=0.55),
                width=sec.getfloat("width", fallback=1.0),
                radius=sec.getint("radius", fallback=1),
                name=sec.get("name", "") or name,
            ))
        return cls(lines, samples, bands, background, implants, seed)

    @classmethod
    def load(cls, path) -> "SceneConfig":
        path = Path(path)
        return cls.from_text(path.read_text(), base_dir=path.parent)


def _format_vector(v) -> str:
    if v is None:
        return "material:soil"
    arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if arr.size > 1:
        # library spectra are written by name
        for name in MATERIALS:
            if np.array_equal(arr, reference_spectrum(name, arr.size)):
                return f"material:{name}"
    return ", ".join(repr(float(x)) for x in arr)


def _parse_vector(text: str, bands: int, allow_scalar: bool = False):
    text = text.strip()
    if text.startswith("material:"):
        return reference_spectrum(text.split(":", 1)[1].strip(), bands)
    values = np.array([float(x) for x in text.replace("\n", " ").split(",") if x.strip()])
    if values.size == 1 and allow_scalar:
        return float(values[0])
    if values.size != bands:
        raise LengthMismatch(f"vector has {values.size} entries, scene has {bands} bands")
    return values


def _uniforms(bitgen: np.random.PCG64, n: int) -> np.ndarray:
    # 53-bit uniforms in (0, 1]
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)


def gaussian_field(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal variates: PCG64 uniforms through Box-Muller."""
    bitgen = np.random.PCG64(seed)
    pairs = (n + 1) // 2
    u = _uniforms(bitgen, 2 * pairs).reshape(pairs, 2)
    radius = np.sqrt(-2.0 * np.log(u[:, 0]))
    angle = 2.0 * np.pi * u[:, 1]
    return np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1).reshape(-1)[:n]


def render_background(config: SceneConfig) -> np.ndarray:
    bg = config.background
    shape = (config.lines, config.samples, config.bands)
    if bg.kind == "cube":
        donor = load_cube(bg.donor)
        r0, c0 = bg.row, bg.col
        if donor.bands != config.bands or r0 < 0 or c0 < 0 or r0 + config.lines > donor.lines \
                or c0 + config.samples > donor.samples:
            raise OutOfBoundsImplant(f"donor cube {donor.shape} cannot supply a {shape} crop at ({r0}, {c0})")
        return donor.values[r0:r0 + config.lines, c0:c0 + config.samples].copy()
    mean = reference_spectrum("soil", config.bands) if bg.mean is None else np.asarray(bg.mean, dtype=np.float64)
    std = np.broadcast_to(np.asarray(bg.stddev, dtype=np.float64), (config.bands,))
    z = gaussian_field(config.seed, int(np.prod(shape))).reshape(shape)
    if bg.kind == "correlated":
        rho = float(bg.correlation)
        if not -1.0 < rho < 1.0:
            raise ValueError(f"band correlation must lie in (-1, 1), got {rho}")
        innov = math.sqrt(1.0 - rho * rho)
        for b in range(1, config.bands):
            z[..., b] = rho * z[..., b - 1] + innov * z[..., b]
    elif bg.kind != "iid":
        raise ValueError(f"unknown background model {bg.kind!r}")
    return mean + std * z


def generate_scene(config: SceneConfig):
    """Render ``config`` into ``(HyperCube, truth mask)``.

    Implants are applied in order.  First each implant contaminates the
    non-footprint pixels within ``radius`` (Euclidean distance to its nearest
    footprint pixel) with :func:`adjacency_blend`, using the pixel's current
    value as background; then every footprint pixel is replaced by
    :func:`implant_subpixel` of the pure background render.
    """
    config.validate()
    base = render_background(config)
    cube = base.copy()
    mask = np.zeros((config.lines, config.samples), dtype=bool)
    for imp in config.implants:
        for r, c in imp.pixels():
            mask[r, c] = True
    rows, cols = np.mgrid[0:config.lines, 0:config.samples]
    for imp in config.implants:
        if imp.radius <= 0:
            continue
        pix = np.array(imp.pixels())
        dist = np.full(mask.shape, np.inf)
        for r, c in pix:
            dist = np.minimum(dist, np.hypot(rows - r, cols - c))
        ring = (dist > 0) & (dist <= imp.radius) & ~mask
        for r, c in zip(*np.nonzero(ring)):
            cube[r, c] = adjacency_blend(cube[r, c], imp.target, imp.fraction, float(dist[r, c]), imp.width)
    for imp in config.implants:
        for r, c in imp.pixels():
            cube[r, c] = implant_subpixel(base[r, c], imp.target, imp.fraction)
    return HyperCube.from_array(cube), mask


_TARGET_MATERIALS = ("metal", "paint_red", "paint_green", "fabric", "roof", "concrete", "asphalt", "vegetation")
_FOOTPRINTS = {
    1: ((0, 0),),
    2: ((0, 0), (0, 1), (1, 0), (1, 1)),
    3: tuple((a, b) for a in range(3) for b in range(3)),
}


def benchmark_scene_config(lines: int = 60, samples: int = 100, bands: int = 189, n_targets: int = 16,
                           seed: int = 2012, fraction: float = 0.55, correlation: float = 0.97,
                           stddev: float = 0.03, spacing: int = 12) -> SceneConfig:
    """Scene in the spirit of the implanted-target benchmark image.

    Targets sit on a regular grid ``spacing`` pixels apart (so no window
    sees two targets' centres), cycle through several materials and through
    1x1, 2x2 and 3x3 footprints, and use fill fraction ``fraction`` with
    radius-1 adjacency blending.
    """
    rows = list(range(spacing // 2, lines - 2, spacing))
    cols = list(range(spacing // 2, samples - 2, spacing))
    sites = [(r, c) for r in rows for c in cols]
    if len(sites) < n_targets:
        raise OutOfBoundsImplant(f"only {len(sites)} target sites fit a {lines}x{samples} scene at spacing {spacing}")
    implants = []
    for k in range(n_targets):
        material = _TARGET_MATERIALS[k % len(_TARGET_MATERIALS)]
        size = (1, 2, 3)[k % 3]
        implants.append(ImplantSpec(
            location=sites[k],
            target=reference_spectrum(material, bands),
            footprint=_FOOTPRINTS[size],
            fraction=fraction,
            width=1.0,
            radius=1,
            name=f"{material}-{size}x{size}-{k}",
        ))
    background = Background(kind="correlated", mean=reference_spectrum("soil", bands), stddev=stddev,
                            correlation=correlation)
    return SceneConfig(lines, samples, bands, background, implants, seed)


def write_pgm_mask(path, mask) -> None:
    """Binary PGM (P5, maxval 255); 255 marks an anomaly."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + (m.astype(np.uint8) * 255).tobytes())


def read_pgm_mask(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {tokens[0]!r}")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ValueError("16-bit PGM masks are not supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError("truncated PGM data")
    return pixels.reshape(h, w) > 0
