"""Threshold fire classifier for multi-channel thermal/visible scenes.

Radiances enter in W m^-2 sr^-1 um^-1 and are converted to brightness
temperature by inverting Planck's law. Pixels are then screened for water
and cloud before the day or night fire test is applied.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants

from .errors import InfeasibleSpec, MissingChannel, NonPositiveRadiance, SceneFormatError

C1 = 2.0 * constants.h * constants.c**2  # W m^2 sr^-1
C2 = constants.h * constants.c / constants.k  # m K

WAVELENGTHS = {"L4": 4.0e-6, "L11": 11.0e-6, "L12": 12.0e-6}
RADIANCE_CHANNELS = ("L4", "L11", "L12")
REFLECTANCE_CHANNELS = ("rho065", "rho086")
SCENE_PLANES = RADIANCE_CHANNELS + REFLECTANCE_CHANNELS + ("solar_zenith", "water_mask")

DAY_ZENITH = 85.0
PER_MICRON = 1e6  # W m^-2 sr^-1 um^-1 -> W m^-3 sr^-1


class PixelClass(enum.IntEnum):
    WATER = 0
    CLOUD = 1
    FIRE_DAY = 2
    FIRE_NIGHT = 3
    NON_FIRE = 4

    @property
    def label(self) -> str:
        return {0: "Water", 1: "Cloud", 2: "FireDay", 3: "FireNight", 4: "NonFire"}[self.value]

    @classmethod
    def parse(cls, name) -> "PixelClass":
        if isinstance(name, PixelClass):
            return name
        key = str(name).replace("_", "").lower()
        for member in cls:
            if member.label.lower() == key:
                return member
        raise ValueError(f"unknown pixel class {name!r}")

    @property
    def is_fire(self) -> bool:
        return self in (PixelClass.FIRE_DAY, PixelClass.FIRE_NIGHT)


# ------------------------------------------------------------------ Planck

def planck(temperature, wavelength):
    """Spectral radiance in SI units (W m^-3 sr^-1)."""
    t = np.asarray(temperature, dtype=float)
    lam = np.asarray(wavelength, dtype=float)
    out = C1 / (lam**5 * np.expm1(C2 / (lam * t)))
    return out if out.ndim else float(out)


def planck_per_micron(temperature, wavelength):
    """Spectral radiance in W m^-2 sr^-1 um^-1."""
    return planck(temperature, wavelength) / PER_MICRON


def brightness_temperature(radiance, wavelength):
    """Invert Planck's law; ``radiance`` in W m^-2 sr^-1 um^-1, wavelength in m."""
    lam = np.asarray(wavelength, dtype=float)
    rad = np.asarray(radiance, dtype=float)
    if np.any(~(rad > 0)):
        raise NonPositiveRadiance("radiance must be strictly positive")
    if np.any(~(lam > 0)):
        raise ValueError("wavelength must be positive")
    si = rad * PER_MICRON
    out = C2 / (lam * np.log1p(C1 / (lam**5 * si)))
    return out if out.ndim else float(out)


# ------------------------------------------------------------------ pixels

def is_cloud(t12, rho065, rho086, day):
    """Cloud screen; reflectance clauses only apply in daylight."""
    t12 = np.asarray(t12, dtype=float)
    vis = np.asarray(rho065, dtype=float) + np.asarray(rho086, dtype=float)
    reflective = (vis > 1.2) | ((vis > 0.7) & (t12 < 285.0)) | ((np.asarray(rho086) > 0.25) & (t12 < 300.0))
    return (t12 < 265.0) | (np.asarray(day, dtype=bool) & reflective)


def fire_day(t4, t11, rho086):
    t4 = np.asarray(t4, dtype=float)
    return (t4 > 310.0) & ((t4 - t11) > 10.0) & (np.asarray(rho086, dtype=float) < 0.35)


def fire_night(t4, t11):
    t4 = np.asarray(t4, dtype=float)
    return (t4 > 305.0) & ((t4 - t11) > 10.0)


def classify_arrays(t4, t11, t12, rho065, rho086, zenith, water) -> np.ndarray:
    """Vectorised classifier returning PixelClass codes (uint8)."""
    day = np.asarray(zenith, dtype=float) < DAY_ZENITH
    water = np.asarray(water, dtype=bool)
    cloud = ~water & is_cloud(t12, rho065, rho086, day)
    rest = ~water & ~cloud
    out = np.full(np.broadcast(t4, zenith).shape, PixelClass.NON_FIRE, dtype=np.uint8)
    out[rest & day & fire_day(t4, t11, rho086)] = PixelClass.FIRE_DAY
    out[rest & ~day & fire_night(t4, t11)] = PixelClass.FIRE_NIGHT
    out[cloud] = PixelClass.CLOUD
    out[water] = PixelClass.WATER
    return out


PIXEL_FIELDS = ("T4", "T11", "T12", "rho065", "rho086", "solar_zenith")


def classify_pixel(px) -> PixelClass:
    """Classify one pixel given brightness temperatures and reflectances.

    ``px`` is a mapping with T4, T11, T12 (K), rho065, rho086, solar_zenith
    (degrees) and an optional boolean water_mask. Reflectances may be
    omitted for night pixels.
    """
    if px.get("water_mask", False):
        return PixelClass.WATER
    for name in ("T4", "T11", "T12", "solar_zenith"):
        if px.get(name) is None:
            raise MissingChannel(name)
    day = px["solar_zenith"] < DAY_ZENITH
    rho065, rho086 = px.get("rho065"), px.get("rho086")
    if day:
        for name, v in (("rho065", rho065), ("rho086", rho086)):
            if v is None:
                raise MissingChannel(name)
    else:
        rho065 = 0.0 if rho065 is None else rho065
        rho086 = 0.0 if rho086 is None else rho086
    code = classify_arrays(px["T4"], px["T11"], px["T12"], rho065, rho086, px["solar_zenith"], False)
    return PixelClass(int(code))


# ------------------------------------------------------------------ scenes

def geotransform_grid(geo, height: int, width: int):
    lat0, dlat, lon0, dlon = geo
    rows, cols = np.mgrid[0:height, 0:width]
    return lat0 + rows * dlat, lon0 + cols * dlon


@dataclass
class SceneRaster:
    """Per-pixel planes of equal shape (height, width).

    Radiances in W m^-2 sr^-1 um^-1; reflectances dimensionless; zenith in
    degrees; water_mask boolean; lat/lon in degrees.
    """

    planes: dict
    lat: np.ndarray
    lon: np.ndarray
    scene_id: str = "scene"
    geotransform: tuple | None = None  # (lat0, dlat, lon0, dlon) when lat/lon are regular

    def __post_init__(self):
        shapes = {np.shape(v) for v in self.planes.values()} | {np.shape(self.lat), np.shape(self.lon)}
        if len(shapes) != 1:
            raise SceneFormatError(f"planes disagree in shape: {sorted(shapes)}")
        for name in RADIANCE_CHANNELS:
            if name in self.planes and np.any(np.asarray(self.planes[name]) < 0):
                raise SceneFormatError(f"negative radiance in {name}")

    @property
    def shape(self) -> tuple[int, int]:
        return tuple(np.shape(self.lat))

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]

    def plane(self, name) -> np.ndarray:
        if name not in self.planes:
            raise MissingChannel(name)
        return np.asarray(self.planes[name])

    def brightness_temperatures(self):
        return tuple(brightness_temperature(self.plane(c), WAVELENGTHS[c]) for c in RADIANCE_CHANNELS)

    # file format: JSON header next to a raw little-endian float32 blob

    def save(self, header_path, data_path=None) -> Path:
        header_path = Path(header_path)
        data_path = Path(data_path) if data_path else header_path.with_suffix(".bin")
        names = list(self.planes)
        stack = [np.asarray(self.planes[n], dtype="<f4") for n in self.planes]
        if self.geotransform is None:
            names += ["lat", "lon"]
            stack += [np.asarray(self.lat, dtype="<f4"), np.asarray(self.lon, dtype="<f4")]
        data_path.write_bytes(np.stack(stack).astype("<f4").tobytes())
        header = {
            "format": "firesat-scene/1",
            "scene_id": self.scene_id,
            "width": self.width,
            "height": self.height,
            "channels": names,
            "dtype": "<f4",
            "scale_factors": {n: 1.0 for n in names},
            "data": data_path.name,
        }
        if self.geotransform is not None:
            header["geotransform"] = [float(v) for v in self.geotransform]
        header_path.write_text(json.dumps(header, indent=2))
        return header_path

    @classmethod
    def load(cls, header_path) -> "SceneRaster":
        header_path = Path(header_path)
        try:
            header = json.loads(header_path.read_text())
            width, height = int(header["width"]), int(header["height"])
            names = list(header["channels"])
            data_path = header_path.parent / header["data"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise SceneFormatError(f"bad scene header {header_path}: {exc}") from exc
        try:
            raw = np.frombuffer(data_path.read_bytes(), dtype="<f4")
        except (OSError, ValueError) as exc:
            raise SceneFormatError(f"cannot read scene data {data_path}: {exc}") from exc
        expected = len(names) * width * height
        if raw.size != expected:
            raise SceneFormatError(f"scene data has {raw.size} values, header implies {expected}")
        cube = raw.reshape(len(names), height, width).astype(float)
        scales = header.get("scale_factors", {})
        planes = {n: cube[k] * float(scales.get(n, 1.0)) for k, n in enumerate(names)}
        if "lat" in planes and "lon" in planes:
            lat, lon = planes.pop("lat"), planes.pop("lon")
            geo = None
        elif "geotransform" in header:
            geo = tuple(float(v) for v in header["geotransform"])
            lat, lon = geotransform_grid(geo, height, width)
        else:
            raise SceneFormatError("scene carries neither lat/lon planes nor a geotransform")
        if "water_mask" in planes:
            planes["water_mask"] = planes["water_mask"] > 0.5
        return cls(planes, lat, lon, header.get("scene_id", header_path.stem), geo)


@dataclass
class FireReport:
    scene_id: str
    fire_pixels: list = field(default_factory=list)  # (lat, lon, class label)
    counts: dict = field(default_factory=dict)
    classes: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_fire(self) -> int:
        return len(self.fire_pixels)

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "n_fire": self.n_fire,
            "counts": dict(self.counts),
            "fire_pixels": [{"lat": la, "lon": lo, "class": c} for la, lo, c in self.fire_pixels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lat", "lon", "class"])
        w.writerows(self.fire_pixels)
        return buf.getvalue()


def classify_scene(scene: SceneRaster) -> FireReport:
    """Classify every pixel; fire pixels are listed in row-major order."""
    water = scene.plane("water_mask") if "water_mask" in scene.planes else np.zeros(scene.shape, bool)
    zenith = scene.plane("solar_zenith")
    # reflectances are only needed where the sun is up
    day = zenith < DAY_ZENITH
    refl = []
    for name in REFLECTANCE_CHANNELS:
        if name in scene.planes:
            refl.append(scene.plane(name))
        elif day.any():
            raise MissingChannel(name)
        else:
            refl.append(np.zeros(scene.shape))
    land = ~np.asarray(water, dtype=bool)
    temps = []
    for name in RADIANCE_CHANNELS:
        rad = scene.plane(name)
        t = np.full(scene.shape, np.nan)
        if land.any():
            t[land] = brightness_temperature(rad[land], WAVELENGTHS[name])
        temps.append(t)
    with np.errstate(invalid="ignore"):
        codes = classify_arrays(*temps, *refl, zenith, water)
    rows, cols = np.nonzero((codes == PixelClass.FIRE_DAY) | (codes == PixelClass.FIRE_NIGHT))
    fire = [(float(scene.lat[r, c]), float(scene.lon[r, c]), PixelClass(int(codes[r, c])).label)
            for r, c in zip(rows, cols)]
    counts = {cls.label: int(np.count_nonzero(codes == cls)) for cls in PixelClass}
    return FireReport(scene.scene_id, fire, counts, codes)


# ------------------------------------------------------------------ synthetic scenes

# nominal per-class values (K, reflectance, zenith); each lies well clear of
# every threshold so float32 storage cannot flip a class
CLASS_DEFAULTS = {
    PixelClass.WATER: dict(T4=290.0, T11=288.0, T12=287.0, rho065=0.05, rho086=0.03, solar_zenith=40.0),
    PixelClass.CLOUD: dict(T4=270.0, T11=262.0, T12=260.0, rho065=0.5, rho086=0.5, solar_zenith=40.0),
    PixelClass.FIRE_DAY: dict(T4=330.0, T11=300.0, T12=295.0, rho065=0.1, rho086=0.1, solar_zenith=40.0),
    PixelClass.FIRE_NIGHT: dict(T4=320.0, T11=295.0, T12=290.0, rho065=0.0, rho086=0.0, solar_zenith=120.0),
    PixelClass.NON_FIRE: dict(T4=295.0, T11=290.0, T12=290.0, rho065=0.1, rho086=0.15, solar_zenith=40.0),
}


def _pixel_values(entry: dict) -> tuple[PixelClass, dict]:
    cls = PixelClass.parse(entry["class"])
    vals = dict(CLASS_DEFAULTS[cls])
    vals.update({k: float(v) for k, v in entry.items() if k in PIXEL_FIELDS})
    vals["water_mask"] = cls is PixelClass.WATER
    got = classify_pixel(vals)
    if got is not cls:
        raise InfeasibleSpec(f"requested {cls.label} but the given values classify as {got.label}: {entry}")
    return cls, vals


def generate_synthetic_scene(spec: dict) -> SceneRaster:
    """Build a scene whose classification is known in advance.

    ``spec`` holds either ``classes`` (a 2-D list of class names) or
    ``width``/``height``/``background`` plus a ``pixels`` list of
    ``{"row", "col", "class", ...overrides}``. Radiances come from the
    forward Planck function; ``geotransform`` is [lat0, dlat, lon0, dlon].
    """
    if "classes" in spec:
        grid = [[{"class": c} for c in row] for row in spec["classes"]]
    else:
        h, w = int(spec["height"]), int(spec["width"])
        bg = spec.get("background", {"class": "NonFire"})
        bg = {"class": bg} if isinstance(bg, str) else bg
        grid = [[dict(bg) for _ in range(w)] for _ in range(h)]
        for p in spec.get("pixels", []):
            cell = {k: v for k, v in p.items() if k not in ("row", "col")}
            grid[int(p["row"])][int(p["col"])] = cell
    h, w = len(grid), len(grid[0])
    if any(len(row) != w for row in grid):
        raise InfeasibleSpec("class grid rows have unequal length")
    planes = {name: np.zeros((h, w)) for name in SCENE_PLANES}
    planes["water_mask"] = np.zeros((h, w), dtype=bool)
    truth = np.zeros((h, w), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            cls, vals = _pixel_values(grid[r][c])
            truth[r, c] = cls
            for ch, tname in (("L4", "T4"), ("L11", "T11"), ("L12", "T12")):
                planes[ch][r, c] = planck_per_micron(vals[tname], WAVELENGTHS[ch])
            planes["rho065"][r, c] = vals["rho065"]
            planes["rho086"][r, c] = vals["rho086"]
            planes["solar_zenith"][r, c] = vals["solar_zenith"]
            planes["water_mask"][r, c] = vals["water_mask"]
    geo = tuple(float(v) for v in spec.get("geotransform", (-33.0, -0.001, 150.0, 0.001)))
    lat, lon = geotransform_grid(geo, h, w)
    scene = SceneRaster(planes, lat, lon, spec.get("scene_id", "synthetic"), geo)
    scene.truth = truth
    return scene
