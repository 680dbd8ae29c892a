"""Georeferenced band rasters and temporal-spectral feature extraction.

Grids are plain-text ESRI-ASCII-style files (six-key header plus
whitespace-separated rows) so they round-trip bit-exactly in any
language. Row 0 is the northernmost row; ``xllcorner``/``yllcorner``
give the lower-left corner in degrees.

A scene is one acquisition date with six surface-reflectance bands
(Blue, Green, Red, NIR, SWIR1, SWIR2) plus a QA grid where 0 means
clear and any nonzero value (cloud bit 0, shadow bit 1, snow bit 2)
masks the cell. The ten candidate model features are the six bands and
four indices:

    NDVI  = (NIR - Red) / (NIR + Red)
    EVI   = 2.5 (NIR - Red) / (NIR + 6 Red - 7 Blue + 1)
    ENDVI = ((NIR + Green) - 2 Blue) / ((NIR + Green) + 2 Blue)
    LSWI  = (NIR - SWIR1) / (NIR + SWIR1)

Reflectance is assumed pre-scaled to [0, 1]; pass ``scale=0.0001`` when
reading rasters that store raw surface-reflectance integers.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataValidationError
from .geocore import GeoPoint

BAND_NAMES = ("Blue", "Green", "Red", "NIR", "SWIR1", "SWIR2")

#: Denominators smaller than this produce nodata rather than an index value.
DENOMINATOR_EPS = 1e-12


class GridFormatError(DataValidationError):
    """Malformed grid or manifest file."""


class GeoreferenceMismatchError(DataValidationError):
    """Two grids that must be co-registered are not."""


class OutOfExtentError(DataValidationError):
    """Point falls outside a grid's extent."""


class MissingBandError(DataValidationError):
    """A band required by the requested index is absent."""


class UnusablePixelError(DataValidationError):
    """A pixel has no valid observation for some feature in any scene."""


class FeatureName(str, Enum):
    """The ten candidate model inputs. Enumeration order is the canonical
    tie-break order wherever features compete."""

    NDVI = "NDVI"
    EVI = "EVI"
    ENDVI = "ENDVI"
    LSWI = "LSWI"
    Red = "Red"
    Blue = "Blue"
    Green = "Green"
    NIR = "NIR"
    SWIR1 = "SWIR1"
    SWIR2 = "SWIR2"


INDEX_FEATURES = (FeatureName.NDVI, FeatureName.EVI, FeatureName.ENDVI, FeatureName.LSWI)

_INDEX_BANDS = {
    FeatureName.NDVI: ("NIR", "Red"),
    FeatureName.EVI: ("NIR", "Red", "Blue"),
    FeatureName.ENDVI: ("NIR", "Green", "Blue"),
    FeatureName.LSWI: ("NIR", "SWIR1"),
}


@dataclass
class RasterGrid:
    """Dense band grid; ``values[0]`` is the northernmost row."""

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    nodata: float
    values: np.ndarray

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise DataValidationError("grid must be at least 1x1")
        if self.cellsize <= 0:
            raise DataValidationError("cellsize must be > 0")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.nrows, self.ncols):
            raise DataValidationError(
                f"values shape {self.values.shape} != ({self.nrows}, {self.ncols})"
            )
        bad = ~np.isfinite(self.values) & ~(self.values == self.nodata)
        if bad.any():
            raise DataValidationError("grid contains non-finite values that are not nodata")

    def same_georef(self, other: "RasterGrid") -> bool:
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and self.xll == other.xll
            and self.yll == other.yll
            and self.cellsize == other.cellsize
        )

    def valid_mask(self) -> np.ndarray:
        return self.values != self.nodata

    def cell_index(self, p: GeoPoint) -> tuple[int, int]:
        """(row, col) of the cell containing ``p``; no interpolation."""
        col = int(np.floor((p.lon_deg - self.xll) / self.cellsize))
        from_bottom = int(np.floor((p.lat_deg - self.yll) / self.cellsize))
        row = self.nrows - 1 - from_bottom
        if not (0 <= col < self.ncols and 0 <= row < self.nrows):
            raise OutOfExtentError(
                f"point ({p.lat_deg}, {p.lon_deg}) outside grid extent"
            )
        return row, col

    def cell_center(self, row: int, col: int) -> GeoPoint:
        lon = self.xll + (col + 0.5) * self.cellsize
        lat = self.yll + (self.nrows - row - 0.5) * self.cellsize
        return GeoPoint(lat, lon)

    def like(self, values: np.ndarray) -> "RasterGrid":
        """New grid sharing this grid's georeferencing."""
        return RasterGrid(
            self.ncols, self.nrows, self.xll, self.yll, self.cellsize, self.nodata, values
        )


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_grid(grid: RasterGrid, path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {_format_value(grid.xll)}",
        f"yllcorner {_format_value(grid.yll)}",
        f"cellsize {_format_value(grid.cellsize)}",
        f"NODATA_value {_format_value(grid.nodata)}",
    ]
    for row in grid.values:
        lines.append(" ".join(_format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_grid(path: str | Path, scale: float | None = None) -> RasterGrid:
    """Read a grid file; ``scale`` multiplies non-nodata values on ingest."""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"grid file not found: {path}")
    lines = path.read_text().splitlines()
    header: dict[str, float] = {}
    idx = 0
    while idx < len(lines) and len(header) < len(_HEADER_KEYS):
        parts = lines[idx].split()
        if len(parts) != 2 or parts[0].lower() not in _HEADER_KEYS:
            raise GridFormatError(f"{path}: bad header line {idx + 1}: {lines[idx]!r}")
        header[parts[0].lower()] = float(parts[1])
        idx += 1
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise GridFormatError(f"{path}: missing header keys {missing}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    rows = []
    for rline in lines[idx:]:
        if not rline.strip():
            continue
        tokens = rline.split()
        if len(tokens) != ncols:
            raise GridFormatError(
                f"{path}: row {len(rows)} has {len(tokens)} values, expected {ncols}"
            )
        rows.append([float(t) for t in tokens])
    if len(rows) != nrows:
        raise GridFormatError(f"{path}: found {len(rows)} rows, expected {nrows}")
    values = np.array(rows, dtype=np.float64)
    nodata = header["nodata_value"]
    if scale is not None:
        values = np.where(values == nodata, nodata, values * scale)
    return RasterGrid(
        ncols, nrows, header["xllcorner"], header["yllcorner"], header["cellsize"], nodata, values
    )


def apply_qa_mask(band: RasterGrid, qa: RasterGrid) -> RasterGrid:
    """Keep cells where QA is 0 (clear); everything else becomes nodata."""
    if not band.same_georef(qa):
        raise GeoreferenceMismatchError("band and QA grids are not co-registered")
    values = np.where(qa.values == 0, band.values, band.nodata)
    return band.like(values)


def _index_arrays(kind: FeatureName, b: Mapping[str, np.ndarray]):
    """Per-cell index values plus a mask of usable denominators."""
    nir = b["NIR"]
    if kind == FeatureName.NDVI:
        num, den = nir - b["Red"], nir + b["Red"]
    elif kind == FeatureName.EVI:
        num, den = 2.5 * (nir - b["Red"]), nir + 6.0 * b["Red"] - 7.0 * b["Blue"] + 1.0
    elif kind == FeatureName.ENDVI:
        s = nir + b["Green"]
        num, den = s - 2.0 * b["Blue"], s + 2.0 * b["Blue"]
    elif kind == FeatureName.LSWI:
        num, den = nir - b["SWIR1"], nir + b["SWIR1"]
    else:
        raise MissingBandError(f"{kind.value} is not a computable index")
    ok = np.abs(den) >= DENOMINATOR_EPS
    out = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
    return out, ok


def compute_index(kind: FeatureName, bands: Mapping[str, RasterGrid]) -> RasterGrid:
    """Evaluate one vegetation index over co-registered band grids.

    Nodata propagates: any nodata input band, or a vanishing
    denominator, yields nodata in the output cell.
    """
    if kind not in _INDEX_BANDS:
        raise MissingBandError(f"{kind.value} is not a computable index")
    needed = _INDEX_BANDS[kind]
    for name in needed:
        if name not in bands:
            raise MissingBandError(f"{kind.value} requires band {name}")
    ref = bands[needed[0]]
    arrays = {}
    valid = np.ones(ref.values.shape, dtype=bool)
    for name in needed:
        grid = bands[name]
        if not grid.same_georef(ref):
            raise GeoreferenceMismatchError(f"band {name} is not co-registered")
        arrays[name] = grid.values
        valid &= grid.valid_mask()
    out, ok = _index_arrays(kind, arrays)
    return ref.like(np.where(valid & ok, out, ref.nodata))


def sample_pixel(grid: RasterGrid, p: GeoPoint) -> float:
    """Value of the cell containing ``p``."""
    row, col = grid.cell_index(p)
    return float(grid.values[row, col])


@dataclass(frozen=True)
class SceneManifest:
    """One acquisition date: six band grid paths plus a QA grid path."""

    scene_date: datetime.date
    band_paths: dict[str, str]
    qa_path: str

    def __post_init__(self):
        missing = [b for b in BAND_NAMES if b not in self.band_paths]
        if missing:
            raise DataValidationError(f"manifest missing bands {missing}")


def write_manifest(manifest: SceneManifest, path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"date={manifest.scene_date.isoformat()}"]
    for band in BAND_NAMES:
        lines.append(f"band.{band}={manifest.band_paths[band]}")
    lines.append(f"qa={manifest.qa_path}")
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> SceneManifest:
    """Parse a manifest; relative grid paths resolve against its directory."""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"manifest not found: {path}")
    base = path.parent
    date = None
    band_paths: dict[str, str] = {}
    qa_path = None
    for n, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise GridFormatError(f"{path}: bad manifest line {n}: {line!r}")
        key, value = line.split("=", 1)
        if key == "date":
            date = datetime.date.fromisoformat(value)
        elif key.startswith("band."):
            band_paths[key[len("band.") :]] = str((base / value))
        elif key == "qa":
            qa_path = str(base / value)
        else:
            raise GridFormatError(f"{path}: unknown manifest key {key!r}")
    if date is None or qa_path is None:
        raise GridFormatError(f"{path}: manifest needs date= and qa= lines")
    return SceneManifest(date, band_paths, qa_path)


@dataclass(frozen=True)
class FeatureStack:
    """Gap-filled T x F feature matrix for one point.

    ``valid_mask`` records which cells were actually observed; masked
    cells hold values linearly interpolated over time (nearest valid
    value at the boundaries).
    """

    point: GeoPoint
    features: tuple[FeatureName, ...]
    dates: tuple[datetime.date, ...]
    matrix: np.ndarray
    valid_mask: np.ndarray


class SceneStack:
    """All scenes of a campaign loaded once, ready for repeated sampling."""

    def __init__(self, dates, band_cubes, valid, template: RasterGrid):
        self.dates = tuple(dates)
        self.bands = band_cubes  # band name -> (T, nrows, ncols)
        self.valid = valid  # (T, nrows, ncols) bool, QA-clear and all bands present
        self.template = template
        self._planes: dict[FeatureName, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def from_manifests(
        cls, manifests: Sequence[SceneManifest], scale: float | None = None
    ) -> "SceneStack":
        if not manifests:
            raise DataValidationError("no scenes given")
        dates = [m.scene_date for m in manifests]
        if any(later < earlier for earlier, later in zip(dates, dates[1:])):
            raise DataValidationError("scenes must be sorted by date")
        template = None
        per_band = {b: [] for b in BAND_NAMES}
        valid_planes = []
        for manifest in manifests:
            qa = read_grid(manifest.qa_path)
            if template is None:
                template = qa
            elif not qa.same_georef(template):
                raise GeoreferenceMismatchError("scene grids are not co-registered")
            plane_valid = qa.values == 0
            for band in BAND_NAMES:
                grid = read_grid(manifest.band_paths[band], scale=scale)
                if not grid.same_georef(template):
                    raise GeoreferenceMismatchError(
                        f"band {band} of {manifest.scene_date} is not co-registered"
                    )
                per_band[band].append(grid.values)
                plane_valid &= grid.valid_mask()
            valid_planes.append(plane_valid)
        cubes = {b: np.stack(arrs) for b, arrs in per_band.items()}
        return cls(dates, cubes, np.stack(valid_planes), template)

    @property
    def n_scenes(self) -> int:
        return len(self.dates)

    def feature_plane(self, feature: FeatureName) -> tuple[np.ndarray, np.ndarray]:
        """(values, valid) cubes of shape (T, nrows, ncols) for one feature."""
        if feature not in self._planes:
            if feature in _INDEX_BANDS:
                out, ok = _index_arrays(feature, self.bands)
                self._planes[feature] = (out, self.valid & ok)
            else:
                self._planes[feature] = (self.bands[feature.value], self.valid)
        return self._planes[feature]

    def stack_at_cell(
        self, row: int, col: int, features: Sequence[FeatureName]
    ) -> tuple[np.ndarray, np.ndarray]:
        """Gap-filled (T, F) matrix and valid mask at one raster cell."""
        T = self.n_scenes
        F = len(features)
        matrix = np.empty((T, F), dtype=np.float64)
        mask = np.empty((T, F), dtype=bool)
        x = np.array([d.toordinal() for d in self.dates], dtype=np.float64)
        for j, feature in enumerate(features):
            values, valid = self.feature_plane(feature)
            col_values = values[:, row, col]
            col_valid = valid[:, row, col]
            if not col_valid.any():
                raise UnusablePixelError(
                    f"cell ({row}, {col}) has no valid {feature.value} observation"
                )
            if col_valid.all():
                filled = col_values
            else:
                filled = np.interp(x, x[col_valid], col_values[col_valid])
                # interp reconstructs observed samples exactly, but keep the
                # originals so observed cells are untouched by construction
                filled[col_valid] = col_values[col_valid]
            matrix[:, j] = filled
            mask[:, j] = col_valid
        return matrix, mask

    def stack_at(self, p: GeoPoint, features: Sequence[FeatureName]) -> FeatureStack:
        row, col = self.template.cell_index(p)
        matrix, mask = self.stack_at_cell(row, col, features)
        return FeatureStack(p, tuple(features), self.dates, matrix, mask)


def extract_feature_stack(
    scenes: Sequence[SceneManifest],
    features: Sequence[FeatureName],
    p: GeoPoint,
    scale: float | None = None,
) -> FeatureStack:
    """Per-point temporal feature matrix straight from scene manifests.

    Convenience wrapper over :class:`SceneStack`; batch callers should
    build the stack once and reuse it.
    """
    if not features:
        raise DataValidationError("feature list must be nonempty")
    return SceneStack.from_manifests(scenes, scale=scale).stack_at(p, features)
