"""Deterministic synthetic landscape for end-to-end verification.

A world is a square raster of parcels separated by roads, laid out near
the equator so the meter/degree conversion is the same on both axes and
parcel edges align exactly with raster cells. Every crop class gets a
procedural street-level texture (base color, row-stripe frequency,
speckle) and a piecewise-linear per-band phenology curve, so the image
classifier and the pixel classifier both have honestly learnable but
nontrivial signal. Roads and non-crop parcels carry the "others" class.

Everything is a pure function of (config, seed): worlds, rendered
images and synthesized scenes are bit-identical across runs.
"""

from __future__ import annotations

import datetime
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataValidationError
from .geocore import METERS_PER_DEGREE, BoundingBox, GeoPoint, Heading
from .imageclassifier import LabeledImage, LabelTaxonomy, write_catalog
from .imagery import ImageTensor, StreetImageRecord, encode_image, write_fixture
from .rasterstack import BAND_NAMES, RasterGrid, SceneManifest, write_grid, write_manifest

NODATA = -9999.0


def scene_dates(year: int = 2013, n: int = 10) -> tuple[datetime.date, ...]:
    """``n`` acquisition dates spread from early April to mid October."""
    if n < 3:
        raise DataValidationError("need at least 3 scene dates")
    start = datetime.date(year, 1, 1)
    doys = np.rint(np.linspace(96, 285, n)).astype(int)
    return tuple(start + datetime.timedelta(days=int(d) - 1) for d in doys)


def _default_dates() -> tuple[datetime.date, ...]:
    return scene_dates()


@dataclass(frozen=True)
class WorldConfig:
    taxonomy: LabelTaxonomy
    extent: BoundingBox
    cell_m: float = 30.0
    parcel_cells: int = 8
    road_cells: int = 1
    class_mix: tuple[str, ...] = ()
    proportions: tuple[float, ...] = ()
    scene_dates: tuple[datetime.date, ...] = field(default_factory=_default_dates)
    noise_sigma: float = 0.01
    cloud_fraction: float = 0.1
    image_px: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.parcel_cells < 2:
            raise DataValidationError("parcels must span at least 2 raster cells")
        if self.road_cells < 1 or self.cell_m <= 0:
            raise DataValidationError("bad road/cell geometry")
        if len(self.class_mix) != len(self.proportions) or not self.class_mix:
            raise DataValidationError("class_mix and proportions must align and be nonempty")
        if abs(sum(self.proportions) - 1.0) > 1e-9:
            raise DataValidationError("proportions must sum to 1")
        if any(p < 0 for p in self.proportions):
            raise DataValidationError("proportions must be non-negative")
        if self.noise_sigma < 0 or not (0.0 <= self.cloud_fraction < 1.0):
            raise DataValidationError("bad noise or cloud fraction")
        if len(self.scene_dates) < 3:
            raise DataValidationError("need at least 3 scene dates")
        for name in self.class_mix:
            self.taxonomy.index(name)

    @property
    def road_width_m(self) -> float:
        return self.road_cells * self.cell_m

    @property
    def period_cells(self) -> int:
        return self.parcel_cells + self.road_cells

    @property
    def cellsize_deg(self) -> float:
        return self.cell_m / METERS_PER_DEGREE


def square_world_config(
    taxonomy: LabelTaxonomy,
    parcels_per_side: int = 22,
    anchor: GeoPoint = GeoPoint(0.0, 0.0),
    class_mix: Sequence[str] | None = None,
    proportions: Sequence[float] | None = None,
    **kwargs,
) -> WorldConfig:
    """Config whose extent tiles exactly: roads border every parcel row.

    The anchor is the south-west corner; keep it near the equator so a
    meter is the same fraction of a degree east as north.
    """
    if class_mix is None:
        class_mix = taxonomy.class_names
    if proportions is None:
        proportions = tuple(1.0 / len(class_mix) for _ in class_mix)
    probe = WorldConfig(
        taxonomy,
        BoundingBox(0.0, 1.0, 0.0, 1.0),
        class_mix=tuple(class_mix),
        proportions=tuple(proportions),
        **kwargs,
    )
    ncells = parcels_per_side * probe.period_cells + probe.road_cells
    span = ncells * probe.cellsize_deg
    extent = BoundingBox(
        anchor.lat_deg,
        anchor.lat_deg + span,
        anchor.lon_deg,
        anchor.lon_deg + span,
    )
    return WorldConfig(
        taxonomy,
        extent,
        class_mix=tuple(class_mix),
        proportions=tuple(proportions),
        **kwargs,
    )


# --------------------------------------------------------------------------
# Phenology: piecewise-linear (day-of-year, reflectance) nodes per band.
# Annual crops get staggered NIR bells; perennials get broad plateaus
# with distinct SWIR levels. Values chosen for >= 5 sigma separation at
# the default noise level, not for radiometric realism.
# --------------------------------------------------------------------------

_FLAT = lambda v: ((1, v), (365, v))  # noqa: E731 - tiny curve helper

DEFAULT_PHENOLOGY: dict[str, dict[str, tuple[tuple[int, float], ...]]] = {
    "others": {
        "Blue": _FLAT(0.08),
        "Green": _FLAT(0.10),
        "Red": _FLAT(0.12),
        "NIR": _FLAT(0.18),
        "SWIR1": _FLAT(0.25),
        "SWIR2": _FLAT(0.22),
    },
    "corn": {
        "Blue": ((1, 0.06), (150, 0.06), (200, 0.03), (280, 0.06), (365, 0.06)),
        "Green": ((1, 0.09), (150, 0.09), (200, 0.07), (280, 0.09), (365, 0.09)),
        "Red": ((1, 0.12), (140, 0.12), (200, 0.04), (260, 0.10), (365, 0.12)),
        "NIR": ((1, 0.16), (140, 0.18), (200, 0.56), (260, 0.25), (365, 0.16)),
        "SWIR1": ((1, 0.22), (140, 0.22), (200, 0.15), (260, 0.21), (365, 0.22)),
        "SWIR2": ((1, 0.16), (140, 0.16), (200, 0.09), (260, 0.15), (365, 0.16)),
    },
    "soybean": {
        "Blue": ((1, 0.07), (170, 0.07), (230, 0.04), (290, 0.07), (365, 0.07)),
        "Green": ((1, 0.10), (170, 0.10), (230, 0.08), (290, 0.10), (365, 0.10)),
        "Red": ((1, 0.13), (170, 0.13), (230, 0.05), (280, 0.11), (365, 0.13)),
        "NIR": ((1, 0.15), (170, 0.17), (230, 0.46), (280, 0.22), (365, 0.15)),
        "SWIR1": ((1, 0.20), (170, 0.20), (230, 0.11), (280, 0.19), (365, 0.20)),
        "SWIR2": ((1, 0.14), (170, 0.14), (230, 0.05), (280, 0.13), (365, 0.14)),
    },
    "cotton": {
        "Blue": ((1, 0.08), (190, 0.08), (250, 0.05), (310, 0.08), (365, 0.08)),
        "Green": ((1, 0.11), (190, 0.11), (250, 0.09), (310, 0.11), (365, 0.11)),
        "Red": ((1, 0.14), (190, 0.14), (250, 0.07), (300, 0.12), (365, 0.14)),
        "NIR": ((1, 0.17), (190, 0.19), (250, 0.44), (300, 0.24), (365, 0.17)),
        "SWIR1": ((1, 0.30), (190, 0.30), (250, 0.24), (300, 0.29), (365, 0.30)),
        "SWIR2": ((1, 0.24), (190, 0.24), (250, 0.19), (300, 0.23), (365, 0.24)),
    },
    "alfalfa": {
        "Blue": _FLAT(0.04),
        "Green": ((1, 0.08), (90, 0.09), (365, 0.08)),
        "Red": ((1, 0.06), (90, 0.05), (365, 0.06)),
        "NIR": ((1, 0.34), (90, 0.40), (300, 0.38), (365, 0.34)),
        "SWIR1": _FLAT(0.12),
        "SWIR2": _FLAT(0.07),
    },
    "grape": {
        "Blue": _FLAT(0.07),
        "Green": ((1, 0.09), (120, 0.10), (365, 0.09)),
        "Red": ((1, 0.11), (120, 0.09), (300, 0.10), (365, 0.11)),
        "NIR": ((1, 0.18), (120, 0.30), (290, 0.28), (330, 0.18), (365, 0.18)),
        "SWIR1": _FLAT(0.22),
        "SWIR2": _FLAT(0.16),
    },
    "almond": {
        "Blue": _FLAT(0.05),
        "Green": ((1, 0.09), (70, 0.10), (365, 0.09)),
        "Red": ((1, 0.10), (70, 0.07), (330, 0.08), (365, 0.10)),
        "NIR": ((1, 0.20), (70, 0.42), (300, 0.40), (340, 0.22), (365, 0.20)),
        "SWIR1": _FLAT(0.17),
        "SWIR2": _FLAT(0.20),
    },
    "pistachio": {
        "Blue": _FLAT(0.06),
        "Green": ((1, 0.10), (110, 0.11), (365, 0.10)),
        "Red": ((1, 0.12), (110, 0.08), (320, 0.09), (365, 0.12)),
        "NIR": ((1, 0.19), (110, 0.34), (300, 0.33), (340, 0.20), (365, 0.19)),
        "SWIR1": _FLAT(0.31),
        "SWIR2": _FLAT(0.28),
    },
}


def phenology_value(class_name: str, band: str, doy) -> np.ndarray:
    """Reflectance of one class/band at the given day(s) of year."""
    curve = DEFAULT_PHENOLOGY[class_name][band]
    xs = np.array([p[0] for p in curve], dtype=np.float64)
    ys = np.array([p[1] for p in curve], dtype=np.float64)
    return np.interp(np.asarray(doy, dtype=np.float64), xs, ys)


def phenology_separation(classes: Sequence[str], dates: Sequence[datetime.date]) -> float:
    """Worst-case class-pair separation: min over pairs of the largest
    per-band per-date reflectance difference."""
    doys = [d.timetuple().tm_yday for d in dates]
    worst = np.inf
    for i, a in enumerate(classes):
        for b in classes[i + 1 :]:
            best = 0.0
            for band in BAND_NAMES:
                diff = np.abs(phenology_value(a, band, doys) - phenology_value(b, band, doys))
                best = max(best, float(diff.max()))
            worst = min(worst, best)
    return worst


# --------------------------------------------------------------------------
# World generation
# --------------------------------------------------------------------------


@dataclass
class World:
    cfg: WorldConfig
    truth: RasterGrid
    road_mask: RasterGrid
    parcel_classes: np.ndarray  # (parcels_y, parcels_x) class indices

    @property
    def taxonomy(self) -> LabelTaxonomy:
        return self.cfg.taxonomy

    def to_local(self, p: GeoPoint) -> tuple[float, float]:
        """(x east, y south) meters from the north-west corner."""
        e = self.cfg.extent
        mid = np.cos(np.radians(0.5 * (e.min_lat_deg + e.max_lat_deg)))
        x = (p.lon_deg - e.min_lon_deg) * METERS_PER_DEGREE * mid
        y = (e.max_lat_deg - p.lat_deg) * METERS_PER_DEGREE
        return x, y

    def class_at_local(self, x_m: float, y_m: float) -> tuple[int, bool]:
        """(class index, is_road) at local meter coordinates."""
        cfg = self.cfg
        size_m = self.truth.ncols * cfg.cell_m
        if not (0 <= x_m < size_m and 0 <= y_m < self.truth.nrows * cfg.cell_m):
            raise DataValidationError("point outside the world")
        period = cfg.period_cells * cfg.cell_m
        road = cfg.road_cells * cfg.cell_m
        kx, ox = int(x_m // period), x_m % period
        ky, oy = int(y_m // period), y_m % period
        if ox < road or oy < road:
            return self.taxonomy.others_index, True
        py, px = self.parcel_classes.shape
        return int(self.parcel_classes[min(ky, py - 1), min(kx, px - 1)]), False

    def road_cell_centers(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.road_mask.values == 1)
        return list(zip(rows.tolist(), cols.tolist()))


def generate_world(cfg: WorldConfig) -> World:
    """Build the parcel landscape and its truth/road rasters.

    Parcel class counts follow the configured proportions to within one
    parcel (largest-remainder allocation, then a seeded shuffle places
    them on the parcel grid).
    """
    cellsize = cfg.cellsize_deg
    e = cfg.extent
    ncols = int(round((e.max_lon_deg - e.min_lon_deg) / cellsize))
    nrows = int(round((e.max_lat_deg - e.min_lat_deg) / cellsize))
    if ncols < cfg.period_cells + cfg.road_cells or nrows < cfg.period_cells + cfg.road_cells:
        raise DataValidationError("extent too small for a single parcel block")
    parcels_x = (ncols - cfg.road_cells) // cfg.period_cells
    parcels_y = (nrows - cfg.road_cells) // cfg.period_cells
    n_parcels = parcels_x * parcels_y

    exact = [p * n_parcels for p in cfg.proportions]
    counts = [int(c) for c in exact]
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n_parcels - sum(counts)]:
        counts[i] += 1
    class_indices = [cfg.taxonomy.index(name) for name in cfg.class_mix]
    assignment = np.repeat(class_indices, counts)
    rng = np.random.default_rng([cfg.seed, 0xA11])
    rng.shuffle(assignment)
    parcel_classes = assignment.reshape(parcels_y, parcels_x)

    col = np.arange(ncols)
    row = np.arange(nrows)
    road_col = (col % cfg.period_cells) < cfg.road_cells
    road_row = (row % cfg.period_cells) < cfg.road_cells
    # cells past the last full period belong to the trailing road
    road_col |= col >= cfg.road_cells + parcels_x * cfg.period_cells
    road_row |= row >= cfg.road_cells + parcels_y * cfg.period_cells
    is_road = road_row[:, None] | road_col[None, :]

    px = np.minimum((col - cfg.road_cells) // cfg.period_cells, parcels_x - 1)
    py = np.minimum((row - cfg.road_cells) // cfg.period_cells, parcels_y - 1)
    px = np.maximum(px, 0)
    py = np.maximum(py, 0)
    truth_values = parcel_classes[py[:, None], px[None, :]].astype(np.float64)
    truth_values[is_road] = cfg.taxonomy.others_index

    georef = dict(
        ncols=ncols,
        nrows=nrows,
        xll=e.min_lon_deg,
        yll=e.min_lat_deg,
        cellsize=cellsize,
        nodata=NODATA,
    )
    truth = RasterGrid(values=truth_values, **georef)
    road_mask = RasterGrid(values=is_road.astype(np.float64), **georef)
    return World(cfg, truth, road_mask, parcel_classes)


# --------------------------------------------------------------------------
# Street-level rendering
# --------------------------------------------------------------------------

#: (base RGB, stripe frequency, speckle amplitude) per class texture.
TEXTURES: dict[str, tuple[tuple[float, float, float], float, float]] = {
    "corn": ((0.82, 0.72, 0.20), 6.0, 0.05),
    "soybean": ((0.18, 0.52, 0.16), 10.0, 0.05),
    "cotton": ((0.86, 0.86, 0.88), 4.0, 0.06),
    "alfalfa": ((0.10, 0.45, 0.32), 0.0, 0.05),
    "grape": ((0.42, 0.16, 0.44), 3.0, 0.06),
    "almond": ((0.46, 0.32, 0.16), 2.0, 0.06),
    "pistachio": ((0.58, 0.66, 0.28), 2.5, 0.05),
    "others": ((0.52, 0.52, 0.52), 0.0, 0.12),
}

SKY_FRACTION = 0.35
VIEW_STEP_M = 5.0


def _image_rng(cfg_seed: int, seed: int, p: GeoPoint, h: Heading) -> np.random.Generator:
    key = f"{cfg_seed}|{seed}|{p.lat_deg:.6f}|{p.lon_deg:.6f}|{int(h)}"
    return np.random.default_rng(zlib.crc32(key.encode("ascii")))


def facing_class(world: World, p: GeoPoint, h: Heading, max_range_m: float | None = None) -> int:
    """Class of the first parcel cell along the view direction.

    Falls back to "others" when the ray runs out of range (looking down
    the road axis) or leaves the world.
    """
    cfg = world.cfg
    if max_range_m is None:
        max_range_m = cfg.road_width_m + 2.0 * cfg.cell_m
    x, y = world.to_local(p)
    dx = {Heading.EAST: 1.0, Heading.WEST: -1.0}.get(h, 0.0)
    dy = {Heading.SOUTH: 1.0, Heading.NORTH: -1.0}.get(h, 0.0)
    d = VIEW_STEP_M
    while d <= max_range_m:
        try:
            cls, is_road = world.class_at_local(x + d * dx, y + d * dy)
        except DataValidationError:
            break
        if not is_road:
            return cls
        d += VIEW_STEP_M
    return world.taxonomy.others_index


def render_street_image(
    world: World, p: GeoPoint, h: Heading, size_px: int | None = None, seed: int = 0
) -> ImageTensor:
    """Procedural roadside view: sky band over the facing class texture."""
    cfg = world.cfg
    row_mask, col_mask = world.truth.cell_index(p)
    if world.road_mask.values[row_mask, col_mask] != 1:
        raise DataValidationError("camera point is not on a road cell")
    size = cfg.image_px if size_px is None else size_px
    cls = facing_class(world, p, h)
    base, freq, speckle = TEXTURES[world.taxonomy.class_names[cls]]
    rng = _image_rng(cfg.seed, seed, p, h)

    img = np.empty((size, size, 3))
    sky_rows = max(1, int(SKY_FRACTION * size))
    t = np.linspace(0.0, 1.0, sky_rows)[:, None]
    sky_top = np.array([0.55, 0.70, 0.90])
    sky_bottom = np.array([0.78, 0.86, 0.95])
    img[:sky_rows] = (sky_top * (1 - t) + sky_bottom * t)[:, None, :]

    field_rows = size - sky_rows
    rr = np.linspace(0.0, 1.0, field_rows)[:, None, None]
    stripes = 1.0 + 0.22 * np.sin(2.0 * np.pi * freq * rr)
    field = np.asarray(base)[None, None, :] * stripes
    field = field + rng.uniform(-speckle, speckle, size=(field_rows, size, 3))
    img[sky_rows:] = field
    return ImageTensor(np.clip(img, 0.0, 1.0))


# --------------------------------------------------------------------------
# Scene synthesis
# --------------------------------------------------------------------------


def synthesize_scenes(world: World, out_dir: str | Path) -> list[SceneManifest]:
    """Write per-date band + QA grids and manifests; returns the manifests.

    Band value = class phenology + Gaussian noise (clipped to [0, 1]);
    QA masks a seeded ``cloud_fraction`` of cells with value 1.
    """
    cfg = world.cfg
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([cfg.seed, 0x5CE])
    class_idx = np.rint(world.truth.values).astype(np.int64)
    manifests = []
    for date in cfg.scene_dates:
        doy = date.timetuple().tm_yday
        band_paths = {}
        for band in BAND_NAMES:
            per_class = np.array(
                [
                    phenology_value(name, band, doy)
                    for name in world.taxonomy.class_names
                ]
            )
            values = per_class[class_idx]
            if cfg.noise_sigma > 0:
                values = values + rng.normal(0.0, cfg.noise_sigma, size=values.shape)
            values = np.clip(values, 0.0, 1.0)
            name = f"{date.isoformat()}_{band}.grid"
            write_grid(world.truth.like(values), out_dir / name)
            band_paths[band] = name
        qa_values = (rng.random(class_idx.shape) < cfg.cloud_fraction).astype(np.float64)
        qa_name = f"{date.isoformat()}_qa.grid"
        write_grid(world.truth.like(qa_values), out_dir / qa_name)
        manifest = SceneManifest(date, band_paths, qa_name)
        write_manifest(manifest, out_dir / f"{date.isoformat()}.manifest")
        manifests.append(SceneManifest(
            date,
            {b: str(out_dir / p) for b, p in band_paths.items()},
            str(out_dir / qa_name),
        ))
    return manifests


# --------------------------------------------------------------------------
# Image campaigns
# --------------------------------------------------------------------------


def _camera_record(world: World, row: int, col: int, h: Heading, seed: int):
    point = world.truth.cell_center(row, col)
    image = render_street_image(world, point, h, seed=seed)
    rec_id = f"{point.lat_deg:.6f}_{point.lon_deg:.6f}_{int(h)}"
    return StreetImageRecord(
        id=rec_id,
        capture_point=point,
        heading=h,
        image=image,
        capture_date=world.cfg.scene_dates[len(world.cfg.scene_dates) // 2],
    )


def build_training_catalog(
    world: World, out_dir: str | Path, n_per_class: int, seed: int = 1
) -> Path:
    """Hand-label-grade catalog: ``n_per_class`` rendered images per class.

    Candidate (road cell, heading) pairs are bucketed by facing class,
    then a seeded shuffle picks the requested number from each bucket.
    Images land in ``out_dir/images`` and the catalog in
    ``out_dir/catalog.csv``.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    buckets: dict[int, list[tuple[int, int, Heading]]] = {
        i: [] for i in range(len(world.taxonomy))
    }
    for row, col in world.road_cell_centers():
        point = world.truth.cell_center(row, col)
        for h in Heading:
            buckets[facing_class(world, point, h)].append((row, col, h))
    rng = np.random.default_rng([world.cfg.seed, seed, 0xCA7])
    labeled = []
    paths = []
    for label in range(len(world.taxonomy)):
        candidates = buckets[label]
        if len(candidates) < n_per_class:
            raise DataValidationError(
                f"only {len(candidates)} candidate views of class "
                f"{world.taxonomy.class_names[label]}, need {n_per_class}"
            )
        picks = rng.permutation(len(candidates))[:n_per_class]
        for k in picks:
            row, col, h = candidates[k]
            record = _camera_record(world, row, col, h, seed)
            filename = f"{record.id}.ppm"
            (images_dir / filename).write_bytes(encode_image(record.image))
            labeled.append(LabeledImage(record, label, confidence=None))
            paths.append(f"images/{filename}")
    catalog = out_dir / "catalog.csv"
    write_catalog(labeled, paths, world.taxonomy, catalog)
    return catalog


def build_campaign_fixtures(
    world: World, fixtures_dir: str | Path, stride: int = 3, seed: int = 2
) -> int:
    """Write street-image fixtures at every ``stride``-th road cell.

    All four headings are rendered per camera point, mimicking an
    unlabeled roadside collection over the study area. Returns the
    number of images written.
    """
    if stride < 1:
        raise DataValidationError("stride must be >= 1")
    fixtures_dir = Path(fixtures_dir)
    date = world.cfg.scene_dates[len(world.cfg.scene_dates) // 2]
    count = 0
    for k, (row, col) in enumerate(world.road_cell_centers()):
        if k % stride:
            continue
        point = world.truth.cell_center(row, col)
        for h in Heading:
            image = render_street_image(world, point, h, seed=seed)
            write_fixture(fixtures_dir, point, h, image, date=date)
            count += 1
    return count
