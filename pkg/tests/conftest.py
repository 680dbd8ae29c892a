import numpy as np
import pytest

from streetcrop.geocore import Heading, ShiftParams
from streetcrop.imageclassifier import ILLINOIS, LabeledImage
from streetcrop.imagery import StreetImageRecord
from streetcrop.rasterstack import BAND_NAMES, RasterGrid, SceneManifest, write_grid, write_manifest
from streetcrop import synthworld


def make_grid(values, xll=0.0, yll=0.0, cellsize=0.001, nodata=-9999.0) -> RasterGrid:
    values = np.asarray(values, dtype=np.float64)
    return RasterGrid(
        ncols=values.shape[1],
        nrows=values.shape[0],
        xll=xll,
        yll=yll,
        cellsize=cellsize,
        nodata=nodata,
        values=values,
    )


def write_scene(directory, date, band_values, qa_values, **grid_kwargs) -> SceneManifest:
    """Write one scene (six bands + QA) from in-memory arrays."""
    directory.mkdir(parents=True, exist_ok=True)
    band_paths = {}
    for band in BAND_NAMES:
        name = f"{date.isoformat()}_{band}.grid"
        write_grid(make_grid(band_values[band], **grid_kwargs), directory / name)
        band_paths[band] = name
    qa_name = f"{date.isoformat()}_qa.grid"
    write_grid(make_grid(qa_values, **grid_kwargs), directory / qa_name)
    manifest = SceneManifest(date, band_paths, qa_name)
    write_manifest(manifest, directory / f"{date.isoformat()}.manifest")
    return SceneManifest(
        date,
        {b: str(directory / p) for b, p in band_paths.items()},
        str(directory / qa_name),
    )


def kept_images_from_world(world, stride=2, seed=1):
    """Crop-facing labeled images at road cells, labeled by construction.

    Stands in for the classify+QC stages when a test only cares about
    what happens downstream of them.
    """
    kept = []
    for k, (r, c) in enumerate(world.road_cell_centers()):
        if k % stride:
            continue
        p = world.truth.cell_center(r, c)
        for h in Heading:
            cls = synthworld.facing_class(world, p, h)
            if cls == world.taxonomy.others_index:
                continue
            image = synthworld.render_street_image(world, p, h, seed=seed)
            record = StreetImageRecord(f"cam_{r}_{c}_{int(h)}", p, h, image)
            kept.append(LabeledImage(record, cls, confidence=0.99))
    return kept


@pytest.fixture(scope="session")
def il_world():
    """Small corn/soybean/others world shared by the slower tests."""
    cfg = synthworld.square_world_config(ILLINOIS, parcels_per_side=8, seed=7)
    return synthworld.generate_world(cfg)


@pytest.fixture(scope="session")
def il_scenes(il_world, tmp_path_factory):
    out = tmp_path_factory.mktemp("il_scenes")
    return synthworld.synthesize_scenes(il_world, out)


def world_shift_params(world) -> ShiftParams:
    return ShiftParams(
        road_width_y_m=world.cfg.road_width_m, pixel_size_x_m=world.cfg.cell_m
    )
