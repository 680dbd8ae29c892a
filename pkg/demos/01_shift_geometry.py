"""
Sampling grids and the camera-to-parcel shift
=============================================

A survey camera drives the roads, so its coordinate sits on the road
centerline, not in the field it photographed. This demo walks through
the two geometric building blocks: laying a sampling grid over a study
area, and shifting a camera point into the parcel it was facing.
"""

from streetcrop.geocore import (
    BoundingBox,
    GeoPoint,
    Heading,
    ShiftParams,
    geo_distance,
    make_sampling_grid,
    offset_point,
    shift_to_parcel,
)

# A ~1.1 km x 1.1 km box in the southern Central Valley.
bbox = BoundingBox(35.50, 35.51, -119.31, -119.30)

print("Sampling grids")
print("--------------")
for spacing in (30.0, 60.0):
    points = make_sampling_grid(bbox, spacing)
    print(f"  {spacing:>4.0f} m spacing -> {len(points)} candidate camera points")

points = make_sampling_grid(bbox, 30.0)
print(f"  first point (NW corner): ({points[0].lat_deg:.5f}, {points[0].lon_deg:.5f})")
print(f"  row step distance: {geo_distance(points[0], points[1]):.2f} m")

print()
print("Cardinal offsets")
print("----------------")
camera = GeoPoint(35.505, -119.305)
for heading in Heading:
    moved = offset_point(camera, heading, 45.0)
    print(
        f"  45 m {heading.name:<5} -> ({moved.lat_deg:.6f}, {moved.lon_deg:.6f}), "
        f"distance check {geo_distance(camera, moved):.3f} m"
    )

print()
print("The shift rule: 0.5 * road_width + pixel_size * (1 + extra_steps)")
print("------------------------------------------------------------------")
# 12 m road, 30 m pixels: half the road to reach the parcel edge, then
# one full pixel to clear the mixed road/crop boundary cells.
for extra in range(4):
    sp = ShiftParams(road_width_y_m=12.0, pixel_size_x_m=30.0, extra_steps=extra)
    target = shift_to_parcel(camera, Heading.EAST, sp)
    print(
        f"  extra_steps={extra}: displacement {sp.shift_m:>5.1f} m, "
        f"lands at ({target.lat_deg:.6f}, {target.lon_deg:.6f})"
    )

print()
print("With a 10 m pixel sensor the same rule tightens toward the road:")
sp = ShiftParams(road_width_y_m=12.0, pixel_size_x_m=10.0)
print(f"  displacement {sp.shift_m:.1f} m")
