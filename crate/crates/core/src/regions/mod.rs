//! Critical regions of parametric QPs: affine optimizer laws on fixed
//! active sets, grid-seeded enumeration over a parameter box, point
//! location, and selection of sub-boxes holding a given number of regions.

mod map;
mod region;
mod select;
mod svg;

pub use map::{
    composite_law, enumerate_regions, label_at, locate_region, strong_active_set, RegionMap, DEFAULT_GRID_DENSITY,
    LOCATE_TOL,
};
pub use region::{region_from_active_set, CriticalRegion};
pub use select::{label_histogram, select_box_with, select_box_with_region_count, BoxScan, LabelGrid};
pub use svg::{region_polygons, render_svg};
