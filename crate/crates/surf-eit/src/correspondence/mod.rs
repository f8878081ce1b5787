//! Near-isometric correspondences between reconstructed images and the
//! distances derived from them.

pub mod geodesic;
pub mod hausdorff;
pub mod map;
pub mod stability;

pub use geodesic::{semi_geodesic_coords, GeodesicConfig, Geodesic, SemiGeodesicChart};
pub use hausdorff::{directed_hausdorff, hausdorff_distance};
pub use map::{chi, dilatation, dilatation_field, nearest_point_map, sup_log_k, CorrespondenceMap, MapConfig, MapSample, Zone};
pub use stability::{descend_to_base, lower_bound_check, BaseMap, LowerBoundReport, StabilityReport};
