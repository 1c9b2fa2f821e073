//! Equirectangular grid geometry and the collocation pipeline that turns a
//! geostationary scene plus a radar swath into masked training patches.

mod channels;
mod collocate;
mod patches;
mod spec;
pub mod store;

pub use channels::{ChannelCategory, ChannelDescriptor, LONGWAVE_WINDOW};
pub use collocate::{collocate, rasterize_swath, GeoScene, GriddedPair, PrecipSample, PrecipSwath};
pub use patches::{tile_patches, PatchRecord};
pub use spec::{latlon_to_index, GridSpec, DEFAULT_SPACING};

/// Scan timestamps are UTC.
pub type Timestamp = chrono::DateTime<chrono::Utc>;
