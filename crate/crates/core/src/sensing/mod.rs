//! Simulated depth-camera views and gel-pad tactile images.

mod camera;
mod tactile;

pub use camera::{render_partial_view, CameraModel, MAX_DEPTH};
pub use tactile::{
    extract_tactile_feature, height_map_to_cloud, render_height_map, GelPad, HeightMap, TactileFeature,
    CONTACT_THRESHOLD,
};
