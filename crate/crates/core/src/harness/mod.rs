//! Scene files, bundled scenes, single runs and policy comparisons.

mod experiment;
mod scene;

pub use experiment::{
    compare, error_exit_code, load_scene, run, stop_exit_code, ComparisonSummary, PolicySummary, RunOutcome,
    RunOverrides, RunRecord, RunSummary,
};
pub use scene::{
    builtin_scene, builtin_scenes, shapes_describe, shapes_list, CameraSpec, PoseSpec, SceneSpec, ShapeSpec,
};
