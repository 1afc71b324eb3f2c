//! 5-axis filleted-endmill toolpath engine: parallel-plane path generation
//! on parametric surfaces, machining-surface tool orientation, A/C inverse
//! kinematics, rotary-velocity simulation and tilt-field optimization.

pub mod clfile;
pub mod config;
pub mod cutter;
pub mod error;
pub mod field;
pub mod gcode;
pub mod job;
pub mod machine;
pub mod path;
pub mod report;
pub mod simulate;
pub mod surface;

pub use config::{load_config, JobConfig};
pub use cutter::{CutterGeometry, CutterLocation, EffectiveRadius};
pub use field::OrientationField;
pub use job::{run, JobError, RunOptions};
pub use machine::{JointPose, MachineModel, PartPose};
pub use path::{MachiningStrategy, ToolPath};
pub use simulate::{KinematicProfile, SaturationReport};
pub use surface::{LocalFrame, ParametricSurface, Plane, PlaneCurve};
