//! Job configuration: a human-editable TOML file describing the surface,
//! tool, strategy, machine and output artifacts of one batch run.

use std::path::Path;

use nalgebra::{Isometry3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::Deserialize;

use crate::cutter::CutterGeometry;
use crate::error::ConfigError;
use crate::machine::MachineModel;
use crate::path::MachiningStrategy;
use crate::surface::ParametricSurface;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub surface: SurfaceSpec,
    pub tool: ToolSpec,
    /// Programmed feedrate, mm/min.
    pub feedrate: f64,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub machine: MachineSpec,
    #[serde(default)]
    pub optimization: OptimizationSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    /// z = c·(x/a)·(y/b) over [−a,a]×[−b,b].
    Saddle { a: f64, b: f64, c: f64 },
    Flat { width: f64, height: f64 },
    /// Inline Bézier control net, row-major [[x,y,z], ...] per row.
    Patch { control_net: Vec<Vec<[f64; 3]>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    /// Distance from the tool axis to the corner-torus tube-center circle, mm.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Corner radius, mm.
    pub r: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySpec {
    pub plane_angle_deg: f64,
    pub stepover: f64,
    pub chord_tol: f64,
    pub max_sample_spacing: f64,
    pub base_tilt_deg: f64,
    pub base_yaw_deg: f64,
    pub scallop_tol: f64,
    pub one_way: bool,
}

impl Default for StrategySpec {
    fn default() -> Self {
        let s = MachiningStrategy::default();
        StrategySpec {
            plane_angle_deg: s.plane_angle_deg,
            stepover: s.stepover,
            chord_tol: s.chord_tol,
            max_sample_spacing: s.max_sample_spacing,
            base_tilt_deg: s.base_tilt_deg,
            base_yaw_deg: s.base_yaw_deg,
            scallop_tol: s.scallop_tol,
            one_way: s.one_way,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSpec {
    pub tilt_min_deg: f64,
    pub tilt_max_deg: f64,
    /// Orientation grid columns per path; rows follow the plane count.
    pub samples: usize,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec {
            tilt_min_deg: 0.5,
            tilt_max_deg: 15.0,
            samples: 40,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z_range: [f64; 2],
    pub a_range_deg: [f64; 2],
    /// mm/min.
    pub v_xyz: [f64; 3],
    pub v_a_rpm: f64,
    pub v_c_rpm: f64,
    /// C-table origin in the A-cradle frame, mm.
    pub o_ca: [f64; 3],
    /// A-cradle origin in the machine frame, mm.
    pub o_am: [f64; 3],
    pub part_position: [f64; 3],
    /// Extrinsic XYZ rotation, degrees.
    pub part_rotation_deg: [f64; 3],
    pub singularity_threshold_deg: f64,
}

impl Default for MachineSpec {
    fn default() -> Self {
        let m = MachineModel::default();
        MachineSpec {
            x_range: [m.x_range.0, m.x_range.1],
            y_range: [m.y_range.0, m.y_range.1],
            z_range: [m.z_range.0, m.z_range.1],
            a_range_deg: [m.a_range_deg.0, m.a_range_deg.1],
            v_xyz: m.v_xyz,
            v_a_rpm: m.v_a_rpm,
            v_c_rpm: m.v_c_rpm,
            o_ca: [0.0; 3],
            o_am: [0.0; 3],
            part_position: [0.0; 3],
            part_rotation_deg: [0.0; 3],
            singularity_threshold_deg: m.singularity_threshold_deg,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizationSpec {
    pub enabled: bool,
    /// Ascending; the first entry is the base tilt.
    pub candidates_deg: Vec<f64>,
    pub scallop_tol: f64,
    pub blend_halfwidth: f64,
}

impl Default for OptimizationSpec {
    fn default() -> Self {
        OptimizationSpec {
            enabled: true,
            candidates_deg: vec![1.0, 2.0, 3.0, 5.0, 8.0],
            scallop_tol: 0.002,
            blend_halfwidth: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub cl_file: String,
    pub nc_file: String,
    pub report_csv: String,
    pub field_csv: String,
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            cl_file: "job.cl".into(),
            nc_file: "job.nc".into(),
            report_csv: "report.csv".into(),
            field_csv: "field.csv".into(),
            summary: "summary.txt".into(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<JobConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: JobConfig = toml::from_str(&text)?;
    config.validate()?;
    Ok(config)
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field,
        reason: reason.into(),
    }
}

impl JobConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.feedrate > 0.0) {
            return Err(invalid("feedrate", "must be > 0 mm/min"));
        }
        if !(self.tool.big_r > 0.0) {
            return Err(invalid("tool.R", "must be > 0 mm"));
        }
        if self.tool.r < 0.0 {
            return Err(invalid("tool.r", "must be >= 0 mm"));
        }
        match &self.surface {
            SurfaceSpec::Saddle { a, b, .. } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(invalid("surface.a", "saddle half-extents must be > 0"));
                }
            }
            SurfaceSpec::Flat { width, height } => {
                if !(*width > 0.0 && *height > 0.0) {
                    return Err(invalid("surface.width", "flat extents must be > 0"));
                }
            }
            SurfaceSpec::Patch { control_net } => {
                if control_net.len() < 2 || control_net.iter().any(|r| r.len() < 2) {
                    return Err(invalid("surface.control_net", "needs at least a 2x2 net"));
                }
                let cols = control_net[0].len();
                if control_net.iter().any(|r| r.len() != cols) {
                    return Err(invalid("surface.control_net", "rows must have equal length"));
                }
            }
        }
        if !(self.strategy.stepover > 0.0) {
            return Err(invalid("strategy.stepover", "must be > 0 mm"));
        }
        if !(self.strategy.chord_tol > 0.0) {
            return Err(invalid("strategy.chord_tol", "must be > 0 mm"));
        }
        if !(self.strategy.max_sample_spacing > 0.0) {
            return Err(invalid("strategy.max_sample_spacing", "must be > 0 mm"));
        }
        if !(self.strategy.scallop_tol > 0.0) {
            return Err(invalid("strategy.scallop_tol", "must be > 0 mm"));
        }
        if !(0.0..90.0).contains(&self.strategy.base_tilt_deg) {
            return Err(invalid("strategy.base_tilt_deg", "must be in [0, 90) degrees"));
        }
        if !(self.field.tilt_min_deg < self.field.tilt_max_deg) {
            return Err(invalid("field.tilt_min_deg", "must be below tilt_max_deg"));
        }
        if self.field.samples < 4 {
            return Err(invalid("field.samples", "needs at least 4 grid columns"));
        }
        if self.strategy.base_tilt_deg < self.field.tilt_min_deg
            || self.strategy.base_tilt_deg > self.field.tilt_max_deg
        {
            return Err(invalid(
                "strategy.base_tilt_deg",
                "outside [field.tilt_min_deg, field.tilt_max_deg]",
            ));
        }
        for r in [
            ("machine.x_range", self.machine.x_range),
            ("machine.y_range", self.machine.y_range),
            ("machine.z_range", self.machine.z_range),
            ("machine.a_range_deg", self.machine.a_range_deg),
        ] {
            if !(r.1[0] < r.1[1]) {
                return Err(invalid(r.0, "lower bound must be below upper bound"));
            }
        }
        if self.machine.v_xyz.iter().any(|&v| !(v > 0.0))
            || !(self.machine.v_a_rpm > 0.0)
            || !(self.machine.v_c_rpm > 0.0)
        {
            return Err(invalid("machine.v_xyz", "velocity limits must be > 0"));
        }
        if !(self.machine.singularity_threshold_deg > 0.0) {
            return Err(invalid("machine.singularity_threshold_deg", "must be > 0"));
        }
        let c = &self.optimization.candidates_deg;
        if self.optimization.enabled {
            if c.is_empty() {
                return Err(invalid("optimization.candidates_deg", "must not be empty"));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(
                    "optimization.candidates_deg",
                    "must be strictly ascending",
                ));
            }
            if c.iter()
                .any(|&t| t < self.field.tilt_min_deg || t > self.field.tilt_max_deg)
            {
                return Err(invalid(
                    "optimization.candidates_deg",
                    "candidates outside [field.tilt_min_deg, field.tilt_max_deg]",
                ));
            }
            if !(self.optimization.scallop_tol > 0.0) {
                return Err(invalid("optimization.scallop_tol", "must be > 0 mm"));
            }
            if !(self.optimization.blend_halfwidth > 0.0) {
                return Err(invalid("optimization.blend_halfwidth", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn build_surface(&self) -> ParametricSurface {
        match &self.surface {
            SurfaceSpec::Saddle { a, b, c } => ParametricSurface::saddle(*a, *b, *c),
            SurfaceSpec::Flat { width, height } => ParametricSurface::flat(*width, *height),
            SurfaceSpec::Patch { control_net } => ParametricSurface::patch(
                control_net
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|p| Point3::new(p[0], p[1], p[2]))
                            .collect()
                    })
                    .collect(),
            ),
        }
    }

    pub fn build_tool(&self) -> CutterGeometry {
        CutterGeometry::new(self.tool.big_r, self.tool.r)
    }

    pub fn build_strategy(&self) -> MachiningStrategy {
        MachiningStrategy {
            plane_angle_deg: self.strategy.plane_angle_deg,
            stepover: self.strategy.stepover,
            chord_tol: self.strategy.chord_tol,
            max_sample_spacing: self.strategy.max_sample_spacing,
            base_tilt_deg: self.strategy.base_tilt_deg,
            base_yaw_deg: self.strategy.base_yaw_deg,
            scallop_tol: self.strategy.scallop_tol,
            one_way: self.strategy.one_way,
        }
    }

    pub fn build_machine(&self) -> MachineModel {
        let m = &self.machine;
        let rot = Rotation3::from_euler_angles(
            m.part_rotation_deg[0].to_radians(),
            m.part_rotation_deg[1].to_radians(),
            m.part_rotation_deg[2].to_radians(),
        );
        let part_setup = Isometry3::from_parts(
            Translation3::new(m.part_position[0], m.part_position[1], m.part_position[2]),
            UnitQuaternion::from_rotation_matrix(&rot),
        );
        MachineModel {
            x_range: (m.x_range[0], m.x_range[1]),
            y_range: (m.y_range[0], m.y_range[1]),
            z_range: (m.z_range[0], m.z_range[1]),
            a_range_deg: (m.a_range_deg[0], m.a_range_deg[1]),
            v_xyz: m.v_xyz,
            v_a_rpm: m.v_a_rpm,
            v_c_rpm: m.v_c_rpm,
            o_ca: Vector3::new(m.o_ca[0], m.o_ca[1], m.o_ca[2]),
            o_am: Vector3::new(m.o_am[0], m.o_am[1], m.o_am[2]),
            part_setup,
            singularity_threshold_deg: m.singularity_threshold_deg,
        }
    }
}

/// The default job: the analytic saddle cut at 45° with a 1°-tilted
/// R9/r1 filleted end mill at 5 m/min.
pub const EXAMPLE_CONFIG: &str = r#"feedrate = 5000.0

[surface]
kind = "saddle"
a = 50.0
b = 50.0
c = 20.0

[tool]
R = 9.0
r = 1.0

[strategy]
plane_angle_deg = 45.0
stepover = 2.0
base_tilt_deg = 1.0

[machine]
v_a_rpm = 15.0
v_c_rpm = 20.0

[optimization]
enabled = true
candidates_deg = [1.0, 2.0, 3.0, 5.0, 8.0]
"#;
