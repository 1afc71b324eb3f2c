//! One batch run: generate the toolpath, solve joints, simulate, optionally
//! optimize the tilt field, and write every artifact to the output directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::clfile;
use crate::config::JobConfig;
use crate::error::{ConfigError, GeomError, KinError};
use crate::field::OrientationField;
use crate::gcode;
use crate::path::{max_scallop_estimate, plan_planes, ToolPath};
use crate::report::{self, SummaryData};
use crate::simulate::{self, OptimizeParams, SaturationReport};

#[derive(Debug, Error)]
pub enum JobError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Kinematics(#[from] KinError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{violations} scallop interval(s) above tolerance after tightening")]
    StrictResidual { violations: usize },
}

impl JobError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) => 2,
            JobError::Geometry(_) | JobError::Io { .. } => 3,
            JobError::Kinematics(_) => 4,
            JobError::StrictResidual { .. } => 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub optimize: bool,
    /// Fail (exit 5) when scallop violations remain after tightening.
    pub strict: bool,
    pub workers: usize,
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: PathBuf::from("."),
            optimize: true,
            strict: false,
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            verbose: false,
        }
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub cl_file: PathBuf,
    pub nc_file: PathBuf,
    pub report_csv: PathBuf,
    pub field_csv: PathBuf,
    pub summary: PathBuf,
    pub before: SaturationReport,
    pub after: SaturationReport,
    pub optimize_iterations: usize,
    pub residual_violations: usize,
    pub max_scallop: f64,
    pub summary_text: String,
}

pub fn run(config: &JobConfig, opts: &RunOptions) -> Result<RunArtifacts, JobError> {
    config.validate()?;
    let surface = config.build_surface();
    let tool = config.build_tool();
    let strategy = config.build_strategy();
    let machine = config.build_machine();

    let planes = plan_planes(&surface, &strategy);
    let field = OrientationField::constant(
        planes.len(),
        config.field.samples,
        strategy.base_tilt_deg,
        strategy.base_yaw_deg,
        config.field.tilt_min_deg,
        config.field.tilt_max_deg,
    );
    let toolpath = ToolPath::generate(&surface, &strategy, &tool, &field)?;

    let profile0 = simulate::simulate(&toolpath, &machine, config.feedrate, 16)?;
    let before = simulate::saturation(&profile0, &machine);

    let optimize_on = opts.optimize && config.optimization.enabled;
    let (final_tp, after, iterations, residual_violations) = if optimize_on {
        let params = OptimizeParams {
            f_prog: config.feedrate,
            candidate_tilts_deg: config.optimization.candidates_deg.clone(),
            scallop_tol: config.optimization.scallop_tol,
            blend_halfwidth: config.optimization.blend_halfwidth,
            workers: opts.workers.max(1),
            ..Default::default()
        };
        let out = simulate::optimize_tilt(&surface, &toolpath, &machine, &params)?;
        let residual = out
            .tighten
            .as_ref()
            .map(|t| t.residual_violations)
            .unwrap_or(0);
        (out.toolpath, out.after, out.iterations, residual)
    } else {
        let outcome = toolpath.tighten(&surface, strategy.scallop_tol)?;
        (outcome.toolpath, before.clone(), 0, outcome.residual.len())
    };

    // Final profile over the (possibly tightened) path actually emitted.
    let profile = simulate::simulate(&final_tp, &machine, config.feedrate, 16)?;
    let final_report = simulate::saturation(&profile, &machine);
    let max_scallop = max_scallop_estimate(&final_tp);

    let planned = planes.len();
    let inserted = final_tp.paths.iter().filter(|p| p.inserted).count();
    let summary_text = report::summary_text(&SummaryData {
        profile: &profile,
        before: &before,
        after: &after,
        n_paths: planned + inserted,
        inserted_paths: inserted,
        optimize_iterations: iterations,
        max_scallop,
        scallop_tol: if optimize_on {
            config.optimization.scallop_tol
        } else {
            strategy.scallop_tol
        },
    });

    std::fs::create_dir_all(&opts.out_dir).map_err(|source| JobError::Io {
        path: opts.out_dir.display().to_string(),
        source,
    })?;
    let out = |name: &str| opts.out_dir.join(name);
    let artifacts = RunArtifacts {
        cl_file: out(&config.output.cl_file),
        nc_file: out(&config.output.nc_file),
        report_csv: out(&config.output.report_csv),
        field_csv: out(&config.output.field_csv),
        summary: out(&config.output.summary),
        before,
        after: final_report,
        optimize_iterations: iterations,
        residual_violations,
        max_scallop,
        summary_text: summary_text.clone(),
    };
    write(&artifacts.cl_file, &clfile::write_cl(&final_tp))?;
    write(&artifacts.nc_file, &gcode::emit_gcode(&profile))?;
    write(&artifacts.report_csv, &report::report_csv(&profile))?;
    write(&artifacts.field_csv, &final_tp.field.to_csv())?;
    write(&artifacts.summary, &summary_text)?;

    if opts.strict && residual_violations > 0 {
        return Err(JobError::StrictResidual {
            violations: residual_violations,
        });
    }
    Ok(artifacts)
}

/// Inverse-transform parsed CL passes into a solved node sequence,
/// carrying the previous joint pose across the whole program.
pub fn solve_cl_paths(
    paths: &[clfile::ClPath],
    machine: &crate::machine::MachineModel,
) -> Result<Vec<simulate::SolvedNode>, KinError> {
    let mut nodes = Vec::new();
    let mut prev: Option<crate::machine::JointPose> = None;
    for (pi, path) in paths.iter().enumerate() {
        for (si, (p, u)) in path.iter().enumerate() {
            let pose = crate::machine::PartPose { p: *p, u: *u };
            let sol = machine
                .inverse(&pose, prev.as_ref())
                .map_err(|e| KinError::AtSample {
                    path: pi,
                    sample: si,
                    source: Box::new(e),
                })?;
            nodes.push(simulate::SolvedNode {
                path: pi,
                sample: si,
                pose,
                joints: sol.joints,
                singular: sol.singular,
                pass_start: si == 0,
            });
            prev = Some(sol.joints);
        }
    }
    Ok(nodes)
}

/// Node sequence for an already-posted joint program (single pass).
pub fn nodes_from_joints(
    poses: &[crate::machine::JointPose],
    machine: &crate::machine::MachineModel,
) -> Vec<simulate::SolvedNode> {
    poses
        .iter()
        .enumerate()
        .map(|(i, q)| simulate::SolvedNode {
            path: 0,
            sample: i,
            pose: machine.forward(q),
            joints: *q,
            singular: false,
            pass_start: i == 0,
        })
        .collect()
}

fn write(path: &Path, content: &str) -> Result<(), JobError> {
    std::fs::write(path, content).map_err(|source| JobError::Io {
        path: path.display().to_string(),
        source,
    })
}
