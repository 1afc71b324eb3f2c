//! Joint-velocity estimation along the toolpath, rotary-axis saturation
//! detection, effective feedrate, inverse-time values and the tilt-field
//! deformation loop.

use crate::error::KinError;
use crate::field::{FieldRegion, OrientationField};
use crate::machine::{JointPose, MachineModel, PartPose};
use crate::path::ToolPath;
use crate::surface::ParametricSurface;

pub const AXIS_NAMES: [&str; 5] = ["X", "Y", "Z", "A", "C"];

/// One joint-space linear block of the program.
#[derive(Debug, Clone, Copy)]
pub struct Block {
    /// Index of the toolpath pass this block belongs to (links are
    /// attributed to the destination pass).
    pub path: usize,
    /// Sample index of the block start within the pass.
    pub seg: usize,
    /// Connects the end of one pass to the start of the next.
    pub link: bool,
    pub q0: JointPose,
    pub q1: JointPose,
    /// Relative tool/part path length, mm.
    pub ds_rel: f64,
    /// Block duration at the programmed feedrate, minutes.
    pub dt_min: f64,
    /// Inverse-time value 1/dt, 1/min.
    pub frn: f64,
    /// Axis velocities: X, Y, Z in mm/min; A, C in rpm (signed).
    pub v: [f64; 5],
    pub sat: [bool; 5],
    /// Velocity-limit-capped feedrate, mm/min.
    pub f_eff: f64,
    /// Either endpoint solved under the held-C singularity policy.
    pub singular: bool,
}

#[derive(Debug, Clone)]
pub struct KinematicProfile {
    pub blocks: Vec<Block>,
    pub f_prog: f64,
    /// Sum of block durations at the programmed feedrate, minutes.
    pub total_time_min: f64,
    /// Total time with every block capped to its effective feedrate.
    pub total_time_eff_min: f64,
    /// Saturated block count per axis.
    pub sat_count: [usize; 5],
}

/// A maximal run of saturated blocks (runs separated by at most 2
/// unsaturated blocks are merged).
#[derive(Debug, Clone, Copy)]
pub struct SatRegion {
    pub block_lo: usize,
    pub block_hi: usize,
    /// Pass carrying most of the saturated blocks in the run.
    pub path: usize,
    pub sample_lo: usize,
    pub sample_hi: usize,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct AxisSaturation {
    pub max_abs: f64,
    pub limit: f64,
    pub regions: Vec<SatRegion>,
}

#[derive(Debug, Clone)]
pub struct SaturationReport {
    pub axes: [AxisSaturation; 5],
    pub saturated_fraction: f64,
}

impl SaturationReport {
    pub fn rotary_saturated_blocks(&self) -> usize {
        self.axes[3].regions.iter().map(|r| r.count).sum::<usize>()
            + self.axes[4].regions.iter().map(|r| r.count).sum::<usize>()
    }

    pub fn c_saturated_blocks(&self) -> usize {
        self.axes[4].regions.iter().map(|r| r.count).sum()
    }
}

/// Central-difference joint velocities at the middle of three successive
/// poses, with block times taken from the relative path length at the
/// programmed feedrate. Returns [vx, vy, vz (mm/min), vA, vC (rpm)].
pub fn joint_velocities(
    q_prev: &JointPose,
    q_i: &JointPose,
    q_next: &JointPose,
    machine: &MachineModel,
    f_prog: f64,
    n_sub: usize,
) -> Option<[f64; 5]> {
    let t_prev = machine.relative_path_length_refined(q_prev, q_i, n_sub) / f_prog;
    let t_next = machine.relative_path_length_refined(q_i, q_next, n_sub) / f_prog;
    let dt = t_prev + t_next;
    if dt <= 0.0 {
        return None;
    }
    Some(velocity_between(q_prev, q_next, dt))
}

fn velocity_between(q0: &JointPose, q1: &JointPose, dt_min: f64) -> [f64; 5] {
    [
        (q1.x - q0.x) / dt_min,
        (q1.y - q0.y) / dt_min,
        (q1.z - q0.z) / dt_min,
        (q1.a_deg - q0.a_deg) / dt_min / 360.0,
        (q1.c_deg - q0.c_deg) / dt_min / 360.0,
    ]
}

/// A solved posture of the program.
#[derive(Debug, Clone, Copy)]
pub struct SolvedNode {
    pub path: usize,
    pub sample: usize,
    pub pose: PartPose,
    pub joints: JointPose,
    pub singular: bool,
    /// First node of a pass (the block ending here is a link move).
    pub pass_start: bool,
}

/// Inverse-transform every posture, sequentially carrying the previous
/// joint pose across the whole program (C stays unwound across passes).
pub fn solve_joint_path(
    toolpath: &ToolPath,
    machine: &MachineModel,
) -> Result<Vec<SolvedNode>, KinError> {
    let mut nodes = Vec::new();
    let mut prev: Option<JointPose> = None;
    for (pi, path) in toolpath.paths.iter().enumerate() {
        for (si, post) in path.postures.iter().enumerate() {
            let pose = PartPose {
                p: post.cl,
                u: post.axis,
            };
            let sol = machine
                .inverse(&pose, prev.as_ref())
                .map_err(|e| KinError::AtSample {
                    path: pi,
                    sample: si,
                    source: Box::new(e),
                })?;
            nodes.push(SolvedNode {
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

/// Build the full kinematic profile at the programmed feedrate (mm/min).
pub fn simulate(
    toolpath: &ToolPath,
    machine: &MachineModel,
    f_prog: f64,
    n_sub: usize,
) -> Result<KinematicProfile, KinError> {
    let nodes = solve_joint_path(toolpath, machine)?;
    Ok(profile_from_nodes(&nodes, machine, f_prog, n_sub))
}

/// Profile from an already-solved node sequence.
pub fn profile_from_nodes(
    nodes: &[SolvedNode],
    machine: &MachineModel,
    f_prog: f64,
    n_sub: usize,
) -> KinematicProfile {
    assert!(f_prog > 0.0);
    // Drop zero-length doubles (merged with the neighbor block).
    let mut kept: Vec<&SolvedNode> = Vec::with_capacity(nodes.len());
    for n in nodes {
        if let Some(last) = kept.last() {
            let d = machine.relative_path_length(&last.joints, &n.joints, 1);
            if d < 1e-12 && !n.pass_start {
                continue;
            }
        }
        kept.push(n);
    }

    // Block times from relative path lengths.
    let m = kept.len();
    let mut dt = vec![0.0; m.saturating_sub(1)];
    let mut ds = vec![0.0; m.saturating_sub(1)];
    for i in 0..m.saturating_sub(1) {
        let d = machine.relative_path_length_refined(&kept[i].joints, &kept[i + 1].joints, n_sub);
        ds[i] = d;
        dt[i] = d / f_prog;
    }

    // Node velocities: central differences over (t_prev + t_next),
    // one-sided at the program ends.
    let mut v_node = vec![[0.0; 5]; m];
    for i in 0..m {
        if m < 2 {
            break;
        }
        v_node[i] = if i == 0 {
            velocity_between(&kept[0].joints, &kept[1].joints, dt[0].max(1e-15))
        } else if i == m - 1 {
            velocity_between(&kept[m - 2].joints, &kept[m - 1].joints, dt[m - 2].max(1e-15))
        } else {
            velocity_between(
                &kept[i - 1].joints,
                &kept[i + 1].joints,
                (dt[i - 1] + dt[i]).max(1e-15),
            )
        };
    }

    let limits = [
        machine.v_xyz[0],
        machine.v_xyz[1],
        machine.v_xyz[2],
        machine.v_a_rpm,
        machine.v_c_rpm,
    ];
    let mut blocks = Vec::with_capacity(m.saturating_sub(1));
    let mut sat_count = [0usize; 5];
    let mut total_time = 0.0;
    let mut total_time_eff = 0.0;
    for i in 0..m.saturating_sub(1) {
        // Per-axis signed velocity of larger magnitude at either endpoint.
        let mut v = [0.0; 5];
        for a in 0..5 {
            v[a] = if v_node[i][a].abs() >= v_node[i + 1][a].abs() {
                v_node[i][a]
            } else {
                v_node[i + 1][a]
            };
        }
        let mut sat = [false; 5];
        let mut scale: f64 = 1.0;
        for a in 0..5 {
            if v[a].abs() > limits[a] {
                sat[a] = true;
                sat_count[a] += 1;
            }
            if v[a].abs() > 0.0 {
                scale = scale.min(limits[a] / v[a].abs());
            }
        }
        let f_eff = f_prog * scale.min(1.0);
        let dt_i = dt[i];
        total_time += dt_i;
        total_time_eff += if f_eff > 0.0 { ds[i] / f_eff } else { dt_i };
        blocks.push(Block {
            path: kept[i + 1].path,
            seg: if kept[i + 1].pass_start { 0 } else { kept[i].sample },
            link: kept[i + 1].pass_start,
            q0: kept[i].joints,
            q1: kept[i + 1].joints,
            ds_rel: ds[i],
            dt_min: dt_i,
            frn: if dt_i > 0.0 { 1.0 / dt_i } else { 0.0 },
            v,
            sat,
            f_eff,
            singular: kept[i].singular || kept[i + 1].singular,
        });
    }
    KinematicProfile {
        blocks,
        f_prog,
        total_time_min: total_time,
        total_time_eff_min: total_time_eff,
        sat_count,
    }
}

/// Saturated-region report. An axis saturates a block when |v| strictly
/// exceeds its limit.
pub fn saturation(profile: &KinematicProfile, machine: &MachineModel) -> SaturationReport {
    let limits = [
        machine.v_xyz[0],
        machine.v_xyz[1],
        machine.v_xyz[2],
        machine.v_a_rpm,
        machine.v_c_rpm,
    ];
    let axes: [AxisSaturation; 5] = std::array::from_fn(|a| {
        let max_abs = profile
            .blocks
            .iter()
            .map(|b| b.v[a].abs())
            .fold(0.0, f64::max);
        AxisSaturation {
            max_abs,
            limit: limits[a],
            regions: regions_for_axis(profile, a),
        }
    });
    let saturated_blocks = profile
        .blocks
        .iter()
        .filter(|b| b.sat.iter().any(|&s| s))
        .count();
    SaturationReport {
        axes,
        saturated_fraction: if profile.blocks.is_empty() {
            0.0
        } else {
            saturated_blocks as f64 / profile.blocks.len() as f64
        },
    }
}

const REGION_MERGE_GAP: usize = 2;

fn regions_for_axis(profile: &KinematicProfile, axis: usize) -> Vec<SatRegion> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, b) in profile.blocks.iter().enumerate() {
        if b.sat[axis] {
            match runs.last_mut() {
                Some((_, hi)) if i - *hi <= REGION_MERGE_GAP + 1 => *hi = i,
                _ => runs.push((i, i)),
            }
        }
    }
    runs.into_iter()
        .map(|(lo, hi)| {
            let blocks = &profile.blocks[lo..=hi];
            // Dominant pass of the run.
            let mut counts = std::collections::BTreeMap::new();
            for b in blocks.iter().filter(|b| b.sat[axis]) {
                *counts.entry(b.path).or_insert(0usize) += 1;
            }
            let path = counts
                .iter()
                .max_by_key(|(_, &c)| c)
                .map(|(&p, _)| p)
                .unwrap_or(0);
            let segs: Vec<usize> = blocks
                .iter()
                .filter(|b| b.path == path && b.sat[axis])
                .map(|b| b.seg)
                .collect();
            SatRegion {
                block_lo: lo,
                block_hi: hi,
                path,
                sample_lo: segs.iter().copied().min().unwrap_or(0),
                sample_hi: segs.iter().copied().max().unwrap_or(0),
                count: blocks.iter().filter(|b| b.sat[axis]).count(),
            }
        })
        .collect()
}

/// Outcome of the tilt-field deformation loop.
#[derive(Debug)]
pub struct OptimizeOutcome {
    /// Optimized and tightened toolpath.
    pub toolpath: ToolPath,
    pub field: OrientationField,
    pub before: SaturationReport,
    /// Report on the optimized toolpath prior to tightening (same block
    /// structure as `before`, so counts are comparable).
    pub after: SaturationReport,
    pub iterations: usize,
    pub tighten: Option<TightenInfo>,
}

#[derive(Debug, Clone)]
pub struct TightenInfo {
    pub inserted_paths: usize,
    pub residual_violations: usize,
    pub max_residual_scallop: f64,
}

pub struct OptimizeParams {
    pub f_prog: f64,
    /// Candidate tilt angles, ascending; the first is the base tilt.
    pub candidate_tilts_deg: Vec<f64>,
    pub scallop_tol: f64,
    pub blend_halfwidth: f64,
    pub n_sub: usize,
    pub max_iterations: usize,
    /// Worker threads for candidate evaluation within one iteration.
    pub workers: usize,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        OptimizeParams {
            f_prog: 5000.0,
            candidate_tilts_deg: vec![1.0, 2.0, 3.0, 5.0, 8.0],
            scallop_tol: 0.002,
            blend_halfwidth: 1.0,
            n_sub: 16,
            max_iterations: 12,
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        }
    }
}

/// Iteratively deform the orientation field over the worst saturated rotary
/// region, accepting only candidates that strictly reduce the total rotary
/// saturated-block count and add no gouge flags, then tighten for scallop.
pub fn optimize_tilt(
    surface: &ParametricSurface,
    toolpath: &ToolPath,
    machine: &MachineModel,
    params: &OptimizeParams,
) -> Result<OptimizeOutcome, crate::error::GeomError> {
    let mut current = toolpath.clone();
    let mut profile = simulate(&current, machine, params.f_prog, params.n_sub)
        .map_err(|_| crate::error::GeomError::AxisSingularity)?;
    let before = saturation(&profile, machine);
    let baseline_gouges = current.gouge_check(surface);
    let mut iterations = 0;

    loop {
        if iterations >= params.max_iterations {
            break;
        }
        let report = saturation(&profile, machine);
        let count_now = report.rotary_saturated_blocks();
        if count_now == 0 {
            break;
        }
        let Some(region) = worst_rotary_region(&report) else {
            break;
        };
        let rect = region_to_field_rect(&current, &region, params.blend_halfwidth);

        // Candidates are independent of each other: evaluate them on a
        // bounded pool, then pick in deterministic candidate order.
        let cands = &params.candidate_tilts_deg;
        let evaluate = |cand: f64| -> Option<(usize, ToolPath, KinematicProfile)> {
            let field = current.field.deform(&[rect], cand, params.blend_halfwidth);
            if field == current.field {
                return None;
            }
            let trial = current.with_field(surface, field).ok()?;
            let gouges = trial.gouge_check(surface);
            if gouges.iter().any(|g| !baseline_gouges.contains(g)) {
                return None;
            }
            let trial_profile = simulate(&trial, machine, params.f_prog, params.n_sub).ok()?;
            let trial_count = saturation(&trial_profile, machine).rotary_saturated_blocks();
            Some((trial_count, trial, trial_profile))
        };
        let evals: Vec<Option<(usize, ToolPath, KinematicProfile)>> =
            if params.workers <= 1 || cands.len() <= 1 {
                cands.iter().map(|&c| evaluate(c)).collect()
            } else {
                let chunk = cands.len().div_ceil(params.workers);
                std::thread::scope(|s| {
                    let handles: Vec<_> = cands
                        .chunks(chunk)
                        .map(|slice| {
                            s.spawn(|| slice.iter().map(|&c| evaluate(c)).collect::<Vec<_>>())
                        })
                        .collect();
                    handles
                        .into_iter()
                        .flat_map(|h| h.join().expect("candidate worker panicked"))
                        .collect()
                })
            };
        let mut best: Option<(usize, f64, ToolPath, KinematicProfile)> = None;
        for (&cand, eval) in cands.iter().zip(evals) {
            let Some((trial_count, trial, trial_profile)) = eval else {
                continue;
            };
            if trial_count < count_now {
                let better = match &best {
                    None => true,
                    Some((c, t, _, _)) => trial_count < *c || (trial_count == *c && cand < *t),
                };
                if better {
                    best = Some((trial_count, cand, trial, trial_profile));
                }
            }
        }

        match best {
            Some((_, _, trial, trial_profile)) => {
                current = trial;
                profile = trial_profile;
                iterations += 1;
            }
            None => break,
        }
    }

    let after = saturation(&profile, machine);
    let outcome = current.tighten(surface, params.scallop_tol)?;
    let tighten = Some(TightenInfo {
        inserted_paths: outcome.inserted_paths,
        residual_violations: outcome.residual.len(),
        max_residual_scallop: outcome
            .residual
            .iter()
            .map(|r| r.max_scallop)
            .fold(0.0, f64::max),
    });
    Ok(OptimizeOutcome {
        field: outcome.toolpath.field.clone(),
        toolpath: outcome.toolpath,
        before,
        after,
        iterations,
        tighten,
    })
}

fn worst_rotary_region(report: &SaturationReport) -> Option<SatRegion> {
    report.axes[3]
        .regions
        .iter()
        .chain(report.axes[4].regions.iter())
        .copied()
        .max_by_key(|r| r.count)
}

/// Map a saturated region onto the orientation-field grid: the dominant
/// pass's row padded by the blend halfwidth (so the raised-cosine weight
/// reaches zero outside the padded rectangle and the imposed tilt covers a
/// band of adjacent passes), over the full sample span. Whole passes are
/// deformed because a tilt transition placed inside the C-swing zone adds
/// azimuth motion exactly where the axis is already saturated.
fn region_to_field_rect(toolpath: &ToolPath, region: &SatRegion, halfwidth: f64) -> FieldRegion {
    let path = &toolpath.paths[region.path];
    let n_cols = toolpath.field.n_samples();
    let row = path.grid_row.round() as usize;
    let pad = halfwidth.ceil() as usize;
    let n_rows = toolpath.field.n_paths();
    FieldRegion {
        path_lo: row.saturating_sub(pad),
        path_hi: (row + pad).min(n_rows - 1),
        sample_lo: 0,
        sample_hi: n_cols - 1,
    }
}
