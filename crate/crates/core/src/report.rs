//! CSV and summary artifacts for a simulated program.

use crate::simulate::{KinematicProfile, SaturationReport};

/// Per-block kinematic record, the data behind axis-velocity plots.
pub fn report_csv(profile: &KinematicProfile) -> String {
    let mut out =
        String::from("path,sample,block_len_mm,dt_s,vx,vy,vz,vA_rpm,vC_rpm,sat_A,sat_C,F_eff\n");
    for b in &profile.blocks {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{:.4}\n",
            b.path,
            b.seg,
            b.ds_rel,
            b.dt_min * 60.0,
            b.v[0],
            b.v[1],
            b.v[2],
            b.v[3],
            b.v[4],
            b.sat[3] as u8,
            b.sat[4] as u8,
            b.f_eff
        ));
    }
    out
}

/// Inputs to the human-readable run summary.
pub struct SummaryData<'a> {
    pub profile: &'a KinematicProfile,
    pub before: &'a SaturationReport,
    pub after: &'a SaturationReport,
    pub n_paths: usize,
    pub inserted_paths: usize,
    pub optimize_iterations: usize,
    pub max_scallop: f64,
    pub scallop_tol: f64,
}

pub fn summary_text(d: &SummaryData) -> String {
    let p = d.profile;
    let mut out = String::new();
    out.push_str(&format!("paths: {}\n", d.n_paths));
    out.push_str(&format!("inserted_paths: {}\n", d.inserted_paths));
    out.push_str(&format!("blocks: {}\n", p.blocks.len()));
    out.push_str(&format!("feedrate_mm_min: {:.4}\n", p.f_prog));
    out.push_str(&format!(
        "time_at_f_prog_s: {:.6}\n",
        p.total_time_min * 60.0
    ));
    out.push_str(&format!(
        "time_at_f_eff_s: {:.6}\n",
        p.total_time_eff_min * 60.0
    ));
    out.push_str(&format!(
        "max_abs_vA_rpm: {:.4}\n",
        d.after.axes[3].max_abs
    ));
    out.push_str(&format!(
        "max_abs_vC_rpm: {:.4}\n",
        d.after.axes[4].max_abs
    ));
    out.push_str(&format!(
        "saturated_blocks_A_before: {}\n",
        region_count(d.before, 3)
    ));
    out.push_str(&format!(
        "saturated_blocks_C_before: {}\n",
        region_count(d.before, 4)
    ));
    out.push_str(&format!(
        "saturated_blocks_A_after: {}\n",
        region_count(d.after, 3)
    ));
    out.push_str(&format!(
        "saturated_blocks_C_after: {}\n",
        region_count(d.after, 4)
    ));
    out.push_str(&format!(
        "optimize_iterations: {}\n",
        d.optimize_iterations
    ));
    for r in &d.after.axes[4].regions {
        out.push_str(&format!(
            "c_saturation_region: path={} samples={}..{} blocks={}\n",
            r.path, r.sample_lo, r.sample_hi, r.count
        ));
    }
    out.push_str(&format!("max_scallop_mm: {:.6}\n", d.max_scallop));
    out.push_str(&format!("scallop_tol_mm: {:.6}\n", d.scallop_tol));
    out
}

fn region_count(report: &SaturationReport, axis: usize) -> usize {
    report.axes[axis].regions.iter().map(|r| r.count).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{JointPose, MachineModel};
    use crate::simulate::{profile_from_nodes, saturation, SolvedNode};

    fn profile() -> KinematicProfile {
        let m = MachineModel::default();
        let nodes: Vec<SolvedNode> = (0..4)
            .map(|i| {
                let q = JointPose {
                    x: i as f64,
                    ..JointPose::ZERO
                };
                SolvedNode {
                    path: 0,
                    sample: i,
                    pose: m.forward(&q),
                    joints: q,
                    singular: false,
                    pass_start: i == 0,
                }
            })
            .collect();
        profile_from_nodes(&nodes, &m, 5000.0, 8)
    }

    #[test]
    fn csv_shape_and_header() {
        let p = profile();
        let csv = report_csv(&p);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "path,sample,block_len_mm,dt_s,vx,vy,vz,vA_rpm,vC_rpm,sat_A,sat_C,F_eff"
        );
        assert_eq!(lines.len(), 1 + p.blocks.len());
        assert_eq!(lines[1].split(',').count(), 12);
    }

    #[test]
    fn summary_reports_times_and_counts() {
        let p = profile();
        let m = MachineModel::default();
        let rep = saturation(&p, &m);
        let text = summary_text(&SummaryData {
            profile: &p,
            before: &rep,
            after: &rep,
            n_paths: 1,
            inserted_paths: 0,
            optimize_iterations: 0,
            max_scallop: 0.0015,
            scallop_tol: 0.002,
        });
        assert!(text.contains("saturated_blocks_C_after: 0\n"));
        // 3 mm at 5000 mm/min = 0.036 s.
        assert!(text.contains("time_at_f_prog_s: 0.036000\n"), "{text}");
        assert!(text.contains("max_scallop_mm: 0.001500\n"));
    }

    #[test]
    fn csv_deterministic() {
        let p = profile();
        assert_eq!(report_csv(&p), report_csv(&p));
    }
}
