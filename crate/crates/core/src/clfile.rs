//! Cutter-location text artifact: one `GOTO/ x,y,z, i,j,k` record per
//! posture (C_L position and unit tool axis), APT-style `$$` comments and
//! `PPRINT/ PATH n` markers separating passes.

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::cutter::CutterGeometry;
use crate::path::{MachiningStrategy, ToolPath};

#[derive(Debug, Error)]
pub enum ClParseError {
    #[error("line {line}: malformed record `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: `{value}` is not a number")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: axis vector has zero length")]
    ZeroAxis { line: usize },
}

/// One parsed pass: (C_L, unit axis) per posture.
pub type ClPath = Vec<(Point3<f64>, Vector3<f64>)>;

pub fn write_cl(toolpath: &ToolPath) -> String {
    let mut out = String::new();
    header(&mut out, &toolpath.tool, &toolpath.strategy);
    for (i, path) in toolpath.paths.iter().enumerate() {
        if path.postures.is_empty() {
            continue;
        }
        out.push_str(&format!("PPRINT/ PATH {i}\n"));
        for post in &path.postures {
            out.push_str(&format!(
                "GOTO/ {:.6},{:.6},{:.6}, {:.9},{:.9},{:.9}\n",
                post.cl.x, post.cl.y, post.cl.z, post.axis.x, post.axis.y, post.axis.z
            ));
        }
    }
    out.push_str("FINI\n");
    out
}

fn header(out: &mut String, tool: &CutterGeometry, strategy: &MachiningStrategy) {
    out.push_str(&format!(
        "$$ TOOL R={:.6} r={:.6}\n",
        tool.big_r, tool.r
    ));
    out.push_str(&format!(
        "$$ STRATEGY plane_angle={:.4} stepover={:.4} tilt={:.4} yaw={:.4} chord_tol={:.6} spacing={:.4}\n",
        strategy.plane_angle_deg,
        strategy.stepover,
        strategy.base_tilt_deg,
        strategy.base_yaw_deg,
        strategy.chord_tol,
        strategy.max_sample_spacing
    ));
}

/// Parse GOTO records grouped by PATH markers. Comments (`$$`), other
/// PPRINT lines and FINI are skipped; records before the first marker form
/// path 0.
pub fn parse_cl(text: &str) -> Result<Vec<ClPath>, ClParseError> {
    let mut paths: Vec<ClPath> = Vec::new();
    let mut current: ClPath = Vec::new();
    let mut seen_any = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("$$") || line == "FINI" {
            continue;
        }
        if let Some(rest) = line.strip_prefix("PPRINT/") {
            if rest.trim().starts_with("PATH") && (seen_any || !current.is_empty()) {
                paths.push(std::mem::take(&mut current));
            }
            seen_any = true;
            continue;
        }
        let Some(rest) = line.strip_prefix("GOTO/") else {
            return Err(ClParseError::Malformed {
                line: line_no,
                text: line.to_string(),
            });
        };
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| ClParseError::BadNumber {
                        line: line_no,
                        value: t.trim().to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        if nums.len() != 6 {
            return Err(ClParseError::Malformed {
                line: line_no,
                text: line.to_string(),
            });
        }
        let axis = Vector3::new(nums[3], nums[4], nums[5]);
        if axis.norm() < 1e-12 {
            return Err(ClParseError::ZeroAxis { line: line_no });
        }
        current.push((Point3::new(nums[0], nums[1], nums[2]), axis.normalize()));
    }
    if !current.is_empty() || seen_any {
        paths.push(current);
    }
    Ok(paths.into_iter().filter(|p| !p.is_empty()).collect())
}
