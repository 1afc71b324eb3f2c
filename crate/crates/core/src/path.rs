//! Parallel-plane toolpath generation, scallop-driven tightening and the
//! local gouge check.

use nalgebra::{Point3, Vector3};

use crate::cutter::{
    axis_point, effective_radius, guide_point, scallop_height, tool_axis, CutterGeometry,
    CutterLocation,
};
use crate::error::GeomError;
use crate::field::OrientationField;
use crate::surface::{ParametricSurface, Plane};

/// Parallel-plane finishing strategy parameters.
#[derive(Debug, Clone, Copy)]
pub struct MachiningStrategy {
    /// Drive-plane direction in the XY plane, degrees from the X axis.
    pub plane_angle_deg: f64,
    /// Distance between guiding planes, mm.
    pub stepover: f64,
    /// Chordal tolerance for drive-curve sampling, mm.
    pub chord_tol: f64,
    /// Maximum distance between consecutive postures, mm.
    pub max_sample_spacing: f64,
    pub base_tilt_deg: f64,
    pub base_yaw_deg: f64,
    /// Scallop-height tolerance used by `tighten`, mm.
    pub scallop_tol: f64,
    /// One-way linking instead of zigzag.
    pub one_way: bool,
}

impl Default for MachiningStrategy {
    fn default() -> Self {
        MachiningStrategy {
            plane_angle_deg: 45.0,
            stepover: 2.0,
            chord_tol: 0.01,
            max_sample_spacing: 1.0,
            base_tilt_deg: 1.0,
            base_yaw_deg: 0.0,
            scallop_tol: 0.002,
            one_way: false,
        }
    }
}

/// Strategy-independent per-sample data along a drive curve.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub param: (f64, f64),
    pub cc: Point3<f64>,
    pub frame: crate::surface::LocalFrame,
    /// Arc position along the traversal direction, mm.
    pub s_along: f64,
    /// Arc fraction in the canonical (non-reversed) direction; this is the
    /// field-grid column coordinate scaled to [0, 1].
    pub canonical_fraction: f64,
}

/// One per-plane pass: drive geometry plus dressed postures.
#[derive(Debug, Clone)]
pub struct PlanePath {
    pub plane: Plane,
    /// Signed offset of the plane along the common normal, mm.
    pub offset: f64,
    /// Fractional field-grid row; integer for planned paths, interpolated
    /// for paths inserted by `tighten`.
    pub grid_row: f64,
    pub inserted: bool,
    pub reversed: bool,
    pub samples: Vec<PathSample>,
    pub postures: Vec<CutterLocation>,
}

impl PlanePath {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.samples.last().map(|s| s.s_along).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ToolPath {
    pub paths: Vec<PlanePath>,
    pub strategy: MachiningStrategy,
    pub tool: CutterGeometry,
    pub field: OrientationField,
}

/// Residual scallop left where `tighten` hit its refinement limit.
#[derive(Debug, Clone)]
pub struct ScallopViolation {
    pub lower_path: usize,
    pub upper_path: usize,
    pub fraction_lo: f64,
    pub fraction_hi: f64,
    pub max_scallop: f64,
}

#[derive(Debug, Clone)]
pub struct TightenOutcome {
    pub toolpath: ToolPath,
    pub inserted_paths: usize,
    /// Non-empty when the refinement limit was reached.
    pub residual: Vec<ScallopViolation>,
}

/// Unit in-plane drive direction for a plane angle.
pub fn drive_direction(plane_angle_deg: f64) -> Vector3<f64> {
    let a = plane_angle_deg.to_radians();
    Vector3::new(a.cos(), a.sin(), 0.0)
}

/// Drive planes at `plane_angle_deg` in XY, spaced close to `stepover`,
/// covering the XY bounding box of the surface. Returns (plane, offset)
/// pairs ordered by offset.
pub fn plan_planes(
    surface: &ParametricSurface,
    strategy: &MachiningStrategy,
) -> Vec<(Plane, f64)> {
    assert!(strategy.stepover > 0.0);
    let normal = plane_normal(strategy.plane_angle_deg);
    let (lo, hi) = projection_extent(surface, &normal);
    let d = hi - lo;
    let count = if d <= strategy.stepover {
        2
    } else {
        (d / strategy.stepover).ceil() as usize + 1
    };
    let spacing = d / (count - 1) as f64;
    (0..count)
        .map(|i| {
            let offset = lo + spacing * i as f64;
            (
                Plane::new(Point3::from(normal * offset), normal),
                offset,
            )
        })
        .collect()
}

fn plane_normal(plane_angle_deg: f64) -> Vector3<f64> {
    let a = (plane_angle_deg + 90.0).to_radians();
    Vector3::new(a.cos(), a.sin(), 0.0)
}

fn projection_extent(surface: &ParametricSurface, normal: &Vector3<f64>) -> (f64, f64) {
    let (u0, u1, v0, v1) = surface.domain();
    let n = 64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let u = u0 + (u1 - u0) * i as f64 / n as f64;
            let v = v0 + (v1 - v0) * j as f64 / n as f64;
            let p = surface.evaluate_unchecked(u, v).point;
            let s = p.coords.dot(normal);
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo, hi)
}

impl ToolPath {
    /// Full generation: drive geometry for every plane, then postures from
    /// the orientation field. The field grid must have one row per plane.
    pub fn generate(
        surface: &ParametricSurface,
        strategy: &MachiningStrategy,
        tool: &CutterGeometry,
        field: &OrientationField,
    ) -> Result<ToolPath, GeomError> {
        let planes = plan_planes(surface, strategy);
        assert_eq!(
            field.n_paths(),
            planes.len(),
            "field grid rows must match plane count"
        );
        let mut paths = Vec::with_capacity(planes.len());
        for (i, (plane, offset)) in planes.iter().enumerate() {
            let reversed = !strategy.one_way && i % 2 == 1;
            let samples = drive_samples(surface, plane, strategy, reversed)?;
            paths.push(PlanePath {
                plane: *plane,
                offset: *offset,
                grid_row: i as f64,
                inserted: false,
                reversed,
                samples,
                postures: Vec::new(),
            });
        }
        let mut tp = ToolPath {
            paths,
            strategy: *strategy,
            tool: *tool,
            field: field.clone(),
        };
        tp.dress(surface)?;
        Ok(tp)
    }

    /// Recompute postures from the current field without re-running the
    /// drive-curve geometry.
    pub fn dress(&mut self, surface: &ParametricSurface) -> Result<(), GeomError> {
        let field = self.field.clone();
        let tool = self.tool;
        for (pi, path) in self.paths.iter_mut().enumerate() {
            path.postures = dress_path(surface, path, &field, &tool).map_err(|e| {
                GeomError::AtSample {
                    path: pi,
                    sample: path.postures.len(),
                    source: Box::new(e),
                }
            })?;
        }
        Ok(())
    }

    /// Replace the orientation field and re-dress.
    pub fn with_field(
        &self,
        surface: &ParametricSurface,
        field: OrientationField,
    ) -> Result<ToolPath, GeomError> {
        let mut tp = self.clone();
        tp.field = field;
        tp.dress(surface)?;
        Ok(tp)
    }

    /// Flag postures whose effective radius exceeds the local transverse
    /// concave curvature radius.
    pub fn gouge_check(&self, surface: &ParametricSurface) -> Vec<(usize, usize)> {
        let mut flags = Vec::new();
        for (pi, path) in self.paths.iter().enumerate() {
            for (si, post) in path.postures.iter().enumerate() {
                let kappa = match surface.normal_curvature(
                    post.param.0,
                    post.param.1,
                    &post.frame.t,
                ) {
                    Ok(k) => k,
                    Err(_) => continue,
                };
                if kappa < -1e-12 {
                    let r_eq = effective_radius(&self.tool, post.tilt_deg, post.yaw_deg);
                    if r_eq.is_infinite() || r_eq.value() > 1.0 / kappa.abs() {
                        flags.push((pi, si));
                    }
                }
            }
        }
        flags
    }

    /// Insert intermediate drive planes wherever the predicted scallop
    /// between adjacent passes exceeds `scallop_tol`, bisecting the
    /// offending gap locally, up to 3 refinement levels.
    pub fn tighten(
        &self,
        surface: &ParametricSurface,
        scallop_tol: f64,
    ) -> Result<TightenOutcome, GeomError> {
        assert!(scallop_tol > 0.0);
        let mut tp = self.clone();
        let mut inserted_total = 0;
        let mut residual = Vec::new();
        for level in 0..3 {
            let violations = scan_scallops(&tp, scallop_tol);
            if violations.is_empty() {
                break;
            }
            let mut new_paths = Vec::new();
            for v in &violations {
                let a = &tp.paths[v.lower_path];
                let b = &tp.paths[v.upper_path];
                let mid_offset = 0.5 * (a.offset + b.offset);
                let normal = a.plane.normal;
                let plane = Plane::new(Point3::from(normal * mid_offset), normal);
                // Pad the trim window by roughly two sample spacings.
                let pad = 2.0 * tp.strategy.max_sample_spacing
                    / a.length().max(b.length()).max(1e-9);
                let lo = (v.fraction_lo - pad).max(0.0);
                let hi = (v.fraction_hi + pad).min(1.0);
                let reversed = a.reversed;
                let mut samples = drive_samples(surface, &plane, &tp.strategy, reversed)?;
                trim_to_fraction(&mut samples, lo, hi);
                if samples.len() < 2 {
                    continue;
                }
                new_paths.push(PlanePath {
                    plane,
                    offset: mid_offset,
                    grid_row: 0.5 * (a.grid_row + b.grid_row),
                    inserted: true,
                    reversed,
                    samples,
                    postures: Vec::new(),
                });
            }
            if new_paths.is_empty() {
                residual = violations;
                break;
            }
            inserted_total += new_paths.len();
            tp.paths.extend(new_paths);
            tp.paths
                .sort_by(|x, y| x.offset.partial_cmp(&y.offset).unwrap());
            tp.dress(surface)?;
            if level == 2 {
                residual = scan_scallops(&tp, scallop_tol);
            }
        }
        Ok(TightenOutcome {
            toolpath: tp,
            inserted_paths: inserted_total,
            residual,
        })
    }
}

fn dress_path(
    _surface: &ParametricSurface,
    path: &PlanePath,
    field: &OrientationField,
    tool: &CutterGeometry,
) -> Result<Vec<CutterLocation>, GeomError> {
    let max_col = (field.n_samples() - 1) as f64;
    let mut postures = Vec::with_capacity(path.samples.len());
    for s in &path.samples {
        let col = s.canonical_fraction * max_col;
        let tilt = field.tilt_at(path.grid_row, col)?;
        let yaw = field.yaw_deg;
        let axis = tool_axis(&s.frame, tilt, yaw);
        let k = guide_point(&s.cc, &s.frame.n, tool.r);
        let cl = axis_point(&s.cc, &s.frame.n, &axis, tool)?;
        postures.push(CutterLocation {
            cc: s.cc,
            frame: s.frame,
            tilt_deg: tilt,
            yaw_deg: yaw,
            axis,
            k,
            cl,
            param: s.param,
        });
    }
    Ok(postures)
}

/// Intersect one plane, pick the drive branch, orient it, resample to the
/// spacing limit and attach local frames.
fn drive_samples(
    surface: &ParametricSurface,
    plane: &Plane,
    strategy: &MachiningStrategy,
    reversed: bool,
) -> Result<Vec<PathSample>, GeomError> {
    let curves = surface.plane_intersection(plane, strategy.chord_tol)?;
    let curve = match curves
        .iter()
        .filter(|c| c.samples.len() >= 2)
        .max_by(|a, b| a.length().partial_cmp(&b.length()).unwrap())
    {
        Some(c) => c,
        None => return Ok(Vec::new()),
    };
    let dir = drive_direction(strategy.plane_angle_deg);

    // Canonical orientation: curve runs along +dir.
    let first = curve.samples.first().unwrap().1;
    let last = curve.samples.last().unwrap().1;
    let mut pts: Vec<((f64, f64), Point3<f64>)> = curve.samples.clone();
    if (last - first).dot(&dir) < 0.0 {
        pts.reverse();
    }

    // Arc-length resample at <= max_sample_spacing.
    let total: f64 = pts.windows(2).map(|w| (w[1].1 - w[0].1).norm()).sum();
    if total < 1e-9 {
        return Ok(Vec::new());
    }
    let n = ((total / strategy.max_sample_spacing).ceil() as usize).max(1) + 1;
    let mut resampled: Vec<((f64, f64), Point3<f64>, f64)> = Vec::with_capacity(n);
    let mut cursor = 0usize;
    let mut acc = 0.0;
    for k in 0..n {
        let target = total * k as f64 / (n - 1) as f64;
        while cursor + 1 < pts.len() - 1 {
            let seg = (pts[cursor + 1].1 - pts[cursor].1).norm();
            if acc + seg >= target {
                break;
            }
            acc += seg;
            cursor += 1;
        }
        let seg = (pts[cursor + 1].1 - pts[cursor].1).norm().max(1e-15);
        let t = ((target - acc) / seg).clamp(0.0, 1.0);
        let u = pts[cursor].0 .0 + t * (pts[cursor + 1].0 .0 - pts[cursor].0 .0);
        let v = pts[cursor].0 .1 + t * (pts[cursor + 1].0 .1 - pts[cursor].0 .1);
        let (u, v) = surface
            .project_onto_plane(plane, u, v)
            .unwrap_or((u, v));
        let (u0, u1, v0, v1) = surface.domain();
        let (u, v) = (u.clamp(u0, u1), v.clamp(v0, v1));
        let p = surface.evaluate_unchecked(u, v).point;
        resampled.push(((u, v), p, target));
    }

    if reversed {
        resampled.reverse();
    }

    // Frames with feed along the traversal tangent.
    let m = resampled.len();
    let mut samples = Vec::with_capacity(m);
    let mut s_along = 0.0;
    for i in 0..m {
        if i > 0 {
            s_along += (resampled[i].1 - resampled[i - 1].1).norm();
        }
        let tangent = if i == 0 {
            resampled[1].1 - resampled[0].1
        } else if i == m - 1 {
            resampled[m - 1].1 - resampled[m - 2].1
        } else {
            resampled[i + 1].1 - resampled[i - 1].1
        };
        let (u, v) = resampled[i].0;
        let frame = surface.local_frame(u, v, &tangent)?;
        let canonical_fraction = if reversed {
            1.0 - resampled[i].2 / total
        } else {
            resampled[i].2 / total
        };
        samples.push(PathSample {
            param: (u, v),
            cc: resampled[i].1,
            frame,
            s_along,
            canonical_fraction,
        });
    }
    Ok(samples)
}

fn trim_to_fraction(samples: &mut Vec<PathSample>, lo: f64, hi: f64) {
    samples.retain(|s| s.canonical_fraction >= lo && s.canonical_fraction <= hi);
    // Rebase arc positions.
    if let Some(first) = samples.first().map(|s| s.s_along) {
        let base = samples.iter().map(|s| s.s_along).fold(first, f64::min);
        for s in samples.iter_mut() {
            s.s_along -= base;
        }
    }
}

/// Largest predicted scallop between any adjacent pair of passes.
pub fn max_scallop_estimate(tp: &ToolPath) -> f64 {
    scan_scallops(tp, 0.0)
        .iter()
        .map(|v| v.max_scallop)
        .fold(0.0, f64::max)
}

/// Predicted scallop between every adjacent pair of passes; returns merged
/// violation intervals in canonical arc fraction.
fn scan_scallops(tp: &ToolPath, tol: f64) -> Vec<ScallopViolation> {
    let mut order: Vec<usize> = (0..tp.paths.len())
        .filter(|&i| !tp.paths[i].is_empty())
        .collect();
    order.sort_by(|&a, &b| tp.paths[a].offset.partial_cmp(&tp.paths[b].offset).unwrap());
    let mut out = Vec::new();
    for w in order.windows(2) {
        let (ia, ib) = (w[0], w[1]);
        let a = &tp.paths[ia];
        let b = &tp.paths[ib];
        let gap = b.offset - a.offset;
        if gap <= 1e-12 {
            continue;
        }
        let mut current: Option<(f64, f64, f64)> = None;
        for (si, post) in a.postures.iter().enumerate() {
            let frac = a.samples[si].canonical_fraction;
            // Nearest posture on the neighbor in canonical fraction; skip
            // where the neighbor (possibly trimmed) has no counterpart.
            let Some(other) = nearest_by_fraction(b, frac) else {
                continue;
            };
            let r_a = effective_radius(&tp.tool, post.tilt_deg, post.yaw_deg);
            let r_b = effective_radius(&tp.tool, other.tilt_deg, other.yaw_deg);
            let h = match (r_a, r_b) {
                (crate::cutter::EffectiveRadius::Finite(x), crate::cutter::EffectiveRadius::Finite(y)) => {
                    scallop_height(x, y, gap).unwrap_or(f64::INFINITY)
                }
                // Infinite radius: flat bottom leaves no scallop.
                _ => 0.0,
            };
            if h > tol {
                current = Some(match current {
                    None => (frac, frac, h),
                    Some((lo, _, hmax)) => (lo, frac, hmax.max(h)),
                });
            } else if let Some((lo, hi, hmax)) = current.take() {
                out.push(ScallopViolation {
                    lower_path: ia,
                    upper_path: ib,
                    fraction_lo: lo.min(hi),
                    fraction_hi: lo.max(hi),
                    max_scallop: hmax,
                });
            }
        }
        if let Some((lo, hi, hmax)) = current {
            out.push(ScallopViolation {
                lower_path: ia,
                upper_path: ib,
                fraction_lo: lo.min(hi),
                fraction_hi: lo.max(hi),
                max_scallop: hmax,
            });
        }
    }
    out
}

fn nearest_by_fraction<'a>(path: &'a PlanePath, frac: f64) -> Option<&'a CutterLocation> {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (i, s) in path.samples.iter().enumerate() {
        let d = (s.canonical_fraction - frac).abs();
        if d < best_d {
            best_d = d;
            best = Some(i);
        }
    }
    // Trimmed neighbors only cover part of the pass.
    let spacing_frac = 2.0 / path.samples.len().max(1) as f64;
    match best {
        Some(i) if best_d <= spacing_frac.max(0.02) => path.postures.get(i),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::OrientationField;
    use approx::assert_relative_eq;

    fn saddle() -> ParametricSurface {
        ParametricSurface::saddle(50.0, 50.0, 20.0)
    }

    fn default_field(n_paths: usize) -> OrientationField {
        OrientationField::constant(n_paths, 40, 1.0, 0.0, 0.5, 15.0)
    }

    #[test]
    fn plan_planes_counts() {
        let strategy = MachiningStrategy::default();
        let planes = plan_planes(&saddle(), &strategy);
        // 100x100 footprint at 45 degrees: ceil(141.42/2) + 1 = 72.
        assert_eq!(planes.len(), 72);

        let wide = MachiningStrategy {
            stepover: 200.0,
            ..strategy
        };
        assert_eq!(plan_planes(&saddle(), &wide).len(), 2);

        // Angle 0: planes parallel to the X axis (normal along Y).
        let axis_aligned = MachiningStrategy {
            plane_angle_deg: 0.0,
            ..strategy
        };
        let planes = plan_planes(&saddle(), &axis_aligned);
        for (p, _) in &planes {
            assert_relative_eq!(p.normal.x, 0.0, epsilon = 1e-12);
            assert_relative_eq!(p.normal.y.abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn generate_flat_surface_constant_axis() {
        let flat = ParametricSurface::flat(40.0, 40.0);
        let strategy = MachiningStrategy {
            plane_angle_deg: 0.0,
            stepover: 5.0,
            one_way: true,
            ..MachiningStrategy::default()
        };
        let planes = plan_planes(&flat, &strategy);
        let field = default_field(planes.len());
        let tp = ToolPath::generate(&flat, &strategy, &CutterGeometry::new(9.0, 1.0), &field)
            .unwrap();
        for path in tp.paths.iter().filter(|p| !p.is_empty()) {
            let first = path.postures[0];
            for post in &path.postures {
                // u . n = cos(tilt) everywhere, and the axis is constant in
                // the world frame along a straight drive curve.
                assert_relative_eq!(
                    post.axis.dot(&post.frame.n),
                    1.0_f64.to_radians().cos(),
                    epsilon = 1e-12
                );
                assert!((post.axis - first.axis).norm() < 1e-12);
                assert_relative_eq!(post.cl.z, first.cl.z, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn generate_saddle_posture_invariants() {
        let s = saddle();
        let strategy = MachiningStrategy::default();
        let planes = plan_planes(&s, &strategy);
        let field = default_field(planes.len());
        let tool = CutterGeometry::new(9.0, 1.0);
        let tp = ToolPath::generate(&s, &strategy, &tool, &field).unwrap();
        assert_eq!(tp.paths.len(), 72);
        let mut checked = 0;
        for path in tp.paths.iter().filter(|p| !p.is_empty()) {
            for post in &path.postures {
                let d = post.cl - post.k;
                assert!((d.norm() - 9.0).abs() < 1e-9);
                assert!(d.dot(&post.axis).abs() < 1e-10);
                let k_expect = post.cc + post.frame.n * 1.0;
                assert!((post.k - k_expect).norm() == 0.0);
                // Sample spacing respects the limit.
                checked += 1;
            }
            for w in path.samples.windows(2) {
                let d = (w[1].cc - w[0].cc).norm();
                assert!(d <= strategy.max_sample_spacing * 1.01);
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn zigzag_alternates_direction() {
        let s = saddle();
        let strategy = MachiningStrategy::default();
        let planes = plan_planes(&s, &strategy);
        let field = default_field(planes.len());
        let tp = ToolPath::generate(&s, &strategy, &CutterGeometry::new(9.0, 1.0), &field)
            .unwrap();
        let dir = drive_direction(45.0);
        let mid = tp.paths.len() / 2;
        for (i, path) in tp.paths.iter().enumerate().skip(mid - 2).take(4) {
            if path.samples.len() < 2 {
                continue;
            }
            let first = path.samples.first().unwrap().cc;
            let last = path.samples.last().unwrap().cc;
            let along = (last - first).dot(&dir);
            if i % 2 == 0 {
                assert!(along > 0.0);
            } else {
                assert!(along < 0.0);
            }
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let s = saddle();
        let strategy = MachiningStrategy::default();
        let planes = plan_planes(&s, &strategy);
        let field = default_field(planes.len());
        let tool = CutterGeometry::new(9.0, 1.0);
        let a = ToolPath::generate(&s, &strategy, &tool, &field).unwrap();
        let b = ToolPath::generate(&s, &strategy, &tool, &field).unwrap();
        for (pa, pb) in a.paths.iter().zip(&b.paths) {
            assert_eq!(pa.postures.len(), pb.postures.len());
            for (x, y) in pa.postures.iter().zip(&pb.postures) {
                assert_eq!(x.cl.x.to_bits(), y.cl.x.to_bits());
                assert_eq!(x.axis.z.to_bits(), y.axis.z.to_bits());
            }
        }
    }

    #[test]
    fn chordal_deviation_against_denser_resampling() {
        // 10x-denser resampling oracle: every coarse chord midpoint stays
        // within chord_tol of the dense polyline.
        let s = saddle();
        let strategy = MachiningStrategy::default();
        let dense = MachiningStrategy {
            max_sample_spacing: strategy.max_sample_spacing / 10.0,
            ..strategy
        };
        let planes = plan_planes(&s, &strategy);
        let field = default_field(planes.len());
        let tool = CutterGeometry::new(9.0, 1.0);
        let coarse = ToolPath::generate(&s, &strategy, &tool, &field).unwrap();
        let fine = ToolPath::generate(&s, &dense, &tool, &field).unwrap();
        let path_c = &coarse.paths[36];
        let path_f = &fine.paths[36];
        let seg_dist = |p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>| {
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-30)).clamp(0.0, 1.0);
            (p - (a + ab * t)).norm()
        };
        for w in path_c.samples.windows(2) {
            let mid = nalgebra::center(&w[0].cc, &w[1].cc);
            let dmin = path_f
                .samples
                .windows(2)
                .map(|d| seg_dist(&mid, &d[0].cc, &d[1].cc))
                .fold(f64::INFINITY, f64::min);
            assert!(dmin <= strategy.chord_tol, "deviation {}", dmin);
        }
    }

    #[test]
    fn gouge_check_flags_concave_only() {
        // Convex/planar: no flags on the default saddle at 45 degrees (the
        // transverse direction follows the convex principal parabola).
        let s = saddle();
        let strategy = MachiningStrategy::default();
        let planes = plan_planes(&s, &strategy);
        let field = default_field(planes.len());
        let tool = CutterGeometry::new(9.0, 1.0);
        let tp = ToolPath::generate(&s, &strategy, &tool, &field).unwrap();
        assert!(tp.gouge_check(&s).is_empty());

        // Rotating the drive direction 90 degrees puts the transverse
        // direction onto the concave parabola: R_eq(1 deg) = 516 mm exceeds
        // the local concave radius near the center.
        let concave_strategy = MachiningStrategy {
            plane_angle_deg: 135.0,
            ..strategy
        };
        let planes = plan_planes(&s, &concave_strategy);
        let field = default_field(planes.len());
        let tp = ToolPath::generate(&s, &concave_strategy, &tool, &field).unwrap();
        assert!(!tp.gouge_check(&s).is_empty());
    }

    #[test]
    fn tighten_identity_when_within_tolerance() {
        let flat = ParametricSurface::flat(30.0, 30.0);
        let strategy = MachiningStrategy {
            plane_angle_deg: 0.0,
            stepover: 1.0,
            ..MachiningStrategy::default()
        };
        let planes = plan_planes(&flat, &strategy);
        let field = default_field(planes.len());
        let tool = CutterGeometry::new(9.0, 1.0);
        let tp = ToolPath::generate(&flat, &strategy, &tool, &field).unwrap();
        // R_eq(1 deg) = 516.7, s = 1 -> h = 2.4e-4 < 2e-3.
        let out = tp.tighten(&flat, 0.002).unwrap();
        assert_eq!(out.inserted_paths, 0);
        assert_eq!(out.toolpath.paths.len(), tp.paths.len());
        assert!(out.residual.is_empty());

        // Infinite tolerance: identity.
        let out = tp.tighten(&flat, f64::INFINITY).unwrap();
        assert_eq!(out.inserted_paths, 0);
    }

    #[test]
    fn tighten_bisects_five_degree_region() {
        // 5 deg tilt, stepover 2 -> h = 4.8e-3 > 2e-3; one bisection level
        // brings it to ~1.2e-3.
        let flat = ParametricSurface::flat(30.0, 30.0);
        let strategy = MachiningStrategy {
            plane_angle_deg: 0.0,
            stepover: 2.0,
            base_tilt_deg: 5.0,
            ..MachiningStrategy::default()
        };
        let planes = plan_planes(&flat, &strategy);
        let field = OrientationField::constant(planes.len(), 40, 5.0, 0.0, 0.5, 15.0);
        let tool = CutterGeometry::new(9.0, 1.0);
        let tp = ToolPath::generate(&flat, &strategy, &tool, &field).unwrap();
        let out = tp.tighten(&flat, 0.002).unwrap();
        assert!(out.inserted_paths > 0);
        assert!(out.residual.is_empty());
        // Exactly one level needed: inserted paths are the gaps, no
        // second-level insertions between bisected pairs.
        let h_after = crate::cutter::scallop_height(104.3, 104.3, 1.0).unwrap();
        assert!(h_after < 0.002);
    }
}
