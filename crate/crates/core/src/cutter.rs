//! Filleted end mill geometry: tool axis construction from tilt/yaw,
//! guide point K, axis point C_L, effective radius and scallop height.

use nalgebra::{Point3, Vector3};

use crate::error::GeomError;
use crate::surface::LocalFrame;

/// Filleted end mill: torus corner of radius `r`, tube-center circle of
/// radius `big_r` around the axis. Shank radius is `big_r + r`.
#[derive(Debug, Clone, Copy)]
pub struct CutterGeometry {
    pub big_r: f64,
    pub r: f64,
}

impl CutterGeometry {
    pub fn new(big_r: f64, r: f64) -> Self {
        assert!(big_r > 0.0, "R must be positive");
        assert!(r >= 0.0, "corner radius must be non-negative");
        CutterGeometry { big_r, r }
    }

    pub fn shank_radius(&self) -> f64 {
        self.big_r + self.r
    }
}

/// One tool posture on the machining surface.
#[derive(Debug, Clone, Copy)]
pub struct CutterLocation {
    /// Contact point C_C on the nominal surface.
    pub cc: Point3<f64>,
    pub frame: LocalFrame,
    pub tilt_deg: f64,
    pub yaw_deg: f64,
    /// Unit tool axis.
    pub axis: Vector3<f64>,
    /// Guide point K = C_C + r n on the offset surface S1.
    pub k: Point3<f64>,
    /// Axis point C_L = C_C + r n + R v on the orientation surface S2.
    pub cl: Point3<f64>,
    /// Surface parameters of the contact point.
    pub param: (f64, f64),
}

/// Tool axis from tilt (off the normal, toward the feed) and yaw
/// (azimuth about the normal):
/// u = cos(tilt) n + sin(tilt) (cos(yaw) f + sin(yaw) t).
pub fn tool_axis(frame: &LocalFrame, tilt_deg: f64, yaw_deg: f64) -> Vector3<f64> {
    let tilt = tilt_deg.to_radians();
    let yaw = yaw_deg.to_radians();
    frame.n * tilt.cos() + (frame.f * yaw.cos() + frame.t * yaw.sin()) * tilt.sin()
}

/// K = C_C + r n.
pub fn guide_point(cc: &Point3<f64>, n: &Vector3<f64>, r: f64) -> Point3<f64> {
    cc + n * r
}

/// C_L = C_C + r n + R v with v = -normalize(n - (n.u) u), the in-plane
/// direction from the tube-center circle point K to the tool axis.
pub fn axis_point(
    cc: &Point3<f64>,
    n: &Vector3<f64>,
    axis: &Vector3<f64>,
    tool: &CutterGeometry,
) -> Result<Point3<f64>, GeomError> {
    let k = guide_point(cc, n, tool.r);
    if tool.big_r == 0.0 {
        return Ok(k);
    }
    let w = n - axis * n.dot(axis);
    let norm = w.norm();
    if norm < 1e-12 {
        return Err(GeomError::AxisSingularity);
    }
    Ok(k - w * (tool.big_r / norm))
}

/// Effective transverse cutting radius of the tilted/yawed tool, or the
/// infinite flat-bottom case at tilt = yaw = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectiveRadius {
    Finite(f64),
    Infinite,
}

impl EffectiveRadius {
    pub fn value(&self) -> f64 {
        match self {
            EffectiveRadius::Finite(v) => *v,
            EffectiveRadius::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, EffectiveRadius::Infinite)
    }
}

/// Large radius of the elliptical effective tool profile in the plane
/// perpendicular to the feed direction:
/// R_eq = r (R + r sin t) / (r sin t cos^2 y + (R + r sin t) sin^2 y).
pub fn effective_radius(tool: &CutterGeometry, tilt_deg: f64, yaw_deg: f64) -> EffectiveRadius {
    let st = tilt_deg.to_radians().sin();
    let (sy, cy) = {
        let y = yaw_deg.to_radians();
        (y.sin(), y.cos())
    };
    let num = tool.r * (tool.big_r + tool.r * st);
    let den = tool.r * st * cy * cy + (tool.big_r + tool.r * st) * sy * sy;
    if den.abs() < 1e-300 || num / den > 1e12 {
        EffectiveRadius::Infinite
    } else {
        EffectiveRadius::Finite(num / den)
    }
}

/// Scallop height between adjacent passes of effective radii `r_left`,
/// `r_right` spaced `stepover` apart on a locally flat cross-section.
/// Circular-arc model: both arcs tangent to the surface line, cusp at the
/// intersection of the two circles.
pub fn scallop_height(r_left: f64, r_right: f64, stepover: f64) -> Result<f64, GeomError> {
    assert!(stepover >= 0.0);
    if stepover == 0.0 {
        return Ok(0.0);
    }
    if stepover >= r_left + r_right {
        return Err(GeomError::NoOverlap {
            stepover,
            r_left,
            r_right,
        });
    }
    // Circle centers at (0, r_left) and (s, r_right); intersection height y
    // solves a quadratic after eliminating x:
    //   x = s/2 + (r_left - r_right)/s * y
    //   x^2 + y^2 - 2 r_left y = 0
    let a_lin = 0.5 * stepover;
    let b_lin = (r_left - r_right) / stepover;
    let qa = b_lin * b_lin + 1.0;
    let qb = 2.0 * a_lin * b_lin - 2.0 * r_left;
    let qc = a_lin * a_lin;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(GeomError::NoOverlap {
            stepover,
            r_left,
            r_right,
        });
    }
    // Smaller root is the cusp below the common tangent.
    let h = (-qb - disc.sqrt()) / (2.0 * qa);
    Ok(h.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn xy_frame() -> LocalFrame {
        LocalFrame {
            f: Vector3::x(),
            n: Vector3::z(),
            t: Vector3::new(0.0, -1.0, 0.0),
        }
    }

    #[test]
    fn tool_axis_limits() {
        let fr = xy_frame();
        let u = tool_axis(&fr, 0.0, 33.0);
        assert_relative_eq!((u - fr.n).norm(), 0.0, epsilon = 1e-15);

        let u = tool_axis(&fr, 90.0, 0.0);
        assert_relative_eq!((u - fr.f).norm(), 0.0, epsilon = 1e-15);

        let u = tool_axis(&fr, 1.0, 0.0);
        let t = 1.0_f64.to_radians();
        assert_relative_eq!(u.x, t.sin(), epsilon = 1e-15);
        assert_relative_eq!(u.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(u.z, t.cos(), epsilon = 1e-15);
        assert_relative_eq!(u.x, 0.017452, epsilon = 1e-6);
        assert_relative_eq!(u.z, 0.999848, epsilon = 1e-6);
    }

    #[test]
    fn tool_axis_unit_norm_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..10_000 {
            // Random orthonormal frame.
            let f = random_unit(&mut rng);
            let mut n = random_unit(&mut rng);
            n = (n - f * n.dot(&f)).normalize();
            let fr = LocalFrame { f, n, t: f.cross(&n) };
            let tilt = rng.gen_range(0.0..90.0);
            let yaw = rng.gen_range(-180.0..180.0);
            let u = tool_axis(&fr, tilt, yaw);
            assert!((u.norm() - 1.0).abs() <= 1e-12);
        }
    }

    fn random_unit(rng: &mut impl rand::Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }

    #[test]
    fn guide_point_examples() {
        let k = guide_point(&Point3::origin(), &Vector3::z(), 1.0);
        assert_relative_eq!((k - Point3::new(0.0, 0.0, 1.0)).norm(), 0.0);
        let cc = Point3::new(5.0, 5.0, 5.0);
        let k = guide_point(&cc, &Vector3::z(), 0.0);
        assert_relative_eq!((k - cc).norm(), 0.0);
        let k = guide_point(&Point3::new(10.0, 5.0, 2.0), &Vector3::y(), 1.0);
        assert_relative_eq!((k - Point3::new(10.0, 6.0, 2.0)).norm(), 0.0);
    }

    #[test]
    fn axis_point_ball_end_degenerates_to_k() {
        // R = 0 is the ball-end limit; CutterGeometry requires R > 0, so
        // exercise the branch directly.
        let tool = CutterGeometry { big_r: 0.0, r: 3.0 };
        let u = tool_axis(&xy_frame(), 25.0, 10.0);
        let cl = axis_point(&Point3::origin(), &Vector3::z(), &u, &tool).unwrap();
        assert_relative_eq!((cl - Point3::new(0.0, 0.0, 3.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn axis_point_one_degree_tilt() {
        let tool = CutterGeometry::new(9.0, 1.0);
        let t = 1.0_f64.to_radians();
        let u = Vector3::new(t.sin(), 0.0, t.cos());
        let n = Vector3::z();
        let cl = axis_point(&Point3::origin(), &n, &u, &tool).unwrap();
        // Brute-force properties: C_L - K is perpendicular to u, has length
        // R, and lies in span(n, u).
        let k = Point3::new(0.0, 0.0, 1.0);
        let d = cl - k;
        assert!(d.dot(&u).abs() < 1e-10);
        assert_relative_eq!(d.norm(), 9.0, epsilon = 1e-9);
        // d lies in span(n, u).
        assert!(d.dot(&n.cross(&u)).abs() < 1e-10);
        // Closed form: C_L = (9 cos 1deg, 0, 1 - 9 sin 1deg).
        assert_relative_eq!(cl.x, 9.0 * t.cos(), epsilon = 1e-12);
        assert_relative_eq!(cl.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(cl.z, 1.0 - 9.0 * t.sin(), epsilon = 1e-12);
        assert_relative_eq!(cl.x, 8.99863, epsilon = 1e-5);
        assert_relative_eq!(cl.z, 0.8429, epsilon = 1e-4);
    }

    #[test]
    fn axis_point_full_lead() {
        // u = f exactly (tilt 90): n is already perpendicular to u, so
        // v = -n and C_L = cc + (r - R) n.
        let tool = CutterGeometry::new(9.0, 1.0);
        let cl = axis_point(&Point3::origin(), &Vector3::z(), &Vector3::x(), &tool).unwrap();
        assert_relative_eq!((cl - Point3::new(0.0, 0.0, 1.0 - 9.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn axis_point_singular_when_axis_along_normal() {
        let tool = CutterGeometry::new(9.0, 1.0);
        assert!(matches!(
            axis_point(&Point3::origin(), &Vector3::z(), &Vector3::z(), &tool),
            Err(GeomError::AxisSingularity)
        ));
    }

    #[test]
    fn effective_radius_reported_values() {
        let tool = CutterGeometry::new(9.0, 1.0);
        let r1 = effective_radius(&tool, 1.0, 0.0).value();
        assert!((511.0..=522.0).contains(&r1), "R_eq(1deg) = {}", r1);
        let r5 = effective_radius(&tool, 5.0, 0.0).value();
        assert!((103.0..=106.0).contains(&r5), "R_eq(5deg) = {}", r5);
        assert_relative_eq!(r1, 516.7, epsilon = 0.1);
        assert_relative_eq!(r5, 104.3, epsilon = 0.1);

        let r90 = effective_radius(&tool, 90.0, 0.0).value();
        assert_relative_eq!(r90, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn effective_radius_infinite_at_flat_bottom() {
        let tool = CutterGeometry::new(9.0, 1.0);
        assert!(effective_radius(&tool, 0.0, 0.0).is_infinite());
        // Monotone divergence as tilt -> 0.
        let mut prev = 0.0;
        for tilt in [1.0, 0.1, 0.01] {
            let r = effective_radius(&tool, tilt, 0.0).value();
            assert!(r > prev);
            prev = r;
        }
    }

    #[test]
    fn general_formula_matches_simplified_at_zero_yaw() {
        let tool = CutterGeometry::new(9.0, 1.0);
        for i in 1..=100 {
            let tilt = 0.9 * i as f64; // (0, 90]
            let general = effective_radius(&tool, tilt, 0.0).value();
            let st = tilt.to_radians().sin();
            let simplified = (tool.big_r + tool.r * st) / st;
            assert_relative_eq!(general, simplified, max_relative = 1e-10);
        }
    }

    #[test]
    fn effective_radius_monotone_decreasing_in_tilt() {
        let tool = CutterGeometry::new(9.0, 1.0);
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let tilt = 90.0 * i as f64 / 1000.0;
            let r = effective_radius(&tool, tilt, 0.0).value();
            assert!(r < prev, "not decreasing at tilt {}", tilt);
            prev = r;
        }
    }

    #[test]
    fn scallop_closed_form() {
        let h = scallop_height(516.0, 516.0, 2.0).unwrap();
        assert_relative_eq!(h, 516.0 - (516.0_f64 * 516.0 - 1.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(h, 0.00097, epsilon = 1e-5);

        let h104 = scallop_height(104.0, 104.0, 2.0).unwrap();
        assert_relative_eq!(h104, 0.00481, epsilon = 1e-5);
        // Roughly 5x larger scallop for the 5x smaller radius.
        assert!((h104 / h - 5.0).abs() < 0.05);

        assert_relative_eq!(scallop_height(100.0, 100.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn scallop_unequal_radii_matches_brute_force() {
        // Independent oracle: scan x across the gap, machined height is the
        // lower envelope of the two circles; the cusp is its maximum.
        let (r1, r2, s) = (516.7, 104.3, 2.0);
        let circle = |x: f64, cx: f64, r: f64| r - (r * r - (x - cx) * (x - cx)).sqrt();
        let mut max_h: f64 = 0.0;
        let n = 200_000;
        for i in 0..=n {
            let x = s * i as f64 / n as f64;
            let h = circle(x, 0.0, r1).min(circle(x, s, r2));
            max_h = max_h.max(h);
        }
        let h = scallop_height(r1, r2, s).unwrap();
        // Grid resolution limits the oracle near the cusp.
        assert_relative_eq!(h, max_h, max_relative = 1e-4);
    }

    #[test]
    fn scallop_no_overlap_is_error() {
        assert!(matches!(
            scallop_height(1.0, 1.0, 3.0),
            Err(GeomError::NoOverlap { .. })
        ));
    }
}
