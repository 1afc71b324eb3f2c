//! The orientation field: a smooth tilt-angle grid over (path, sample)
//! coordinates. Its induced C_L locus is the orientation surface S2.

use crate::error::GeomError;

/// Grid of tilt control values (degrees), interpolated bicubically
/// (Catmull-Rom, C1, node-interpolating). Yaw is a constant field.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    n_paths: usize,
    n_samples: usize,
    /// Row-major: tilt[path * n_samples + sample].
    tilt: Vec<f64>,
    pub yaw_deg: f64,
    pub base_tilt_deg: f64,
    pub tilt_min_deg: f64,
    pub tilt_max_deg: f64,
}

/// A rectangular deformation region in grid coordinates.
#[derive(Debug, Clone, Copy)]
pub struct FieldRegion {
    pub path_lo: usize,
    pub path_hi: usize,
    pub sample_lo: usize,
    pub sample_hi: usize,
}

impl OrientationField {
    pub fn constant(
        n_paths: usize,
        n_samples: usize,
        base_tilt_deg: f64,
        yaw_deg: f64,
        tilt_min_deg: f64,
        tilt_max_deg: f64,
    ) -> Self {
        assert!(n_paths >= 1 && n_samples >= 1);
        assert!(tilt_min_deg <= base_tilt_deg && base_tilt_deg <= tilt_max_deg);
        OrientationField {
            n_paths,
            n_samples,
            tilt: vec![base_tilt_deg; n_paths * n_samples],
            yaw_deg,
            base_tilt_deg,
            tilt_min_deg,
            tilt_max_deg,
        }
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn node(&self, path: usize, sample: usize) -> f64 {
        self.tilt[path * self.n_samples + sample]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.tilt
    }

    /// Interpolated tilt at fractional grid coordinates. Reproduces control
    /// values at integer nodes.
    pub fn tilt_at(&self, path: f64, sample: f64) -> Result<f64, GeomError> {
        let eps = 1e-9;
        if path < -eps
            || path > (self.n_paths - 1) as f64 + eps
            || sample < -eps
            || sample > (self.n_samples - 1) as f64 + eps
        {
            return Err(GeomError::FieldOutOfGrid {
                path,
                sample,
                n_paths: self.n_paths,
                n_samples: self.n_samples,
            });
        }
        let path = path.clamp(0.0, (self.n_paths - 1) as f64);
        let sample = sample.clamp(0.0, (self.n_samples - 1) as f64);

        // Interpolate along samples for the four bracketing path rows, then
        // along paths.
        let (pi, pt) = split_coord(path, self.n_paths);
        let mut rows = [0.0; 4];
        for (k, row) in rows.iter_mut().enumerate() {
            let p = clamp_index(pi as isize + k as isize - 1, self.n_paths);
            *row = self.row_interp(p, sample);
        }
        Ok(catmull_rom(rows, pt))
    }

    fn row_interp(&self, path: usize, sample: f64) -> f64 {
        let (si, st) = split_coord(sample, self.n_samples);
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let s = clamp_index(si as isize + k as isize - 1, self.n_samples);
            *v = self.node(path, s);
        }
        catmull_rom(vals, st)
    }

    /// Set the region's control nodes to `target_tilt_deg` and raised-cosine
    /// blend the surrounding nodes within `blend_halfwidth` grid cells
    /// (Chebyshev distance). Nodes farther than the halfwidth are untouched.
    /// Returns a new field.
    pub fn deform(
        &self,
        regions: &[FieldRegion],
        target_tilt_deg: f64,
        blend_halfwidth: f64,
    ) -> Self {
        assert!(
            target_tilt_deg >= self.tilt_min_deg && target_tilt_deg <= self.tilt_max_deg,
            "target tilt {} outside [{}, {}]",
            target_tilt_deg,
            self.tilt_min_deg,
            self.tilt_max_deg
        );
        if regions.is_empty() {
            return self.clone();
        }
        let mut out = self.clone();
        for p in 0..self.n_paths {
            for s in 0..self.n_samples {
                let d = regions
                    .iter()
                    .map(|r| chebyshev_to_rect(p, s, r))
                    .fold(f64::INFINITY, f64::min);
                let w = if d <= 0.0 {
                    1.0
                } else if blend_halfwidth > 0.0 && d < blend_halfwidth {
                    0.5 * (1.0 + (std::f64::consts::PI * d / blend_halfwidth).cos())
                } else {
                    continue;
                };
                let idx = p * self.n_samples + s;
                out.tilt[idx] = self.tilt[idx] + w * (target_tilt_deg - self.tilt[idx]);
            }
        }
        out
    }

    /// CSV dump: `path_index,sample_index,tilt_deg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path_index,sample_index,tilt_deg\n");
        for p in 0..self.n_paths {
            for s in 0..self.n_samples {
                out.push_str(&format!("{},{},{:.6}\n", p, s, self.node(p, s)));
            }
        }
        out
    }
}

fn split_coord(x: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let i = (x.floor() as usize).min(n - 2);
    (i, x - i as f64)
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * ((2.0 * p[1])
        + (-p[0] + p[2]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t2
        + (-p[0] + 3.0 * p[1] - 3.0 * p[2] + p[3]) * t3)
}

/// Chebyshev distance (in grid cells) from node (p, s) to the rectangle.
fn chebyshev_to_rect(p: usize, s: usize, r: &FieldRegion) -> f64 {
    let dp = axis_dist(p, r.path_lo, r.path_hi);
    let ds = axis_dist(s, r.sample_lo, r.sample_hi);
    dp.max(ds) as f64
}

fn axis_dist(i: usize, lo: usize, hi: usize) -> usize {
    if i < lo {
        lo - i
    } else if i > hi {
        i - hi
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn field() -> OrientationField {
        OrientationField::constant(20, 30, 1.0, 0.0, 0.5, 15.0)
    }

    #[test]
    fn constant_field_reproduced_everywhere() {
        let f = field();
        for (p, s) in [(0.0, 0.0), (3.7, 12.2), (19.0, 29.0), (0.5, 0.5)] {
            assert_relative_eq!(f.tilt_at(p, s).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nodes_reproduced_exactly() {
        let mut f = field();
        f.tilt[5 * 30 + 7] = 4.2;
        assert_relative_eq!(f.tilt_at(5.0, 7.0).unwrap(), 4.2, epsilon = 1e-12);
        assert_relative_eq!(f.tilt_at(5.0, 8.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn midpoint_between_nodes_is_intermediate() {
        // 1 deg and 5 deg neighbors with flat surroundings.
        let mut f = field();
        for s in 0..30 {
            f.tilt[10 * 30 + s] = 5.0;
        }
        let v = f.tilt_at(9.5, 15.0).unwrap();
        assert!(v > 1.0 && v < 5.0, "midpoint value {}", v);
    }

    #[test]
    fn out_of_grid_is_error() {
        let f = field();
        assert!(f.tilt_at(-0.5, 0.0).is_err());
        assert!(f.tilt_at(0.0, 29.5).is_err());
    }

    #[test]
    fn deform_raised_cosine_pattern() {
        // Region = path 12 samples 10..=20, target 5 deg, halfwidth 2.
        let f = field();
        let region = FieldRegion {
            path_lo: 12,
            path_hi: 12,
            sample_lo: 10,
            sample_hi: 20,
        };
        let g = f.deform(&[region], 5.0, 2.0);
        for s in 10..=20 {
            assert_relative_eq!(g.node(12, s), 5.0, epsilon = 1e-12);
        }
        // Adjacent paths acquire the half-blend value.
        for p in [11, 13] {
            let v = g.node(p, 15);
            assert!(v > 1.0 && v < 5.0, "path {} value {}", p, v);
            assert_relative_eq!(v, 3.0, epsilon = 1e-12); // w = 0.5 at d = 1
        }
        // Paths at distance > halfwidth are bit-identical.
        for p in [9, 15] {
            for s in 0..30 {
                assert_eq!(g.node(p, s).to_bits(), f.node(p, s).to_bits());
            }
        }
        // d = 2 has weight 0, also unchanged.
        assert_eq!(g.node(10, 15).to_bits(), f.node(10, 15).to_bits());
    }

    #[test]
    fn deform_to_base_is_identity() {
        let f = field();
        let g = f.deform(
            &[FieldRegion {
                path_lo: 3,
                path_hi: 5,
                sample_lo: 0,
                sample_hi: 29,
            }],
            1.0,
            2.0,
        );
        assert_eq!(f, g);
    }

    #[test]
    fn deform_empty_region_is_identity() {
        let f = field();
        assert_eq!(f.deform(&[], 5.0, 2.0), f);
    }

    #[test]
    fn deform_zero_halfwidth_touches_region_only() {
        let f = field();
        let g = f.deform(
            &[FieldRegion {
                path_lo: 4,
                path_hi: 4,
                sample_lo: 4,
                sample_hi: 4,
            }],
            5.0,
            0.0,
        );
        for p in 0..20 {
            for s in 0..30 {
                if (p, s) == (4, 4) {
                    assert_relative_eq!(g.node(p, s), 5.0);
                } else {
                    assert_eq!(g.node(p, s).to_bits(), f.node(p, s).to_bits());
                }
            }
        }
    }

    #[test]
    fn blend_gradient_bounded_by_raised_cosine_slope() {
        let f = field();
        let target = 5.0;
        let half = 3.0;
        let g = f.deform(
            &[FieldRegion {
                path_lo: 10,
                path_hi: 10,
                sample_lo: 10,
                sample_hi: 20,
            }],
            target,
            half,
        );
        let bound = (target - 1.0) / half * std::f64::consts::FRAC_PI_2 + 1e-9;
        // Finite-difference gradient of the interpolated field across the
        // blend zone, sampled finely along the path axis.
        let h = 0.01;
        for s in [10.0, 15.0, 20.0] {
            let mut x = 5.0;
            while x < 15.0 - h {
                let a = g.tilt_at(x, s).unwrap();
                let b = g.tilt_at(x + h, s).unwrap();
                let slope = (b - a).abs() / h;
                assert!(
                    slope <= bound * 1.3,
                    "slope {} exceeds bound {} at ({}, {})",
                    slope,
                    bound,
                    x,
                    s
                );
                x += h;
            }
        }
    }

    #[test]
    fn field_is_c1_at_nodes() {
        // One-sided slopes of the interpolant agree at interior nodes.
        let mut f = field();
        f.tilt[8 * 30 + 9] = 3.0;
        f.tilt[8 * 30 + 10] = 4.5;
        let h = 1e-6;
        for s in [9.0, 10.0] {
            let left = (f.tilt_at(8.0, s).unwrap() - f.tilt_at(8.0, s - h).unwrap()) / h;
            let right = (f.tilt_at(8.0, s + h).unwrap() - f.tilt_at(8.0, s).unwrap()) / h;
            assert_relative_eq!(left, right, epsilon = 1e-4);
        }
    }

    #[test]
    fn csv_dump_shape() {
        let f = OrientationField::constant(2, 3, 1.0, 0.0, 0.5, 15.0);
        let csv = f.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 6);
        assert_eq!(lines[0], "path_index,sample_index,tilt_deg");
        assert_eq!(lines[1], "0,0,1.000000");
    }
}
