//! Parametric surface evaluation, local machining frames and plane
//! intersection curves.

use nalgebra::{Point3, Vector3};

use crate::error::GeomError;

/// Point plus first and second partial derivatives at a surface parameter.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceEval {
    pub point: Point3<f64>,
    pub du: Vector3<f64>,
    pub dv: Vector3<f64>,
    pub duu: Vector3<f64>,
    pub duv: Vector3<f64>,
    pub dvv: Vector3<f64>,
}

/// Local machining frame at a contact point: feed, outward normal and
/// cross-feed tangent t = f x n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub f: Vector3<f64>,
    pub n: Vector3<f64>,
    pub t: Vector3<f64>,
}

/// An (infinite) plane given by a point and a unit normal.
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl Plane {
    pub fn new(point: Point3<f64>, normal: Vector3<f64>) -> Self {
        Plane {
            point,
            normal: normal.normalize(),
        }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

/// One connected branch of a plane/surface intersection, ordered along the
/// curve with endpoints on the domain boundary.
#[derive(Debug, Clone)]
pub struct PlaneCurve {
    pub plane: Plane,
    /// (u, v) parameters and 3D points, ordered along the curve.
    pub samples: Vec<((f64, f64), Point3<f64>)>,
    /// Set when the plane grazes the surface tangentially somewhere along
    /// the branch; samples are still usable but spacing may be uneven.
    pub degenerate: bool,
}

impl PlaneCurve {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Polyline length of the branch in mm.
    pub fn length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).norm())
            .sum()
    }
}

/// The CAD model: either the analytic saddle z = (x/a)(y/b)c over
/// [-a,a]x[-b,b] (parameters u,v in [-1,1]) or a tensor-product Bezier
/// patch over [0,1]^2.
#[derive(Debug, Clone)]
pub enum ParametricSurface {
    AnalyticSaddle { a: f64, b: f64, c: f64 },
    /// Rectangular control net, `net[i][j]` with i along u (degree = rows-1)
    /// and j along v (degree = cols-1).
    PolynomialPatch { net: Vec<Vec<Point3<f64>>> },
}

impl ParametricSurface {
    pub fn saddle(a: f64, b: f64, c: f64) -> Self {
        assert!(a > 0.0 && b > 0.0, "saddle half-extents must be positive");
        ParametricSurface::AnalyticSaddle { a, b, c }
    }

    pub fn patch(net: Vec<Vec<Point3<f64>>>) -> Self {
        assert!(net.len() >= 2, "patch needs at least 2 rows");
        let cols = net[0].len();
        assert!(cols >= 2, "patch needs at least 2 columns");
        assert!(
            net.iter().all(|r| r.len() == cols),
            "patch control net must be rectangular"
        );
        ParametricSurface::PolynomialPatch { net }
    }

    /// Flat z=0 patch spanning [0,w]x[0,h], for tests and flat jobs.
    pub fn flat(w: f64, h: f64) -> Self {
        Self::patch(vec![
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, h, 0.0)],
            vec![Point3::new(w, 0.0, 0.0), Point3::new(w, h, 0.0)],
        ])
    }

    /// Parameter domain (u_min, u_max, v_min, v_max).
    pub fn domain(&self) -> (f64, f64, f64, f64) {
        match self {
            ParametricSurface::AnalyticSaddle { .. } => (-1.0, 1.0, -1.0, 1.0),
            ParametricSurface::PolynomialPatch { .. } => (0.0, 1.0, 0.0, 1.0),
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let (u0, u1, v0, v1) = self.domain();
        let eps = 1e-12;
        u >= u0 - eps && u <= u1 + eps && v >= v0 - eps && v <= v1 + eps
    }

    /// Point and partial derivatives at (u, v).
    pub fn evaluate(&self, u: f64, v: f64) -> Result<SurfaceEval, GeomError> {
        if !self.contains(u, v) {
            return Err(GeomError::OutOfDomain { u, v });
        }
        Ok(self.evaluate_unchecked(u, v))
    }

    /// Same as `evaluate` but extrapolates outside the domain (the marching
    /// intersector needs a short overshoot before clipping to the boundary).
    pub fn evaluate_unchecked(&self, u: f64, v: f64) -> SurfaceEval {
        match self {
            ParametricSurface::AnalyticSaddle { a, b, c } => SurfaceEval {
                point: Point3::new(a * u, b * v, c * u * v),
                du: Vector3::new(*a, 0.0, c * v),
                dv: Vector3::new(0.0, *b, c * u),
                duu: Vector3::zeros(),
                duv: Vector3::new(0.0, 0.0, *c),
                dvv: Vector3::zeros(),
            },
            ParametricSurface::PolynomialPatch { net } => eval_bezier(net, u, v),
        }
    }

    /// Unit outward normal; outward is fixed so the normal has positive z
    /// at the domain center.
    pub fn normal(&self, u: f64, v: f64) -> Result<Vector3<f64>, GeomError> {
        let e = self.evaluate(u, v)?;
        let cross = e.du.cross(&e.dv);
        let norm = cross.norm();
        if norm < 1e-12 {
            return Err(GeomError::SingularGeometry { u, v });
        }
        Ok(cross * (self.orientation_sign() / norm))
    }

    fn orientation_sign(&self) -> f64 {
        let (u0, u1, v0, v1) = self.domain();
        let e = self.evaluate_unchecked(0.5 * (u0 + u1), 0.5 * (v0 + v1));
        if e.du.cross(&e.dv).z >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Machining frame: f is the tangential projection of `feed_dir`,
    /// n the outward normal, t = f x n.
    pub fn local_frame(
        &self,
        u: f64,
        v: f64,
        feed_dir: &Vector3<f64>,
    ) -> Result<LocalFrame, GeomError> {
        let n = self.normal(u, v)?;
        let tangential = feed_dir - n * feed_dir.dot(&n);
        let norm = tangential.norm();
        if norm < 1e-9 * feed_dir.norm().max(1e-30) {
            return Err(GeomError::FrameUndefined { u, v });
        }
        let f = tangential / norm;
        Ok(LocalFrame { f, n, t: f.cross(&n) })
    }

    /// Signed normal curvature along a tangent direction; negative means
    /// concave toward the tool (center of curvature on the +n side).
    pub fn normal_curvature(
        &self,
        u: f64,
        v: f64,
        tangent_dir: &Vector3<f64>,
    ) -> Result<f64, GeomError> {
        let e = self.evaluate(u, v)?;
        let n = self.normal(u, v)?;
        // Components of the direction in the (du, dv) tangent basis.
        let ef = e.du.dot(&e.dv);
        let ee = e.du.norm_squared();
        let gg = e.dv.norm_squared();
        let det = ee * gg - ef * ef;
        if det.abs() < 1e-18 {
            return Err(GeomError::SingularGeometry { u, v });
        }
        let bu = tangent_dir.dot(&e.du);
        let bv = tangent_dir.dot(&e.dv);
        let a = (gg * bu - ef * bv) / det;
        let b = (ee * bv - ef * bu) / det;
        let i1 = ee * a * a + 2.0 * ef * a * b + gg * b * b;
        if i1 < 1e-18 {
            return Err(GeomError::SingularGeometry { u, v });
        }
        let l = e.duu.dot(&n);
        let m = e.duv.dot(&n);
        let nn = e.dvv.dot(&n);
        let i2 = l * a * a + 2.0 * m * a * b + nn * b * b;
        // Convex (bending away from the tool) is positive.
        Ok(-i2 / i1)
    }

    /// Newton-project a parameter point onto the plane/surface intersection.
    /// Used when resampling drive curves; returns None on degenerate
    /// geometry.
    pub fn project_onto_plane(&self, plane: &Plane, u: f64, v: f64) -> Option<(f64, f64)> {
        let m = Marcher {
            surface: self,
            plane,
            chord_tol: 1.0,
            domain: self.domain(),
        };
        m.project(u, v)
    }

    /// All connected branches of the plane/surface intersection, each an
    /// ordered polyline with chordal deviation <= `chord_tol` and endpoints
    /// on the domain boundary.
    pub fn plane_intersection(
        &self,
        plane: &Plane,
        chord_tol: f64,
    ) -> Result<Vec<PlaneCurve>, GeomError> {
        assert!(chord_tol > 0.0);
        march_plane_intersection(self, plane, chord_tol)
    }
}

fn eval_bezier(net: &[Vec<Point3<f64>>], u: f64, v: f64) -> SurfaceEval {
    let p = net.len() - 1;
    let q = net[0].len() - 1;
    let bu = bernstein_all(p, u);
    let bv = bernstein_all(q, v);
    let mut point = Vector3::zeros();
    let mut du = Vector3::zeros();
    let mut dv = Vector3::zeros();
    let mut duu = Vector3::zeros();
    let mut duv = Vector3::zeros();
    let mut dvv = Vector3::zeros();
    for (i, row) in net.iter().enumerate() {
        for (j, cp) in row.iter().enumerate() {
            let c = cp.coords;
            point += c * (bu.0[i] * bv.0[j]);
            du += c * (bu.1[i] * bv.0[j]);
            dv += c * (bu.0[i] * bv.1[j]);
            duu += c * (bu.2[i] * bv.0[j]);
            duv += c * (bu.1[i] * bv.1[j]);
            dvv += c * (bu.0[i] * bv.2[j]);
        }
    }
    SurfaceEval {
        point: Point3::from(point),
        du,
        dv,
        duu,
        duv,
        dvv,
    }
}

/// Bernstein basis values and first/second derivatives of degree `n` at `t`.
fn bernstein_all(n: usize, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let b = bernstein(n, t);
    let d1 = if n >= 1 {
        let lo = bernstein(n - 1, t);
        (0..=n)
            .map(|i| {
                let a = if i >= 1 { lo[i - 1] } else { 0.0 };
                let c = if i <= n - 1 { lo[i] } else { 0.0 };
                n as f64 * (a - c)
            })
            .collect()
    } else {
        vec![0.0]
    };
    let d2 = if n >= 2 {
        let lo = bernstein(n - 2, t);
        let coef = (n * (n - 1)) as f64;
        (0..=n)
            .map(|i| {
                let mut s = 0.0;
                if i >= 2 {
                    s += lo[i - 2];
                }
                if i >= 1 && i - 1 <= n - 2 {
                    s -= 2.0 * lo[i - 1];
                }
                if i <= n - 2 {
                    s += lo[i];
                }
                coef * s
            })
            .collect()
    } else {
        vec![0.0; n + 1]
    };
    (b, d1, d2)
}

fn bernstein(n: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for j in 1..=n {
        let mut saved = 0.0;
        for k in 0..j {
            let tmp = b[k];
            b[k] = saved + (1.0 - t) * tmp;
            saved = t * tmp;
        }
        b[j] = saved;
    }
    b
}

// ---------------------------------------------------------------------------
// Plane intersection marching
// ---------------------------------------------------------------------------

const BOUNDARY_SCAN_STEPS: usize = 200;
const PLANE_RESIDUAL_TOL: f64 = 1e-10; // mm

struct Marcher<'a> {
    surface: &'a ParametricSurface,
    plane: &'a Plane,
    chord_tol: f64,
    domain: (f64, f64, f64, f64),
}

impl<'a> Marcher<'a> {
    fn g(&self, u: f64, v: f64) -> f64 {
        self.plane
            .signed_distance(&self.surface.evaluate_unchecked(u, v).point)
    }

    /// Newton-project (u, v) onto the plane along the in-surface gradient of
    /// the signed distance. Returns None when the gradient degenerates
    /// (tangential grazing).
    fn project(&self, mut u: f64, mut v: f64) -> Option<(f64, f64)> {
        for _ in 0..50 {
            let e = self.surface.evaluate_unchecked(u, v);
            let g = self.plane.signed_distance(&e.point);
            if g.abs() <= PLANE_RESIDUAL_TOL {
                return Some((u, v));
            }
            let gu = e.du.dot(&self.plane.normal);
            let gv = e.dv.dot(&self.plane.normal);
            let grad2 = gu * gu + gv * gv;
            if grad2 < 1e-16 {
                return None;
            }
            u -= g * gu / grad2;
            v -= g * gv / grad2;
        }
        None
    }

    /// Unit parameter-space tangent of the intersection curve at (u, v).
    fn tangent(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let e = self.surface.evaluate_unchecked(u, v);
        let gu = e.du.dot(&self.plane.normal);
        let gv = e.dv.dot(&self.plane.normal);
        // Rotate the parameter-space gradient of g by 90 degrees; this is
        // tangent to the level set g = 0.
        let (tu, tv) = (-gv, gu);
        let n = (tu * tu + tv * tv).sqrt();
        if n < 1e-14 {
            return None;
        }
        Some((tu / n, tv / n))
    }

    fn in_domain(&self, u: f64, v: f64) -> bool {
        let (u0, u1, v0, v1) = self.domain;
        u >= u0 && u <= u1 && v >= v0 && v <= v1
    }
}

fn march_plane_intersection(
    surface: &ParametricSurface,
    plane: &Plane,
    chord_tol: f64,
) -> Result<Vec<PlaneCurve>, GeomError> {
    let m = Marcher {
        surface,
        plane,
        chord_tol,
        domain: surface.domain(),
    };
    let mut seeds = boundary_seeds(&m);
    let mut curves = Vec::new();
    while let Some(seed) = seeds.pop() {
        if let Some(curve) = march_from(&m, seed, &mut seeds) {
            if curve.samples.len() >= 2 {
                curves.push(curve);
            }
        }
    }
    // Deterministic order: by first sample position.
    curves.sort_by(|a, b| {
        let pa = a.samples[0].1;
        let pb = b.samples[0].1;
        (pa.x, pa.y, pa.z)
            .partial_cmp(&(pb.x, pb.y, pb.z))
            .unwrap()
    });
    Ok(curves)
}

/// Scan the four domain edges for sign changes of the plane distance and
/// bisect each bracketing interval down to a boundary intersection point.
fn boundary_seeds(m: &Marcher) -> Vec<(f64, f64)> {
    let (u0, u1, v0, v1) = m.domain;
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    let edges: [(&dyn Fn(f64) -> (f64, f64), f64, f64); 4] = [
        (&|t| (t, v0), u0, u1),
        (&|t| (t, v1), u0, u1),
        (&|t| (u0, t), v0, v1),
        (&|t| (u1, t), v0, v1),
    ];
    for (map, t0, t1) in edges {
        let step = (t1 - t0) / BOUNDARY_SCAN_STEPS as f64;
        let mut prev_t = t0;
        let (pu, pv) = map(prev_t);
        let mut prev_g = m.g(pu, pv);
        for i in 1..=BOUNDARY_SCAN_STEPS {
            let t = t0 + step * i as f64;
            let (cu, cv) = map(t);
            let g = m.g(cu, cv);
            if prev_g == 0.0 {
                seeds.push(map(prev_t));
            } else if prev_g * g < 0.0 {
                // Bisect on the edge.
                let (mut lo, mut hi) = (prev_t, t);
                let mut glo = prev_g;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (mu, mv) = map(mid);
                    let gm = m.g(mu, mv);
                    if glo * gm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        glo = gm;
                    }
                }
                seeds.push(map(0.5 * (lo + hi)));
            }
            prev_t = t;
            prev_g = g;
        }
        if prev_g == 0.0 {
            seeds.push(map(prev_t));
        }
    }
    dedupe_seeds(m, seeds)
}

fn dedupe_seeds(m: &Marcher, seeds: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let (u0, u1, v0, v1) = m.domain;
    let tol = 1e-6 * ((u1 - u0) + (v1 - v0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for s in seeds {
        if !out
            .iter()
            .any(|o| (o.0 - s.0).abs() < tol && (o.1 - s.1).abs() < tol)
        {
            out.push(s);
        }
    }
    out
}

/// March one branch starting at a boundary seed; consumes the matching
/// far-end seed from `remaining`.
fn march_from(m: &Marcher, seed: (f64, f64), remaining: &mut Vec<(f64, f64)>) -> Option<PlaneCurve> {
    let (u0, u1, v0, v1) = m.domain;
    let scale = ((u1 - u0).powi(2) + (v1 - v0).powi(2)).sqrt();
    let mut degenerate = false;

    let start = match m.project(seed.0, seed.1) {
        Some(p) => p,
        None => {
            return Some(PlaneCurve {
                plane: *m.plane,
                samples: vec![],
                degenerate: true,
            })
        }
    };
    let mut samples: Vec<(f64, f64)> = vec![start];
    // Initial direction: into the domain.
    let (mut tu, mut tv) = m.tangent(start.0, start.1)?;
    {
        // Point inward: flip if a small step leaves the domain.
        let h = 1e-6 * scale;
        if !m.in_domain(start.0 + tu * h, start.1 + tv * h) {
            tu = -tu;
            tv = -tv;
        }
    }

    let mut h = scale / 100.0;
    let h_min = scale * 1e-7;
    let mut cur = start;
    for _ in 0..100_000 {
        let step_result = loop {
            let pred = (cur.0 + tu * h, cur.1 + tv * h);
            let corrected = match m.project(pred.0, pred.1) {
                Some(c) => c,
                None => {
                    degenerate = true;
                    break None;
                }
            };
            // Chordal deviation check via the corrected midpoint.
            let midpred = (cur.0 + tu * 0.5 * h, cur.1 + tv * 0.5 * h);
            if let Some(mid) = m.project(midpred.0, midpred.1) {
                let p0 = m.surface.evaluate_unchecked(cur.0, cur.1).point;
                let p1 = m.surface.evaluate_unchecked(corrected.0, corrected.1).point;
                let pm = m.surface.evaluate_unchecked(mid.0, mid.1).point;
                let dev = point_segment_distance(&pm, &p0, &p1);
                if dev > m.chord_tol && h > h_min {
                    h *= 0.5;
                    continue;
                }
                if dev < 0.1 * m.chord_tol {
                    h = (h * 1.5).min(scale / 20.0);
                }
            }
            break Some(corrected);
        };
        let next = match step_result {
            Some(n) => n,
            None => break,
        };

        if !m.in_domain(next.0, next.1) {
            // Clip the exit: bisect along the step for the boundary crossing.
            let exit = clip_to_boundary(m, cur, (tu, tv), h);
            if let Some(e) = exit {
                if dist2(e, *samples.last().unwrap()) > 1e-24 {
                    samples.push(e);
                }
                // Consume the seed this endpoint corresponds to.
                consume_nearest(remaining, e, scale * 1e-3);
            }
            break;
        }

        samples.push(next);
        // Keep tangent continuous along the branch.
        if let Some((nu, nv)) = m.tangent(next.0, next.1) {
            if nu * tu + nv * tv < 0.0 {
                tu = -nu;
                tv = -nv;
            } else {
                tu = nu;
                tv = nv;
            }
        } else {
            degenerate = true;
            break;
        }
        cur = next;
    }

    let samples = samples
        .into_iter()
        .map(|(u, v)| ((u, v), m.surface.evaluate_unchecked(u, v).point))
        .collect();
    Some(PlaneCurve {
        plane: *m.plane,
        samples,
        degenerate,
    })
}

/// Find where the curve leaves the domain between `cur` and `cur + h*t`,
/// then slide along the boundary edge to the exact g = 0 point.
fn clip_to_boundary(m: &Marcher, cur: (f64, f64), t: (f64, f64), h: f64) -> Option<(f64, f64)> {
    let (u0, u1, v0, v1) = m.domain;
    let mut lo = 0.0;
    let mut hi = h;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let p = m.project(cur.0 + t.0 * mid, cur.1 + t.1 * mid);
        match p {
            Some(p) if m.in_domain(p.0, p.1) => lo = mid,
            _ => hi = mid,
        }
    }
    let p = m.project(cur.0 + t.0 * lo, cur.1 + t.1 * lo)?;
    // Snap to the nearest edge and refine g = 0 along it.
    let du = (p.0 - u0).min(u1 - p.0);
    let dv = (p.1 - v0).min(v1 - p.1);
    if du <= dv {
        let ue = if p.0 - u0 < u1 - p.0 { u0 } else { u1 };
        refine_on_edge(m, |t| (ue, t), p.1, v0, v1)
    } else {
        let ve = if p.1 - v0 < v1 - p.1 { v0 } else { v1 };
        refine_on_edge(m, |t| (t, ve), p.0, u0, u1)
    }
}

fn refine_on_edge(
    m: &Marcher,
    map: impl Fn(f64) -> (f64, f64),
    guess: f64,
    lo: f64,
    hi: f64,
) -> Option<(f64, f64)> {
    // Secant/Newton on g along the edge, starting from the interior guess.
    let mut t = guess.clamp(lo, hi);
    for _ in 0..60 {
        let (u, v) = map(t);
        let g = m.g(u, v);
        if g.abs() <= PLANE_RESIDUAL_TOL {
            return Some((u, v));
        }
        let dt = 1e-7 * (hi - lo).abs().max(1e-7);
        let (u2, v2) = map((t + dt).clamp(lo, hi));
        let dg = (m.g(u2, v2) - g) / dt;
        if dg.abs() < 1e-16 {
            return Some((u, v));
        }
        t = (t - g / dg).clamp(lo, hi);
    }
    let (u, v) = map(t);
    Some((u, v))
}

fn consume_nearest(seeds: &mut Vec<(f64, f64)>, p: (f64, f64), tol: f64) {
    if let Some((idx, d)) = seeds
        .iter()
        .enumerate()
        .map(|(i, s)| (i, dist2(*s, p).sqrt()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    {
        if d < tol.max(1e-4) {
            seeds.remove(idx);
        }
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-30 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
