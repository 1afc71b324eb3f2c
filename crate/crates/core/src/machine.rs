//! RRTTT A/C table-tilting machine model: forward/inverse kinematic
//! transformation, branch selection, singularity handling and relative
//! path length under joint-space linear interpolation.

use nalgebra::{Isometry3, Point3, Rotation3, Vector3};

use crate::error::KinError;

/// Machine description: axis ranges, velocity limits and kinematic chain
/// offsets. The part sits on the C table which sits on the A cradle; the
/// tool carries the three translations and points along machine -Z onto
/// the part (axis direction +Z).
#[derive(Debug, Clone)]
pub struct MachineModel {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    /// A axis range in degrees.
    pub a_range_deg: (f64, f64),
    /// Translational velocity limits, mm/min.
    pub v_xyz: [f64; 3],
    /// Rotary velocity limits, rpm.
    pub v_a_rpm: f64,
    pub v_c_rpm: f64,
    /// C-table origin in the A-cradle frame.
    pub o_ca: Vector3<f64>,
    /// A-pivot origin in the machine frame.
    pub o_am: Vector3<f64>,
    /// Part frame -> C-table frame.
    pub part_setup: Isometry3<f64>,
    /// Tool axis closer than this to the machine vertical is treated as
    /// singular (C held at its previous value). Degrees.
    pub singularity_threshold_deg: f64,
}

impl Default for MachineModel {
    fn default() -> Self {
        MachineModel {
            x_range: (-350.0, 350.0),
            y_range: (-300.0, 300.0),
            z_range: (-250.0, 250.0),
            a_range_deg: (-30.0, 120.0),
            v_xyz: [30_000.0, 30_000.0, 30_000.0],
            v_a_rpm: 15.0,
            v_c_rpm: 20.0,
            o_ca: Vector3::zeros(),
            o_am: Vector3::zeros(),
            part_setup: Isometry3::identity(),
            singularity_threshold_deg: 0.1,
        }
    }
}

/// Joint coordinates. C is continuous (unwound), not reduced modulo 360.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub a_deg: f64,
    pub c_deg: f64,
}

impl JointPose {
    pub const ZERO: JointPose = JointPose {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        a_deg: 0.0,
        c_deg: 0.0,
    };

    pub fn lerp(&self, other: &JointPose, s: f64) -> JointPose {
        JointPose {
            x: self.x + s * (other.x - self.x),
            y: self.y + s * (other.y - self.y),
            z: self.z + s * (other.z - self.z),
            a_deg: self.a_deg + s * (other.a_deg - self.a_deg),
            c_deg: self.c_deg + s * (other.c_deg - self.c_deg),
        }
    }
}

/// Controlled tool point and tool axis in the part frame.
#[derive(Debug, Clone, Copy)]
pub struct PartPose {
    pub p: Point3<f64>,
    pub u: Vector3<f64>,
}

/// Inverse solve result.
#[derive(Debug, Clone, Copy)]
pub struct IkSolution {
    pub joints: JointPose,
    /// Set when the pose fell inside the singularity cone and the held-C
    /// policy was applied.
    pub singular: bool,
}

impl MachineModel {
    fn rot_a(&self, a_deg: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::x_axis(), a_deg.to_radians())
    }

    fn rot_c(&self, c_deg: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), c_deg.to_radians())
    }

    pub fn a_in_range(&self, a_deg: f64) -> bool {
        a_deg >= self.a_range_deg.0 - 1e-9 && a_deg <= self.a_range_deg.1 + 1e-9
    }

    /// Forward kinematics: part-frame pose realized by joint values.
    pub fn forward(&self, q: &JointPose) -> PartPose {
        let ra = self.rot_a(q.a_deg);
        let rc = self.rot_c(q.c_deg);
        let tool_machine = Point3::new(q.x, q.y, q.z);
        // Invert the chain: machine -> cradle -> table -> part.
        let p_cradle = ra.inverse() * (tool_machine - self.o_am);
        let p_table = rc.inverse() * (p_cradle - self.o_ca);
        let p = self.part_setup.inverse_transform_point(&p_table);
        let u_table = rc.inverse() * (ra.inverse() * Vector3::z());
        let u = self
            .part_setup
            .rotation
            .inverse_transform_vector(&u_table);
        PartPose { p, u }
    }

    /// Inverse kinematic transformation. Picks the orientation branch via
    /// `select_branch`, applies the held-C singularity policy near the
    /// machine vertical, and unwinds C to the revolution nearest `prev`.
    pub fn inverse(
        &self,
        pose: &PartPose,
        prev: Option<&JointPose>,
    ) -> Result<IkSolution, KinError> {
        let u = self.part_setup.rotation.transform_vector(&pose.u);
        let tilt_from_z = u.xy().norm().atan2(u.z).to_degrees();

        let (a_deg, c_deg, singular) =
            if tilt_from_z.abs() < self.singularity_threshold_deg && prev.is_some() {
                // Held-C policy: keep the previous C, absorb the residual
                // tilt into a signed A.
                let prev = prev.unwrap();
                let w = self.rot_c(prev.c_deg) * u;
                let a = w.y.atan2(w.z).to_degrees();
                (a, prev.c_deg, true)
            } else {
                let cands = orientation_candidates(&u);
                let chosen = self.select_branch(&cands, prev)?;
                (chosen.0, chosen.1, false)
            };

        let c_deg = match prev {
            Some(p) => unwind(c_deg, p.c_deg),
            None => c_deg,
        };

        // Translations from the chain with the chosen rotaries.
        let p_table = self.part_setup.transform_point(&pose.p);
        let p_cradle = (self.rot_c(c_deg) * p_table) + self.o_ca;
        let tool = (self.rot_a(a_deg) * p_cradle) + self.o_am;

        Ok(IkSolution {
            joints: JointPose {
                x: tool.x,
                y: tool.y,
                z: tool.z,
                a_deg,
                c_deg,
            },
            singular,
        })
    }

    /// Among in-range orientation candidates, minimize the larger of the two
    /// rotary moves from `prev` (C compared after unwinding). Without a
    /// previous pose, minimize |A| with ties broken toward positive A.
    pub fn select_branch(
        &self,
        cands: &[(f64, f64); 2],
        prev: Option<&JointPose>,
    ) -> Result<(f64, f64), KinError> {
        let in_range: Vec<(f64, f64)> = cands
            .iter()
            .copied()
            .filter(|(a, _)| self.a_in_range(*a))
            .collect();
        if in_range.is_empty() {
            return Err(KinError::UnreachablePose);
        }
        let chosen = match prev {
            Some(p) => in_range
                .iter()
                .copied()
                .map(|(a, c)| {
                    let cu = unwind(c, p.c_deg);
                    let cost = (a - p.a_deg).abs().max((cu - p.c_deg).abs());
                    ((a, cu), cost)
                })
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(cmp_pos_a(x.0 .0, y.0 .0)))
                .unwrap()
                .0,
            None => in_range
                .iter()
                .copied()
                .min_by(|x, y| {
                    x.0.abs()
                        .partial_cmp(&y.0.abs())
                        .unwrap()
                        .then(cmp_pos_a(x.0, y.0))
                })
                .unwrap(),
        };
        Ok(chosen)
    }

    /// Length of the part-relative trajectory of the controlled tool point
    /// when the machine interpolates linearly in joint space from q0 to q1,
    /// approximated by `n_sub` chords.
    pub fn relative_path_length(&self, q0: &JointPose, q1: &JointPose, n_sub: usize) -> f64 {
        assert!(n_sub >= 1);
        let mut len = 0.0;
        let mut prev = self.forward(q0).p;
        for i in 1..=n_sub {
            let q = q0.lerp(q1, i as f64 / n_sub as f64);
            let p = self.forward(&q).p;
            len += (p - prev).norm();
            prev = p;
        }
        len
    }

    /// One Richardson extrapolation step over chord counts n and 2n; the
    /// chord-sum error is O(1/n^2).
    pub fn relative_path_length_refined(&self, q0: &JointPose, q1: &JointPose, n_sub: usize) -> f64 {
        let l1 = self.relative_path_length(q0, q1, n_sub);
        let l2 = self.relative_path_length(q0, q1, 2 * n_sub);
        l2 + (l2 - l1) / 3.0
    }
}

/// The two (A, C) orientation branches solving Rx(A) Rz(C) u = +Z:
/// (atan2(|uxy|, uz), atan2(ux, uy)) and its mirror (-A, C + 180).
pub fn orientation_candidates(u: &Vector3<f64>) -> [(f64, f64); 2] {
    let a = u.xy().norm().atan2(u.z).to_degrees();
    let c = u.x.atan2(u.y).to_degrees();
    [(a, c), (-a, c + 180.0)]
}

/// Shift `c` by whole revolutions to land within 180 degrees of `reference`.
pub fn unwind(c: f64, reference: f64) -> f64 {
    let k = ((reference - c) / 360.0).round();
    c + 360.0 * k
}

fn cmp_pos_a(a: f64, b: f64) -> std::cmp::Ordering {
    // Tie-break toward positive A.
    b.partial_cmp(&a).unwrap()
}
