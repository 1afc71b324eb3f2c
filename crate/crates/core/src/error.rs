use thiserror::Error;

/// Errors raised by the geometry and kinematics layers.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("parameter ({u}, {v}) outside surface domain")]
    OutOfDomain { u: f64, v: f64 },
    #[error("degenerate tangent plane at ({u}, {v})")]
    SingularGeometry { u: f64, v: f64 },
    #[error("feed direction parallel to surface normal at ({u}, {v})")]
    FrameUndefined { u: f64, v: f64 },
    #[error("tool axis parallel to surface normal with R > 0 (flat-bottom contact)")]
    AxisSingularity,
    #[error("field query ({path}, {sample}) outside grid {n_paths}x{n_samples}")]
    FieldOutOfGrid {
        path: f64,
        sample: f64,
        n_paths: usize,
        n_samples: usize,
    },
    #[error("stepover {stepover} too large for effective radii {r_left} / {r_right}: passes do not overlap")]
    NoOverlap {
        stepover: f64,
        r_left: f64,
        r_right: f64,
    },
    #[error("geometry error at path {path}, sample {sample}: {source}")]
    AtSample {
        path: usize,
        sample: usize,
        #[source]
        source: Box<GeomError>,
    },
}

#[derive(Debug, Error)]
pub enum KinError {
    #[error("pose unreachable: both orientation branches put A outside the axis range")]
    UnreachablePose,
    #[error("kinematic error at path {path}, sample {sample}: {source}")]
    AtSample {
        path: usize,
        sample: usize,
        #[source]
        source: Box<KinError>,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },
}
