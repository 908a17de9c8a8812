//! TOML experiment descriptions and their translation into library types.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capillary::CapillaryConfig;
use crate::error::Result;
use crate::metric::{AmbientMetric, Mat3, PerturbationTerm, ScalarField, Vec3};
use crate::profile::{PoleType, ProfileCurve, ProfileShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyAppendix,
    ConeCompare,
    CurveBound,
    Stability,
    Foliate,
    Asymptotics,
    IdentitySuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::VerifyAppendix,
        ExperimentKind::ConeCompare,
        ExperimentKind::CurveBound,
        ExperimentKind::Stability,
        ExperimentKind::Foliate,
        ExperimentKind::Asymptotics,
        ExperimentKind::IdentitySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyAppendix => "verify-appendix",
            ExperimentKind::ConeCompare => "cone-compare",
            ExperimentKind::CurveBound => "curve-bound",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Foliate => "foliate",
            ExperimentKind::Asymptotics => "asymptotics",
            ExperimentKind::IdentitySuite => "identity-suite",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::VerifyAppendix => {
                "closed-form cone mean curvature and dihedral angle against finite differences"
            }
            ExperimentKind::ConeCompare => "image-cone comparison for the identity and sampled admissible apex metrics",
            ExperimentKind::CurveBound => "turning integral of level circles and random separating curves",
            ExperimentKind::Stability => "Jacobi eigenproblem, disk solver convergence and capillary energy descent",
            ExperimentKind::Foliate => "CMC capillary leaves near a pole, lambda identity and the coefficient Psi",
            ExperimentKind::Asymptotics => "fitted orders of the small-parameter expansions near the pole",
            ExperimentKind::IdentitySuite => "pointwise boundary decompositions and the two curvature rewrites",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scalar coefficient of one perturbation tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(f64),
    Linear {
        gradient: [f64; 3],
        #[serde(default)]
        offset: f64,
    },
    Quadratic {
        hessian: [[f64; 3]; 3],
    },
    Gaussian {
        center: [f64; 3],
        width: f64,
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub tensor: [[f64; 3]; 3],
    pub field: FieldSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Euclidean,
    Hyperbolic,
    Constant {
        g0: [[f64; 3]; 3],
    },
    Perturbed {
        #[serde(default)]
        base: Option<[[f64; 3]; 3]>,
        terms: Vec<TermSpec>,
    },
}

fn mat(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

impl MetricSpec {
    pub fn build(&self) -> Result<AmbientMetric> {
        match self {
            MetricSpec::Euclidean => Ok(AmbientMetric::Euclidean),
            MetricSpec::Hyperbolic => Ok(AmbientMetric::Hyperbolic),
            MetricSpec::Constant { g0 } => AmbientMetric::constant(mat(g0)),
            MetricSpec::Perturbed { base, terms } => {
                let base = base.as_ref().map(mat).unwrap_or_else(Mat3::identity);
                let terms = terms
                    .iter()
                    .map(|t| PerturbationTerm {
                        tensor: mat(&t.tensor),
                        field: match &t.field {
                            FieldSpec::Constant(c) => ScalarField::Constant(*c),
                            FieldSpec::Linear { gradient, offset } => ScalarField::Linear {
                                gradient: Vec3::from(*gradient),
                                offset: *offset,
                            },
                            FieldSpec::Quadratic { hessian } => ScalarField::Quadratic { hessian: mat(hessian) },
                            FieldSpec::Gaussian {
                                center,
                                width,
                                amplitude,
                            } => ScalarField::Gaussian {
                                center: Vec3::from(*center),
                                width: *width,
                                amplitude: *amplitude,
                            },
                        },
                    })
                    .collect();
                AmbientMetric::perturbed(base, terms)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub shape: ProfileShape,
    pub pole: PoleType,
    pub rho_max: f64,
    #[serde(default)]
    pub top: Option<f64>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<ProfileCurve> {
        let p = ProfileCurve::new(self.shape.clone(), self.pole, self.rho_max)?;
        Ok(match self.top {
            Some(top) => p.with_top(top),
            None => p,
        })
    }
}

/// One `[[experiment]]` table. Fields an experiment does not use are
/// ignored by it; unknown keys are rejected at parse time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Output stem; defaults to the kind, suffixed by position when repeated.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default)]
    pub profile: Option<ProfileSpec>,
    /// `[n_cheb, n_theta]` for foliations, `[n_r, n_theta]` for disk grids.
    #[serde(default)]
    pub grid: Option<[usize; 2]>,
    #[serde(default)]
    pub t: Option<Vec<f64>>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Slab foliation starting level; selects the slab regime.
    #[serde(default)]
    pub slab_level: Option<f64>,
    /// Adjust the metric so that `H_0 = 0` before foliating a spherical pole.
    #[serde(default)]
    pub tune_h0: bool,
    /// Cone slope for `cone-compare`.
    #[serde(default)]
    pub abar: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            name: None,
            metric: MetricSpec::Euclidean,
            profile: None,
            grid: None,
            t: None,
            samples: None,
            seed: None,
            slab_level: None,
            tune_h0: false,
            abar: None,
        }
    }

    pub fn capillary(&self, default_profile: ProfileCurve) -> Result<CapillaryConfig> {
        let body = match &self.profile {
            Some(p) => p.build()?,
            None => default_profile,
        };
        Ok(CapillaryConfig::euclidean(body).with_ambient(self.metric.build()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: cannot read: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl RunConfig {
    pub fn parse(text: &str, path: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
            ConfigError::Parse {
                path: path.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        if cfg.experiments.is_empty() {
            return Err(ConfigError::Invalid {
                path: path.to_string(),
                message: "no [[experiment]] entries".into(),
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> std::result::Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::parse(&text, &shown)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_entry() {
        let text = r#"
seed = 11
[[experiment]]
kind = "foliate"
grid = [15, 16]
t = [0.1, 0.05]
profile = { shape = "cone", slope = 0.8, pole = "conical", rho_max = 2.0 }
metric = { kind = "perturbed", terms = [{ tensor = [[0.3, 0.1, 0.0], [0.1, -0.2, 0.05], [0.0, 0.05, 0.4]], field = { linear = { gradient = [0.2, -0.1, 1.0] } } }] }
"#;
        let cfg = RunConfig::parse(text, "x.toml").unwrap();
        assert_eq!(cfg.seed, Some(11));
        let e = &cfg.experiments[0];
        assert_eq!(e.kind, ExperimentKind::Foliate);
        assert!(e.metric.build().is_ok());
        assert_eq!(e.profile.as_ref().unwrap().build().unwrap().pole, PoleType::Conical);
    }

    #[test]
    fn errors_point_at_the_offending_line() {
        let text = "seed = 1\n[[experiment]]\nkind = \"foliate\"\ngird = [1, 2]\n";
        match RunConfig::parse(text, "bad.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = "[[experiment]]\nkind = \"nope\"\n";
        match RunConfig::parse(text, "bad.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
