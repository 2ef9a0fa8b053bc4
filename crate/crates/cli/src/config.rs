use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use ffg_core::contour::IsingContourModel;
use ffg_core::ffg::Budget;
use ffg_core::measure::{BaseMeasure, SpeciesMeasure};
use ffg_core::models::{
    GeneralizedWr, NonInteracting, Orientation, StepTable, Symbiotic, TaggedIntensity, ThinRods, TolerantWr,
    WidomRowlinson,
};
use ffg_core::parallel::ExecMode;
use ffg_core::{Location, ModelRef, Particle, ParticleConfiguration, Spin, Window};

use crate::CliError;

/// Model tag and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    WrContinuum { dim: usize, lambda_plus: f64, lambda_minus: f64, r: f64 },
    WrDiscrete { dim: usize, lambda_plus: f64, lambda_minus: f64, r: i64 },
    WrGeneralized {
        dim: usize,
        #[serde(default)]
        lattice: bool,
        lambda_plus: f64,
        lambda_minus: f64,
        /// Opposite-type interaction steps `(radius, value)`.
        h: Vec<(f64, f64)>,
        /// Interaction steps between every pair.
        #[serde(default)]
        j: Vec<(f64, f64)>,
    },
    ThinRods {
        lambda: f64,
        half_length: f64,
        #[serde(default = "uniform")]
        orientation: Orientation,
    },
    WrTolerant {
        dim: usize,
        #[serde(default)]
        lattice: bool,
        lambda_plus: f64,
        lambda_minus: f64,
        r: f64,
        k: usize,
    },
    Symbiotic { dim: usize, lambda_host: f64, lambda_parasite: f64, r: f64, j: f64 },
    NonInteracting { dim: usize, lambda: f64 },
    IsingContours { beta: f64, lo: [i64; 2], width: usize, height: usize },
}

fn uniform() -> Orientation {
    Orientation::Uniform
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn dimension(d: usize) -> Result<(), CliError> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(CliError::Config(format!("dim must be 1, 2 or 3, got {d}")))
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            ModelConfig::WrContinuum { dim, lambda_plus, lambda_minus, r } => {
                dimension(*dim)?;
                positive("lambda_plus", *lambda_plus)?;
                positive("lambda_minus", *lambda_minus)?;
                positive("r", *r)
            }
            ModelConfig::WrDiscrete { dim, lambda_plus, lambda_minus, r } => {
                dimension(*dim)?;
                positive("lambda_plus", *lambda_plus)?;
                positive("lambda_minus", *lambda_minus)?;
                positive("r", *r as f64)
            }
            ModelConfig::WrGeneralized { dim, lambda_plus, lambda_minus, h, j, .. } => {
                dimension(*dim)?;
                positive("lambda_plus", *lambda_plus)?;
                positive("lambda_minus", *lambda_minus)?;
                StepTable::new(h.clone()).map_err(|e| CliError::Config(format!("h: {e}")))?;
                StepTable::new(j.clone()).map_err(|e| CliError::Config(format!("j: {e}")))?;
                Ok(())
            }
            ModelConfig::ThinRods { lambda, half_length, orientation } => {
                positive("lambda", *lambda)?;
                positive("half_length", *half_length)?;
                if let Orientation::Discrete(atoms) = orientation {
                    let total: f64 = atoms.iter().map(|(_, w)| w).sum();
                    if atoms.is_empty() || (total - 1.0).abs() > 1e-9 || atoms.iter().any(|(_, w)| *w < 0.0) {
                        return Err(CliError::Config("orientation weights must be nonnegative and sum to 1".into()));
                    }
                }
                Ok(())
            }
            ModelConfig::WrTolerant { dim, lambda_plus, lambda_minus, r, k, lattice } => {
                dimension(*dim)?;
                positive("lambda_plus", *lambda_plus)?;
                positive("lambda_minus", *lambda_minus)?;
                positive("r", *r)?;
                if *lattice && r.fract() != 0.0 {
                    return Err(CliError::Config("lattice r must be an integer".into()));
                }
                if *k == 0 {
                    return Err(CliError::Config("k must be at least 1".into()));
                }
                Ok(())
            }
            ModelConfig::Symbiotic { dim, lambda_host, lambda_parasite, r, j } => {
                dimension(*dim)?;
                positive("lambda_host", *lambda_host)?;
                positive("lambda_parasite", *lambda_parasite)?;
                positive("r", *r)?;
                if j.is_finite() {
                    Ok(())
                } else {
                    Err(CliError::Config("j must be finite".into()))
                }
            }
            ModelConfig::NonInteracting { dim, lambda } => {
                dimension(*dim)?;
                positive("lambda", *lambda)
            }
            ModelConfig::IsingContours { beta, width, height, .. } => {
                positive("beta", *beta)?;
                if *width == 0 || *height == 0 || width * height > 16 {
                    return Err(CliError::Config("ising-contours boxes must have between 1 and 16 sites".into()));
                }
                Ok(())
            }
        }
    }

    /// The Widom-Rowlinson model behind a `wr-continuum` or `wr-discrete` tag.
    pub fn widom_rowlinson(&self) -> Option<WidomRowlinson> {
        match *self {
            ModelConfig::WrContinuum { dim, lambda_plus, lambda_minus, r } => {
                Some(WidomRowlinson::continuum(dim, lambda_plus, lambda_minus, r))
            }
            ModelConfig::WrDiscrete { dim, lambda_plus, lambda_minus, r } => {
                Some(WidomRowlinson::discrete(dim, lambda_plus, lambda_minus, r))
            }
            _ => None,
        }
    }

    pub fn thin_rods(&self) -> Option<ThinRods> {
        match self {
            ModelConfig::ThinRods { lambda, half_length, orientation } => {
                Some(ThinRods::new(*lambda, *half_length, orientation.clone()))
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<ModelRef, CliError> {
        self.validate()?;
        if let Some(m) = self.widom_rowlinson() {
            return Ok(Arc::new(m));
        }
        if let Some(m) = self.thin_rods() {
            return Ok(Arc::new(m));
        }
        Ok(match self {
            ModelConfig::WrGeneralized { dim, lattice, lambda_plus, lambda_minus, h, j } => {
                let base = if *lattice { BaseMeasure::Counting(*dim) } else { BaseMeasure::Lebesgue(*dim) };
                let intensity = TaggedIntensity {
                    base,
                    species: SpeciesMeasure::new(vec![('+', *lambda_plus), ('-', *lambda_minus)]),
                };
                let h = StepTable::new(h.clone()).map_err(|e| CliError::Config(e.to_string()))?;
                let j = StepTable::new(j.clone()).map_err(|e| CliError::Config(e.to_string()))?;
                Arc::new(GeneralizedWr::new(intensity, h, j))
            }
            ModelConfig::WrTolerant { dim, lattice: true, lambda_plus, lambda_minus, r, k } => {
                Arc::new(TolerantWr::discrete(*dim, *lambda_plus, *lambda_minus, *r as i64, *k))
            }
            ModelConfig::WrTolerant { dim, lattice: false, lambda_plus, lambda_minus, r, k } => {
                Arc::new(TolerantWr::continuum(*dim, *lambda_plus, *lambda_minus, *r, *k))
            }
            ModelConfig::Symbiotic { dim, lambda_host, lambda_parasite, r, j } => {
                Arc::new(Symbiotic::new(*dim, *lambda_host, *lambda_parasite, *r, *j))
            }
            ModelConfig::NonInteracting { dim, lambda } => Arc::new(NonInteracting::continuum(*dim, *lambda)),
            ModelConfig::IsingContours { beta, lo, width, height } => {
                Arc::new(IsingContourModel::in_site_box(*beta, *lo, *width, *height)?)
            }
            _ => unreachable!("handled above"),
        })
    }

    pub fn is_lattice(&self) -> bool {
        match self {
            ModelConfig::WrDiscrete { .. } | ModelConfig::IsingContours { .. } => true,
            ModelConfig::WrGeneralized { lattice, .. } | ModelConfig::WrTolerant { lattice, .. } => *lattice,
            _ => false,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelConfig::WrContinuum { dim, .. }
            | ModelConfig::WrDiscrete { dim, .. }
            | ModelConfig::WrGeneralized { dim, .. }
            | ModelConfig::WrTolerant { dim, .. }
            | ModelConfig::Symbiotic { dim, .. }
            | ModelConfig::NonInteracting { dim, .. } => *dim,
            ModelConfig::ThinRods { .. } | ModelConfig::IsingContours { .. } => 2,
        }
    }

    /// The fugacity swept by `with_lambda`; inverse temperature for contour models.
    pub fn fugacity(&self) -> f64 {
        match self {
            ModelConfig::WrContinuum { lambda_plus, .. }
            | ModelConfig::WrDiscrete { lambda_plus, .. }
            | ModelConfig::WrGeneralized { lambda_plus, .. }
            | ModelConfig::WrTolerant { lambda_plus, .. } => *lambda_plus,
            ModelConfig::ThinRods { lambda, .. } | ModelConfig::NonInteracting { lambda, .. } => *lambda,
            ModelConfig::Symbiotic { lambda_host, .. } => *lambda_host,
            ModelConfig::IsingContours { beta, .. } => *beta,
        }
    }

    /// Same model with its fugacities replaced by `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<ModelConfig, CliError> {
        let mut m = self.clone();
        match &mut m {
            ModelConfig::WrContinuum { lambda_plus, lambda_minus, .. }
            | ModelConfig::WrDiscrete { lambda_plus, lambda_minus, .. }
            | ModelConfig::WrGeneralized { lambda_plus, lambda_minus, .. }
            | ModelConfig::WrTolerant { lambda_plus, lambda_minus, .. } => {
                *lambda_plus = lambda;
                *lambda_minus = lambda;
            }
            ModelConfig::ThinRods { lambda: l, .. } | ModelConfig::NonInteracting { lambda: l, .. } => *l = lambda,
            ModelConfig::Symbiotic { lambda_host, .. } => *lambda_host = lambda,
            ModelConfig::IsingContours { .. } => {
                return Err(CliError::Config("ising-contours has no fugacity".into()));
            }
        }
        Ok(m)
    }
}

/// Axis-aligned box `[lo, hi)`; integer corners on lattices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A particle of a boundary condition: coordinates and a tag such as `"+"`
/// or an angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryParticle {
    pub at: Vec<f64>,
    pub spin: SpinValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpinValue {
    Angle(f64),
    Tag(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum CouplingConfig {
    /// Intensity scaled by `1 - eps`.
    Scaled,
    /// Soft-core repulsion `c / eps` converging to hard-core Widom-Rowlinson.
    SoftToHard { c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum DiscretizationConfig {
    /// Continuum Widom-Rowlinson snapped to `eps Z^d`; the majorant impact
    /// regions are grown by `delta`, which must be at least the largest eps.
    SpatialGrid {
        delta: f64,
        #[serde(default = "yes")]
        site_exclusion: bool,
    },
    /// Thin rods with angles snapped to `eps Z`.
    AngleGrid,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PottsConfig {
    pub q: u16,
    #[serde(default = "one")]
    pub r: i64,
    pub beta: f64,
    #[serde(default)]
    pub label: u16,
    /// Lower corner of the box; samples live on the box shrunk by `2r`.
    #[serde(default)]
    pub lo: [i64; 2],
    pub width: i64,
    pub height: i64,
    /// Neglected-probability tolerance of the catalog truncation.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Directory holding catalogs between runs.
    #[serde(default)]
    pub catalog_cache: Option<PathBuf>,
}

fn one() -> i64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "tv_max")]
    pub tv_max: f64,
    #[serde(default = "p_min")]
    pub p_min: f64,
    #[serde(default = "one_u32")]
    pub occupancy_cap: u32,
    #[serde(default = "max_states")]
    pub max_states: usize,
}

fn tv_max() -> f64 {
    0.02
}
fn p_min() -> f64 {
    0.001
}
fn one_u32() -> u32 {
    1
}
fn max_states() -> usize {
    100_000
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { tv_max: tv_max(), p_min: p_min(), occupancy_cap: 1, max_states: max_states() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripConfig {
    pub width: f64,
    pub length: f64,
}

/// One run: a model, a window, a seed and subcommand options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub mode: ExecMode,
    /// Fixed particles outside the window; implies finite-volume sampling.
    #[serde(default)]
    pub boundary: Option<Vec<BoundaryParticle>>,
    /// Finite-volume sampling with empty boundary.
    #[serde(default)]
    pub finite_volume: bool,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub distances: Option<Vec<f64>>,
    #[serde(default)]
    pub strip: Option<StripConfig>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub kmax: Option<usize>,
    #[serde(default)]
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub discretization: Option<DiscretizationConfig>,
    #[serde(default)]
    pub potts: Option<PottsConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub keep_samples: bool,
    #[serde(default)]
    pub dump_clan: bool,
}

fn replicas() -> u64 {
    1000
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if c.replicas == 0 {
            return Err(CliError::Config("replicas must be at least 1".into()));
        }
        Ok(c)
    }

    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("missing model".into()))
    }

    pub fn budget(&self) -> Budget {
        self.budget.unwrap_or_default()
    }

    pub fn window(&self) -> Result<Window, CliError> {
        let m = self.model()?;
        if let ModelConfig::IsingContours { lo, width, height, .. } = m {
            let hi = [lo[0] + *width as i64 + 1, lo[1] + *height as i64 + 1];
            return Ok(Window::lattice_box(lo, &hi));
        }
        let w = self.window.as_ref().ok_or_else(|| CliError::Config("missing window".into()))?;
        if w.lo.len() != m.dim() || w.hi.len() != m.dim() {
            return Err(CliError::Config(format!("window corners must have {} coordinates", m.dim())));
        }
        if w.lo.iter().zip(&w.hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(CliError::Config("window needs lo < hi on every axis".into()));
        }
        if m.is_lattice() {
            let lo = integers(&w.lo)?;
            let hi = integers(&w.hi)?;
            Ok(Window::lattice_box(&lo, &hi))
        } else {
            Ok(Window::continuum_box(&w.lo, &w.hi))
        }
    }

    /// `Some(boundary)` for finite-volume runs.
    pub fn boundary(&self) -> Result<Option<ParticleConfiguration>, CliError> {
        let m = self.model()?;
        match &self.boundary {
            None if self.finite_volume => Ok(Some(ParticleConfiguration::new())),
            None => Ok(None),
            Some(ps) => {
                let mut c = ParticleConfiguration::new();
                for p in ps {
                    if p.at.len() != m.dim() {
                        return Err(CliError::Config("boundary particle has the wrong dimension".into()));
                    }
                    let loc =
                        if m.is_lattice() { Location::lattice(&integers(&p.at)?) } else { Location::continuum(&p.at) };
                    let spin = match &p.spin {
                        SpinValue::Angle(a) => Spin::Angle(*a),
                        SpinValue::Tag(t) if t.chars().count() == 1 => Spin::Tag(t.chars().next().unwrap()),
                        SpinValue::Tag(t) => return Err(CliError::Config(format!("bad spin tag {t:?}"))),
                    };
                    c.insert(Particle::new(loc, spin));
                }
                Ok(Some(c))
            }
        }
    }

    pub fn list(&self, name: &str, v: &Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
        match v {
            Some(xs) if !xs.is_empty() && xs.iter().all(|x| x.is_finite()) => Ok(xs.clone()),
            _ => Err(CliError::Config(format!("{name} must be a nonempty list of numbers"))),
        }
    }
}

fn integers(xs: &[f64]) -> Result<Vec<i64>, CliError> {
    xs.iter()
        .map(|x| {
            if x.fract() == 0.0 {
                Ok(*x as i64)
            } else {
                Err(CliError::Config(format!("lattice coordinate {x} is not an integer")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_optional_fields() {
        let c = RunConfig::parse(r#"{"model":{"type":"thin-rods","lambda":0.1,"half_length":0.5},"seed":4}"#).unwrap();
        assert_eq!(c.replicas, 1000);
        assert_eq!(c.mode, ExecMode::Parallel);
        assert_eq!(c.model().unwrap().thin_rods().unwrap().orientation, Orientation::Uniform);
        assert_eq!(c.budget(), Budget::default());
    }

    #[test]
    fn lattice_windows_need_integer_corners() {
        let text = r#"{"model":{"type":"wr-discrete","dim":2,"lambda_plus":0.3,"lambda_minus":0.3,"r":1},
                       "window":{"lo":[0,0],"hi":[2.5,2]},"seed":1}"#;
        assert!(matches!(RunConfig::parse(text).unwrap().window(), Err(CliError::Config(_))));
    }

    #[test]
    fn boundary_particles_carry_tags_or_angles() {
        let text = r#"{"model":{"type":"wr-discrete","dim":2,"lambda_plus":0.3,"lambda_minus":0.3,"r":1},
                       "window":{"lo":[0,0],"hi":[2,2]},"seed":1,"boundary":[{"at":[2,0],"spin":"+"}]}"#;
        let b = RunConfig::parse(text).unwrap().boundary().unwrap().unwrap();
        let p = b.particles().next().unwrap();
        assert_eq!(p.spin.tag(), Some('+'));
        assert_eq!(p.location.as_lattice(), Some(&[2i64, 0][..]));
    }

    #[test]
    fn fugacity_sweeps_replace_both_species() {
        let m = ModelConfig::WrContinuum { dim: 2, lambda_plus: 0.1, lambda_minus: 0.2, r: 1.0 };
        assert_eq!(
            m.with_lambda(0.3).unwrap(),
            ModelConfig::WrContinuum { dim: 2, lambda_plus: 0.3, lambda_minus: 0.3, r: 1.0 }
        );
    }
}
