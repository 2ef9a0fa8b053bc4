use std::fmt;
use std::ops::Add;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FfgError, Result};
use crate::space::{Particle, ParticleConfiguration, SpinSet, Window, WindowPiece};

/// An energy value in `(-inf, +inf]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Energy(f64);

impl Energy {
    pub const ZERO: Energy = Energy(0.0);
    pub const INFINITY: Energy = Energy(f64::INFINITY);

    pub fn finite(v: f64) -> Energy {
        assert!(v.is_finite(), "finite energy expected, got {v}");
        Energy(v)
    }

    pub fn new(v: f64) -> Energy {
        assert!(!v.is_nan() && v != f64::NEG_INFINITY, "energy must lie in (-inf, +inf]");
        Energy(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn approx_eq(self, other: Energy, tol: f64) -> bool {
        if self.is_infinite() || other.is_infinite() {
            return self.is_infinite() && other.is_infinite();
        }
        (self.0 - other.0).abs() <= tol * (1.0 + self.0.abs().max(other.0.abs()))
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, o: Energy) -> Energy {
        Energy(self.0 + o.0)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Energy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Energy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Energy(v)),
            Raw::Str(s) if s == "inf" => Ok(Energy::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad energy {s}"))),
        }
    }
}

/// Closed-form diluteness coefficient published by a model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedFormAlpha {
    /// Coefficient for the impact regions the sampler actually uses.
    pub alpha: f64,
    /// Coefficient quoted in the literature when it differs from `alpha`.
    pub literature: Option<f64>,
    pub note: String,
}

/// A Gibbs point process given as a diluted model: free intensity, energy
/// leaps, a lower bound on leaps and impact regions.
pub trait DilutedModel: Send + Sync {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// Mass of one window piece under the free intensity.
    fn piece_mass(&self, piece: &WindowPiece) -> f64;

    /// Draw from the free intensity restricted to a piece of positive mass.
    fn sample_piece(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle;

    /// Energy leap of adding `p` to `eta`.
    fn energy_leap(&self, eta: &ParticleConfiguration, p: &Particle) -> Energy;

    /// Uniform lower bound on all energy leaps.
    fn energy_loss_bound(&self) -> f64;

    /// A window containing every particle whose presence can change the leap of `p`.
    fn impact_region(&self, p: &Particle) -> Window;

    fn size(&self, _p: &Particle) -> f64 {
        1.0
    }

    /// Atoms and weights of the free intensity on a finite window (discrete models only).
    fn atoms(&self, _w: &Window) -> Option<Vec<(Particle, f64)>> {
        None
    }

    /// Density of the free intensity with respect to the product of the base
    /// location measure and the spin reference measure.
    fn density(&self, _p: &Particle) -> f64 {
        0.0
    }

    /// Nodes and weights of the spin reference measure restricted to `set`.
    fn spin_quadrature(&self, _set: &SpinSet, _n: usize) -> Vec<(crate::space::Spin, f64)> {
        Vec::new()
    }

    fn base_measure(&self) -> Option<crate::measure::BaseMeasure> {
        None
    }

    fn closed_form_alpha(&self) -> Option<ClosedFormAlpha> {
        None
    }

    /// Reference particle used when a translation-invariant quantity is needed.
    fn reference_particles(&self) -> Vec<Particle> {
        Vec::new()
    }

    fn intensity_mass(&self, w: &Window) -> f64 {
        if w.negated {
            return f64::INFINITY;
        }
        w.pieces.iter().map(|p| self.piece_mass(p)).sum()
    }
}

pub type ModelRef = Arc<dyn DilutedModel>;

/// Probability of keeping a candidate whose leap is `leap` when candidates
/// were proposed at the rate tilted by `delta_e`.
pub fn acceptance_probability(leap: Energy, delta_e: f64) -> Result<f64> {
    if leap.is_infinite() {
        return Ok(0.0);
    }
    let x = leap.value() - delta_e;
    if x < -1e-9 * (1.0 + delta_e.abs()) {
        return Err(FfgError::InvalidModel(format!(
            "energy leap {} below the loss bound {}",
            leap.value(),
            delta_e
        )));
    }
    Ok((-x.max(0.0)).exp())
}

/// Sample a Poisson process of the free intensity on `w`, handling
/// overlapping pieces by keeping each point only in its first piece.
pub fn sample_free_process(
    m: &dyn DilutedModel,
    w: &Window,
    scale: f64,
    rng: &mut dyn RngCore,
) -> Vec<Particle> {
    let mut out = Vec::new();
    for (k, piece) in w.pieces.iter().enumerate() {
        let mass = m.piece_mass(piece) * scale;
        for _ in 0..poisson(mass, rng) {
            let p = m.sample_piece(piece, rng);
            if !w.in_earlier_piece(&p, k) {
                out.push(p);
            }
        }
    }
    out
}

pub fn poisson(mean: f64, rng: &mut dyn RngCore) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive Poisson mean").sample(rng) as u64
}

/// Energy of a configuration obtained by telescoping leaps in the given order.
pub fn telescoped_energy(m: &dyn DilutedModel, order: &[Particle]) -> Energy {
    let mut eta = ParticleConfiguration::new();
    let mut h = Energy::ZERO;
    for p in order {
        let l = m.energy_leap(&eta, p);
        if l.is_infinite() {
            return Energy::INFINITY;
        }
        h = h + l;
        eta.insert(p.clone());
    }
    h
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub mass: f64,
    pub orders_checked: usize,
    pub bounds_checked: usize,
    pub locality_checked: usize,
}

/// Randomised checks of the diluted-model axioms on `window`.
pub fn validate_model(
    m: &dyn DilutedModel,
    window: &Window,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<ValidationReport> {
    let mass = m.intensity_mass(window);
    if !mass.is_finite() || mass < 0.0 {
        return Err(FfgError::InvalidModel(format!("window mass {mass} is not finite")));
    }
    if mass == 0.0 {
        return Err(FfgError::InvalidModel("window has zero mass".into()));
    }
    let de = m.energy_loss_bound();
    let scale = 4.0 / mass;
    let mut report = ValidationReport { mass, orders_checked: 0, bounds_checked: 0, locality_checked: 0 };
    for _ in 0..trials {
        let sigma = sample_free_process(m, window, scale, rng);
        // Telescoping must not depend on the insertion order.
        let mut rev = sigma.clone();
        rev.reverse();
        let mut shuffled = sigma.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let h0 = telescoped_energy(m, &sigma);
        for other in [&rev, &shuffled] {
            let h1 = telescoped_energy(m, other);
            if !h0.approx_eq(h1, 1e-9) {
                return Err(FfgError::InvalidModel(format!(
                    "telescoped energy depends on the order: {h0} vs {h1}"
                )));
            }
            report.orders_checked += 1;
        }
        let eta = ParticleConfiguration::from_particles(sigma);
        let gammas = sample_free_process(m, window, scale, rng);
        for g in &gammas {
            let leap = m.energy_leap(&eta, g);
            if leap.value() < de - 1e-9 * (1.0 + de.abs()) {
                return Err(FfgError::InvalidModel(format!("leap {leap} below the loss bound {de}")));
            }
            report.bounds_checked += 1;
            // Particles outside the impact region must not affect the leap.
            let imp = m.impact_region(g);
            let far: Vec<Particle> = sample_free_process(m, &window.inflate(1.0), scale, rng)
                .into_iter()
                .filter(|p| !imp.contains(p))
                .collect();
            let mut with_far = eta.clone();
            for p in &far {
                with_far.insert(p.clone());
            }
            let inside = eta.restrict(&imp);
            for (a, b) in [(&with_far, &eta), (&eta, &inside)] {
                let (la, lb) = (m.energy_leap(a, g), m.energy_leap(b, g));
                if !la.approx_eq(lb, 1e-9) {
                    return Err(FfgError::InvalidModel(format!(
                        "leap of {:?} changed by particles outside its impact region: {la} vs {lb}",
                        g
                    )));
                }
                report.locality_checked += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_of_infinite_leap_is_exactly_zero() {
        assert_eq!(acceptance_probability(Energy::INFINITY, 0.0).unwrap(), 0.0);
        assert_eq!(acceptance_probability(Energy::finite(0.0), 0.0).unwrap(), 1.0);
        assert!(acceptance_probability(Energy::finite(-1.0), 0.0).is_err());
        let a = acceptance_probability(Energy::finite(1.0), -0.5).unwrap();
        assert!((a - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn energy_serialises_infinity_as_string() {
        assert_eq!(serde_json::to_string(&Energy::INFINITY).unwrap(), "\"inf\"");
        let e: Energy = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.is_infinite());
    }
}
