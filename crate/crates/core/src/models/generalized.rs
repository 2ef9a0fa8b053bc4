use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{opposite, tags, wr_type, TaggedIntensity};
use crate::error::{FfgError, Result};
use crate::measure::BaseMeasure;
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::space::{Location, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Nonincreasing step function on `[0, inf)`: the value of the first step
/// whose closed upper end is at least `t`, and zero past the last step.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct StepTable {
    pub steps: Vec<(f64, f64)>,
}

impl StepTable {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        for w in steps.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 > w[0].1 {
                return Err(FfgError::InvalidModel(
                    "step tables need increasing breakpoints and nonincreasing values".into(),
                ));
            }
        }
        if steps.iter().any(|&(u, v)| !(u >= 0.0) || !(v >= 0.0)) {
            return Err(FfgError::InvalidModel("step tables need nonnegative entries".into()));
        }
        Ok(StepTable { steps })
    }

    pub fn constant(radius: f64, value: f64) -> Self {
        StepTable { steps: vec![(radius, value)] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.steps.iter().find(|(u, _)| t <= *u).map(|(_, v)| *v).unwrap_or(0.0)
    }

    /// Radius of the support; negative when the table is identically zero.
    pub fn support(&self) -> f64 {
        self.steps.iter().rev().find(|(_, v)| *v > 0.0).map(|(u, _)| *u).unwrap_or(-1.0)
    }
}

/// Soft two-species repulsion: `h` acts between opposite types and `j`
/// between any two particles, both as functions of the sup-distance.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedWr {
    pub intensity: TaggedIntensity,
    pub h: StepTable,
    pub j: StepTable,
}

impl GeneralizedWr {
    pub fn new(intensity: TaggedIntensity, h: StepTable, j: StepTable) -> Self {
        GeneralizedWr { intensity, h, j }
    }

    fn opposite_radius(&self) -> f64 {
        self.h.support().max(self.j.support())
    }
}

impl DilutedModel for GeneralizedWr {
    fn name(&self) -> String {
        "wr-generalized".into()
    }

    fn dim(&self) -> usize {
        self.intensity.base.dim()
    }

    fn piece_mass(&self, piece: &WindowPiece) -> f64 {
        self.intensity.mass(piece)
    }

    fn sample_piece(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle {
        self.intensity.sample(piece, rng)
    }

    fn energy_leap(&self, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        let t = wr_type(p);
        let mut e = 0.0;
        for (q, m) in eta.distinct() {
            let d = q.location.sup_dist(&p.location);
            let mut v = self.j.eval(d);
            if wr_type(q) != t {
                v += self.h.eval(d);
            }
            if v > 0.0 {
                e += v * m as f64;
            }
            if e == f64::INFINITY {
                return Energy::INFINITY;
            }
        }
        Energy::new(e)
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    fn impact_region(&self, p: &Particle) -> Window {
        let t = wr_type(p);
        let mut w = Window::empty();
        let ro = self.opposite_radius();
        if ro >= 0.0 {
            w.push(
                crate::space::LocationRegion::Ball { center: p.location.clone(), radius: ro, norm: Norm::Sup },
                tags(&[opposite(t)]),
            );
        }
        let rs = self.j.support();
        if rs >= 0.0 {
            w.push(
                crate::space::LocationRegion::Ball { center: p.location.clone(), radius: rs, norm: Norm::Sup },
                tags(&[t]),
            );
        }
        w
    }

    fn atoms(&self, w: &Window) -> Option<Vec<(Particle, f64)>> {
        self.intensity.atoms(w)
    }

    fn density(&self, p: &Particle) -> f64 {
        self.intensity.density(p)
    }

    fn spin_quadrature(&self, set: &SpinSet, _n: usize) -> Vec<(Spin, f64)> {
        self.intensity.species.quadrature(set)
    }

    fn base_measure(&self) -> Option<BaseMeasure> {
        Some(self.intensity.base)
    }

    fn closed_form_alpha(&self) -> Option<ClosedFormAlpha> {
        let alpha = self
            .reference_particles()
            .iter()
            .map(|p| self.intensity_mass(&self.impact_region(p)))
            .fold(0.0, f64::max);
        Some(ClosedFormAlpha { alpha, literature: None, note: String::new() })
    }

    fn reference_particles(&self) -> Vec<Particle> {
        let d = self.dim();
        let origin = if self.intensity.is_lattice() {
            Location::lattice(&vec![0; d])
        } else {
            Location::continuum(&vec![0.0; d])
        };
        vec![Particle::new(origin.clone(), Spin::Tag('+')), Particle::new(origin, Spin::Tag('-'))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SpeciesMeasure;

    #[test]
    fn step_table_uses_closed_upper_ends() {
        let t = StepTable::new(vec![(1.0, 3.0), (2.0, 1.0)]).unwrap();
        assert_eq!(t.eval(0.0), 3.0);
        assert_eq!(t.eval(1.0), 3.0);
        assert_eq!(t.eval(1.5), 1.0);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(2.1), 0.0);
        assert!(StepTable::new(vec![(1.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn infinite_h_on_the_lattice_reproduces_the_hardcore_leap() {
        let intensity = TaggedIntensity {
            base: BaseMeasure::Counting(2),
            species: SpeciesMeasure::new(vec![('+', 1.0), ('-', 1.0)]),
        };
        let g = GeneralizedWr::new(
            intensity,
            StepTable::constant(1.0, f64::INFINITY),
            StepTable::constant(0.0, f64::INFINITY),
        );
        let wr = super::super::WidomRowlinson::discrete(2, 1.0, 1.0, 1);
        let pl = |x: i64, y: i64, c: char| Particle::new(Location::lattice(&[x, y]), Spin::Tag(c));
        let eta = ParticleConfiguration::from_particles(vec![pl(0, 0, '+'), pl(3, 3, '-')]);
        for x in -1..5 {
            for y in -1..5 {
                for c in ['+', '-'] {
                    assert_eq!(g.energy_leap(&eta, &pl(x, y, c)), wr.energy_leap(&eta, &pl(x, y, c)));
                }
            }
        }
    }
}
