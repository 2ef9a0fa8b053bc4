use rand::RngCore;

use super::{tags, TaggedIntensity};
use crate::measure::{unit_ball_volume, BaseMeasure, SpeciesMeasure};
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::space::{Location, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Hosts ('h') are free; a parasite ('p') pays `j` unless some host lies at
/// Euclidean distance strictly between 0 and `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbiotic {
    pub intensity: TaggedIntensity,
    pub r: f64,
    pub j: f64,
}

impl Symbiotic {
    pub fn new(dim: usize, lambda_host: f64, lambda_parasite: f64, r: f64, j: f64) -> Self {
        Symbiotic {
            intensity: TaggedIntensity {
                base: BaseMeasure::Lebesgue(dim),
                species: SpeciesMeasure::new(vec![('h', lambda_host), ('p', lambda_parasite)]),
            },
            r,
            j,
        }
    }
}

impl DilutedModel for Symbiotic {
    fn name(&self) -> String {
        "symbiotic".into()
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
        if p.spin != Spin::Tag('p') {
            return Energy::ZERO;
        }
        let hosted = eta.distinct().any(|(q, _)| {
            if q.spin != Spin::Tag('h') {
                return false;
            }
            let d = q.location.euclid_dist(&p.location);
            d > 0.0 && d < self.r
        });
        if hosted { Energy::ZERO } else { Energy::finite(self.j) }
    }

    fn energy_loss_bound(&self) -> f64 {
        self.j.min(0.0)
    }

    fn impact_region(&self, p: &Particle) -> Window {
        if p.spin == Spin::Tag('p') {
            Window::ball(p.location.clone(), self.r, Norm::Euclid, tags(&['h']))
        } else {
            Window::empty()
        }
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
        let d = self.dim();
        let factor = (-self.energy_loss_bound()).exp();
        Some(ClosedFormAlpha {
            alpha: factor * self.intensity.species.weight('h') * unit_ball_volume(d) * self.r.powi(d as i32),
            literature: None,
            note: "hosts have empty impact regions; parasites see hosts in the Euclidean ball".into(),
        })
    }

    fn reference_particles(&self) -> Vec<Particle> {
        let origin = Location::continuum(&vec![0.0; self.dim()]);
        vec![Particle::new(origin.clone(), Spin::Tag('h')), Particle::new(origin, Spin::Tag('p'))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parasite_is_free_next_to_a_host() {
        let m = Symbiotic::new(2, 1.0, 1.0, 1.0, 3.0);
        let host = Particle::new(Location::continuum(&[0.5, 0.0]), Spin::Tag('h'));
        let par = Particle::new(Location::continuum(&[0.0, 0.0]), Spin::Tag('p'));
        let eta = ParticleConfiguration::from_particles(vec![host]);
        assert_eq!(m.energy_leap(&eta, &par), Energy::ZERO);
        assert_eq!(m.energy_leap(&ParticleConfiguration::new(), &par), Energy::finite(3.0));
        let far = Particle::new(Location::continuum(&[1.0, 0.0]), Spin::Tag('h'));
        assert_eq!(m.energy_leap(&ParticleConfiguration::from_particles(vec![far]), &par), Energy::finite(3.0));
    }
}
