use rand::RngCore;

use super::TaggedIntensity;
use crate::measure::BaseMeasure;
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::space::{Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Poisson process: every leap is zero and impact regions are empty.
#[derive(Clone, Debug, PartialEq)]
pub struct NonInteracting {
    pub intensity: TaggedIntensity,
}

impl NonInteracting {
    /// Single-species Poisson process of intensity `lambda` on `R^dim`.
    pub fn continuum(dim: usize, lambda: f64) -> Self {
        NonInteracting {
            intensity: TaggedIntensity {
                base: BaseMeasure::Lebesgue(dim),
                species: crate::measure::SpeciesMeasure::new(vec![('+', lambda)]),
            },
        }
    }
}

impl DilutedModel for NonInteracting {
    fn name(&self) -> String {
        "non-interacting".into()
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

    fn energy_leap(&self, _eta: &ParticleConfiguration, _p: &Particle) -> Energy {
        Energy::ZERO
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    fn impact_region(&self, _p: &Particle) -> Window {
        Window::empty()
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
        Some(ClosedFormAlpha { alpha: 0.0, literature: None, note: String::new() })
    }
}
