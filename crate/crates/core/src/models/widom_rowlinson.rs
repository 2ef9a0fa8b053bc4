use rand::RngCore;

use super::{opposite, tags, wr_type, TaggedIntensity};
use crate::measure::{BaseMeasure, SpeciesMeasure};
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::space::{Location, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Two-species hard-core exclusion: particles of opposite type may not lie
/// within sup-distance `r`. On the lattice a site also holds at most one
/// particle of each type.
#[derive(Clone, Debug, PartialEq)]
pub struct WidomRowlinson {
    pub intensity: TaggedIntensity,
    pub r: f64,
}

impl WidomRowlinson {
    pub fn continuum(dim: usize, lambda_plus: f64, lambda_minus: f64, r: f64) -> Self {
        WidomRowlinson {
            intensity: TaggedIntensity {
                base: BaseMeasure::Lebesgue(dim),
                species: SpeciesMeasure::new(vec![('+', lambda_plus), ('-', lambda_minus)]),
            },
            r,
        }
    }

    pub fn discrete(dim: usize, lambda_plus: f64, lambda_minus: f64, r: i64) -> Self {
        WidomRowlinson {
            intensity: TaggedIntensity {
                base: BaseMeasure::Counting(dim),
                species: SpeciesMeasure::new(vec![('+', lambda_plus), ('-', lambda_minus)]),
            },
            r: r as f64,
        }
    }

    pub fn lambda(&self, c: char) -> f64 {
        self.intensity.species.weight(c)
    }

    fn lattice(&self) -> bool {
        self.intensity.is_lattice()
    }
}

impl DilutedModel for WidomRowlinson {
    fn name(&self) -> String {
        if self.lattice() { "wr-discrete".into() } else { "wr-continuum".into() }
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
        let o = opposite(t);
        for (q, _) in eta.distinct() {
            let qt = wr_type(q);
            if qt == o && q.location.sup_dist(&p.location) <= self.r {
                return Energy::INFINITY;
            }
            if self.lattice() && qt == t && q.location == p.location {
                return Energy::INFINITY;
            }
        }
        Energy::ZERO
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    fn impact_region(&self, p: &Particle) -> Window {
        let t = wr_type(p);
        let mut w = Window::ball(p.location.clone(), self.r, Norm::Sup, tags(&[opposite(t)]));
        if self.lattice() {
            w.push(
                crate::space::LocationRegion::Ball { center: p.location.clone(), radius: 0.0, norm: Norm::Sup },
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
        let d = self.dim() as i32;
        let (lp, lm) = (self.lambda('+'), self.lambda('-'));
        if self.lattice() {
            let side = 2.0 * self.r + 1.0;
            let exact = (lm * side.powi(d) + lp).max(lp * side.powi(d) + lm);
            let lit = (lm * (2.0 * self.r).powi(d) + lp).max(lp * (2.0 * self.r).powi(d) + lm);
            Some(ClosedFormAlpha {
                alpha: exact,
                literature: Some(lit),
                note: "the sup-ball of radius r holds (2r+1)^d sites".into(),
            })
        } else {
            Some(ClosedFormAlpha {
                alpha: lp.max(lm) * (2.0 * self.r).powi(d),
                literature: None,
                note: String::new(),
            })
        }
    }

    fn reference_particles(&self) -> Vec<Particle> {
        let origin = if self.lattice() {
            Location::lattice(&vec![0; self.dim()])
        } else {
            Location::continuum(&vec![0.0; self.dim()])
        };
        vec![Particle::new(origin.clone(), Spin::Tag('+')), Particle::new(origin, Spin::Tag('-'))]
    }
}
