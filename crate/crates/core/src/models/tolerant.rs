use rand::RngCore;

use super::{count_matching, opposite, tags, wr_type, TaggedIntensity};
use crate::measure::{BaseMeasure, SpeciesMeasure};
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::space::{Location, LocationRegion, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Widom-Rowlinson variant in which every particle tolerates up to `k`
/// particles of the opposite type within sup-distance `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct TolerantWr {
    pub intensity: TaggedIntensity,
    pub r: f64,
    pub k: usize,
}

impl TolerantWr {
    pub fn continuum(dim: usize, lambda_plus: f64, lambda_minus: f64, r: f64, k: usize) -> Self {
        TolerantWr {
            intensity: TaggedIntensity {
                base: BaseMeasure::Lebesgue(dim),
                species: SpeciesMeasure::new(vec![('+', lambda_plus), ('-', lambda_minus)]),
            },
            r,
            k,
        }
    }

    pub fn discrete(dim: usize, lambda_plus: f64, lambda_minus: f64, r: i64, k: usize) -> Self {
        TolerantWr {
            intensity: TaggedIntensity {
                base: BaseMeasure::Counting(dim),
                species: SpeciesMeasure::new(vec![('+', lambda_plus), ('-', lambda_minus)]),
            },
            r: r as f64,
            k,
        }
    }
}

impl DilutedModel for TolerantWr {
    fn name(&self) -> String {
        "wr-tolerant".into()
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
        if self.intensity.is_lattice() && eta.multiplicity(p) > 0 {
            return Energy::INFINITY;
        }
        let near = |q: &Particle, c: char, x: &Location| wr_type(q) == c && q.location.sup_dist(x) <= self.r;
        if count_matching(eta, |q| near(q, o, &p.location)) > self.k {
            return Energy::INFINITY;
        }
        for (q, _) in eta.distinct() {
            if near(q, o, &p.location) && count_matching(eta, |z| near(z, t, &q.location)) + 1 > self.k {
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
        w.push(
            LocationRegion::Ball { center: p.location.clone(), radius: 2.0 * self.r, norm: Norm::Sup },
            tags(&[t]),
        );
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
        let (lp, lm) = (self.intensity.species.weight('+'), self.intensity.species.weight('-'));
        let (a, b) = if self.intensity.is_lattice() {
            ((2.0 * self.r + 1.0).powi(d), (4.0 * self.r + 1.0).powi(d))
        } else {
            ((2.0 * self.r).powi(d), (4.0 * self.r).powi(d))
        };
        Some(ClosedFormAlpha {
            alpha: (lm * a + lp * b).max(lp * a + lm * b),
            literature: None,
            note: "opposite type within r plus same type within 2r".into(),
        })
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

    #[test]
    fn tolerance_counts_both_the_newcomer_and_its_neighbours() {
        let m = TolerantWr::discrete(1, 1.0, 1.0, 1, 1);
        let p = |x: i64, c: char| Particle::new(Location::lattice(&[x]), Spin::Tag(c));
        let eta = ParticleConfiguration::from_particles(vec![p(0, '+')]);
        assert_eq!(m.energy_leap(&eta, &p(1, '-')), Energy::ZERO);
        let eta2 = eta.with(&p(1, '-'));
        // The '+' at 0 would see two '-' particles.
        assert!(m.energy_leap(&eta2, &p(-1, '-')).is_infinite());
        // A new '+' at 2 sees one '-', but the '-' at 1 would see two '+'.
        assert!(m.energy_leap(&eta2, &p(2, '+')).is_infinite());
        assert_eq!(m.energy_leap(&eta2, &p(3, '+')), Energy::ZERO);
    }
}
