mod generalized;
mod non_interacting;
mod symbiotic;
mod thin_rods;
mod tolerant;
mod widom_rowlinson;

pub use generalized::{GeneralizedWr, StepTable};
pub use non_interacting::NonInteracting;
pub use symbiotic::Symbiotic;
pub use thin_rods::{rods_intersect, Orientation, ThinRods};
pub use tolerant::TolerantWr;
pub use widom_rowlinson::WidomRowlinson;

use rand::RngCore;

use crate::measure::{BaseMeasure, SpeciesMeasure};
use crate::space::{Location, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Free intensity given by a base location measure times a species measure.
#[derive(Clone, Debug, PartialEq)]
pub struct TaggedIntensity {
    pub base: BaseMeasure,
    pub species: SpeciesMeasure,
}

impl TaggedIntensity {
    pub fn mass(&self, piece: &WindowPiece) -> f64 {
        let s = self.species.mass(&piece.spins);
        if s == 0.0 {
            return 0.0;
        }
        self.base.region_mass(&piece.region) * s
    }

    pub fn sample(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle {
        let loc = self.base.sample(&piece.region, rng);
        let spin = self.species.sample(&piece.spins, rng);
        Particle::new(loc, spin)
    }

    pub fn density(&self, p: &Particle) -> f64 {
        p.spin.tag().map(|c| self.species.weight(c)).unwrap_or(0.0)
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.base, BaseMeasure::Counting(_))
    }

    /// Atoms of the intensity on a window made of lattice boxes or site lists.
    pub fn atoms(&self, w: &Window) -> Option<Vec<(Particle, f64)>> {
        if !self.is_lattice() || w.negated {
            return None;
        }
        let mut out = std::collections::BTreeMap::new();
        for piece in &w.pieces {
            for site in lattice_sites(&piece.region)? {
                for (t, wgt) in &self.species.weights {
                    let p = Particle::new(Location::lattice(&site), Spin::Tag(*t));
                    if *wgt > 0.0 && piece.spins.contains(&p.spin) {
                        out.insert(p, *wgt);
                    }
                }
            }
        }
        let out: Vec<(Particle, f64)> = out.into_iter().collect();
        Some(out)
    }
}

/// Sites of a finite lattice region.
pub fn lattice_sites(region: &crate::space::LocationRegion) -> Option<Vec<Vec<i64>>> {
    use crate::space::LocationRegion;
    match region {
        LocationRegion::LatticeBox { lo, hi } => {
            let mut out = vec![Vec::new()];
            for (a, b) in lo.iter().zip(hi) {
                let mut next = Vec::new();
                for prefix in &out {
                    for x in *a..*b {
                        let mut v = prefix.clone();
                        v.push(x);
                        next.push(v);
                    }
                }
                out = next;
            }
            Some(out)
        }
        LocationRegion::Sites(s) => Some(s.clone()),
        _ => None,
    }
}

pub fn opposite(c: char) -> char {
    match c {
        '+' => '-',
        '-' => '+',
        other => other,
    }
}

pub fn wr_type(p: &Particle) -> char {
    p.spin.tag().expect("Widom-Rowlinson particles carry a '+' or '-' tag")
}

pub fn tags(cs: &[char]) -> SpinSet {
    SpinSet::Tags(cs.iter().map(|&c| Spin::Tag(c)).collect())
}

pub(crate) fn count_matching<F: Fn(&Particle) -> bool>(eta: &ParticleConfiguration, f: F) -> usize {
    eta.distinct().filter(|(p, _)| f(p)).map(|(_, m)| m as usize).sum()
}
