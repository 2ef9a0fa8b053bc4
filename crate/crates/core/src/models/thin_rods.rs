use std::f64::consts::PI;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::measure::BaseMeasure;
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::numerics::gauss_legendre;
use crate::space::{Location, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Law of rod orientations on `[0, pi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Uniform,
    /// Atoms `(angle, probability)`; probabilities sum to one.
    Discrete(Vec<(f64, f64)>),
}

impl Orientation {
    pub fn mass(&self, set: &SpinSet) -> f64 {
        match (self, set) {
            (_, SpinSet::Tags(v)) => match self {
                Orientation::Uniform => 0.0,
                Orientation::Discrete(atoms) => atoms
                    .iter()
                    .filter(|(a, _)| v.contains(&Spin::Angle(*a)))
                    .map(|(_, w)| w)
                    .sum(),
            },
            (_, SpinSet::All) => 1.0,
            (Orientation::Uniform, SpinSet::AngleInterval { lo, hi }) => {
                ((hi.min(PI) - lo.max(0.0)) / PI).max(0.0)
            }
            (Orientation::Discrete(atoms), s @ SpinSet::AngleInterval { .. }) => {
                atoms.iter().filter(|(a, _)| s.contains(&Spin::Angle(*a))).map(|(_, w)| w).sum()
            }
        }
    }

    fn sample(&self, set: &SpinSet, rng: &mut dyn RngCore) -> f64 {
        match (self, set) {
            (Orientation::Uniform, SpinSet::AngleInterval { lo, hi }) => {
                let (a, b) = (lo.max(0.0), hi.min(PI));
                a + (b - a) * rng.random::<f64>()
            }
            (Orientation::Uniform, _) => PI * rng.random::<f64>(),
            (Orientation::Discrete(atoms), s) => {
                let total = self.mass(s);
                let mut u = rng.random::<f64>() * total;
                let mut last = 0.0;
                for (a, w) in atoms {
                    if !s.contains(&Spin::Angle(*a)) {
                        continue;
                    }
                    last = *a;
                    if u < *w {
                        return *a;
                    }
                    u -= w;
                }
                last
            }
        }
    }
}

/// Segments of length `2 l` centred at Poisson points in the plane that are
/// forbidden to intersect.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinRods {
    pub lambda: f64,
    pub half_length: f64,
    pub orientation: Orientation,
}

fn endpoints(p: &Particle, l: f64) -> ([f64; 2], [f64; 2]) {
    let th = p.spin.angle().expect("rods carry an angle");
    let (x, y) = (p.location.coord(0), p.location.coord(1));
    let (dx, dy) = (l * th.cos(), l * th.sin());
    ([x - dx, y - dy], [x + dx, y + dy])
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test, collinear overlaps included.
pub fn rods_intersect(p: &Particle, q: &Particle, l: f64) -> bool {
    let (a, b) = endpoints(p, l);
    let (c, d) = endpoints(q, l);
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

impl ThinRods {
    pub fn new(lambda: f64, half_length: f64, orientation: Orientation) -> Self {
        ThinRods { lambda, half_length, orientation }
    }

    /// Exact impact mass for uniform orientations: the mean area of the set of
    /// centres at which a random rod hits a fixed one.
    pub fn tight_alpha_uniform(&self) -> f64 {
        8.0 * self.lambda * self.half_length * self.half_length / PI
    }
}

impl DilutedModel for ThinRods {
    fn name(&self) -> String {
        "thin-rods".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn piece_mass(&self, piece: &WindowPiece) -> f64 {
        let s = self.orientation.mass(&piece.spins);
        if s == 0.0 {
            return 0.0;
        }
        self.lambda * BaseMeasure::Lebesgue(2).region_mass(&piece.region) * s
    }

    fn sample_piece(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle {
        let loc = BaseMeasure::Lebesgue(2).sample(&piece.region, rng);
        Particle::new(loc, Spin::Angle(self.orientation.sample(&piece.spins, rng)))
    }

    fn energy_leap(&self, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        let reach = 2.0 * self.half_length;
        for (q, _) in eta.distinct() {
            if q.location.euclid_dist(&p.location) <= reach && rods_intersect(p, q, self.half_length) {
                return Energy::INFINITY;
            }
        }
        Energy::ZERO
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    fn impact_region(&self, p: &Particle) -> Window {
        Window::ball(p.location.clone(), 2.0 * self.half_length, Norm::Euclid, SpinSet::All)
    }

    fn size(&self, _p: &Particle) -> f64 {
        (2.0 * self.half_length).max(1.0)
    }

    fn density(&self, _p: &Particle) -> f64 {
        self.lambda
    }

    fn spin_quadrature(&self, set: &SpinSet, n: usize) -> Vec<(Spin, f64)> {
        match &self.orientation {
            Orientation::Discrete(atoms) => atoms
                .iter()
                .filter(|(a, _)| set.contains(&Spin::Angle(*a)))
                .map(|(a, w)| (Spin::Angle(*a), *w))
                .collect(),
            Orientation::Uniform => {
                let (lo, hi) = match set {
                    SpinSet::AngleInterval { lo, hi } => (lo.max(0.0), hi.min(PI)),
                    SpinSet::All => (0.0, PI),
                    SpinSet::Tags(_) => return Vec::new(),
                };
                gauss_legendre(n, lo, hi).into_iter().map(|(x, w)| (Spin::Angle(x), w / PI)).collect()
            }
        }
    }

    fn base_measure(&self) -> Option<BaseMeasure> {
        Some(BaseMeasure::Lebesgue(2))
    }

    fn closed_form_alpha(&self) -> Option<ClosedFormAlpha> {
        let l = self.half_length;
        Some(ClosedFormAlpha {
            alpha: 4.0 * PI * self.lambda * l * l,
            literature: None,
            note: format!(
                "impact region is the disc of radius 2l; the exact hitting mass for uniform angles is {}",
                self.tight_alpha_uniform()
            ),
        })
    }

    fn reference_particles(&self) -> Vec<Particle> {
        vec![Particle::new(Location::continuum(&[0.0, 0.0]), Spin::Angle(0.0))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rod(x: f64, y: f64, a: f64) -> Particle {
        Particle::new(Location::continuum(&[x, y]), Spin::Angle(a))
    }

    #[test]
    fn crossing_and_parallel_rods() {
        assert!(rods_intersect(&rod(0.0, 0.0, 0.0), &rod(0.0, 0.0, PI / 2.0), 1.0));
        assert!(!rods_intersect(&rod(0.0, 0.0, 0.0), &rod(0.0, 0.5, 0.0), 1.0));
        assert!(rods_intersect(&rod(0.0, 0.0, 0.0), &rod(1.5, 0.0, 0.0), 1.0));
        assert!(!rods_intersect(&rod(0.0, 0.0, 0.0), &rod(2.5, 0.0, 0.0), 1.0));
        assert!(rods_intersect(&rod(0.0, 0.0, 0.0), &rod(1.0, 0.5, PI / 2.0), 1.0));
    }
}
