use rand::{Rng, RngCore};
use statrs::function::gamma::gamma;

use crate::space::{Location, LocationRegion, Norm, Spin, SpinSet};

/// Reference measure on locations: Lebesgue on R^d or counting on Z^d.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseMeasure {
    Lebesgue(usize),
    Counting(usize),
}

pub fn unit_ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

fn int_range(lo: f64, hi_exclusive: f64) -> (i64, i64) {
    (lo.ceil() as i64, hi_exclusive.ceil() as i64)
}

impl BaseMeasure {
    pub fn dim(&self) -> usize {
        match self {
            BaseMeasure::Lebesgue(d) | BaseMeasure::Counting(d) => *d,
        }
    }

    fn lattice_points_in_ball(center: &Location, r: f64, norm: Norm) -> Vec<Vec<i64>> {
        let d = center.dim();
        let ranges: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let c = center.coord(i);
                ((c - r).ceil() as i64, (c + r).floor() as i64 + 1)
            })
            .collect();
        let mut out = Vec::new();
        let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 >= r.1) {
            return out;
        }
        loop {
            let loc = Location::lattice(&cur);
            if loc.dist(center, norm) <= r {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == d {
                    return out;
                }
                cur[i] += 1;
                if cur[i] < ranges[i].1 {
                    break;
                }
                cur[i] = ranges[i].0;
                i += 1;
            }
        }
    }

    pub fn region_mass(&self, region: &LocationRegion) -> f64 {
        match (self, region) {
            (BaseMeasure::Lebesgue(_), LocationRegion::Box { lo, hi }) => {
                lo.iter().zip(hi).map(|(a, b)| (b - a).max(0.0)).product()
            }
            (BaseMeasure::Lebesgue(_), LocationRegion::LatticeBox { .. })
            | (BaseMeasure::Lebesgue(_), LocationRegion::Sites(_)) => 0.0,
            (BaseMeasure::Lebesgue(d), LocationRegion::Ball { radius, norm, .. }) => match norm {
                Norm::Sup => (2.0 * radius).powi(*d as i32),
                Norm::Euclid => unit_ball_volume(*d) * radius.powi(*d as i32),
            },
            (BaseMeasure::Counting(_), LocationRegion::Box { lo, hi }) => lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| {
                    let (l, h) = int_range(a, b);
                    (h - l).max(0) as f64
                })
                .product(),
            (BaseMeasure::Counting(_), LocationRegion::LatticeBox { lo, hi }) => {
                lo.iter().zip(hi).map(|(a, b)| (b - a).max(0) as f64).product()
            }
            (BaseMeasure::Counting(_), LocationRegion::Sites(s)) => s.len() as f64,
            (BaseMeasure::Counting(_), LocationRegion::Ball { center, radius, norm }) => match norm {
                Norm::Sup => (0..center.dim())
                    .map(|i| {
                        let c = center.coord(i);
                        ((c + radius).floor() - (c - radius).ceil() + 1.0).max(0.0)
                    })
                    .product(),
                Norm::Euclid => Self::lattice_points_in_ball(center, *radius, *norm).len() as f64,
            },
        }
    }

    /// Draw a location from the normalised restriction to `region`.
    /// The region must have positive mass.
    pub fn sample(&self, region: &LocationRegion, rng: &mut dyn RngCore) -> Location {
        match (self, region) {
            (BaseMeasure::Lebesgue(_), LocationRegion::Box { lo, hi }) => Location::Continuum(
                lo.iter().zip(hi).map(|(&a, &b)| a + (b - a) * rng.random::<f64>()).collect(),
            ),
            (BaseMeasure::Lebesgue(d), LocationRegion::Ball { center, radius, norm }) => loop {
                let c: Vec<f64> = (0..*d)
                    .map(|i| center.coord(i) + radius * (2.0 * rng.random::<f64>() - 1.0))
                    .collect();
                let loc = Location::continuum(&c);
                if *norm == Norm::Sup || loc.euclid_dist(center) <= *radius {
                    break loc;
                }
            },
            (BaseMeasure::Counting(_), LocationRegion::Box { lo, hi }) => Location::Lattice(
                lo.iter()
                    .zip(hi)
                    .map(|(&a, &b)| {
                        let (l, h) = int_range(a, b);
                        rng.random_range(l..h)
                    })
                    .collect(),
            ),
            (BaseMeasure::Counting(_), LocationRegion::LatticeBox { lo, hi }) => Location::Lattice(
                lo.iter().zip(hi).map(|(&a, &b)| rng.random_range(a..b)).collect(),
            ),
            (BaseMeasure::Counting(_), LocationRegion::Sites(s)) => {
                Location::lattice(&s[rng.random_range(0..s.len())])
            }
            (BaseMeasure::Counting(_), LocationRegion::Ball { center, radius, norm }) => match norm {
                Norm::Sup => Location::Lattice(
                    (0..center.dim())
                        .map(|i| {
                            let c = center.coord(i);
                            rng.random_range((c - radius).ceil() as i64..=(c + radius).floor() as i64)
                        })
                        .collect(),
                ),
                Norm::Euclid => {
                    let pts = Self::lattice_points_in_ball(center, *radius, *norm);
                    Location::lattice(&pts[rng.random_range(0..pts.len())])
                }
            },
            _ => panic!("sampling from a null region"),
        }
    }
}

/// Finite measure on species tags.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesMeasure {
    pub weights: Vec<(char, f64)>,
}

impl SpeciesMeasure {
    pub fn new(weights: Vec<(char, f64)>) -> Self {
        SpeciesMeasure { weights }
    }

    pub fn weight(&self, c: char) -> f64 {
        self.weights.iter().find(|(t, _)| *t == c).map(|(_, w)| *w).unwrap_or(0.0)
    }

    pub fn mass(&self, set: &SpinSet) -> f64 {
        self.weights.iter().filter(|(t, _)| set.contains(&Spin::Tag(*t))).map(|(_, w)| w).sum()
    }

    pub fn sample(&self, set: &SpinSet, rng: &mut dyn RngCore) -> Spin {
        let total = self.mass(set);
        let mut u = rng.random::<f64>() * total;
        let mut last = None;
        for (t, w) in &self.weights {
            if !set.contains(&Spin::Tag(*t)) || *w <= 0.0 {
                continue;
            }
            last = Some(*t);
            if u < *w {
                return Spin::Tag(*t);
            }
            u -= w;
        }
        Spin::Tag(last.expect("sampling from a null spin set"))
    }

    pub fn quadrature(&self, set: &SpinSet) -> Vec<(Spin, f64)> {
        self.weights
            .iter()
            .filter(|(t, _)| set.contains(&Spin::Tag(*t)))
            .map(|(t, _)| (Spin::Tag(*t), 1.0))
            .collect()
    }
}
