use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{FfgError, Result};
use crate::model::DilutedModel;
use crate::space::{Particle, ParticleConfiguration, Window};

/// Exact law of a finite-volume Gibbs measure on a finite atom set.
#[derive(Clone, Debug, Serialize)]
pub struct ExactDistribution {
    pub states: Vec<(ParticleConfiguration, f64)>,
    /// Partition function relative to the free Poisson law, so that the
    /// probability of the empty configuration is `exp(-nu(window)) / partition`.
    pub partition: f64,
}

impl ExactDistribution {
    pub fn probability(&self, c: &ParticleConfiguration) -> f64 {
        self.states.iter().find(|(s, _)| s == c).map(|(_, p)| *p).unwrap_or(0.0)
    }

    /// Law of a statistic of the configuration.
    pub fn pushforward<K: Hash + Eq + Clone + Ord, F: Fn(&ParticleConfiguration) -> K>(&self, f: F) -> Vec<(K, f64)> {
        let mut m: HashMap<K, f64> = HashMap::new();
        for (s, p) in &self.states {
            *m.entry(f(s)).or_insert(0.0) += p;
        }
        let mut v: Vec<(K, f64)> = m.into_iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}

struct Enumerator<'a> {
    model: &'a dyn DilutedModel,
    atoms: Vec<(Particle, f64)>,
    cap: u32,
    max_states: usize,
    out: Vec<(ParticleConfiguration, f64)>,
    nodes: usize,
}

impl Enumerator<'_> {
    fn visit(&mut self, i: usize, xi: &mut ParticleConfiguration, sigma: &mut ParticleConfiguration, weight: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > 50 * self.max_states {
            return Err(FfgError::StateSpaceTooLarge(self.nodes as f64));
        }
        if i == self.atoms.len() {
            if self.out.len() >= self.max_states {
                return Err(FfgError::StateSpaceTooLarge(self.out.len() as f64 + 1.0));
            }
            self.out.push((sigma.clone(), weight));
            return Ok(());
        }
        self.visit(i + 1, xi, sigma, weight)?;
        let (p, nu) = self.atoms[i].clone();
        let mut w = weight;
        let mut added = 0;
        for m in 1..=self.cap {
            let leap = self.model.energy_leap(xi, &p);
            if leap.is_infinite() {
                break;
            }
            w *= nu / m as f64 * (-leap.value()).exp();
            xi.insert(p.clone());
            sigma.insert(p.clone());
            added += 1;
            self.visit(i + 1, xi, sigma, w)?;
        }
        for _ in 0..added {
            xi.remove_one(&p);
            sigma.remove_one(&p);
        }
        Ok(())
    }
}

/// Exact finite-volume Gibbs law on a discrete window by enumeration of all
/// configurations with at most `occupancy_cap` copies of each atom.
/// Branches are pruned at the first infinite leap, which is valid because
/// leaps are bounded below.
pub fn enumerate_bgd(
    model: &dyn DilutedModel,
    window: &Window,
    boundary: &ParticleConfiguration,
    occupancy_cap: u32,
    max_states: usize,
) -> Result<ExactDistribution> {
    let atoms = model
        .atoms(window)
        .ok_or_else(|| FfgError::InvalidModel(format!("{} has no atom list for this window", model.name())))?;
    let free_mass: f64 = atoms.iter().map(|(_, w)| w).sum();
    let mut e = Enumerator { model, atoms, cap: occupancy_cap.max(1), max_states, out: Vec::new(), nodes: 0 };
    let mut xi = boundary.clone();
    let mut sigma = ParticleConfiguration::new();
    e.visit(0, &mut xi, &mut sigma, 1.0)?;
    let total: f64 = e.out.iter().map(|(_, w)| w).sum();
    let mut states: Vec<(ParticleConfiguration, f64)> = e.out.into_iter().map(|(s, w)| (s, w / total)).collect();
    states.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ExactDistribution { states, partition: (-free_mass).exp() * total })
}

#[derive(Clone, Debug, Serialize)]
pub struct LawComparison {
    pub samples: usize,
    pub tv: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Empirical mass on states outside the exact support.
    pub off_support: f64,
}

/// Compare an empirical sample with an exact law: total variation and a
/// chi-square test in which bins with expected count below 5 are pooled.
pub fn compare_laws<K: Hash + Eq + Clone>(samples: &[K], exact: &[(K, f64)]) -> LawComparison {
    let n = samples.len();
    let mut counts: HashMap<&K, usize> = HashMap::new();
    for s in samples {
        *counts.entry(s).or_insert(0) += 1;
    }
    let nf = n as f64;
    let mut tv = 0.0;
    let mut matched = 0usize;
    let (mut chi, mut bins) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (k, p) in exact {
        let c = counts.get(k).copied().unwrap_or(0);
        matched += c;
        tv += (c as f64 / nf - p).abs();
        let expct = nf * p;
        if expct >= 5.0 {
            chi += (c as f64 - expct).powi(2) / expct;
            bins += 1;
        } else {
            pooled_obs += c as f64;
            pooled_exp += expct;
        }
    }
    let off = (n - matched) as f64;
    tv += off / nf;
    pooled_obs += off;
    if pooled_exp > 0.0 {
        chi += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    } else if pooled_obs > 0.0 {
        chi = f64::INFINITY;
    }
    let dof = bins.saturating_sub(1).max(1);
    let p_value = if chi.is_finite() {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(chi)
    } else {
        0.0
    };
    LawComparison { samples: n, tv: tv / 2.0, chi_square: chi, dof, p_value, off_support: off / nf }
}

pub fn compare(samples: &[ParticleConfiguration], exact: &ExactDistribution) -> LawComparison {
    compare_laws(samples, &exact.states)
}

/// Total variation between an empirical sample and a law given only through
/// its probability function.
pub fn tv_against<K: Hash + Eq, F: Fn(&K) -> f64>(samples: &[K], prob: F) -> f64 {
    let mut counts: HashMap<&K, usize> = HashMap::new();
    for s in samples {
        *counts.entry(s).or_insert(0) += 1;
    }
    let nf = samples.len() as f64;
    let (mut tv, mut covered) = (0.0, 0.0);
    for (k, c) in counts {
        let p = prob(k);
        covered += p;
        tv += (c as f64 / nf - p).abs();
    }
    (tv + (1.0 - covered).max(0.0)) / 2.0
}

/// Total variation between two empirical samples.
pub fn tv_between<K: Hash + Eq>(a: &[K], b: &[K]) -> f64 {
    let mut m: HashMap<&K, (f64, f64)> = HashMap::new();
    for k in a {
        m.entry(k).or_insert((0.0, 0.0)).0 += 1.0 / a.len() as f64;
    }
    for k in b {
        m.entry(k).or_insert((0.0, 0.0)).1 += 1.0 / b.len() as f64;
    }
    m.values().map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::WidomRowlinson;

    #[test]
    fn wr_two_by_two_partition_matches_closed_form() {
        let lam = 0.3;
        let m = WidomRowlinson::discrete(2, lam, lam, 1);
        let w = Window::lattice_box(&[0, 0], &[2, 2]);
        let ex = enumerate_bgd(&m, &w, &ParticleConfiguration::new(), 1, 1000).unwrap();
        assert_eq!(ex.states.len(), 31);
        let z = 2.0 * (1.0 + lam).powi(4) - 1.0;
        let p_empty = ex.probability(&ParticleConfiguration::new());
        assert!((p_empty - 1.0 / z).abs() < 1e-14);
        assert!((ex.partition - (-8.0 * lam).exp() * z).abs() < 1e-14);
    }

    #[test]
    fn comparison_of_exact_counts_is_perfect() {
        let exact = vec![(0u8, 0.5), (1u8, 0.25), (2u8, 0.25)];
        let s = vec![0, 0, 1, 2];
        let c = compare_laws(&s, &exact);
        assert_eq!(c.tv, 0.0);
        assert_eq!(tv_against(&s, |k| exact[*k as usize].1), 0.0);
    }
}
