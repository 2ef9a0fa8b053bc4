use serde::Serialize;

use super::clan::{build_clan, Budget, Clan};
use crate::error::{FfgError, Result};
use crate::model::{acceptance_probability, DilutedModel};
use crate::rng::RngStreams;
use crate::space::{ParticleConfiguration, Window};

/// Cylinder ids in increasing birth order; fails on equal birth times.
pub fn birth_order(clan: &Clan) -> Result<Vec<u32>> {
    let mut order: Vec<u32> = (0..clan.cylinders.len() as u32).collect();
    order.sort_by(|&a, &b| clan.cylinders[a as usize].birth.total_cmp(&clan.cylinders[b as usize].birth));
    for w in order.windows(2) {
        let (a, b) = (&clan.cylinders[w[0] as usize], &clan.cylinders[w[1] as usize]);
        if a.birth == b.birth {
            return Err(FfgError::TieOnBirthTimes(a.birth));
        }
    }
    Ok(order)
}

/// Decide every cylinder of the clan in birth order with the given acceptance
/// rule, which sees the boundary plus the kept ancestors of the cylinder.
pub fn thin_with<F>(clan: &Clan, boundary: &ParticleConfiguration, mut accept: F) -> Result<Vec<bool>>
where
    F: FnMut(&ParticleConfiguration, usize) -> Result<bool>,
{
    let order = birth_order(clan)?;
    let mut kept = vec![false; clan.cylinders.len()];
    for id in order {
        let mut xi = boundary.clone();
        for &a in &clan.ancestors[id as usize] {
            if kept[a as usize] {
                xi.insert(clan.cylinders[a as usize].basis.clone());
            }
        }
        kept[id as usize] = accept(&xi, id as usize)?;
    }
    Ok(kept)
}

/// Thinning with the model's own acceptance probabilities.
pub fn thin(model: &dyn DilutedModel, clan: &Clan, boundary: &ParticleConfiguration) -> Result<Vec<bool>> {
    let de = model.energy_loss_bound();
    thin_with(clan, boundary, |xi, id| {
        let c = &clan.cylinders[id];
        let a = acceptance_probability(model.energy_leap(xi, &c.basis), de)?;
        Ok(c.flag < a)
    })
}

/// Kept cylinders alive at time 0 with basis in `window`.
pub fn kept_at_zero(clan: &Clan, kept: &[bool], window: &Window) -> ParticleConfiguration {
    clan.cylinders
        .iter()
        .filter(|c| kept[c.id as usize] && c.alive_at(0.0) && window.contains(&c.basis))
        .map(|c| c.basis.clone())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfectDraw {
    pub sample: ParticleConfiguration,
    pub clan: Clan,
    pub kept: Vec<bool>,
}

/// Exact draw on `window`.
///
/// With `boundary = Some(eta)` the draw follows the finite-volume
/// specification on `window` with boundary condition `eta` (which may be
/// empty). With `None` it is a draw of the unique infinite-volume Gibbs
/// measure restricted to `window`, which requires the clans to be finite.
pub fn perfect_sample_detailed(
    model: &dyn DilutedModel,
    window: &Window,
    boundary: Option<&ParticleConfiguration>,
    budget: &Budget,
    streams: &RngStreams,
) -> Result<PerfectDraw> {
    let empty = ParticleConfiguration::new();
    let clan = build_clan(model, window, boundary.map(|_| window), budget, streams)?;
    let kept = thin(model, &clan, boundary.unwrap_or(&empty))?;
    let sample = kept_at_zero(&clan, &kept, window);
    Ok(PerfectDraw { sample, clan, kept })
}

pub fn perfect_sample(
    model: &dyn DilutedModel,
    window: &Window,
    boundary: Option<&ParticleConfiguration>,
    budget: &Budget,
    streams: &RngStreams,
) -> Result<ParticleConfiguration> {
    perfect_sample_detailed(model, window, boundary, budget, streams).map(|d| d.sample)
}
