use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{FfgError, Result};
use crate::ffg::{birth_order, build_clan, Budget, Clan};
use crate::measure::BaseMeasure;
use crate::model::{DilutedModel, Energy, ModelRef};
use crate::models::{opposite, tags, wr_type, WidomRowlinson};
use crate::parallel::{run_replicas, ExecMode};
use crate::rng::RngStreams;
use crate::space::{Location, LocationRegion, Norm, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};
use crate::stats::{linear_fit, LinearFit};

/// A majorant model together with a family of targets indexed by `eps >= 0`.
///
/// Every target is obtained from majorant particles through `project`, has
/// free intensity with density `density(eps, p)` in `[0, 1]` with respect to
/// the pushforward of the majorant intensity, and energy leaps `leap`
/// evaluated on projected particles.
pub trait MajorantCoupling: Send + Sync {
    fn name(&self) -> String;

    fn majorant(&self) -> &dyn DilutedModel;

    fn density(&self, eps: f64, p: &Particle) -> f64;

    fn leap(&self, eps: f64, eta: &ParticleConfiguration, p: &Particle) -> Energy;

    fn project(&self, _eps: f64, p: &Particle) -> Particle {
        p.clone()
    }

    /// Window on which clans are built so that every majorant particle
    /// projecting into `window` is a root.
    fn root_window(&self, window: &Window, _eps_max: f64) -> Window {
        window.clone()
    }
}

/// Targets with the majorant's interaction and intensity scaled by `1 - eps`.
pub struct ScaledIntensity {
    pub model: ModelRef,
}

impl MajorantCoupling for ScaledIntensity {
    fn name(&self) -> String {
        format!("{}-scaled", self.model.name())
    }

    fn majorant(&self) -> &dyn DilutedModel {
        self.model.as_ref()
    }

    fn density(&self, eps: f64, _p: &Particle) -> f64 {
        1.0 - eps
    }

    fn leap(&self, _eps: f64, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        self.model.energy_leap(eta, p)
    }
}

/// Soft-core Widom-Rowlinson targets with repulsion `c / eps` between
/// opposite types within distance `r`, converging to the hard-core majorant.
pub struct SoftToHard {
    pub model: WidomRowlinson,
    pub c: f64,
}

impl MajorantCoupling for SoftToHard {
    fn name(&self) -> String {
        "wr-soft-to-hard".into()
    }

    fn majorant(&self) -> &dyn DilutedModel {
        &self.model
    }

    fn density(&self, _eps: f64, _p: &Particle) -> f64 {
        1.0
    }

    fn leap(&self, eps: f64, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        let t = wr_type(p);
        let lattice = matches!(self.model.intensity.base, BaseMeasure::Counting(_));
        let mut e = 0.0;
        for (q, mult) in eta.distinct() {
            let qt = wr_type(q);
            if lattice && qt == t && q.location == p.location {
                return Energy::INFINITY;
            }
            if qt == opposite(t) && q.location.sup_dist(&p.location) <= self.model.r {
                if eps == 0.0 {
                    return Energy::INFINITY;
                }
                e += mult as f64 * self.c / eps;
            }
        }
        Energy::finite(e)
    }
}

/// Snapping operators of a discretization family; each moves a particle by at
/// most `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// Coordinates rounded down to the grid `eps Z^d`.
    SpatialGrid,
    /// Angles rounded down to the grid `eps Z`.
    AngleGrid,
}

fn snap(x: f64, eps: f64) -> f64 {
    eps * (x / eps).floor()
}

impl Discretization {
    pub fn apply(self, eps: f64, p: &Particle) -> Particle {
        if eps == 0.0 {
            return p.clone();
        }
        match self {
            Discretization::SpatialGrid => match &p.location {
                Location::Continuum(c) => {
                    let s: Vec<f64> = c.iter().map(|&x| snap(x, eps)).collect();
                    Particle::new(Location::continuum(&s), p.spin)
                }
                Location::Lattice(_) => p.clone(),
            },
            Discretization::AngleGrid => match p.spin {
                Spin::Angle(a) => Particle::new(p.location.clone(), Spin::Angle(snap(a, eps))),
                _ => p.clone(),
            },
        }
    }

    /// Displacement of `p` under the operator: sup distance of locations or
    /// angle difference.
    pub fn displacement(self, eps: f64, p: &Particle) -> f64 {
        let q = self.apply(eps, p);
        match (p.spin, q.spin) {
            (Spin::Angle(a), Spin::Angle(b)) if self == Discretization::AngleGrid => (a - b).abs(),
            _ => p.location.sup_dist(&q.location),
        }
    }
}

/// Discretized targets of a continuum limit model: the free process is
/// pushed through the snapping operator, the leap is the limit model's leap
/// on snapped particles, and optionally a snapped site holds at most one
/// particle of each spin. The majorant must have impact regions covering every
/// particle whose snapped image can change a snapped leap.
pub struct DiscretizedCoupling {
    pub majorant: ModelRef,
    pub limit: ModelRef,
    pub kind: Discretization,
    pub site_exclusion: bool,
}

impl MajorantCoupling for DiscretizedCoupling {
    fn name(&self) -> String {
        format!("{}-discretized", self.limit.name())
    }

    fn majorant(&self) -> &dyn DilutedModel {
        self.majorant.as_ref()
    }

    fn density(&self, _eps: f64, _p: &Particle) -> f64 {
        1.0
    }

    fn leap(&self, eps: f64, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        if self.site_exclusion && eps > 0.0 && eta.multiplicity(p) > 0 {
            return Energy::INFINITY;
        }
        self.limit.energy_leap(eta, p)
    }

    fn project(&self, eps: f64, p: &Particle) -> Particle {
        self.kind.apply(eps, p)
    }

    fn root_window(&self, window: &Window, eps_max: f64) -> Window {
        match self.kind {
            Discretization::SpatialGrid => window.inflate(eps_max),
            Discretization::AngleGrid => window.clone(),
        }
    }
}

/// Continuum Widom-Rowlinson with impact regions grown by `delta`: opposite
/// types within `r + delta` and the same type within `delta`. Majorant for
/// the spatial-grid discretization with mesh at most `delta`.
pub struct InflatedWr {
    pub base: WidomRowlinson,
    pub delta: f64,
}

impl DilutedModel for InflatedWr {
    fn name(&self) -> String {
        "wr-inflated".into()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn piece_mass(&self, piece: &WindowPiece) -> f64 {
        self.base.piece_mass(piece)
    }

    fn sample_piece(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle {
        self.base.sample_piece(piece, rng)
    }

    fn energy_leap(&self, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        self.base.energy_leap(eta, p)
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    fn impact_region(&self, p: &Particle) -> Window {
        let t = wr_type(p);
        let mut w = Window::ball(p.location.clone(), self.base.r + self.delta, Norm::Sup, tags(&[opposite(t)]));
        w.push(LocationRegion::Ball { center: p.location.clone(), radius: self.delta, norm: Norm::Sup }, tags(&[t]));
        w
    }

    fn density(&self, p: &Particle) -> f64 {
        self.base.density(p)
    }

    fn spin_quadrature(&self, set: &SpinSet, n: usize) -> Vec<(Spin, f64)> {
        self.base.spin_quadrature(set, n)
    }

    fn base_measure(&self) -> Option<BaseMeasure> {
        self.base.base_measure()
    }

    fn reference_particles(&self) -> Vec<Particle> {
        self.base.reference_particles()
    }
}

/// Samples of all targets obtained from one majorant clan.
#[derive(Clone, Debug, Serialize)]
pub struct CoupledDraw {
    pub eps: Vec<f64>,
    pub samples: Vec<ParticleConfiguration>,
    pub clan_size: usize,
}

/// Thin the majorant clan for one target: each cylinder is kept with
/// probability `density * exp(-(leap - dE))` given the projections of its kept
/// ancestors, using the cylinder's own flag.
pub fn coupled_thin(
    c: &dyn MajorantCoupling,
    clan: &Clan,
    eps: f64,
    boundary: &ParticleConfiguration,
) -> Result<Vec<bool>> {
    let de = c.majorant().energy_loss_bound();
    let projected: Vec<Particle> = clan.cylinders.iter().map(|cy| c.project(eps, &cy.basis)).collect();
    let mut kept = vec![false; clan.cylinders.len()];
    for id in birth_order(clan)? {
        let id = id as usize;
        let cy = &clan.cylinders[id];
        let d = c.density(eps, &cy.basis);
        if !(0.0..=1.0).contains(&d) {
            return Err(FfgError::CouplingHypothesis(format!("density {d} outside [0, 1] at eps {eps}")));
        }
        if d == 0.0 {
            continue;
        }
        let mut xi = boundary.clone();
        for &a in &clan.ancestors[id] {
            if kept[a as usize] {
                xi.insert(projected[a as usize].clone());
            }
        }
        let leap = c.leap(eps, &xi, &projected[id]);
        if leap.is_infinite() {
            continue;
        }
        let tilted = leap.value() - d.ln();
        if tilted < de - 1e-12 {
            return Err(FfgError::CouplingHypothesis(format!(
                "tilted leap {tilted} below the majorant bound {de} at eps {eps}"
            )));
        }
        kept[id] = cy.flag < (-(tilted - de)).exp();
    }
    Ok(kept)
}

fn projected_at_zero(c: &dyn MajorantCoupling, clan: &Clan, kept: &[bool], eps: f64, window: &Window) -> ParticleConfiguration {
    clan.cylinders
        .iter()
        .filter(|cy| kept[cy.id as usize] && cy.alive_at(0.0))
        .map(|cy| c.project(eps, &cy.basis))
        .filter(|p| window.contains(p))
        .collect()
}

/// Build one majorant clan on the root window of `window` and thin it for
/// every `eps`. `boundary` selects finite-volume sampling as in
/// [`crate::ffg::perfect_sample`].
pub fn coupled_samples(
    c: &dyn MajorantCoupling,
    window: &Window,
    eps_list: &[f64],
    boundary: Option<&ParticleConfiguration>,
    budget: &Budget,
    streams: &RngStreams,
) -> Result<CoupledDraw> {
    let eps_max = eps_list.iter().cloned().fold(0.0, f64::max);
    let root = c.root_window(window, eps_max);
    let clan = build_clan(c.majorant(), &root, boundary.map(|_| &root), budget, streams)?;
    let empty = ParticleConfiguration::new();
    let b = boundary.unwrap_or(&empty);
    let mut samples = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let kept = coupled_thin(c, &clan, eps, b)?;
        samples.push(projected_at_zero(c, &clan, &kept, eps, window));
    }
    Ok(CoupledDraw { eps: eps_list.to_vec(), samples, clan_size: clan.size() })
}

/// Coupled samples of a discretization family; identical to
/// [`coupled_samples`] with the family's snapping.
pub fn coupled_discretization(
    c: &DiscretizedCoupling,
    window: &Window,
    eps_list: &[f64],
    budget: &Budget,
    streams: &RngStreams,
) -> Result<CoupledDraw> {
    coupled_samples(c, window, eps_list, None, budget, streams)
}

/// Every particle of `a` has a partner in `b` with the same spin class
/// within `eps` (sup distance of locations plus angle difference), and vice
/// versa, partners being distinct.
pub fn matched_agreement(a: &ParticleConfiguration, b: &ParticleConfiguration, eps: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let close = |p: &Particle, q: &Particle| {
        let spin_gap = match (p.spin, q.spin) {
            (Spin::Angle(x), Spin::Angle(y)) => (x - y).abs(),
            (s, t) if s == t => 0.0,
            _ => return false,
        };
        p.location.sup_dist(&q.location) <= eps + 1e-12 && spin_gap <= eps + 1e-12
    };
    let bs: Vec<&Particle> = b.particles().collect();
    let mut used = vec![false; bs.len()];
    for p in a.particles() {
        match (0..bs.len()).find(|&j| !used[j] && close(p, bs[j])) {
            Some(j) => used[j] = true,
            None => return false,
        }
    }
    true
}

/// Check on random probes that majorant particles outside the impact region
/// of `p` never change a target leap, and that densities and tilted leaps
/// satisfy the coupling bounds.
pub fn probe_hypotheses(
    c: &dyn MajorantCoupling,
    eps_list: &[f64],
    probe_window: &Window,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<()> {
    let m = c.majorant();
    let de = m.energy_loss_bound();
    let mass: Vec<f64> = probe_window.pieces.iter().map(|p| m.piece_mass(p)).collect();
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return Ok(());
    }
    let draw = |rng: &mut dyn RngCore| {
        let mut u = rand::Rng::random::<f64>(rng) * total;
        let mut k = 0;
        while k + 1 < mass.len() && u >= mass[k] {
            u -= mass[k];
            k += 1;
        }
        m.sample_piece(&probe_window.pieces[k], rng)
    };
    let empty = ParticleConfiguration::new();
    for _ in 0..trials {
        let p = draw(rng);
        let q = draw(rng);
        let inside = m.impact_region(&p).contains(&q);
        for &eps in eps_list {
            let d = c.density(eps, &p);
            if !(0.0..=1.0).contains(&d) {
                return Err(FfgError::CouplingHypothesis(format!("density {d} outside [0, 1]")));
            }
            let (pp, qq) = (c.project(eps, &p), c.project(eps, &q));
            let alone = c.leap(eps, &empty, &pp);
            if !alone.is_infinite() && d > 0.0 && alone.value() - d.ln() < de - 1e-12 {
                return Err(FfgError::CouplingHypothesis(format!("tilted leap below {de} at eps {eps}")));
            }
            if !inside {
                let with = c.leap(eps, &ParticleConfiguration::from_particles(vec![qq]), &pp);
                if !with.approx_eq(alone, 1e-12) {
                    return Err(FfgError::CouplingHypothesis(format!(
                        "particle outside the majorant impact region changes a leap at eps {eps}"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingRow {
    pub distance: f64,
    pub replicas: u64,
    pub interactions: u64,
    pub probability: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingTable {
    pub rows: Vec<MixingRow>,
    /// Fit of `ln p` against distance over rows with at least one interaction.
    pub fit: Option<LinearFit>,
}

/// True when the clans of the roots in `f` and in `g`, built from one free
/// process, share a cylinder.
pub fn clans_interact(clan: &Clan, f: &Window, g: &Window) -> bool {
    let roots = |w: &Window| -> Vec<u32> {
        clan.cylinders
            .iter()
            .filter(|c| c.alive_at(0.0) && w.contains(&c.basis))
            .map(|c| c.id)
            .collect()
    };
    let a = clan.ancestor_closure(&roots(f));
    let b = clan.ancestor_closure(&roots(g));
    a.iter().zip(&b).any(|(x, y)| *x && *y)
}

/// Empirical probability that the clans of `f` and of each `g` interact.
pub fn mixing_estimate(
    m: &dyn DilutedModel,
    f: &Window,
    gs: &[(f64, Window)],
    replicas: u64,
    budget: &Budget,
    streams: &RngStreams,
    mode: ExecMode,
) -> Result<MixingTable> {
    let mut rows = Vec::new();
    for (k, (distance, g)) in gs.iter().enumerate() {
        let s = streams.child(k as u64);
        let hits: Vec<Result<bool>> = run_replicas(replicas, mode, |r| {
            if g == f {
                return Ok(true);
            }
            let root = f.clone().union(g.clone());
            let clan = build_clan(m, &root, None, budget, &s.replica(r))?;
            Ok(clans_interact(&clan, f, g))
        });
        let mut interactions = 0u64;
        for h in hits {
            interactions += h? as u64;
        }
        let n = replicas as f64;
        let p = interactions as f64 / n;
        rows.push(MixingRow {
            distance: *distance,
            replicas,
            interactions,
            probability: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.interactions > 0).map(|r| (r.distance, r.probability.ln())).collect();
    let fit = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(linear_fit(&x, &y))
    } else {
        None
    };
    Ok(MixingTable { rows, fit })
}

/// A pair of facing boxes `[0, w] x [0, len]` and `[w + D, 2w + D] x [0, len]`.
pub fn facing_strips(width: f64, len: f64, distances: &[f64]) -> (Window, Vec<(f64, Window)>) {
    let f = Window::continuum_box(&[0.0, 0.0], &[width, len]);
    let gs = distances
        .iter()
        .map(|&d| (d, Window::continuum_box(&[width + d, 0.0], &[2.0 * width + d, len])))
        .collect();
    (f, gs)
}
