use serde::Serialize;

use crate::error::{FfgError, Result};
use crate::ffg::{build_clan, Budget};
use crate::measure::BaseMeasure;
use crate::model::{poisson, sample_free_process, DilutedModel};
use crate::models::lattice_sites;
use crate::numerics::composite_gauss_legendre;
use crate::parallel::{run_replicas, ExecMode};
use crate::rng::RngStreams;
use crate::space::{Location, LocationRegion, Norm, Particle, Window, WindowPiece};
use crate::stats::{linear_fit, mean_var, tail};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Coefficient below one: clans are dominated by a subcritical branching process.
    HeavilyDiluted,
    /// Coefficient at least one.
    NotHeavilyDiluted,
    /// Supremum only estimated over probe particles.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMethod {
    ClosedForm,
    SupremumSampled,
}

#[derive(Clone, Debug, Serialize)]
pub struct DilutenessReport {
    pub model: String,
    pub alpha: f64,
    pub regime: Regime,
    pub method: AlphaMethod,
    pub literature: Option<f64>,
    pub note: String,
}

fn regime_of(alpha: f64) -> Regime {
    if alpha < 1.0 {
        Regime::HeavilyDiluted
    } else {
        Regime::NotHeavilyDiluted
    }
}

/// Diluteness coefficient `sup exp(-dE) / q(g) * int_{I(g)} q dnu` with the
/// model's size function `q`. Closed forms are used when the model provides
/// one; otherwise the supremum is taken over the model's reference particles
/// and flagged as sampled.
pub fn alpha_f1(m: &dyn DilutedModel) -> DilutenessReport {
    if let Some(c) = m.closed_form_alpha() {
        return DilutenessReport {
            model: m.name(),
            alpha: c.alpha,
            regime: regime_of(c.alpha),
            method: AlphaMethod::ClosedForm,
            literature: c.literature,
            note: c.note,
        };
    }
    let alpha = alpha_numeric(m, &m.reference_particles(), 16).unwrap_or(f64::NAN);
    DilutenessReport {
        model: m.name(),
        alpha,
        regime: Regime::Unknown,
        method: AlphaMethod::SupremumSampled,
        literature: None,
        note: "supremum over probe particles only".into(),
    }
}

/// Numeric supremum over `probes` of the diluteness integral.
pub fn alpha_numeric(m: &dyn DilutedModel, probes: &[Particle], nodes: usize) -> Result<f64> {
    let tilt = (-m.energy_loss_bound()).exp();
    let mut best: f64 = 0.0;
    for g in probes {
        let v = impact_integral(m, g, &|p: &Particle| m.size(p), nodes)?;
        best = best.max(tilt * v / m.size(g));
    }
    Ok(best)
}

fn integrate_region(
    base: BaseMeasure,
    region: &LocationRegion,
    f: &dyn Fn(&Location) -> f64,
    nodes: usize,
) -> Result<f64> {
    let unsupported = || FfgError::InvalidModel("region not supported by the quadrature".into());
    match base {
        BaseMeasure::Counting(d) => {
            let sites = match region {
                LocationRegion::Ball { center, radius, norm } => {
                    let ranges: Vec<(i64, i64)> = (0..d)
                        .map(|i| ((center.coord(i) - radius).ceil() as i64, (center.coord(i) + radius).floor() as i64 + 1))
                        .collect();
                    let bx = LocationRegion::LatticeBox {
                        lo: ranges.iter().map(|r| r.0).collect(),
                        hi: ranges.iter().map(|r| r.1).collect(),
                    };
                    lattice_sites(&bx)
                        .unwrap()
                        .into_iter()
                        .filter(|s| Location::lattice(s).dist(center, *norm) <= *radius)
                        .collect()
                }
                LocationRegion::Box { lo, hi } => {
                    let bx = LocationRegion::LatticeBox {
                        lo: lo.iter().map(|x| x.ceil() as i64).collect(),
                        hi: hi.iter().map(|x| x.ceil() as i64).collect(),
                    };
                    lattice_sites(&bx).unwrap()
                }
                other => lattice_sites(other).ok_or_else(unsupported)?,
            };
            Ok(sites.iter().map(|s| f(&Location::lattice(s))).sum())
        }
        BaseMeasure::Lebesgue(d) => {
            let (lo, hi): (Vec<f64>, Vec<f64>) = match region {
                LocationRegion::Box { lo, hi } => (lo.clone(), hi.clone()),
                LocationRegion::Ball { center, radius, norm: Norm::Sup } => (
                    (0..d).map(|i| center.coord(i) - radius).collect(),
                    (0..d).map(|i| center.coord(i) + radius).collect(),
                ),
                LocationRegion::Ball { center, radius, norm: Norm::Euclid } => {
                    return match d {
                        1 => integrate_region(
                            base,
                            &LocationRegion::Ball { center: center.clone(), radius: *radius, norm: Norm::Sup },
                            f,
                            nodes,
                        ),
                        2 => {
                            let (cx, cy) = (center.coord(0), center.coord(1));
                            let rq = composite_gauss_legendre(nodes, 4, 0.0, *radius);
                            let tq = composite_gauss_legendre(nodes, 8, 0.0, 2.0 * std::f64::consts::PI);
                            let mut s = 0.0;
                            for (rho, wr) in &rq {
                                for (th, wt) in &tq {
                                    let p = Location::continuum(&[cx + rho * th.cos(), cy + rho * th.sin()]);
                                    s += wr * wt * rho * f(&p);
                                }
                            }
                            Ok(s)
                        }
                        _ => Err(unsupported()),
                    };
                }
                _ => return Ok(0.0),
            };
            let axes: Vec<Vec<(f64, f64)>> =
                (0..d).map(|i| composite_gauss_legendre(nodes, 4, lo[i], hi[i])).collect();
            let mut idx = vec![0usize; d];
            let mut s = 0.0;
            loop {
                let mut w = 1.0;
                let mut c = Vec::with_capacity(d);
                for i in 0..d {
                    let (x, wx) = axes[i][idx[i]];
                    c.push(x);
                    w *= wx;
                }
                s += w * f(&Location::continuum(&c));
                let mut i = 0;
                loop {
                    if i == d {
                        return Ok(s);
                    }
                    idx[i] += 1;
                    if idx[i] < axes[i].len() {
                        break;
                    }
                    idx[i] = 0;
                    i += 1;
                }
            }
        }
    }
}

/// Numeric value of `int_{I(g)} q dnu` by quadrature over the pieces of the
/// impact region, which are assumed disjoint.
pub fn impact_integral(
    m: &dyn DilutedModel,
    g: &Particle,
    q: &dyn Fn(&Particle) -> f64,
    nodes: usize,
) -> Result<f64> {
    let base = m
        .base_measure()
        .ok_or_else(|| FfgError::InvalidModel(format!("{} has no base measure", m.name())))?;
    let imp = m.impact_region(g);
    let mut total = 0.0;
    for WindowPiece { region, spins } in &imp.pieces {
        for (s, ws) in m.spin_quadrature(spins, nodes) {
            let f = |loc: &Location| {
                let p = Particle::new(loc.clone(), s);
                q(&p) * m.density(&p)
            };
            total += ws * integrate_region(base, region, &f, nodes)?;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct TailPoint {
    pub k: usize,
    pub clan: f64,
    pub galton_watson: f64,
    pub sigma: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GwReport {
    pub replicas: u64,
    pub alpha: f64,
    pub gen0_mean: f64,
    pub clan_mean: f64,
    pub clan_mean_se: f64,
    pub mean_bound: f64,
    pub mean_ok: bool,
    pub tail: Vec<TailPoint>,
    pub violations: usize,
    /// `exp(slope)` of a log-linear fit of the clan tail.
    pub tail_ratio: f64,
    /// `(b, E[exp(b * size)])` estimates.
    pub exponential_moments: Vec<(f64, f64)>,
    pub budget_exceeded: u64,
}

/// Total progeny of the branching process that dominates clans: Poisson
/// roots of mean `exp(-dE) nu(window)` and Poisson offspring of mean
/// `exp(-dE) nu(I(g))` drawn from the impact region of each individual.
pub fn galton_watson_total(m: &dyn DilutedModel, window: &Window, cap: usize, streams: &RngStreams) -> usize {
    let tilt = (-m.energy_loss_bound()).exp();
    let mut rng = streams.stream(0);
    let mut stack = sample_free_process(m, window, tilt, &mut rng);
    let mut total = 0usize;
    while let Some(g) = stack.pop() {
        total += 1;
        if total >= cap {
            return cap;
        }
        let imp = m.impact_region(&g);
        for (k, piece) in imp.pieces.iter().enumerate() {
            for _ in 0..poisson(tilt * m.piece_mass(piece), &mut rng) {
                let p = m.sample_piece(piece, &mut rng);
                if !imp.in_earlier_piece(&p, k) {
                    stack.push(p);
                }
            }
        }
    }
    total
}

/// Compare clan sizes with the dominating branching process.
pub fn gw_domination_check(
    m: &dyn DilutedModel,
    window: &Window,
    alpha: f64,
    replicas: u64,
    kmax: usize,
    streams: &RngStreams,
    mode: ExecMode,
) -> GwReport {
    let budget = Budget { max_cylinders: 100_000, max_generations: 10_000 };
    let clans: Vec<Option<usize>> = run_replicas(replicas, mode, |r| {
        build_clan(m, window, None, &budget, &streams.replica(r)).ok().map(|c| c.size())
    });
    let exceeded = clans.iter().filter(|c| c.is_none()).count() as u64;
    let sizes: Vec<usize> = clans.into_iter().map(|c| c.unwrap_or(budget.max_cylinders)).collect();
    let gw_streams = streams.child(0x6757);
    let gw: Vec<usize> = run_replicas(replicas, mode, |r| {
        galton_watson_total(m, window, budget.max_cylinders, &gw_streams.replica(r))
    });
    let n = replicas as f64;
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let (clan_mean, clan_var) = mean_var(&xs);
    let clan_mean_se = (clan_var / n).sqrt();
    let gen0_mean = (-m.energy_loss_bound()).exp() * m.intensity_mass(window);
    let mean_bound = if alpha < 1.0 { gen0_mean / (1.0 - alpha) } else { f64::INFINITY };
    let tc = tail(&sizes, kmax);
    let tg = tail(&gw, kmax);
    let points: Vec<TailPoint> = (0..=kmax)
        .map(|k| {
            let (pc, pg) = (tc[k], tg[k]);
            let sigma = (pc * (1.0 - pc) / n + pg * (1.0 - pg) / n).sqrt();
            TailPoint { k, clan: pc, galton_watson: pg, sigma, violated: pc > pg + 3.0 * sigma }
        })
        .collect();
    let violations = points.iter().filter(|p| p.violated).count();
    let fit_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.clan * n >= 30.0)
        .map(|p| (p.k as f64, p.clan.ln()))
        .collect();
    let tail_ratio = if fit_pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = fit_pts.into_iter().unzip();
        linear_fit(&x, &y).slope.exp()
    } else {
        0.0
    };
    let exponential_moments = [0.05, 0.1, 0.2]
        .iter()
        .map(|&b| (b, xs.iter().map(|s| (b * s).exp()).sum::<f64>() / n))
        .collect();
    GwReport {
        replicas,
        alpha,
        gen0_mean,
        clan_mean,
        clan_mean_se,
        mean_bound,
        mean_ok: clan_mean <= mean_bound + 3.0 * clan_mean_se,
        tail: points,
        violations,
        tail_ratio,
        exponential_moments,
        budget_exceeded: exceeded,
    }
}
