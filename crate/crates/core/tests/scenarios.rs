use std::f64::consts::PI;
use std::sync::Arc;

use ffg_core::contour::IsingContourModel;
use ffg_core::coupling::*;
use ffg_core::diluteness::gw_domination_check;
use ffg_core::ffg::{build_clan, perfect_sample, Budget};
use ffg_core::models::{GeneralizedWr, Orientation, StepTable, ThinRods, WidomRowlinson};
use ffg_core::oracle::{compare, enumerate_bgd};
use ffg_core::parallel::{run_replicas, ExecMode};
use ffg_core::pirogov_sinai::*;
use ffg_core::stats::mean_var;
use ffg_core::{FfgError, Location, Particle, ParticleConfiguration, RngStreams, Window};

#[test]
fn single_site_wr_has_three_states() {
    let lam = 0.7;
    let m = WidomRowlinson::discrete(2, lam, lam, 1);
    let w = Window::lattice_box(&[0, 0], &[1, 1]);
    let ex = enumerate_bgd(&m, &w, &ParticleConfiguration::new(), 1, 10).unwrap();
    assert_eq!(ex.states.len(), 3);
    assert!((ex.probability(&ParticleConfiguration::new()) - 1.0 / (1.0 + 2.0 * lam)).abs() < 1e-15);
}

#[test]
fn exact_law_is_invariant_under_reflection() {
    let m = WidomRowlinson::discrete(2, 0.3, 0.6, 1);
    let w = Window::lattice_box(&[0, 0], &[3, 2]);
    let ex = enumerate_bgd(&m, &w, &ParticleConfiguration::new(), 1, 10_000).unwrap();
    let total: f64 = ex.states.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for (s, p) in &ex.states {
        let mirrored: ParticleConfiguration = s
            .particles()
            .map(|q| {
                let c = q.location.as_lattice().unwrap();
                Particle::new(Location::lattice(&[2 - c[0], c[1]]), q.spin)
            })
            .collect();
        assert!((ex.probability(&mirrored) - p).abs() < 1e-14);
    }
}

#[test]
fn free_process_roots_have_the_intensity_mean() {
    let m = WidomRowlinson::continuum(2, 0.25, 0.25, 1.0);
    let w = Window::continuum_box(&[0.0, 0.0], &[2.0, 2.0]);
    let s = RngStreams::new(21, 0);
    let budget = Budget { max_cylinders: 2_000, max_generations: 10_000 };
    let roots: Vec<f64> = run_replicas(20_000, ExecMode::Parallel, |r| {
        match build_clan(&m, &w, Some(&w), &budget, &s.replica(r)) {
            Ok(c) => c.roots as f64,
            Err(e) => panic!("{e}"),
        }
    });
    let (mean, _) = mean_var(&roots);
    assert!((mean - 2.0).abs() < 3.0 * (2.0f64 / 20_000.0).sqrt(), "{mean}");
}

#[test]
fn supercritical_clans_exhaust_the_budget() {
    let m = WidomRowlinson::continuum(2, 0.75, 0.75, 1.0);
    let w = Window::continuum_box(&[0.0, 0.0], &[4.0, 4.0]);
    let budget = Budget { max_cylinders: 2_000, max_generations: 10_000 };
    let s = RngStreams::new(22, 0);
    let failed = (0..200)
        .filter(|&r| matches!(build_clan(&m, &w, None, &budget, &s.replica(r)), Err(FfgError::BudgetExceeded(_))))
        .count();
    assert!(failed > 190, "{failed}");
}

#[test]
fn clan_tail_decays_no_slower_than_the_branching_total_progeny() {
    let m = WidomRowlinson::continuum(2, 0.05, 0.05, 1.0);
    let w = Window::continuum_box(&[0.0, 0.0], &[2.0, 2.0]);
    let alpha: f64 = 0.2;
    let g = gw_domination_check(&m, &w, alpha, 20_000, 30, &RngStreams::new(23, 0), ExecMode::Parallel);
    let gw_rate = alpha * (1.0 - alpha).exp();
    assert!(g.tail_ratio > 0.0 && g.tail_ratio <= gw_rate, "{} vs {gw_rate}", g.tail_ratio);
    let moments: Vec<f64> = g.exponential_moments.iter().map(|(_, v)| *v).collect();
    assert!(moments.iter().all(|v| v.is_finite()));
    assert!(moments.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn ising_contour_families_match_enumeration_at_high_beta() {
    let m = IsingContourModel::in_site_box(4.0, [0, 0], 3, 3).unwrap();
    let w = m.anchor_window().unwrap();
    let empty = ParticleConfiguration::new();
    let exact = enumerate_bgd(&m, &w, &empty, 1, 100_000).unwrap();
    let s = RngStreams::new(24, 0);
    let samples = run_replicas(100_000, ExecMode::Parallel, |r| {
        perfect_sample(&m, &w, Some(&empty), &Budget::default(), &s.replica(r)).unwrap()
    });
    let c = compare(&samples, &exact);
    assert!(c.tv < 0.02 && c.off_support == 0.0, "{c:?}");
}

#[test]
fn soft_core_targets_match_their_laws_and_harden() {
    let base = WidomRowlinson::discrete(2, 0.3, 0.3, 1);
    let c = SoftToHard { model: base.clone(), c: 1.0 };
    let w = Window::lattice_box(&[0, 0], &[2, 2]);
    let empty = ParticleConfiguration::new();
    let eps = [1.0, 0.25, 0.01, 0.0];
    let s = RngStreams::new(25, 0);
    let n = 50_000;
    let draws = run_replicas(n, ExecMode::Parallel, |r| {
        coupled_samples(&c, &w, &eps, Some(&empty), &Budget::default(), &s.replica(r)).unwrap().samples
    });
    let hard = enumerate_bgd(&base, &w, &empty, 1, 1000).unwrap();
    for (i, &e) in eps.iter().enumerate() {
        let at: Vec<ParticleConfiguration> = draws.iter().map(|d| d[i].clone()).collect();
        let exact = if e == 0.0 {
            hard.clone()
        } else {
            let soft = GeneralizedWr::new(base.intensity.clone(), StepTable::constant(1.0, 1.0 / e), StepTable::constant(-1.0, 0.0));
            enumerate_bgd(&soft, &w, &empty, 1, 10_000).unwrap()
        };
        let own = compare(&at, &exact);
        assert!(own.tv < 0.02 && own.p_value > 1e-4, "eps {e}: {own:?}");
        if e <= 0.01 {
            assert!(compare(&at, &hard).tv < 0.03);
        }
    }
}

#[test]
fn rod_angle_discretization_agreement_grows_with_resolution() {
    let rods = ThinRods::new(0.2, 0.5, Orientation::Uniform);
    let c = DiscretizedCoupling {
        majorant: Arc::new(rods.clone()),
        limit: Arc::new(rods),
        kind: Discretization::AngleGrid,
        site_exclusion: false,
    };
    let w = Window::continuum_box(&[0.0, 0.0], &[3.0, 3.0]);
    let eps: Vec<f64> = [2.0, 4.0, 8.0, 32.0].iter().map(|n| PI / n).chain([0.0]).collect();
    let s = RngStreams::new(26, 0);
    let agree = run_replicas(2_000, ExecMode::Parallel, |r| {
        let d = coupled_discretization(&c, &w, &eps, &Budget::default(), &s.replica(r)).unwrap();
        (0..4).map(|i| matched_agreement(&d.samples[i], &d.samples[4], eps[i])).collect::<Vec<bool>>()
    });
    let counts: Vec<usize> = (0..4).map(|i| agree.iter().filter(|v| v[i]).count()).collect();
    assert!(counts.windows(2).all(|p| p[0] <= p[1]) && counts[0] < counts[3], "{counts:?}");
}

#[test]
fn islands_around_the_centre_become_rarer_as_beta_grows() {
    let mut fractions = Vec::new();
    for beta in [1.0, 2.0, 4.0] {
        let sampler = AlignmentSampler::new(PottsParams::new(2, 1, beta).unwrap()).unwrap();
        let region = box_sites([2, 2], 3, 3);
        let s = RngStreams::new(27, 0);
        let n = 20_000;
        let hits = (0..n)
            .filter(|&r| {
                let cs = sampler.exterior_contours(&region, 0, &s.replica(r)).unwrap();
                cs.iter().any(|c| c.support.contains(&[3, 3]) || c.encloses([3, 3]))
            })
            .count();
        fractions.push(hits as f64 / n as f64);
    }
    assert!(fractions[0] > fractions[1] && fractions[1] > fractions[2], "{fractions:?}");
}

#[test]
fn wr_contours_with_empty_sites_lose_weight_as_fugacity_grows() {
    let region = box_sites([0, 0], 3, 3);
    let mut checked = 0;
    for c in wr_catalog(&region, 1, 5.0) {
        if !c.labels.contains(&WR_EMPTY) {
            continue;
        }
        let recompute = |lambda: f64| {
            let e = contour_energy(&c.support, &c.labels, c.exterior, &SpinSystem::WidomRowlinson { r: 1, lambda });
            PsContour { energy: e, ..c.clone() }
        };
        let (a, b) = (recompute(5.0), recompute(10.0));
        let (wa, wb) = (wr_contour_intensity(&a, 1, 5.0, 12).unwrap(), wr_contour_intensity(&b, 1, 10.0, 12).unwrap());
        assert!(wb < wa, "{wa} {wb}");
        checked += 1;
    }
    assert!(checked > 0);
}

fn potts_fields(q: u16, region: &[[i64; 2]]) -> impl Iterator<Item = SpinField> + '_ {
    (0..(q as u64).pow(region.len() as u32)).map(move |mut k| {
        let mut f = SpinField::constant(region.to_vec(), 0);
        for v in f.values.iter_mut() {
            *v = (k % q as u64) as u16;
            k /= q as u64;
        }
        f
    })
}

type ContourKey = Vec<(Vec<[i64; 2]>, Vec<u16>)>;

fn exterior_key(cs: &[PsContour]) -> ContourKey {
    let mut k: ContourKey = cs
        .iter()
        .filter(|c| !cs.iter().any(|o| o.encloses(c.support[0])))
        .map(|c| (c.support.clone(), c.labels.clone()))
        .collect();
    k.sort();
    k
}

#[test]
fn exterior_contours_follow_their_conditional_law() {
    let params = PottsParams::new(2, 1, 1.0).unwrap();
    let sampler = AlignmentSampler::new(params).unwrap();
    let region = box_sites([0, 0], 4, 3);
    let exact = ExactPotts::new(&params, &region, 0, 1e6).unwrap();
    let sys = SpinSystem::Potts { q: 2, r: 1 };
    let mut law: std::collections::BTreeMap<ContourKey, f64> = Default::default();
    for f in potts_fields(2, &region) {
        *law.entry(exterior_key(&extract_contours(&f, &sys))).or_insert(0.0) += exact.probability(&f);
    }
    let law: Vec<(ContourKey, f64)> = law.into_iter().collect();
    let s = RngStreams::new(28, 0);
    let samples: Vec<ContourKey> =
        (0..50_000).map(|r| exterior_key(&sampler.exterior_contours(&region, 0, &s.replica(r)).unwrap())).collect();
    let c = ffg_core::oracle::compare_laws(&samples, &law);
    assert!(c.tv < 0.03, "{c:?}");
}

#[test]
fn potts_laws_are_symmetric_in_the_boundary_label() {
    let params = PottsParams::new(3, 1, 0.7).unwrap();
    let region = box_sites([0, 0], 3, 2);
    let (a, b) = (ExactPotts::new(&params, &region, 0, 1e6).unwrap(), ExactPotts::new(&params, &region, 1, 1e6).unwrap());
    for f in potts_fields(3, &region) {
        let swapped = SpinField {
            values: f.values.iter().map(|&v| [1, 0, 2][v as usize]).collect(),
            outside: 1,
            ..f.clone()
        };
        assert!((a.probability(&f) - b.probability(&swapped)).abs() < 1e-15);
    }
}
