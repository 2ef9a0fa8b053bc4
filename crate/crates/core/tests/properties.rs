use std::sync::Arc;

use proptest::prelude::*;

use ffg_core::coupling::{coupled_samples, Discretization, ScaledIntensity};
use ffg_core::ffg::{build_clan, perfect_sample, thin, Budget};
use ffg_core::model::validate_model;
use ffg_core::models::{wr_type, NonInteracting, Orientation, Symbiotic, ThinRods, TolerantWr, WidomRowlinson};
use ffg_core::parallel::{run_replicas, ExecMode};
use ffg_core::pirogov_sinai::*;
use ffg_core::{DilutedModel, Location, Particle, ParticleConfiguration, RngStreams, Spin, Window};

fn particle() -> impl Strategy<Value = Particle> {
    (-5.0..5.0f64, -5.0..5.0f64, prop::bool::ANY)
        .prop_map(|(x, y, plus)| Particle::new(Location::continuum(&[x, y]), Spin::Tag(if plus { '+' } else { '-' })))
}

fn wr_admissible_config(c: &ParticleConfiguration, r: f64) -> bool {
    let ps: Vec<&Particle> = c.particles().collect();
    ps.iter().all(|p| ps.iter().all(|q| wr_type(p) == wr_type(q) || p.location.euclid_dist(&q.location) > r))
}

/// Random Widom-Rowlinson field with `+` outside, made admissible by emptying
/// every occupied site that sees an opposite particle.
fn wr_field(side: i64) -> impl Strategy<Value = SpinField> {
    field(3, side).prop_map(|mut f| {
        f.outside = WR_PLUS;
        while !wr_admissible(&f, 1) {
            let bad = f
                .sites
                .iter()
                .position(|s| {
                    let v = f.get(*s);
                    let other = if v == WR_PLUS { WR_MINUS } else { WR_PLUS };
                    v != WR_EMPTY
                        && (-1..=1).any(|dx| (-1..=1).any(|dy| f.get([s[0] + dx, s[1] + dy]) == other))
                })
                .unwrap();
            let s = f.sites[bad];
            f.set(s, WR_EMPTY);
        }
        f
    })
}

fn field(q: u16, side: i64) -> impl Strategy<Value = SpinField> {
    prop::collection::vec(0..q, (side * side) as usize).prop_map(move |vals| {
        let mut f = SpinField::boxed([0, 0], side, side, 0);
        f.values = vals;
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restriction_and_complement_superpose_back(ps in prop::collection::vec(particle(), 0..20)) {
        let c = ParticleConfiguration::from_particles(ps);
        let w = Window::continuum_box(&[-1.0, -2.0], &[3.0, 1.0]);
        let back = c.restrict(&w).superpose(&c.restrict(&w.complement()));
        prop_assert_eq!(back, c.clone());
        prop_assert_eq!(c.count_in(&w) + c.count_in(&w.complement()), c.len());
    }

    #[test]
    fn spatial_snapping_moves_particles_by_less_than_the_mesh(p in particle(), eps in 0.01..1.0f64) {
        let d = Discretization::SpatialGrid.displacement(eps, &p);
        prop_assert!((0.0..eps).contains(&d));
        prop_assert_eq!(Discretization::SpatialGrid.displacement(0.0, &p), 0.0);
    }

    #[test]
    fn acceptance_probabilities_lie_in_the_unit_interval(ps in prop::collection::vec(particle(), 0..12), p in particle()) {
        let m = WidomRowlinson::continuum(2, 0.1, 0.1, 1.0);
        let eta = ParticleConfiguration::from_particles(ps);
        let leap = m.energy_leap(&eta, &p);
        let tilt = m.energy_loss_bound();
        let a = (-(leap.value() + tilt)).exp();
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn perfect_samples_are_admissible_and_inside_the_window(seed in 0u64..1_000_000) {
        let m = WidomRowlinson::continuum(2, 0.08, 0.05, 1.0);
        let w = Window::continuum_box(&[0.0, 0.0], &[4.0, 4.0]);
        let s = perfect_sample(&m, &w, None, &Budget::default(), &RngStreams::new(seed, 0)).unwrap();
        prop_assert!(s.particles().all(|p| w.contains(p)));
        prop_assert!(wr_admissible_config(&s, 1.0));
    }

    #[test]
    fn thinning_only_keeps_cylinders_of_the_clan(seed in 0u64..1_000_000) {
        let m = WidomRowlinson::continuum(2, 0.05, 0.05, 1.0);
        let w = Window::continuum_box(&[0.0, 0.0], &[3.0, 3.0]);
        let clan = build_clan(&m, &w, None, &Budget::default(), &RngStreams::new(seed, 1)).unwrap();
        let kept = thin(&m, &clan, &ParticleConfiguration::new()).unwrap();
        prop_assert_eq!(kept.len(), clan.size());
        prop_assert_eq!(clan.candidate_counts.len(), clan.size());
        for (i, c) in clan.cylinders.iter().enumerate() {
            prop_assert!(clan.ancestors[i].iter().all(|&j| j as usize != i));
            prop_assert!(i < clan.roots || c.generation > 0);
        }
    }

    #[test]
    fn coupled_samples_are_admissible_and_reproducible(seed in 0u64..1_000_000) {
        let c = ScaledIntensity { model: Arc::new(WidomRowlinson::continuum(2, 0.05, 0.05, 1.0)) };
        let w = Window::continuum_box(&[0.0, 0.0], &[4.0, 4.0]);
        let eps = [0.3, 0.1, 0.0];
        let s = RngStreams::new(seed, 0);
        let a = coupled_samples(&c, &w, &eps, None, &Budget::default(), &s).unwrap();
        let b = coupled_samples(&c, &w, &eps, None, &Budget::default(), &s).unwrap();
        prop_assert_eq!(&a.samples, &b.samples);
        prop_assert!(a.samples.iter().all(|x| wr_admissible_config(x, 1.0)));
    }

    #[test]
    fn potts_contours_reconstruct_the_field(f in field(3, 5)) {
        let sys = SpinSystem::Potts { q: 3, r: 1 };
        let cs = extract_contours(&f, &sys);
        let back = reconstruct(&cs, f.sites.clone(), f.outside);
        prop_assert_eq!(&back.values, &f.values);
        let total: f64 = cs.iter().map(|c| c.energy).sum();
        prop_assert_eq!(total, potts_energy(&f, 1));
        for c in &cs {
            prop_assert!(c.energy >= c.size() as f64 / 2.0);
        }
    }

    #[test]
    fn potts_energy_is_symmetric_under_label_permutation(f in field(3, 4), shift in 1u16..3) {
        let g = SpinField {
            values: f.values.iter().map(|v| (v + shift) % 3).collect(),
            outside: (f.outside + shift) % 3,
            ..f.clone()
        };
        prop_assert_eq!(potts_energy(&f, 1), potts_energy(&g, 1));
    }

    #[test]
    fn wr_contours_reconstruct_admissible_fields(f in wr_field(5)) {
        let sys = SpinSystem::WidomRowlinson { r: 1, lambda: 3.0 };
        let cs = extract_contours(&f, &sys);
        prop_assert_eq!(reconstruct(&cs, f.sites.clone(), WR_PLUS).values, f.values.clone());
        prop_assert!(cs.iter().all(|c| c.energy.is_finite()));
    }
}

#[test]
fn every_four_by_four_binary_field_round_trips() {
    let sys = SpinSystem::Potts { q: 2, r: 1 };
    let mut f = SpinField::boxed([0, 0], 4, 4, 0);
    for bits in 0..(1u32 << 16) {
        for (i, v) in f.values.iter_mut().enumerate() {
            *v = (bits >> i & 1) as u16;
        }
        let cs = extract_contours(&f, &sys);
        assert_eq!(reconstruct(&cs, f.sites.clone(), 0).values, f.values);
    }
}

#[test]
fn replica_results_do_not_depend_on_the_schedule() {
    let m = WidomRowlinson::continuum(2, 0.05, 0.05, 1.0);
    let w = Window::continuum_box(&[0.0, 0.0], &[5.0, 5.0]);
    let s = RngStreams::new(77, 0);
    let go = |mode| {
        run_replicas(300, mode, |r| perfect_sample(&m, &w, None, &Budget::default(), &s.replica(r)).unwrap())
    };
    assert_eq!(go(ExecMode::Sequential), go(ExecMode::Parallel));
}

#[test]
fn models_satisfy_the_diluted_axioms() {
    let plane = Window::continuum_box(&[0.0, 0.0], &[3.0, 3.0]);
    let grid = Window::lattice_box(&[0, 0], &[4, 4]);
    let models: Vec<(Box<dyn DilutedModel>, &Window)> = vec![
        (Box::new(WidomRowlinson::continuum(2, 0.05, 0.05, 1.0)), &plane),
        (Box::new(WidomRowlinson::discrete(2, 0.3, 0.3, 1)), &grid),
        (Box::new(ThinRods::new(0.1, 0.5, Orientation::Uniform)), &plane),
        (Box::new(TolerantWr::continuum(2, 0.05, 0.05, 1.0, 2)), &plane),
        (Box::new(NonInteracting::continuum(2, 1.0)), &plane),
    ];
    let mut rng = RngStreams::new(5, 0).stream(0);
    for (m, w) in &models {
        validate_model(m.as_ref(), w, 50, &mut rng).unwrap();
    }
}

#[test]
fn symbiotic_leaps_do_not_telescope() {
    let m = Symbiotic::new(2, 1.0, 1.0, 1.0, 0.5);
    let plane = Window::continuum_box(&[0.0, 0.0], &[3.0, 3.0]);
    let mut rng = RngStreams::new(6, 0).stream(0);
    let err = validate_model(&m, &plane, 50, &mut rng).unwrap_err();
    assert!(err.to_string().contains("order"), "{err}");
}
