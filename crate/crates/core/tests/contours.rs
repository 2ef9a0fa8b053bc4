use std::collections::{BTreeMap, BTreeSet};

use ffg_core::contour::*;
use ffg_core::oracle::enumerate_bgd;
use ffg_core::{DilutedModel, ParticleConfiguration};

fn grid_edges(n: i64) -> Vec<Plaquette> {
    let mut e = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x + 1 < n {
                e.push(Plaquette::new([x, y], 0));
            }
            if y + 1 < n {
                e.push(Plaquette::new([x, y], 1));
            }
        }
    }
    e
}

#[test]
fn shape_enumeration_matches_brute_force_up_to_size_eight() {
    let edges = grid_edges(4);
    assert_eq!(edges.len(), 24);
    let mut brute = BTreeSet::new();
    for mask in 1u32..(1 << edges.len()) {
        if mask.count_ones() > 8 {
            continue;
        }
        let set: Vec<Plaquette> = (0..edges.len()).filter(|i| mask >> i & 1 == 1).map(|i| edges[i]).collect();
        if is_closed_connected(&set) {
            brute.insert(Contour::new(set).shape());
        }
    }
    let enumerated: BTreeSet<Contour> =
        enumerate_shapes(8, ShapeConstraint::AllAnchored, 10_000_000).unwrap().into_iter().collect();
    assert_eq!(brute, enumerated);
}

#[test]
fn shapes_through_a_vertex_obey_the_trail_count() {
    let through = enumerate_shapes(12, ShapeConstraint::ThroughFixedVertex, 200_000_000).unwrap();
    let mut by_size: BTreeMap<usize, u64> = BTreeMap::new();
    for c in &through {
        assert!(c.vertices().contains(&[0, 0]));
        *by_size.entry(c.size()).or_insert(0) += 1;
    }
    for (n, count) in by_size {
        assert!(count <= 4 * 3u64.pow(n as u32 - 1), "size {n}: {count}");
    }
}

#[test]
fn contours_of_every_four_by_four_configuration_are_closed_and_compatible() {
    for bits in 0..(1u64 << 16) {
        let g = IsingGrid::from_bits([0, 0], 4, 4, bits);
        let cs = contours_from_spins(&g);
        for (i, c) in cs.iter().enumerate() {
            assert!(is_closed_connected(&c.edges));
            for d in &cs[i + 1..] {
                assert!(compatible(c, d));
            }
        }
        assert_eq!(plus_alignment(&cs, [0, 0], 4, 4).unwrap(), g);
    }
}

#[test]
fn alignment_is_a_bijection_on_the_three_by_three_box() {
    let m = IsingContourModel::in_site_box(1.0, [0, 0], 3, 3).unwrap();
    let w = m.anchor_window().unwrap();
    let exact = enumerate_bgd(&m, &w, &ParticleConfiguration::new(), 1, 100_000).unwrap();
    assert_eq!(exact.states.len(), 512);
    let mut seen = BTreeSet::new();
    for (fam, _) in &exact.states {
        let contours = m.family(fam);
        let g = plus_alignment(&contours, [0, 0], 3, 3).unwrap();
        let mut back = contours_from_spins(&g);
        back.sort();
        let mut orig = contours.clone();
        orig.sort();
        assert_eq!(back, orig);
        seen.insert(g);
    }
    assert_eq!(seen.len(), 512);
}

#[test]
fn duality_holds_to_machine_precision() {
    for beta in [0.5, 1.0, 2.0] {
        let m = IsingContourModel::in_site_box(beta, [0, 0], 3, 3).unwrap();
        let w = m.anchor_window().unwrap();
        let contour_law = enumerate_bgd(&m, &w, &ParticleConfiguration::new(), 1, 100_000).unwrap();
        let ising: BTreeMap<IsingGrid, f64> = ising_exact(beta, [0, 0], 3, 3).unwrap().into_iter().collect();
        for (fam, p) in &contour_law.states {
            let g = plus_alignment(&m.family(fam), [0, 0], 3, 3).unwrap();
            assert!((ising[&g] - p).abs() < 1e-12);
        }
    }
}

#[test]
fn diluteness_decreases_in_beta_and_brackets_the_plaquette_series() {
    let cat = ShapeCatalog::enumerate(10).unwrap();
    let mut last = f64::INFINITY;
    for beta in [2.0, 4.0, 8.0] {
        let a = cat.alpha(beta);
        assert!(a.alpha < last);
        last = a.alpha;
        assert!(a.alpha0 >= a.alpha);
        assert!(a.alpha0 <= 4.0 * a.alpha);
        assert!(a.alpha <= a.vertex_bound);
    }
    assert!(alpha_ising(&cat, 0.5, 0.1).is_err());
    let b = alpha_crossing(&cat);
    assert!(cat.alpha(b - 1e-6).alpha >= 1.0 && cat.alpha(b + 1e-6).alpha < 1.0);
}

#[test]
fn vertex_sharing_contours_are_rejected() {
    let m = IsingContourModel::new(1.0, 8).unwrap();
    let sq = |x: i64, y: i64| {
        m.particle(&Contour::new(vec![
            Plaquette::new([x, y], 0),
            Plaquette::new([x, y], 1),
            Plaquette::new([x + 1, y], 1),
            Plaquette::new([x, y + 1], 0),
        ]))
        .unwrap()
    };
    let eta = ParticleConfiguration::from_particles(vec![sq(0, 0)]);
    assert!(m.energy_leap(&eta, &sq(1, 1)).is_infinite());
    assert!(m.energy_leap(&eta, &sq(2, 0)).value() == 0.0);
    assert!(m.energy_leap(&ParticleConfiguration::new(), &sq(1, 1)).value() == 0.0);
    assert!(m.impact_region(&sq(1, 1)).contains(&sq(0, 0)));
}
