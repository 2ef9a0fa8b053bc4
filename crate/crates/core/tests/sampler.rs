use ffg_core::ffg::{perfect_sample, Budget};
use ffg_core::models::WidomRowlinson;
use ffg_core::oracle::{compare, enumerate_bgd};
use ffg_core::parallel::{run_replicas, ExecMode};
use ffg_core::{Location, Particle, ParticleConfiguration, RngStreams, Spin, Window};

#[test]
fn discrete_wr_matches_enumeration_with_and_without_boundary() {
    let m = WidomRowlinson::discrete(2, 0.5, 0.5, 1);
    let w = Window::lattice_box(&[0, 0], &[2, 2]);
    let b = ParticleConfiguration::from_particles(vec![Particle::new(Location::lattice(&[-1, 0]), Spin::Tag('+'))]);
    for eta in [ParticleConfiguration::new(), b] {
        let exact = enumerate_bgd(&m, &w, &eta, 1, 1000).unwrap();
        let samples = run_replicas(20_000, ExecMode::Parallel, |r| {
            perfect_sample(&m, &w, Some(&eta), &Budget::default(), &RngStreams::new(11, r)).unwrap()
        });
        let c = compare(&samples, &exact);
        assert!(c.tv < 0.03, "tv {}", c.tv);
        assert!(c.p_value > 1e-4, "p {}", c.p_value);
    }
}
