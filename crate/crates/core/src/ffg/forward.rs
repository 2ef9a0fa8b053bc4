use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::Result;
use crate::model::{acceptance_probability, DilutedModel};
use crate::rng::RngStreams;
use crate::space::{Particle, ParticleConfiguration, Window};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Birth,
    Death,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub particle: Particle,
}

struct Pending {
    death: f64,
    particle: Particle,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.death.total_cmp(&o.death) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        o.death.total_cmp(&self.death)
    }
}

/// Spatial birth-and-death process on `window` with boundary `boundary`:
/// proposals arrive at the tilted free rate, are accepted with the model's
/// acceptance probability, and live for an Exp(1) time.
struct Dynamics<'a> {
    model: &'a dyn DilutedModel,
    window: &'a Window,
    boundary: &'a ParticleConfiguration,
    state: ParticleConfiguration,
    deaths: BinaryHeap<Pending>,
    rate: f64,
    masses: Vec<f64>,
    tilt_de: f64,
    rng: ChaCha8Rng,
    t: f64,
}

impl<'a> Dynamics<'a> {
    fn new(
        model: &'a dyn DilutedModel,
        window: &'a Window,
        boundary: &'a ParticleConfiguration,
        initial: &ParticleConfiguration,
        streams: &RngStreams,
    ) -> Self {
        let de = model.energy_loss_bound();
        let masses: Vec<f64> = window.pieces.iter().map(|p| (-de).exp() * model.piece_mass(p)).collect();
        let mut rng = streams.stream(0);
        let mut deaths = BinaryHeap::new();
        for p in initial.particles() {
            let life: f64 = Exp1.sample(&mut rng);
            deaths.push(Pending { death: life, particle: p.clone() });
        }
        Dynamics {
            model,
            window,
            boundary,
            state: initial.clone(),
            deaths,
            rate: masses.iter().sum(),
            masses,
            tilt_de: de,
            rng,
            t: 0.0,
        }
    }

    /// Advance to time `until`, reporting every change through `on_event`.
    fn run<F: FnMut(Event)>(&mut self, until: f64, mut on_event: F) -> Result<()> {
        loop {
            let next_birth = if self.rate > 0.0 {
                let e: f64 = Exp1.sample(&mut self.rng);
                self.t + e / self.rate
            } else {
                f64::INFINITY
            };
            // Deaths happen before the next proposal.
            while let Some(top) = self.deaths.peek() {
                if top.death > next_birth.min(until) {
                    break;
                }
                let d = self.deaths.pop().unwrap();
                self.state.remove_one(&d.particle);
                on_event(Event { time: d.death, kind: EventKind::Death, particle: d.particle });
            }
            if next_birth > until {
                self.t = until;
                return Ok(());
            }
            self.t = next_birth;
            let mut u = self.rng.random::<f64>() * self.rate;
            let mut k = 0;
            while k + 1 < self.masses.len() && u >= self.masses[k] {
                u -= self.masses[k];
                k += 1;
            }
            let p = self.model.sample_piece(&self.window.pieces[k], &mut self.rng);
            let flag: f64 = self.rng.random();
            let life: f64 = Exp1.sample(&mut self.rng);
            if self.window.in_earlier_piece(&p, k) {
                continue;
            }
            let xi = self.boundary.superpose(&self.state);
            let a = acceptance_probability(self.model.energy_leap(&xi, &p), self.tilt_de)?;
            if flag < a {
                self.state.insert(p.clone());
                self.deaths.push(Pending { death: self.t + life, particle: p.clone() });
                on_event(Event { time: self.t, kind: EventKind::Birth, particle: p });
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ForwardRun {
    pub events: Vec<Event>,
    pub final_state: ParticleConfiguration,
}

/// Run the birth-and-death dynamics from `initial` for time `horizon`.
pub fn forward_dynamics(
    model: &dyn DilutedModel,
    window: &Window,
    boundary: &ParticleConfiguration,
    initial: &ParticleConfiguration,
    horizon: f64,
    streams: &RngStreams,
) -> Result<ForwardRun> {
    let mut dy = Dynamics::new(model, window, boundary, initial, streams);
    let mut events = Vec::new();
    dy.run(horizon, |e| events.push(e))?;
    Ok(ForwardRun { events, final_state: dy.state })
}

/// States of the dynamics at the given nondecreasing times.
pub fn forward_states_at(
    model: &dyn DilutedModel,
    window: &Window,
    boundary: &ParticleConfiguration,
    initial: &ParticleConfiguration,
    times: &[f64],
    streams: &RngStreams,
) -> Result<Vec<ParticleConfiguration>> {
    let mut dy = Dynamics::new(model, window, boundary, initial, streams);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        dy.run(t, |_| {})?;
        out.push(dy.state.clone());
    }
    Ok(out)
}
