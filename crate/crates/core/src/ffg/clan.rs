use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{FfgError, Result};
use crate::model::{poisson, DilutedModel};
use crate::rng::RngStreams;
use crate::space::{Location, Particle, Window};

/// A particle of the free process together with its birth time, lifespan
/// and the uniform flag used by the thinning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub id: u32,
    pub basis: Particle,
    pub birth: f64,
    pub lifespan: f64,
    pub flag: f64,
    pub generation: u32,
}

impl Cylinder {
    pub fn death(&self) -> f64 {
        self.birth + self.lifespan
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.birth < t && t < self.death()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_cylinders: usize,
    pub max_generations: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_cylinders: 1_000_000, max_generations: 10_000 }
    }
}

/// The backward-explored clan of ancestors of the cylinders alive at time 0
/// in a root window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Clan {
    pub root: Window,
    pub cylinders: Vec<Cylinder>,
    /// `ancestors[i]` lists the cylinders lying in the ancestor region of cylinder `i`.
    pub ancestors: Vec<Vec<u32>>,
    /// Number of free-process candidates drawn for each explored cylinder,
    /// before any exclusion.
    pub candidate_counts: Vec<u64>,
    /// Number of cylinders alive at time 0 in the root window.
    pub roots: usize,
}

impl Clan {
    pub fn size(&self) -> usize {
        self.cylinders.len()
    }

    pub fn generations(&self) -> usize {
        self.cylinders.iter().map(|c| c.generation as usize + 1).max().unwrap_or(0)
    }

    pub fn generation_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.generations()];
        for c in &self.cylinders {
            out[c.generation as usize] += 1;
        }
        out
    }

    /// Ids of all cylinders reachable through ancestor links from `start`.
    pub fn ancestor_closure(&self, start: &[u32]) -> Vec<bool> {
        let mut seen = vec![false; self.cylinders.len()];
        let mut stack: Vec<u32> = start.to_vec();
        for &s in start {
            seen[s as usize] = true;
        }
        while let Some(i) = stack.pop() {
            for &a in &self.ancestors[i as usize] {
                if !seen[a as usize] {
                    seen[a as usize] = true;
                    stack.push(a);
                }
            }
        }
        seen
    }
}

struct Region {
    window: Window,
    time: f64,
}

/// Uniform grid over the first three coordinates and time, with unit time
/// buckets. Windows whose bounding box covers too many cells, or has none, are
/// kept in a list scanned on every query.
struct Grid<T> {
    cell: f64,
    cells: HashMap<[i64; 4], Vec<T>>,
    wide: Vec<T>,
}

const MAX_CELLS: usize = 4096;

fn bucket(t: f64) -> i64 {
    t.floor() as i64
}

impl<T: Copy> Grid<T> {
    fn new(cell: f64) -> Self {
        Grid { cell, cells: HashMap::new(), wide: Vec::new() }
    }

    fn key(&self, loc: &Location, b: i64) -> [i64; 4] {
        let mut k = [0, 0, 0, b];
        for (i, slot) in k.iter_mut().enumerate().take(loc.dim().min(3)) {
            *slot = (loc.coord(i) / self.cell).floor() as i64;
        }
        k
    }

    /// Spatial cell ranges covering a window, or `None` when it is too wide to index.
    fn span(&self, w: &Window) -> Option<[(i64, i64); 3]> {
        let (lo, hi) = w.bounding_box()?;
        let mut r = [(0, 0); 3];
        let mut n = 1usize;
        for i in 0..lo.len().min(3) {
            if !(lo[i].is_finite() && hi[i].is_finite()) {
                return None;
            }
            r[i] = ((lo[i] / self.cell).floor() as i64, (hi[i] / self.cell).floor() as i64);
            n = n.saturating_mul((r[i].1 - r[i].0 + 1).max(0) as usize);
            if n > MAX_CELLS {
                return None;
            }
        }
        Some(r)
    }

    fn cells_of(r: [(i64, i64); 3], b: i64) -> impl Iterator<Item = [i64; 4]> {
        (r[0].0..=r[0].1).flat_map(move |x| {
            (r[1].0..=r[1].1).flat_map(move |y| (r[2].0..=r[2].1).map(move |z| [x, y, z, b]))
        })
    }

    /// Store `v` at `loc` for every time bucket meeting `[t0, t1]`.
    fn insert_point(&mut self, loc: &Location, t0: f64, t1: f64, v: T) {
        for b in bucket(t0)..=bucket(t1) {
            let k = self.key(loc, b);
            self.cells.entry(k).or_default().push(v);
        }
    }

    fn insert_window(&mut self, w: &Window, t: f64, v: T) {
        match self.span(w) {
            Some(r) => Grid::<T>::cells_of(r, bucket(t)).for_each(|k| self.cells.entry(k).or_default().push(v)),
            None => self.wide.push(v),
        }
    }

    /// Points stored inside the bounding box of `w` at time `t`; `None` when
    /// the box is too wide and the caller has to scan everything.
    fn points_near(&self, w: &Window, t: f64) -> Option<Vec<T>> {
        let r = self.span(w)?;
        Some(Grid::<T>::cells_of(r, bucket(t)).filter_map(|k| self.cells.get(&k)).flatten().copied().collect())
    }

    /// Windows that may contain `loc` at a time in `[t0, t1]`.
    fn windows_at<'a>(&'a self, loc: &'a Location, t0: f64, t1: f64) -> impl Iterator<Item = T> + 'a {
        (bucket(t0)..=bucket(t1))
            .filter_map(move |b| self.cells.get(&self.key(loc, b)))
            .flatten()
            .chain(&self.wide)
            .copied()
    }
}

/// Grid cell side: the widest extent of the impact region of `p`, at least one.
fn cell_size(model: &dyn DilutedModel, p: &Particle) -> f64 {
    match model.impact_region(p).bounding_box() {
        Some((lo, hi)) => lo.iter().zip(&hi).map(|(a, b)| b - a).fold(1.0, f64::max),
        None => 1.0,
    }
}

fn new_cylinder(id: u32, basis: Particle, birth: f64, lifespan: f64, flag: f64, generation: u32) -> Cylinder {
    Cylinder { id, basis, birth, lifespan, flag, generation }
}

/// Build the clan of ancestors of the cylinders alive at time 0 in `root`.
///
/// With `restrict = Some(w)` the free process lives on `w` only (finite-volume
/// sampling); with `None` it lives on the whole space.
pub fn build_clan(
    model: &dyn DilutedModel,
    root: &Window,
    restrict: Option<&Window>,
    budget: &Budget,
    streams: &RngStreams,
) -> Result<Clan> {
    let tilt = (-model.energy_loss_bound()).exp();
    let mut cylinders: Vec<Cylinder> = Vec::new();
    let mut ancestors: Vec<Vec<u32>> = Vec::new();
    let mut candidate_counts = Vec::new();

    let mut rng = streams.stream(0);
    for (k, piece) in root.pieces.iter().enumerate() {
        let n = poisson(tilt * model.piece_mass(piece), &mut rng);
        for _ in 0..n {
            let basis = model.sample_piece(piece, &mut rng);
            let age: f64 = Exp1.sample(&mut rng);
            let rest: f64 = Exp1.sample(&mut rng);
            let flag: f64 = rng.random();
            if root.in_earlier_piece(&basis, k) || restrict.is_some_and(|w| !w.contains(&basis)) {
                continue;
            }
            let id = cylinders.len() as u32;
            cylinders.push(new_cylinder(id, basis, -age, age + rest, flag, 0));
            ancestors.push(Vec::new());
        }
    }
    let roots = cylinders.len();
    if roots > budget.max_cylinders {
        return Err(FfgError::BudgetExceeded(format!("{roots} roots exceed the cylinder budget")));
    }

    let cell = cylinders.first().map_or(1.0, |c| cell_size(model, &c.basis));
    let mut points: Grid<u32> = Grid::new(cell);
    for c in &cylinders {
        points.insert_point(&c.basis.location, c.birth, c.death(), c.id);
    }
    let mut regions: Vec<Region> = Vec::new();
    let mut region_grid: Grid<usize> = Grid::new(cell);

    let mut next = 0usize;
    while next < cylinders.len() {
        let cur = cylinders[next].clone();
        if cur.generation as usize >= budget.max_generations {
            return Err(FfgError::BudgetExceeded(format!(
                "clan exceeds {} generations",
                budget.max_generations
            )));
        }
        let imp = model.impact_region(&cur.basis);
        let b = cur.birth;
        let mut found: Vec<u32> = Vec::new();

        // Cylinders discovered earlier that lie in this ancestor region.
        let near = points.points_near(&imp, b).unwrap_or_else(|| (0..cylinders.len() as u32).collect());
        for id in near {
            let c = &cylinders[id as usize];
            if c.id != cur.id && c.alive_at(b) && imp.contains(&c.basis) {
                found.push(c.id);
            }
        }

        let mut rng = streams.stream(cur.id as u64 + 1);
        let mut drawn = 0u64;
        for (k, piece) in imp.pieces.iter().enumerate() {
            let n = poisson(tilt * model.piece_mass(piece), &mut rng);
            for _ in 0..n {
                let basis = model.sample_piece(piece, &mut rng);
                let age: f64 = Exp1.sample(&mut rng);
                let rest: f64 = Exp1.sample(&mut rng);
                let flag: f64 = rng.random();
                if imp.in_earlier_piece(&basis, k) {
                    continue;
                }
                drawn += 1;
                if restrict.is_some_and(|w| !w.contains(&basis)) {
                    continue;
                }
                let (birth, death) = (b - age, b + rest);
                if birth < 0.0 && death > 0.0 && root.contains(&basis) {
                    continue;
                }
                let explored = region_grid.windows_at(&basis.location, birth, death).any(|j| {
                    let r: &Region = &regions[j];
                    birth < r.time && r.time < death && r.window.contains(&basis)
                });
                if explored {
                    continue;
                }
                let id = cylinders.len() as u32;
                points.insert_point(&basis.location, birth, death, id);
                cylinders.push(new_cylinder(id, basis, birth, age + rest, flag, cur.generation + 1));
                ancestors.push(Vec::new());
                found.push(id);
            }
        }
        if cylinders.len() > budget.max_cylinders {
            return Err(FfgError::BudgetExceeded(format!(
                "clan exceeds {} cylinders",
                budget.max_cylinders
            )));
        }
        candidate_counts.push(drawn);
        found.sort_unstable();
        ancestors[cur.id as usize] = found;

        region_grid.insert_window(&imp, b, regions.len());
        regions.push(Region { window: imp, time: b });
        next += 1;
    }
    debug_assert!(regions.iter().all(|r| r.time.is_finite()));
    Ok(Clan { root: root.clone(), cylinders, ancestors, candidate_counts, roots })
}
