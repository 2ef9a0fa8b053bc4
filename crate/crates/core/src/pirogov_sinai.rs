use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{FfgError, Result};
use crate::ffg::{perfect_sample, Budget};
use crate::model::{DilutedModel, Energy};
use crate::rng::RngStreams;
use crate::space::{Location, LocationRegion, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

pub type Site = [i64; 2];

const NEIGHBOURS: [Site; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

fn add(a: Site, b: Site) -> Site {
    [a[0] + b[0], a[1] + b[1]]
}

fn l1(a: Site, b: Site) -> i64 {
    (a[0] - b[0]).abs() + (a[1] - b[1]).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallNorm {
    L1,
    Sup,
}

/// Offsets `y` with `|y| <= r` in the given norm, the origin included.
pub fn ball_offsets(r: i64, norm: BallNorm) -> Vec<Site> {
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            let inside = match norm {
                BallNorm::L1 => a.abs() + b.abs() <= r,
                BallNorm::Sup => true,
            };
            if inside {
                out.push([a, b]);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PottsParams {
    pub q: u16,
    pub r: i64,
    pub beta: f64,
}

impl PottsParams {
    pub fn new(q: u16, r: i64, beta: f64) -> Result<Self> {
        if q < 2 || r < 1 || !(beta > 0.0) {
            return Err(FfgError::InvalidModel(format!("Potts needs q >= 2, r >= 1, beta > 0; got {q}, {r}, {beta}")));
        }
        Ok(PottsParams { q, r, beta })
    }
}

/// Spin system whose low-temperature contours are handled here. Widom-Rowlinson
/// spins are encoded as `0` (empty), `1` (`+`) and `2` (`-`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpinSystem {
    Potts { q: u16, r: i64 },
    WidomRowlinson { r: i64, lambda: f64 },
}

pub const WR_EMPTY: u16 = 0;
pub const WR_PLUS: u16 = 1;
pub const WR_MINUS: u16 = 2;

impl SpinSystem {
    pub fn q(&self) -> u16 {
        match self {
            SpinSystem::Potts { q, .. } => *q,
            SpinSystem::WidomRowlinson { .. } => 3,
        }
    }

    pub fn r(&self) -> i64 {
        match self {
            SpinSystem::Potts { r, .. } | SpinSystem::WidomRowlinson { r, .. } => *r,
        }
    }

    /// Norm used for correctness of sites.
    pub fn norm(&self) -> BallNorm {
        match self {
            SpinSystem::Potts { .. } => BallNorm::L1,
            SpinSystem::WidomRowlinson { .. } => BallNorm::Sup,
        }
    }
}

/// Spin values on a finite sorted site set, with a constant value elsewhere.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinField {
    pub sites: Vec<Site>,
    pub values: Vec<u16>,
    pub outside: u16,
}

impl SpinField {
    pub fn constant(mut sites: Vec<Site>, value: u16) -> Self {
        sites.sort();
        sites.dedup();
        let values = vec![value; sites.len()];
        SpinField { sites, values, outside: value }
    }

    pub fn boxed(lo: Site, w: i64, h: i64, value: u16) -> Self {
        SpinField::constant(box_sites(lo, w, h), value)
    }

    pub fn get(&self, s: Site) -> u16 {
        match self.sites.binary_search(&s) {
            Ok(i) => self.values[i],
            Err(_) => self.outside,
        }
    }

    /// Sets a site of the field; sites outside the field are ignored.
    pub fn set(&mut self, s: Site, v: u16) {
        if let Ok(i) = self.sites.binary_search(&s) {
            self.values[i] = v;
        }
    }
}

pub fn box_sites(lo: Site, w: i64, h: i64) -> Vec<Site> {
    let mut v = Vec::with_capacity((w * h).max(0) as usize);
    for x in lo[0]..lo[0] + w {
        for y in lo[1]..lo[1] + h {
            v.push([x, y]);
        }
    }
    v
}

/// Sites that are `i`-correct for no `i`: the ball around them is not constant.
pub fn defect_set(field: &SpinField, system: &SpinSystem) -> Vec<Site> {
    let ball = ball_offsets(system.r(), system.norm());
    let mut candidates: BTreeSet<Site> = BTreeSet::new();
    for (s, v) in field.sites.iter().zip(&field.values) {
        if *v != field.outside {
            for o in &ball {
                candidates.insert(add(*s, *o));
            }
        }
    }
    candidates
        .into_iter()
        .filter(|&x| {
            let v0 = field.get(x);
            ball.iter().any(|o| field.get(add(x, *o)) != v0)
        })
        .collect()
}

/// Components of a site set under nearest-neighbour adjacency.
pub fn l1_components(sites: &[Site]) -> Vec<Vec<Site>> {
    let set: BTreeSet<Site> = sites.iter().cloned().collect();
    let mut seen: BTreeSet<Site> = BTreeSet::new();
    let mut out = Vec::new();
    for &s in &set {
        if seen.contains(&s) {
            continue;
        }
        let mut comp = vec![s];
        seen.insert(s);
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for n in NEIGHBOURS {
                let y = add(x, n);
                if set.contains(&y) && seen.insert(y) {
                    comp.push(y);
                    queue.push_back(y);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

/// Finite components of the complement of `support`.
pub fn interior_components(support: &[Site]) -> Vec<Vec<Site>> {
    let set: BTreeSet<Site> = support.iter().cloned().collect();
    let (mut lo, mut hi) = ([i64::MAX; 2], [i64::MIN; 2]);
    for s in support {
        for k in 0..2 {
            lo[k] = lo[k].min(s[k] - 1);
            hi[k] = hi[k].max(s[k] + 1);
        }
    }
    let inside = |x: Site| x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1];
    let mut outer: BTreeSet<Site> = BTreeSet::new();
    let mut queue = VecDeque::from([lo]);
    outer.insert(lo);
    while let Some(x) = queue.pop_front() {
        for n in NEIGHBOURS {
            let y = add(x, n);
            if inside(y) && !set.contains(&y) && outer.insert(y) {
                queue.push_back(y);
            }
        }
    }
    let rest: Vec<Site> = box_sites(lo, hi[0] - lo[0] + 1, hi[1] - lo[1] + 1)
        .into_iter()
        .filter(|x| !set.contains(x) && !outer.contains(x))
        .collect();
    l1_components(&rest)
}

/// A labeled contour: a connected component of the defect set with the spins
/// on it, the label of its exterior and the labeled finite components of the
/// complement of its support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsContour {
    pub support: Vec<Site>,
    pub labels: Vec<u16>,
    pub exterior: u16,
    pub interiors: Vec<(u16, Vec<Site>)>,
    pub energy: f64,
}

impl PsContour {
    pub fn size(&self) -> usize {
        self.support.len()
    }

    pub fn label_at(&self, s: Site) -> Option<u16> {
        self.support.binary_search(&s).ok().map(|i| self.labels[i])
    }

    /// True when `s` lies in a finite component of the complement of the support.
    pub fn encloses(&self, s: Site) -> bool {
        self.interiors.iter().any(|(_, c)| c.binary_search(&s).is_ok())
    }

    /// Support together with all interior sites.
    pub fn volume(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.support.clone();
        for (_, c) in &self.interiors {
            v.extend(c.iter().cloned());
        }
        v.sort();
        v
    }
}

/// Energy of a contour with the given support spins and exterior label.
pub fn contour_energy(support: &[Site], labels: &[u16], exterior: u16, system: &SpinSystem) -> f64 {
    match *system {
        SpinSystem::Potts { r, .. } => {
            let mut e = 0.0;
            for i in 0..support.len() {
                for j in i + 1..support.len() {
                    if labels[i] != labels[j] && l1(support[i], support[j]) <= r {
                        e += 1.0;
                    }
                }
            }
            e
        }
        SpinSystem::WidomRowlinson { r, lambda } => {
            for i in 0..support.len() {
                for j in i + 1..support.len() {
                    let opposite = (labels[i] == WR_PLUS && labels[j] == WR_MINUS)
                        || (labels[i] == WR_MINUS && labels[j] == WR_PLUS);
                    let (a, b) = (support[i], support[j]);
                    if opposite && (a[0] - b[0]).abs().max((a[1] - b[1]).abs()) <= r {
                        return f64::INFINITY;
                    }
                }
            }
            let site = |v: u16| if v == WR_EMPTY { 0.0 } else { -lambda.ln() };
            labels.iter().map(|&v| site(v) - site(exterior)).sum::<f64>()
        }
    }
}

/// The contours of a field, outermost first.
pub fn extract_contours(field: &SpinField, system: &SpinSystem) -> Vec<PsContour> {
    let defects = defect_set(field, system);
    let mut out: Vec<PsContour> = l1_components(&defects)
        .into_iter()
        .map(|support| {
            let labels: Vec<u16> = support.iter().map(|&s| field.get(s)).collect();
            let exterior = field.get([support[0][0] - 1, support[0][1]]);
            let set: BTreeSet<Site> = support.iter().cloned().collect();
            let interiors = interior_components(&support)
                .into_iter()
                .map(|comp| {
                    let label = comp
                        .iter()
                        .flat_map(|&x| NEIGHBOURS.iter().map(move |n| add(x, *n)))
                        .find(|y| set.contains(y))
                        .map(|y| field.get(y))
                        .expect("interior component touches the support");
                    (label, comp)
                })
                .collect();
            let energy = contour_energy(&support, &labels, exterior, system);
            PsContour { support, labels, exterior, interiors, energy }
        })
        .collect();
    out.sort_by(|a, b| b.volume().len().cmp(&a.volume().len()).then_with(|| a.support.cmp(&b.support)));
    out
}

/// Rebuild a field on `sites` from its contours and the outside label.
pub fn reconstruct(contours: &[PsContour], sites: Vec<Site>, outside: u16) -> SpinField {
    let mut f = SpinField::constant(sites, outside);
    let mut order: Vec<&PsContour> = contours.iter().collect();
    order.sort_by(|a, b| b.volume().len().cmp(&a.volume().len()));
    for c in order {
        for (l, comp) in &c.interiors {
            for s in comp {
                f.set(*s, *l);
            }
        }
        for (s, l) in c.support.iter().zip(&c.labels) {
            f.set(*s, *l);
        }
    }
    f
}

/// Potts energy of a field on a finite site set: unlike pairs within range
/// `r` with at least one site in the set.
pub fn potts_energy(field: &SpinField, r: i64) -> f64 {
    let ball = ball_offsets(r, BallNorm::L1);
    let mut e = 0.0;
    for (s, v) in field.sites.iter().zip(&field.values) {
        for o in &ball {
            let y = add(*s, *o);
            let inside = field.sites.binary_search(&y).is_ok();
            if (!inside || y > *s) && field.get(y) != *v {
                e += 1.0;
            }
        }
    }
    e
}

/// Catalog of the `label`-contours whose spins other than `label` lie in a
/// finite region, with energies up to `phi_max`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(from = "CatalogRecord")]
pub struct PottsCatalog {
    pub params: PottsParams,
    pub label: u16,
    pub region: Vec<Site>,
    pub contours: Vec<PsContour>,
    pub weights: Vec<f64>,
    /// Bitset rows of the incompatibility relation.
    #[serde(skip)]
    incompatible: Vec<Vec<u64>>,
    #[serde(with = "energy_cap")]
    pub phi_max: f64,
    /// Upper bound on the probability, under the finite-volume measure, of
    /// the configurations with total energy above `phi_max`.
    pub tail_bound: f64,
    pub configurations: u64,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

/// Smallest integer energy cap whose neglected probability bound is at most `tol`.
pub fn phi_max_for(params: &PottsParams, region_len: usize, tol: f64) -> f64 {
    let log_states = region_len as f64 * (params.q as f64).ln();
    ((log_states - tol.ln()) / params.beta - 1.0).ceil().max(0.0)
}

pub fn build_potts_catalog(
    params: PottsParams,
    label: u16,
    region: &[Site],
    phi_max: f64,
    node_cap: u64,
) -> Result<PottsCatalog> {
    let system = SpinSystem::Potts { q: params.q, r: params.r };
    let mut region: Vec<Site> = region.to_vec();
    region.sort();
    region.dedup();
    let ball = ball_offsets(params.r, BallNorm::L1);
    let n = region.len();
    let mut earlier: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut outside: Vec<f64> = vec![0.0; n];
    for (k, s) in region.iter().enumerate() {
        for o in &ball {
            if *o == [0, 0] {
                continue;
            }
            match region.binary_search(&add(*s, *o)) {
                Ok(j) if j < k => earlier[k].push(j),
                Ok(_) => {}
                Err(_) => outside[k] += 1.0,
            }
        }
    }
    let mut found: BTreeMap<(Vec<Site>, Vec<u16>), PsContour> = BTreeMap::new();
    let mut values = vec![label; n];
    let mut nodes = 0u64;
    let mut configurations = 0u64;
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        k: usize,
        energy: f64,
        values: &mut Vec<u16>,
        ctx: (&[Site], &[Vec<usize>], &[f64], u16, u16, f64, &SpinSystem),
        found: &mut BTreeMap<(Vec<Site>, Vec<u16>), PsContour>,
        nodes: &mut u64,
        configurations: &mut u64,
        cap: u64,
    ) -> Result<()> {
        let (region, earlier, outside, q, label, phi_max, system) = ctx;
        *nodes += 1;
        if *nodes > cap {
            return Err(FfgError::BudgetExceeded(format!("contour catalog exceeds {cap} nodes")));
        }
        if k == region.len() {
            *configurations += 1;
            let field = SpinField { sites: region.to_vec(), values: values.clone(), outside: label };
            let cs = extract_contours(&field, system);
            for c in &cs {
                if !cs.iter().any(|o| o.encloses(c.support[0])) {
                    found.entry((c.support.clone(), c.labels.clone())).or_insert_with(|| c.clone());
                }
            }
            return Ok(());
        }
        for v in 0..q {
            let mut e = energy;
            for &j in &earlier[k] {
                if values[j] != v {
                    e += 1.0;
                }
            }
            if v != label {
                e += outside[k];
            }
            if e > phi_max {
                continue;
            }
            values[k] = v;
            dfs(k + 1, e, values, ctx, found, nodes, configurations, cap)?;
        }
        values[k] = label;
        Ok(())
    }
    dfs(
        0,
        0.0,
        &mut values,
        (&region, &earlier, &outside, params.q, label, phi_max, &system),
        &mut found,
        &mut nodes,
        &mut configurations,
        node_cap,
    )?;
    let contours: Vec<PsContour> = found.into_values().collect();
    let tail_bound = if phi_max.is_finite() {
        ((n as f64) * (params.q as f64).ln() - params.beta * (phi_max.floor() + 1.0)).exp().min(1.0)
    } else {
        0.0
    };
    Ok(PottsCatalog::from(CatalogRecord { params, label, region, contours, phi_max, tail_bound, configurations }))
}

/// An energy cap written as a number or `"inf"`.
mod energy_cap {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::Energy;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Energy::new(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Energy::deserialize(d).map(|e| e.value())
    }
}

/// Stored form of a catalog; weights and lookup tables are recomputed on load.
#[derive(Deserialize)]
struct CatalogRecord {
    params: PottsParams,
    label: u16,
    region: Vec<Site>,
    contours: Vec<PsContour>,
    #[serde(with = "energy_cap")]
    phi_max: f64,
    tail_bound: f64,
    configurations: u64,
}

impl From<CatalogRecord> for PottsCatalog {
    fn from(r: CatalogRecord) -> Self {
        let weights: Vec<f64> = r.contours.iter().map(|c| (-r.params.beta * c.energy).exp()).collect();
        let incompatible = incompatibility(&r.contours);
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        PottsCatalog {
            params: r.params,
            label: r.label,
            region: r.region,
            contours: r.contours,
            weights,
            incompatible,
            phi_max: r.phi_max,
            tail_bound: r.tail_bound,
            configurations: r.configurations,
            cumulative,
        }
    }
}

/// Bitsets of the contours whose supports are at nearest-neighbour distance
/// at most one from each contour.
fn incompatibility(contours: &[PsContour]) -> Vec<Vec<u64>> {
    let mut index: BTreeMap<Site, usize> = BTreeMap::new();
    for c in contours {
        for s in &c.support {
            for o in [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]] {
                let n = index.len();
                index.entry(add(*s, o)).or_insert(n);
            }
        }
    }
    let words = index.len().div_ceil(64);
    let mask = |sites: &mut dyn Iterator<Item = Site>| {
        let mut m = vec![0u64; words];
        for s in sites {
            let i = index[&s];
            m[i / 64] |= 1 << (i % 64);
        }
        m
    };
    let supports: Vec<Vec<u64>> = contours.iter().map(|c| mask(&mut c.support.iter().cloned())).collect();
    let grown: Vec<Vec<u64>> = contours
        .iter()
        .map(|c| {
            mask(&mut c.support.iter().flat_map(|s| {
                [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]].into_iter().map(move |o| add(*s, o))
            }))
        })
        .collect();
    let n = contours.len();
    grown
        .iter()
        .map(|g| {
            let mut row = vec![0u64; n.div_ceil(64)];
            for (j, sj) in supports.iter().enumerate() {
                if g.iter().zip(sj).any(|(a, b)| a & b != 0) {
                    row[j / 64] |= 1 << (j % 64);
                }
            }
            row
        })
        .collect()
}

impl PottsCatalog {
    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    pub fn incompatible(&self, a: usize, b: usize) -> bool {
        self.incompatible[a][b / 64] >> (b % 64) & 1 == 1
    }

    fn mass_below(&self, hi: usize) -> f64 {
        if hi == 0 { 0.0 } else { self.cumulative[hi.min(self.len()) - 1] }
    }
}

/// Contour model of a catalog: intensity `exp(-beta Phi)` on catalog contours,
/// infinite leap against incompatible contours, and the whole catalog as
/// impact region. Particles carry the catalog
/// index both as a one-dimensional lattice site and as their shape spin.
pub struct PottsContourModel {
    pub catalog: Arc<PottsCatalog>,
}

impl PottsContourModel {
    pub fn particle(&self, idx: usize) -> Particle {
        Particle::new(Location::lattice(&[idx as i64]), Spin::Shape(idx as u32))
    }

    pub fn index(p: &Particle) -> usize {
        p.spin.shape().expect("contour particles carry a shape index") as usize
    }

    pub fn window(&self) -> Window {
        Window::lattice_box(&[0], &[self.catalog.len() as i64])
    }

    fn indices(&self, piece: &WindowPiece) -> Vec<usize> {
        let n = self.catalog.len() as i64;
        let base: Vec<usize> = match &piece.region {
            LocationRegion::LatticeBox { lo, hi } => (lo[0].max(0)..hi[0].min(n)).map(|i| i as usize).collect(),
            LocationRegion::Sites(s) => s.iter().filter(|v| v[0] >= 0 && v[0] < n).map(|v| v[0] as usize).collect(),
            _ => Vec::new(),
        };
        base.into_iter().filter(|&i| piece.spins.contains(&Spin::Shape(i as u32))).collect()
    }
}

impl DilutedModel for PottsContourModel {
    fn name(&self) -> String {
        "potts-contours".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn piece_mass(&self, piece: &WindowPiece) -> f64 {
        if let (LocationRegion::LatticeBox { lo, hi }, SpinSet::All) = (&piece.region, &piece.spins) {
            let n = self.catalog.len() as i64;
            let (a, b) = (lo[0].clamp(0, n) as usize, hi[0].clamp(0, n) as usize);
            return if b > a { self.catalog.mass_below(b) - self.catalog.mass_below(a) } else { 0.0 };
        }
        self.indices(piece).iter().map(|&i| self.catalog.weights[i]).sum()
    }

    fn sample_piece(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle {
        if let (LocationRegion::LatticeBox { lo, hi }, SpinSet::All) = (&piece.region, &piece.spins) {
            let n = self.catalog.len() as i64;
            let (a, b) = (lo[0].clamp(0, n) as usize, hi[0].clamp(0, n) as usize);
            let base = self.catalog.mass_below(a);
            let u = base + rng.random::<f64>() * (self.catalog.mass_below(b) - base);
            let k = self.catalog.cumulative[a..b].partition_point(|&c| c <= u);
            return self.particle((a + k).min(b - 1));
        }
        let idx = self.indices(piece);
        let total: f64 = idx.iter().map(|&i| self.catalog.weights[i]).sum();
        let mut u = rng.random::<f64>() * total;
        for &i in &idx {
            u -= self.catalog.weights[i];
            if u < 0.0 {
                return self.particle(i);
            }
        }
        self.particle(*idx.last().expect("sampling from an empty piece"))
    }

    fn energy_leap(&self, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        let i = Self::index(p);
        if eta.particles().any(|q| self.catalog.incompatible(i, Self::index(q))) {
            Energy::INFINITY
        } else {
            Energy::ZERO
        }
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    /// The whole catalog: contours of one bounded region are few and light.
    fn impact_region(&self, _p: &Particle) -> Window {
        self.window()
    }

    fn size(&self, p: &Particle) -> f64 {
        self.catalog.contours[Self::index(p)].size() as f64
    }

    fn atoms(&self, w: &Window) -> Option<Vec<(Particle, f64)>> {
        let mut out = BTreeMap::new();
        for piece in &w.pieces {
            for i in self.indices(piece) {
                out.insert(self.particle(i), self.catalog.weights[i]);
            }
        }
        Some(out.into_iter().collect())
    }
}

/// Exact finite-volume Potts law on a small region with constant boundary.
#[derive(Debug)]
pub struct ExactPotts {
    pub region: Vec<Site>,
    pub label: u16,
    pub q: u16,
    cumulative: Vec<f64>,
}

impl ExactPotts {
    pub fn new(params: &PottsParams, region: &[Site], label: u16, max_states: f64) -> Result<Self> {
        let states = (params.q as f64).powi(region.len() as i32);
        if states > max_states {
            return Err(FfgError::StateSpaceTooLarge(states));
        }
        let mut region = region.to_vec();
        region.sort();
        let mut cumulative = Vec::with_capacity(states as usize);
        let mut field = SpinField::constant(region.clone(), label);
        let mut acc = 0.0;
        for k in 0..states as u64 {
            decode(k, params.q, &mut field.values);
            acc += (-params.beta * potts_energy(&field, params.r)).exp();
            cumulative.push(acc);
        }
        Ok(ExactPotts { region, label, q: params.q, cumulative })
    }

    pub fn probability(&self, field: &SpinField) -> f64 {
        let k = encode(&field.values, self.q) as usize;
        let prev = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        (self.cumulative[k] - prev) / self.cumulative.last().unwrap()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> SpinField {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let mut f = SpinField::constant(self.region.clone(), self.label);
        decode(k as u64, self.q, &mut f.values);
        f
    }
}

fn decode(mut k: u64, q: u16, values: &mut [u16]) {
    for v in values.iter_mut() {
        *v = (k % q as u64) as u16;
        k /= q as u64;
    }
}

fn encode(values: &[u16], q: u16) -> u64 {
    values.iter().rev().fold(0u64, |acc, &v| acc * q as u64 + v as u64)
}

/// Draws of the finite-volume Potts measure with constant boundary label by
/// the alignment of exterior contours: sample the contour model, keep its
/// exterior contours, and fill every interior recursively.
pub struct AlignmentSampler {
    pub params: PottsParams,
    /// Regions with at most this many sites are drawn by exact enumeration.
    pub enumeration_threshold: usize,
    /// Neglected probability allowed when truncating catalogs.
    pub tolerance: f64,
    pub max_depth: usize,
    pub node_cap: u64,
    pub budget: Budget,
    catalogs: Mutex<HashMap<(Vec<Site>, u16), Arc<PottsCatalog>>>,
    exact: Mutex<HashMap<(Vec<Site>, u16), Arc<ExactPotts>>>,
}

impl AlignmentSampler {
    pub fn new(params: PottsParams) -> Result<Self> {
        if params.r != 1 {
            return Err(FfgError::InvalidModel("the alignment sampler supports range r = 1".into()));
        }
        Ok(AlignmentSampler {
            params,
            enumeration_threshold: 9,
            tolerance: 1e-3,
            max_depth: 64,
            node_cap: 50_000_000,
            budget: Budget::default(),
            catalogs: Mutex::new(HashMap::new()),
            exact: Mutex::new(HashMap::new()),
        })
    }

    pub fn catalog(&self, region: &[Site], label: u16) -> Result<Arc<PottsCatalog>> {
        let key = (region.to_vec(), label);
        if let Some(c) = self.catalogs.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let phi = phi_max_for(&self.params, region.len(), self.tolerance);
        let c = Arc::new(build_potts_catalog(self.params, label, region, phi, self.node_cap)?);
        self.catalogs.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }

    /// Make a previously built catalog available; it must use this sampler's parameters.
    pub fn insert_catalog(&self, catalog: PottsCatalog) -> Result<()> {
        if catalog.params != self.params {
            return Err(FfgError::InvalidConfig("catalog parameters differ from the sampler's".into()));
        }
        let key = (catalog.region.clone(), catalog.label);
        self.catalogs.lock().unwrap().insert(key, Arc::new(catalog));
        Ok(())
    }

    /// Catalogs built or inserted so far, sorted by region and label.
    pub fn catalogs(&self) -> Vec<Arc<PottsCatalog>> {
        let map = self.catalogs.lock().unwrap();
        let mut keys: Vec<&(Vec<Site>, u16)> = map.keys().collect();
        keys.sort();
        keys.into_iter().map(|k| map[k].clone()).collect()
    }

    fn exact(&self, region: &[Site], label: u16) -> Result<Arc<ExactPotts>> {
        let key = (region.to_vec(), label);
        if let Some(e) = self.exact.lock().unwrap().get(&key) {
            return Ok(e.clone());
        }
        let e = Arc::new(ExactPotts::new(&self.params, region, label, 1e7)?);
        self.exact.lock().unwrap().insert(key, e.clone());
        Ok(e)
    }

    /// A draw of the Potts measure on `region` with boundary label `label`.
    pub fn sample(&self, region: &[Site], label: u16, streams: &RngStreams) -> Result<SpinField> {
        let mut region = region.to_vec();
        region.sort();
        region.dedup();
        self.sample_rec(&region, label, streams, 0)
    }

    /// Contours of the top-level contour-model draw that are not enclosed by
    /// another drawn contour.
    pub fn exterior_contours(&self, region: &[Site], label: u16, streams: &RngStreams) -> Result<Vec<PsContour>> {
        let cat = self.catalog(region, label)?;
        if cat.is_empty() {
            return Ok(Vec::new());
        }
        let model = PottsContourModel { catalog: cat.clone() };
        let y = perfect_sample(&model, &model.window(), Some(&ParticleConfiguration::new()), &self.budget, streams)?;
        let drawn: Vec<&PsContour> = y.particles().map(|p| &cat.contours[PottsContourModel::index(p)]).collect();
        Ok(drawn
            .iter()
            .filter(|c| !drawn.iter().any(|o| o.encloses(c.support[0])))
            .map(|c| (*c).clone())
            .collect())
    }

    fn sample_rec(&self, region: &[Site], label: u16, streams: &RngStreams, depth: usize) -> Result<SpinField> {
        if depth > self.max_depth {
            return Err(FfgError::RecursionBudgetExceeded(depth));
        }
        if region.len() <= self.enumeration_threshold {
            let e = self.exact(region, label)?;
            return Ok(e.sample(&mut streams.stream(0)));
        }
        let ext = self.exterior_contours(region, label, streams)?;
        let mut field = SpinField::constant(region.to_vec(), label);
        let mut child = 0u64;
        for c in &ext {
            for (s, l) in c.support.iter().zip(&c.labels) {
                field.set(*s, *l);
            }
            for (j, comp) in &c.interiors {
                let mut core = Vec::new();
                for &x in comp {
                    let near = c.support.iter().any(|&s| l1(s, x) <= 2 * self.params.r);
                    if near {
                        field.set(x, *j);
                    } else if region.binary_search(&x).is_ok() {
                        core.push(x);
                    }
                }
                if core.is_empty() {
                    continue;
                }
                child += 1;
                let inner = self.sample_rec(&core, *j, &streams.child(child), depth + 1)?;
                for (s, v) in inner.sites.iter().zip(&inner.values) {
                    field.set(*s, *v);
                }
            }
        }
        Ok(field)
    }
}

/// Draw of the Potts measure on the box `lo + [0, w) x [0, h)` shrunk by `2r`,
/// the region whose configurations are in bijection with contour families
/// strictly inside the box.
pub fn i_alignment_sample(
    sampler: &AlignmentSampler,
    label: u16,
    lo: Site,
    w: i64,
    h: i64,
    streams: &RngStreams,
) -> Result<SpinField> {
    let m = 2 * sampler.params.r;
    sampler.sample(&box_sites([lo[0] + m, lo[1] + m], w - 2 * m, h - 2 * m), label, streams)
}

/// External boundary: sites outside `delta` at nearest-neighbour distance one.
pub fn external_boundary(delta: &[Site]) -> Vec<Site> {
    let set: BTreeSet<Site> = delta.iter().cloned().collect();
    let mut out: BTreeSet<Site> = BTreeSet::new();
    for s in delta {
        for n in NEIGHBOURS {
            let y = add(*s, n);
            if !set.contains(&y) {
                out.insert(y);
            }
        }
    }
    out.into_iter().collect()
}

/// Widom-Rowlinson admissibility of a field: no `+` and `-` within sup distance `r`.
pub fn wr_admissible(field: &SpinField, r: i64) -> bool {
    let ball = ball_offsets(r, BallNorm::Sup);
    for (s, v) in field.sites.iter().zip(&field.values) {
        if *v == WR_EMPTY {
            continue;
        }
        let other = if *v == WR_PLUS { WR_MINUS } else { WR_PLUS };
        if ball.iter().any(|o| field.get(add(*s, *o)) == other) {
            return false;
        }
    }
    true
}

/// Diluted partition function as a polynomial in the fugacity: entry `k` is
/// the number of configurations with `k` particles in `delta` whose contours
/// all have volume at nearest-neighbour distance more than one from the
/// complement of `delta`.
pub fn wr_partition_polynomial(delta: &[Site], label: u16, r: i64, cap: usize) -> Result<Vec<f64>> {
    if delta.len() > cap {
        return Err(FfgError::StateSpaceTooLarge(3f64.powi(delta.len() as i32)));
    }
    let mut sites = delta.to_vec();
    sites.sort();
    sites.dedup();
    let system = SpinSystem::WidomRowlinson { r, lambda: 2.0 };
    let set: BTreeSet<Site> = sites.iter().cloned().collect();
    let deep = |x: &Site| set.contains(x) && NEIGHBOURS.iter().all(|n| set.contains(&add(*x, *n)));
    let mut coeffs = vec![0.0; sites.len() + 1];
    let mut field = SpinField::constant(sites.clone(), label);
    for k in 0..3u64.pow(sites.len() as u32) {
        decode(k, 3, &mut field.values);
        if !wr_admissible(&field, r) {
            continue;
        }
        let ok = extract_contours(&field, &system).iter().all(|c| c.volume().iter().all(deep));
        if ok {
            let occupied = field.values.iter().filter(|&&v| v != WR_EMPTY).count();
            coeffs[occupied] += 1.0;
        }
    }
    Ok(coeffs)
}

pub fn eval_polynomial(coeffs: &[f64], lambda: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * lambda + c)
}

pub fn wr_diluted_partition(delta: &[Site], label: u16, r: i64, lambda: f64, cap: usize) -> Result<f64> {
    Ok(eval_polynomial(&wr_partition_polynomial(delta, label, r, cap)?, lambda))
}

/// Intensity of a `+`-contour in the Widom-Rowlinson contour model:
/// `exp(-Phi)` times the ratios `Z^j / Z^+` over its interior components.
pub fn wr_contour_intensity(c: &PsContour, r: i64, lambda: f64, cap: usize) -> Result<f64> {
    let mut w = (-c.energy).exp();
    for (j, comp) in &c.interiors {
        if *j != c.exterior {
            w *= wr_diluted_partition(comp, *j, r, lambda, cap)? / wr_diluted_partition(comp, c.exterior, r, lambda, cap)?;
        }
    }
    Ok(w)
}

/// The `+`-contours of all admissible configurations on `region` with `+` outside.
pub fn wr_catalog(region: &[Site], r: i64, lambda: f64) -> Vec<PsContour> {
    let system = SpinSystem::WidomRowlinson { r, lambda };
    let mut field = SpinField::constant(region.to_vec(), WR_PLUS);
    let mut found: BTreeMap<(Vec<Site>, Vec<u16>), PsContour> = BTreeMap::new();
    for k in 0..3u64.pow(field.sites.len() as u32) {
        decode(k, 3, &mut field.values);
        if !wr_admissible(&field, r) {
            continue;
        }
        for c in extract_contours(&field, &system) {
            if c.exterior == WR_PLUS {
                found.entry((c.support.clone(), c.labels.clone())).or_insert(c);
            }
        }
    }
    found.into_values().collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PeierlsReport {
    pub contours: usize,
    /// Smallest ratio `Phi / (|gamma| log lambda)` over the catalog.
    pub min_ratio: f64,
    /// Contour attaining the smallest ratio.
    pub worst: Option<PsContour>,
}

pub fn wr_peierls(catalog: &[PsContour], lambda: f64) -> PeierlsReport {
    let mut min_ratio = f64::INFINITY;
    let mut worst = None;
    for c in catalog {
        let ratio = c.energy / (c.size() as f64 * lambda.ln());
        if ratio < min_ratio {
            min_ratio = ratio;
            worst = Some(c.clone());
        }
    }
    PeierlsReport { contours: catalog.len(), min_ratio, worst }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioFit {
    pub c1: f64,
    pub c2: f64,
    /// `(region size, external boundary size, lambda, Z^0 / Z^+)` rows.
    pub rows: Vec<(usize, usize, f64, f64)>,
    pub holds: bool,
}

/// Fit constants for `Z^0 / Z^+ <= (2^c1 / lambda^c2)^{#external boundary}`
/// over every nonempty subset of `region`: `c2` is the smallest per-region
/// decay exponent and `c1` the smallest value making the bound hold.
pub fn wr_ratio_fit(region: &[Site], r: i64, lambdas: &[f64], cap: usize) -> Result<RatioFit> {
    let n = region.len();
    let mut per_region = Vec::new();
    for mask in 1u32..(1 << n) {
        let delta: Vec<Site> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| region[i]).collect();
        let z0 = wr_partition_polynomial(&delta, WR_EMPTY, r, cap)?;
        let zp = wr_partition_polynomial(&delta, WR_PLUS, r, cap)?;
        let b = external_boundary(&delta).len();
        let vals: Vec<(f64, f64)> =
            lambdas.iter().map(|&l| (l, eval_polynomial(&z0, l) / eval_polynomial(&zp, l))).collect();
        per_region.push((delta.len(), b, vals));
    }
    let mut c2 = f64::INFINITY;
    for (_, b, vals) in &per_region {
        let (xs, ys): (Vec<f64>, Vec<f64>) = vals.iter().map(|(l, q)| (l.ln(), q.ln())).unzip();
        let slope = crate::stats::linear_fit(&xs, &ys).slope;
        c2 = c2.min(-slope / *b as f64);
    }
    let mut c1 = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for (size, b, vals) in &per_region {
        for (l, q) in vals {
            c1 = c1.max((q.ln() / *b as f64 + c2 * l.ln()) / 2f64.ln());
            rows.push((*size, *b, *l, *q));
        }
    }
    let c1 = c1.max(0.0);
    let holds = c2 > 0.0
        && rows.iter().all(|(_, b, l, q)| *q <= (2f64.powf(c1) / l.powf(c2)).powi(*b as i32) * (1.0 + 1e-12));
    Ok(RatioFit { c1, c2, rows, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn potts(q: u16) -> SpinSystem {
        SpinSystem::Potts { q, r: 1 }
    }

    #[test]
    fn single_flip_has_a_five_site_contour_of_energy_four() {
        let mut f = SpinField::boxed([-2, -2], 5, 5, 0);
        f.set([0, 0], 1);
        assert_eq!(defect_set(&f, &potts(2)).len(), 5);
        let cs = extract_contours(&f, &potts(2));
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].size(), 5);
        assert_eq!(cs[0].energy, 4.0);
        assert_eq!(cs[0].exterior, 0);
        assert!(cs[0].energy >= cs[0].size() as f64 / 2.0);
        assert!(extract_contours(&SpinField::boxed([0, 0], 3, 3, 1), &potts(2)).is_empty());
    }

    #[test]
    fn distant_flips_give_separate_contours() {
        let mut f = SpinField::boxed([0, 0], 9, 3, 0);
        f.set([1, 1], 1);
        f.set([7, 1], 2);
        assert_eq!(extract_contours(&f, &potts(3)).len(), 2);
    }

    #[test]
    fn energy_is_invariant_under_relabeling() {
        let mut f = SpinField::boxed([0, 0], 4, 4, 0);
        f.set([1, 1], 1);
        f.set([2, 1], 2);
        f.set([2, 2], 1);
        let g = SpinField { values: f.values.iter().map(|v| (v + 1) % 3).collect(), outside: 1, ..f.clone() };
        let (a, b) = (extract_contours(&f, &potts(3)), extract_contours(&g, &potts(3)));
        assert_eq!(a.iter().map(|c| c.energy).sum::<f64>(), b.iter().map(|c| c.energy).sum::<f64>());
        assert_eq!(potts_energy(&f, 1), potts_energy(&g, 1));
        assert_eq!(potts_energy(&f, 1), a.iter().map(|c| c.energy).sum::<f64>());
    }

    #[test]
    fn single_empty_site_breaks_the_literal_wr_peierls_constant() {
        let mut f = SpinField::boxed([-1, -1], 3, 3, WR_PLUS);
        f.set([0, 0], WR_EMPTY);
        let sys = SpinSystem::WidomRowlinson { r: 1, lambda: 10.0 };
        let cs = extract_contours(&f, &sys);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].size(), 9);
        assert!((cs[0].energy - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_and_single_site_partition_functions() {
        assert_eq!(wr_diluted_partition(&[], WR_EMPTY, 1, 5.0, 12).unwrap(), 1.0);
        assert_eq!(wr_diluted_partition(&[[0, 0]], WR_EMPTY, 1, 5.0, 12).unwrap(), 1.0);
        assert_eq!(wr_diluted_partition(&[[0, 0]], WR_PLUS, 1, 5.0, 12).unwrap(), 5.0);
        assert!(wr_diluted_partition(&box_sites([0, 0], 4, 4), WR_PLUS, 1, 5.0, 12).is_err());
    }

    #[test]
    fn contour_model_weights_and_incompatibility() {
        let params = PottsParams::new(2, 1, 1.0).unwrap();
        let cat = build_potts_catalog(params, 0, &box_sites([0, 0], 3, 3), f64::INFINITY, 10_000_000).unwrap();
        let single = cat.contours.iter().position(|c| c.size() == 5 && c.energy == 4.0).unwrap();
        assert!((cat.weights[single] - (-4.0f64).exp()).abs() < 1e-15);
        let json = serde_json::to_string(&cat).unwrap();
        let back: PottsCatalog = serde_json::from_str(&json).unwrap();
        assert_eq!(back.weights, cat.weights);
        assert!(back.incompatible(single, single));
        let m = PottsContourModel { catalog: Arc::new(back) };
        let p = m.particle(single);
        assert_eq!(m.energy_leap(&ParticleConfiguration::new(), &p), Energy::ZERO);
        assert!(m.energy_leap(&ParticleConfiguration::from_particles(vec![p.clone()]), &p).is_infinite());
    }
}
