use std::collections::BTreeSet;
use std::sync::OnceLock;

use rand::{Rng, RngCore};
use serde::Serialize;

use super::geometry::{components, compatible, enumerate_shapes, Contour, Plaquette, ShapeConstraint, Vertex};
use crate::error::{FfgError, Result};
use crate::model::{ClosedFormAlpha, DilutedModel, Energy};
use crate::models::lattice_sites;
use crate::space::{Location, LocationRegion, Particle, ParticleConfiguration, Spin, SpinSet, Window, WindowPiece};

/// Ising spins on a rectangular box of sites, `+1` outside the box.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct IsingGrid {
    pub lo: [i64; 2],
    pub width: usize,
    pub height: usize,
    pub spins: Vec<i8>,
}

impl IsingGrid {
    pub fn plus(lo: [i64; 2], width: usize, height: usize) -> Self {
        IsingGrid { lo, width, height, spins: vec![1; width * height] }
    }

    pub fn from_bits(lo: [i64; 2], width: usize, height: usize, bits: u64) -> Self {
        let spins = (0..width * height).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect();
        IsingGrid { lo, width, height, spins }
    }

    fn index(&self, x: [i64; 2]) -> Option<usize> {
        let (dx, dy) = (x[0] - self.lo[0], x[1] - self.lo[1]);
        if dx < 0 || dy < 0 || dx >= self.width as i64 || dy >= self.height as i64 {
            None
        } else {
            Some(dy as usize * self.width + dx as usize)
        }
    }

    pub fn get(&self, x: [i64; 2]) -> i8 {
        self.index(x).map(|i| self.spins[i]).unwrap_or(1)
    }

    pub fn set(&mut self, x: [i64; 2], s: i8) {
        let i = self.index(x).expect("site inside the grid");
        self.spins[i] = s;
    }

    pub fn sites(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (0..self.height as i64).flat_map(move |y| (0..self.width as i64).map(move |x| [self.lo[0] + x, self.lo[1] + y]))
    }

    /// Dual edges across unlike nearest-neighbour bonds, boundary bonds included.
    pub fn unlike_edges(&self) -> Vec<Plaquette> {
        let mut out = Vec::new();
        let (x0, y0) = (self.lo[0], self.lo[1]);
        let (x1, y1) = (x0 + self.width as i64, y0 + self.height as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                // Vertical edge at dual vertex (x, y) separates (x-1, y) and (x, y).
                if y < y1 && self.get([x - 1, y]) != self.get([x, y]) {
                    out.push(Plaquette::new([x, y], 1));
                }
                // Horizontal edge at (x, y) separates (x, y-1) and (x, y).
                if x < x1 && self.get([x, y - 1]) != self.get([x, y]) {
                    out.push(Plaquette::new([x, y], 0));
                }
            }
        }
        out
    }

    pub fn unlike_bonds(&self) -> usize {
        self.unlike_edges().len()
    }
}

/// Maximal connected components of the unlike-bond edges.
pub fn contours_from_spins(grid: &IsingGrid) -> Vec<Contour> {
    components(&grid.unlike_edges())
}

/// Spin configuration in which a site is `-` iff it is surrounded by an odd
/// number of contours; every site outside the grid is `+`.
pub fn plus_alignment(family: &[Contour], lo: [i64; 2], width: usize, height: usize) -> Result<IsingGrid> {
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            if !compatible(a, b) {
                return Err(FfgError::InvalidConfig("plus_alignment needs a compatible family".into()));
            }
        }
    }
    let mut g = IsingGrid::plus(lo, width, height);
    let site_list: Vec<[i64; 2]> = g.sites().collect();
    for x in site_list {
        // Cast a ray to the left through the row of x; it crosses the
        // vertical edges at dual vertices (a, x1) with a <= x0.
        let crossings: usize = family
            .iter()
            .map(|c| c.edges.iter().filter(|e| e.axis == 1 && e.v[1] == x[1] && e.v[0] <= x[0]).count())
            .sum();
        if crossings % 2 == 1 {
            g.set(x, -1);
        }
    }
    Ok(g)
}

/// Every contour that occurs in some spin configuration of the site box, with
/// `+` outside.
pub fn box_contours(lo: [i64; 2], width: usize, height: usize) -> Result<Vec<Contour>> {
    let n = width * height;
    if n > 20 {
        return Err(FfgError::StateSpaceTooLarge(2f64.powi(n as i32)));
    }
    let mut set = BTreeSet::new();
    for bits in 0..(1u64 << n) {
        for c in contours_from_spins(&IsingGrid::from_bits(lo, width, height, bits)) {
            set.insert(c);
        }
    }
    Ok(set.into_iter().collect())
}

/// Exact plus-boundary Ising law on a site box with weight
/// `exp(-beta * #unlike bonds)`.
pub fn ising_exact(beta: f64, lo: [i64; 2], width: usize, height: usize) -> Result<Vec<(IsingGrid, f64)>> {
    let n = width * height;
    if n > 24 {
        return Err(FfgError::StateSpaceTooLarge(2f64.powi(n as i32)));
    }
    let mut out: Vec<(IsingGrid, f64)> = (0..(1u64 << n))
        .map(|bits| {
            let g = IsingGrid::from_bits(lo, width, height, bits);
            let w = (-beta * g.unlike_bonds() as f64).exp();
            (g, w)
        })
        .collect();
    let z: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut out {
        *w /= z;
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Diluteness summary for the contour model.
#[derive(Clone, Debug, Serialize)]
pub struct IsingAlpha {
    pub beta: f64,
    pub l_max: usize,
    /// Supremum over catalog contours of the truncated series.
    pub alpha: f64,
    /// Truncated series for contours touching a fixed plaquette.
    pub alpha0: f64,
    /// Bound on the contribution of shapes larger than `l_max`.
    pub tail_bound: f64,
    /// Bound valid for every contour: sum over shapes through a vertex of size times weight.
    pub vertex_bound: f64,
}

/// Catalog of contour shapes with the anchor-translate counts needed by the
/// diluteness sums.
#[derive(Debug)]
pub struct ShapeCatalog {
    pub shapes: Vec<Contour>,
    pub l_max: usize,
    vertices: Vec<Vec<Vertex>>,
    /// `hits[g][n]`: number of located contours of size `n` sharing a vertex with shape `g`.
    hits: OnceLock<Vec<Vec<u64>>>,
    extent: i64,
}

impl ShapeCatalog {
    pub fn new(shapes: Vec<Contour>, l_max: usize) -> Self {
        let vertices: Vec<Vec<Vertex>> = shapes.iter().map(|s| s.vertices()).collect();
        let extent = shapes.iter().map(|s| s.extent()).max().unwrap_or(0);
        ShapeCatalog { shapes, l_max, vertices, hits: OnceLock::new(), extent }
    }

    pub fn enumerate(l_max: usize) -> Result<Self> {
        Ok(Self::new(enumerate_shapes(l_max, ShapeConstraint::AllAnchored, 200_000_000)?, l_max))
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn extent(&self) -> i64 {
        self.extent
    }

    pub fn vertices(&self, id: usize) -> &[Vertex] {
        &self.vertices[id]
    }

    fn translates_hitting(a: &[Vertex], b: &[Vertex]) -> u64 {
        let mut t: Vec<Vertex> = Vec::with_capacity(a.len() * b.len());
        for u in a {
            for w in b {
                t.push([u[0] - w[0], u[1] - w[1]]);
            }
        }
        t.sort_unstable();
        t.dedup();
        t.len() as u64
    }

    fn hits(&self) -> &Vec<Vec<u64>> {
        self.hits.get_or_init(|| {
            self.vertices
                .iter()
                .map(|vg| {
                    let mut row = vec![0u64; self.l_max + 1];
                    for (s, vs) in self.shapes.iter().zip(&self.vertices) {
                        row[s.size()] += Self::translates_hitting(vg, vs);
                    }
                    row
                })
                .collect()
        })
    }

    fn tail(&self, beta: f64) -> f64 {
        let ratio = 3.0 * (-beta).exp();
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        let mut sum = 0.0;
        let mut n = self.l_max + 1;
        loop {
            if n % 2 == 0 {
                let term = 4.0 * 3f64.powi(n as i32 - 1) * n as f64 * (-beta * n as f64).exp();
                sum += term;
                if term < 1e-18 * sum.max(1e-300) && n > self.l_max + 10 {
                    break;
                }
            }
            n += 1;
            if n > self.l_max + 100_000 {
                break;
            }
        }
        sum
    }

    pub fn alpha(&self, beta: f64) -> IsingAlpha {
        let hits = self.hits();
        let mut alpha: f64 = 0.0;
        for (g, row) in hits.iter().enumerate() {
            let s: f64 = row.iter().enumerate().map(|(n, &c)| c as f64 * n as f64 * (-beta * n as f64).exp()).sum();
            alpha = alpha.max(s / self.shapes[g].size() as f64);
        }
        let p0 = [[0, 0], [1, 0]];
        let alpha0: f64 = self
            .shapes
            .iter()
            .zip(&self.vertices)
            .map(|(s, vs)| Self::translates_hitting(&p0, vs) as f64 * s.size() as f64 * (-beta * s.size() as f64).exp())
            .sum();
        let vertex_bound: f64 = self
            .shapes
            .iter()
            .zip(&self.vertices)
            .map(|(s, vs)| vs.len() as f64 * s.size() as f64 * (-beta * s.size() as f64).exp())
            .sum();
        let tail = self.tail(beta);
        IsingAlpha { beta, l_max: self.l_max, alpha, alpha0, tail_bound: tail, vertex_bound }
    }
}

/// Diluteness of the contour model with a truncation check: the tail bound
/// may not exceed `tolerance` times the truncated value.
pub fn alpha_ising(catalog: &ShapeCatalog, beta: f64, tolerance: f64) -> Result<IsingAlpha> {
    let a = catalog.alpha(beta);
    if !(a.tail_bound <= tolerance * a.alpha) {
        return Err(FfgError::TruncationTooCoarse { value: a.alpha, tail: a.tail_bound, tolerance });
    }
    Ok(a)
}

/// Inverse temperature at which the truncated alpha crosses one.
pub fn alpha_crossing(catalog: &ShapeCatalog) -> f64 {
    let (mut lo, mut hi) = (1e-3, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if catalog.alpha(mid).alpha >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ising contours as a diluted model: particles are contours located at their
/// anchor with a shape mark, intensity `exp(-beta |shape|)`, and infinite
/// leaps for vertex-sharing contours. Optionally every contour must lie in
/// a box of dual vertices.
#[derive(Debug)]
pub struct IsingContourModel {
    pub beta: f64,
    pub catalog: ShapeCatalog,
    /// Inclusive dual-vertex box that every contour must lie in.
    pub confine: Option<(Vertex, Vertex)>,
    weights: Vec<f64>,
}

impl IsingContourModel {
    /// Unconfined model truncated at shapes of size `l_max`.
    pub fn new(beta: f64, l_max: usize) -> Result<Self> {
        Ok(Self::from_catalog(beta, ShapeCatalog::enumerate(l_max)?, None))
    }

    /// Model whose contours live in the dual box of a site box; the catalog
    /// holds every contour that fits.
    pub fn in_site_box(beta: f64, lo: [i64; 2], width: usize, height: usize) -> Result<Self> {
        let located = box_contours(lo, width, height)?;
        let mut shapes: Vec<Contour> = located.iter().map(|c| c.shape()).collect::<BTreeSet<_>>().into_iter().collect();
        shapes.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        let l_max = shapes.iter().map(|s| s.size()).max().unwrap_or(0);
        let confine = (lo, [lo[0] + width as i64, lo[1] + height as i64]);
        Ok(Self::from_catalog(beta, ShapeCatalog::new(shapes, l_max), Some(confine)))
    }

    pub fn from_catalog(beta: f64, catalog: ShapeCatalog, confine: Option<(Vertex, Vertex)>) -> Self {
        let weights = catalog.shapes.iter().map(|s| (-beta * s.size() as f64).exp()).collect();
        IsingContourModel { beta, catalog, confine, weights }
    }

    /// Anchor window of the confining box.
    pub fn anchor_window(&self) -> Option<Window> {
        self.confine.map(|(lo, hi)| Window::lattice_box(&[lo[0], lo[1]], &[hi[0] + 1, hi[1] + 1]))
    }

    pub fn contour_of(&self, p: &Particle) -> Contour {
        let a = anchor_of(p);
        self.catalog.shapes[p.spin.shape().expect("contour particles carry a shape") as usize].translate(a)
    }

    pub fn particle(&self, c: &Contour) -> Option<Particle> {
        let s = c.shape();
        let id = self.catalog.shapes.iter().position(|x| *x == s)?;
        let a = c.anchor();
        Some(Particle::new(Location::lattice(&a), Spin::Shape(id as u32)))
    }

    fn fits(&self, anchor: Vertex, id: usize) -> bool {
        match self.confine {
            None => true,
            Some((lo, hi)) => self.catalog.vertices(id).iter().all(|v| {
                let (x, y) = (v[0] + anchor[0], v[1] + anchor[1]);
                lo[0] <= x && x <= hi[0] && lo[1] <= y && y <= hi[1]
            }),
        }
    }

    fn located(&self, piece: &WindowPiece) -> Vec<(Vertex, usize, f64)> {
        let sites = lattice_sites(&piece.region).unwrap_or_default();
        let mut out = Vec::new();
        for s in sites {
            let a = [s[0], s[1]];
            for (id, w) in self.weights.iter().enumerate() {
                if piece.spins.contains(&Spin::Shape(id as u32)) && self.fits(a, id) {
                    out.push((a, id, *w));
                }
            }
        }
        out
    }

    pub fn family(&self, c: &ParticleConfiguration) -> Vec<Contour> {
        c.particles().map(|p| self.contour_of(p)).collect()
    }
}

fn anchor_of(p: &Particle) -> Vertex {
    let c = p.location.as_lattice().expect("contour anchors are dual lattice vertices");
    [c[0], c[1]]
}

impl DilutedModel for IsingContourModel {
    fn name(&self) -> String {
        "ising-contours".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn piece_mass(&self, piece: &WindowPiece) -> f64 {
        if self.confine.is_none() {
            if let LocationRegion::LatticeBox { lo, hi } = &piece.region {
                let count: f64 = lo.iter().zip(hi).map(|(a, b)| (b - a).max(0) as f64).product();
                let w: f64 = self
                    .weights
                    .iter()
                    .enumerate()
                    .filter(|(id, _)| piece.spins.contains(&Spin::Shape(*id as u32)))
                    .map(|(_, w)| w)
                    .sum();
                return count * w;
            }
        }
        self.located(piece).iter().map(|(_, _, w)| w).sum()
    }

    fn sample_piece(&self, piece: &WindowPiece, rng: &mut dyn RngCore) -> Particle {
        let located = self.located(piece);
        let total: f64 = located.iter().map(|(_, _, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = located.last().expect("sampling from a null piece");
        for l in &located {
            if u < l.2 {
                pick = l;
                break;
            }
            u -= l.2;
        }
        Particle::new(Location::lattice(&pick.0), Spin::Shape(pick.1 as u32))
    }

    fn energy_leap(&self, eta: &ParticleConfiguration, p: &Particle) -> Energy {
        let a = anchor_of(p);
        let id = p.spin.shape().expect("contour particles carry a shape") as usize;
        if !self.fits(a, id) {
            return Energy::INFINITY;
        }
        let reach = 2 * self.catalog.extent() + 1;
        let mine: Vec<Vertex> = self.catalog.vertices(id).iter().map(|v| [v[0] + a[0], v[1] + a[1]]).collect();
        for (q, _) in eta.distinct() {
            let b = anchor_of(q);
            if (b[0] - a[0]).abs() > reach || (b[1] - a[1]).abs() > reach {
                continue;
            }
            let qid = q.spin.shape().expect("contour particles carry a shape") as usize;
            let hit = self
                .catalog
                .vertices(qid)
                .iter()
                .any(|v| mine.binary_search(&[v[0] + b[0], v[1] + b[1]]).is_ok());
            if hit {
                return Energy::INFINITY;
            }
        }
        Energy::ZERO
    }

    fn energy_loss_bound(&self) -> f64 {
        0.0
    }

    fn impact_region(&self, p: &Particle) -> Window {
        let c = self.contour_of(p);
        let vs = c.vertices();
        let w = self.catalog.extent();
        let (minx, maxx) = (vs.iter().map(|v| v[0]).min().unwrap(), vs.iter().map(|v| v[0]).max().unwrap());
        let (miny, maxy) = (vs.iter().map(|v| v[1]).min().unwrap(), vs.iter().map(|v| v[1]).max().unwrap());
        Window::lattice_box(&[minx - w, miny - w], &[maxx + 1, maxy + w + 1])
    }

    fn size(&self, p: &Particle) -> f64 {
        self.catalog.shapes[p.spin.shape().unwrap() as usize].size() as f64
    }

    fn atoms(&self, w: &Window) -> Option<Vec<(Particle, f64)>> {
        if w.negated {
            return None;
        }
        let mut out: Vec<(Particle, f64)> = w
            .pieces
            .iter()
            .flat_map(|piece| self.located(piece))
            .map(|(a, id, wt)| (Particle::new(Location::lattice(&a), Spin::Shape(id as u32)), wt))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out.dedup_by(|a, b| a.0 == b.0);
        Some(out)
    }

    fn spin_quadrature(&self, set: &SpinSet, _n: usize) -> Vec<(Spin, f64)> {
        (0..self.catalog.len() as u32).map(Spin::Shape).filter(|s| set.contains(s)).map(|s| (s, 1.0)).collect()
    }

    fn closed_form_alpha(&self) -> Option<ClosedFormAlpha> {
        let a = self.catalog.alpha(self.beta);
        Some(ClosedFormAlpha {
            alpha: a.alpha,
            literature: None,
            note: format!("truncated at size {}, tail bound {:e}", a.l_max, a.tail_bound),
        })
    }
}
