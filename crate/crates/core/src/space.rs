use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

pub type Coords<T> = SmallVec<[T; 3]>;

/// A point of the location space: either a lattice site or a point of R^d.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Lattice(Coords<i64>),
    Continuum(Coords<f64>),
}

impl Location {
    pub fn lattice(c: &[i64]) -> Self {
        Location::Lattice(c.iter().copied().collect())
    }

    pub fn continuum(c: &[f64]) -> Self {
        Location::Continuum(c.iter().copied().collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            Location::Lattice(c) => c.len(),
            Location::Continuum(c) => c.len(),
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match self {
            Location::Lattice(c) => c[i] as f64,
            Location::Continuum(c) => c[i],
        }
    }

    pub fn coords_f64(&self) -> Coords<f64> {
        (0..self.dim()).map(|i| self.coord(i)).collect()
    }

    pub fn as_lattice(&self) -> Option<&[i64]> {
        match self {
            Location::Lattice(c) => Some(c),
            Location::Continuum(_) => None,
        }
    }

    pub fn sup_dist(&self, other: &Location) -> f64 {
        if let (Location::Lattice(a), Location::Lattice(b)) = (self, other) {
            return a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0) as f64;
        }
        (0..self.dim())
            .map(|i| (self.coord(i) - other.coord(i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn euclid_dist(&self, other: &Location) -> f64 {
        (0..self.dim())
            .map(|i| (self.coord(i) - other.coord(i)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn l1_dist(&self, other: &Location) -> f64 {
        (0..self.dim()).map(|i| (self.coord(i) - other.coord(i)).abs()).sum()
    }

    pub fn dist(&self, other: &Location, norm: Norm) -> f64 {
        match norm {
            Norm::Sup => self.sup_dist(other),
            Norm::Euclid => self.euclid_dist(other),
        }
    }
}

fn cmp_f64_slices(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl Ord for Location {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Location::Lattice(a), Location::Lattice(b)) => a.cmp(b),
            (Location::Continuum(a), Location::Continuum(b)) => cmp_f64_slices(a, b),
            (Location::Lattice(_), Location::Continuum(_)) => Ordering::Less,
            (Location::Continuum(_), Location::Lattice(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Location {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Location {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Location {}

impl Hash for Location {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Location::Lattice(c) => {
                0u8.hash(state);
                c.hash(state);
            }
            Location::Continuum(c) => {
                1u8.hash(state);
                for x in c {
                    x.to_bits().hash(state);
                }
            }
        }
    }
}

/// The mark carried by a particle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    /// Species tags such as '+', '-', '0', 'h' (host) and 'p' (parasite).
    Tag(char),
    /// Potts-type label.
    Label(u16),
    /// Orientation in [0, pi).
    Angle(f64),
    /// Index into a contour shape catalog.
    Shape(u32),
}

impl Spin {
    fn rank(&self) -> u8 {
        match self {
            Spin::Tag(_) => 0,
            Spin::Label(_) => 1,
            Spin::Angle(_) => 2,
            Spin::Shape(_) => 3,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            Spin::Angle(a) => Some(*a),
            _ => None,
        }
    }

    pub fn tag(&self) -> Option<char> {
        match self {
            Spin::Tag(c) => Some(*c),
            _ => None,
        }
    }

    pub fn shape(&self) -> Option<u32> {
        match self {
            Spin::Shape(s) => Some(*s),
            _ => None,
        }
    }
}

impl Ord for Spin {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Spin::Tag(a), Spin::Tag(b)) => a.cmp(b),
            (Spin::Label(a), Spin::Label(b)) => a.cmp(b),
            (Spin::Angle(a), Spin::Angle(b)) => a.total_cmp(b),
            (Spin::Shape(a), Spin::Shape(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Spin {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Spin {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Spin {}

impl Hash for Spin {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Spin::Tag(c) => c.hash(state),
            Spin::Label(l) => l.hash(state),
            Spin::Angle(a) => a.to_bits().hash(state),
            Spin::Shape(s) => s.hash(state),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Particle {
    pub location: Location,
    pub spin: Spin,
}

impl Particle {
    pub fn new(location: Location, spin: Spin) -> Self {
        Particle { location, spin }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Sup,
    Euclid,
}

/// Spatial part of a window piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationRegion {
    /// Half-open continuum box `[lo, hi)`; lattice points inside it also count.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Half-open integer box `[lo, hi)`.
    LatticeBox { lo: Vec<i64>, hi: Vec<i64> },
    /// Closed ball.
    Ball { center: Location, radius: f64, norm: Norm },
    /// Explicit finite set of lattice sites, sorted.
    Sites(Vec<Vec<i64>>),
}

impl LocationRegion {
    pub fn contains(&self, loc: &Location) -> bool {
        match self {
            LocationRegion::Box { lo, hi } => {
                lo.len() == loc.dim()
                    && (0..lo.len()).all(|i| {
                        let x = loc.coord(i);
                        lo[i] <= x && x < hi[i]
                    })
            }
            LocationRegion::LatticeBox { lo, hi } => match loc {
                Location::Lattice(c) => {
                    c.len() == lo.len() && (0..lo.len()).all(|i| lo[i] <= c[i] && c[i] < hi[i])
                }
                Location::Continuum(_) => false,
            },
            LocationRegion::Ball { center, radius, norm } => {
                center.dim() == loc.dim() && loc.dist(center, *norm) <= *radius
            }
            LocationRegion::Sites(sites) => match loc {
                Location::Lattice(c) => sites.binary_search_by(|s| s.as_slice().cmp(c)).is_ok(),
                Location::Continuum(_) => false,
            },
        }
    }

    /// Closed coordinate box containing the region; `None` for an empty site set.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            LocationRegion::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            LocationRegion::LatticeBox { lo, hi } => {
                Some((lo.iter().map(|&x| x as f64).collect(), hi.iter().map(|&x| x as f64 - 1.0).collect()))
            }
            LocationRegion::Ball { center, radius, .. } => {
                let c = center.coords_f64();
                Some((c.iter().map(|x| x - radius).collect(), c.iter().map(|x| x + radius).collect()))
            }
            LocationRegion::Sites(sites) => {
                let first = sites.first()?;
                let mut lo: Vec<f64> = first.iter().map(|&x| x as f64).collect();
                let mut hi = lo.clone();
                for s in sites {
                    for (i, &x) in s.iter().enumerate() {
                        lo[i] = lo[i].min(x as f64);
                        hi[i] = hi[i].max(x as f64);
                    }
                }
                Some((lo, hi))
            }
        }
    }

    /// Enlarge the region by `delta` in every coordinate direction.
    pub fn inflate(&self, delta: f64) -> LocationRegion {
        match self {
            LocationRegion::Box { lo, hi } => LocationRegion::Box {
                lo: lo.iter().map(|x| x - delta).collect(),
                hi: hi.iter().map(|x| x + delta).collect(),
            },
            LocationRegion::Ball { center, radius, norm } => {
                let grow = match norm {
                    Norm::Sup => delta,
                    Norm::Euclid => delta * (center.dim() as f64).sqrt(),
                };
                LocationRegion::Ball { center: center.clone(), radius: radius + grow, norm: *norm }
            }
            LocationRegion::LatticeBox { lo, hi } => LocationRegion::Box {
                lo: lo.iter().map(|&x| x as f64 - delta).collect(),
                hi: hi.iter().map(|&x| x as f64 + delta).collect(),
            },
            LocationRegion::Sites(_) => self.clone(),
        }
    }
}

/// Spin part of a window piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinSet {
    All,
    Tags(Vec<Spin>),
    /// Half-open angle interval `[lo, hi)`.
    AngleInterval { lo: f64, hi: f64 },
}

impl SpinSet {
    pub fn contains(&self, s: &Spin) -> bool {
        match self {
            SpinSet::All => true,
            SpinSet::Tags(v) => v.contains(s),
            SpinSet::AngleInterval { lo, hi } => match s {
                Spin::Angle(a) => *lo <= *a && *a < *hi,
                _ => false,
            },
        }
    }

    pub fn tag(c: char) -> SpinSet {
        SpinSet::Tags(vec![Spin::Tag(c)])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPiece {
    pub region: LocationRegion,
    pub spins: SpinSet,
}

impl WindowPiece {
    pub fn contains(&self, p: &Particle) -> bool {
        self.spins.contains(&p.spin) && self.region.contains(&p.location)
    }
}

/// A measurable subset of the single-particle space: a finite union of
/// region-times-spin-set pieces, optionally complemented.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Window {
    pub pieces: Vec<WindowPiece>,
    #[serde(default)]
    pub negated: bool,
}

impl Window {
    pub fn empty() -> Self {
        Window::default()
    }

    pub fn from_piece(region: LocationRegion, spins: SpinSet) -> Self {
        Window { pieces: vec![WindowPiece { region, spins }], negated: false }
    }

    pub fn continuum_box(lo: &[f64], hi: &[f64]) -> Self {
        Window::from_piece(LocationRegion::Box { lo: lo.to_vec(), hi: hi.to_vec() }, SpinSet::All)
    }

    pub fn lattice_box(lo: &[i64], hi: &[i64]) -> Self {
        Window::from_piece(
            LocationRegion::LatticeBox { lo: lo.to_vec(), hi: hi.to_vec() },
            SpinSet::All,
        )
    }

    pub fn ball(center: Location, radius: f64, norm: Norm, spins: SpinSet) -> Self {
        Window::from_piece(LocationRegion::Ball { center, radius, norm }, spins)
    }

    pub fn sites(mut sites: Vec<Vec<i64>>) -> Self {
        sites.sort();
        sites.dedup();
        Window::from_piece(LocationRegion::Sites(sites), SpinSet::All)
    }

    pub fn with_spins(mut self, spins: SpinSet) -> Self {
        for p in &mut self.pieces {
            p.spins = spins.clone();
        }
        self
    }

    pub fn push(&mut self, region: LocationRegion, spins: SpinSet) {
        self.pieces.push(WindowPiece { region, spins });
    }

    pub fn union(mut self, other: Window) -> Self {
        assert!(!self.negated && !other.negated, "union of complemented windows");
        self.pieces.extend(other.pieces);
        self
    }

    pub fn complement(&self) -> Self {
        Window { pieces: self.pieces.clone(), negated: !self.negated }
    }

    pub fn contains(&self, p: &Particle) -> bool {
        self.pieces.iter().any(|w| w.contains(p)) != self.negated
    }

    /// True when `p` lies in one of the first `k` pieces.
    pub fn in_earlier_piece(&self, p: &Particle, k: usize) -> bool {
        self.pieces[..k].iter().any(|w| w.contains(p))
    }

    /// Closed coordinate box containing every location of the window; `None`
    /// for complements and for pieces of differing dimension.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.negated {
            return None;
        }
        let mut out: Option<(Vec<f64>, Vec<f64>)> = None;
        for piece in &self.pieces {
            let Some((lo, hi)) = piece.region.bounding_box() else { continue };
            out = Some(match out {
                None => (lo, hi),
                Some((a, b)) if a.len() == lo.len() => (
                    a.iter().zip(&lo).map(|(x, y)| x.min(*y)).collect(),
                    b.iter().zip(&hi).map(|(x, y)| x.max(*y)).collect(),
                ),
                Some(_) => return None,
            });
        }
        out
    }

    pub fn inflate(&self, delta: f64) -> Self {
        Window {
            pieces: self
                .pieces
                .iter()
                .map(|w| WindowPiece { region: w.region.inflate(delta), spins: w.spins.clone() })
                .collect(),
            negated: self.negated,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty() && !self.negated
    }
}

/// A finite configuration of particles with multiplicities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParticleConfiguration {
    map: BTreeMap<Particle, u32>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    location: Location,
    spin: Spin,
    mult: u32,
}

impl Serialize for ParticleConfiguration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = self
            .map
            .iter()
            .map(|(p, &m)| Entry { location: p.location.clone(), spin: p.spin, mult: m })
            .collect();
        entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParticleConfiguration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        let mut c = ParticleConfiguration::new();
        for e in entries {
            for _ in 0..e.mult {
                c.insert(Particle::new(e.location.clone(), e.spin));
            }
        }
        Ok(c)
    }
}

impl ParticleConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_particles<I: IntoIterator<Item = Particle>>(it: I) -> Self {
        let mut c = Self::new();
        for p in it {
            c.insert(p);
        }
        c
    }

    pub fn insert(&mut self, p: Particle) {
        *self.map.entry(p).or_insert(0) += 1;
    }

    pub fn with(&self, p: &Particle) -> Self {
        let mut c = self.clone();
        c.insert(p.clone());
        c
    }

    /// Remove one copy of `p`; false when absent.
    pub fn remove_one(&mut self, p: &Particle) -> bool {
        match self.map.get_mut(p) {
            Some(m) if *m > 1 => {
                *m -= 1;
                true
            }
            Some(_) => {
                self.map.remove(p);
                true
            }
            None => false,
        }
    }

    pub fn multiplicity(&self, p: &Particle) -> u32 {
        self.map.get(p).copied().unwrap_or(0)
    }

    /// Total number of particles counted with multiplicity.
    pub fn len(&self) -> usize {
        self.map.values().map(|&m| m as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn distinct(&self) -> impl Iterator<Item = (&Particle, u32)> {
        self.map.iter().map(|(p, &m)| (p, m))
    }

    /// Every particle repeated according to its multiplicity.
    pub fn particles(&self) -> impl Iterator<Item = &Particle> {
        self.map.iter().flat_map(|(p, &m)| std::iter::repeat_n(p, m as usize))
    }

    pub fn restrict(&self, w: &Window) -> Self {
        ParticleConfiguration {
            map: self.map.iter().filter(|(p, _)| w.contains(p)).map(|(p, &m)| (p.clone(), m)).collect(),
        }
    }

    pub fn count_in(&self, w: &Window) -> usize {
        self.map.iter().filter(|(p, _)| w.contains(p)).map(|(_, &m)| m as usize).sum()
    }

    pub fn superpose(&self, other: &Self) -> Self {
        let mut c = self.clone();
        for (p, m) in other.distinct() {
            *c.map.entry(p.clone()).or_insert(0) += m;
        }
        c
    }
}

impl FromIterator<Particle> for ParticleConfiguration {
    fn from_iter<I: IntoIterator<Item = Particle>>(iter: I) -> Self {
        Self::from_particles(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_box_is_half_open() {
        let w = Window::lattice_box(&[0, 0], &[2, 2]);
        let p = |x, y| Particle::new(Location::lattice(&[x, y]), Spin::Tag('+'));
        assert!(w.contains(&p(0, 0)));
        assert!(w.contains(&p(1, 1)));
        assert!(!w.contains(&p(2, 1)));
        assert!(!w.contains(&p(-1, 0)));
    }

    #[test]
    fn complement_splits_every_particle() {
        let w = Window::continuum_box(&[0.0], &[1.0]);
        let p = Particle::new(Location::continuum(&[0.5]), Spin::Tag('+'));
        assert!(w.contains(&p) && !w.complement().contains(&p));
    }

    #[test]
    fn json_of_configuration_is_sorted_entries() {
        let c = ParticleConfiguration::from_particles(vec![
            Particle::new(Location::lattice(&[1]), Spin::Tag('-')),
            Particle::new(Location::lattice(&[0]), Spin::Tag('+')),
            Particle::new(Location::lattice(&[0]), Spin::Tag('+')),
        ]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(
            s,
            r#"[{"location":{"lattice":[0]},"spin":{"tag":"+"},"mult":2},{"location":{"lattice":[1]},"spin":{"tag":"-"},"mult":1}]"#
        );
        let back: ParticleConfiguration = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
