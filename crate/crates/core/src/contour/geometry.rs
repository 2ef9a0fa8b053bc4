use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{FfgError, Result};

pub type Vertex = [i64; 2];

/// Unit edge of the dual lattice from `v` to `v + e_axis`. The dual vertex
/// `(a, b)` sits at the point `(a - 1/2, b - 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Plaquette {
    pub v: Vertex,
    pub axis: u8,
}

impl Plaquette {
    pub fn new(v: Vertex, axis: u8) -> Self {
        Plaquette { v, axis }
    }

    /// The edge joining two adjacent dual vertices, in canonical form.
    pub fn between(a: Vertex, b: Vertex) -> Self {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let axis = if hi[0] != lo[0] { 0 } else { 1 };
        debug_assert_eq!((hi[0] - lo[0]) + (hi[1] - lo[1]), 1);
        Plaquette { v: lo, axis }
    }

    pub fn endpoints(&self) -> (Vertex, Vertex) {
        let mut w = self.v;
        w[self.axis as usize] += 1;
        (self.v, w)
    }

    /// The two primal sites separated by this edge.
    pub fn separated_sites(&self) -> ([i64; 2], [i64; 2]) {
        let [a, b] = self.v;
        if self.axis == 0 {
            ([a, b - 1], [a, b])
        } else {
            ([a - 1, b], [a, b])
        }
    }

    pub fn translate(&self, t: Vertex) -> Self {
        Plaquette { v: [self.v[0] + t[0], self.v[1] + t[1]], axis: self.axis }
    }
}

/// A finite set of dual edges, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Contour {
    pub edges: Vec<Plaquette>,
}

impl Contour {
    pub fn new(mut edges: Vec<Plaquette>) -> Self {
        edges.sort();
        edges.dedup();
        Contour { edges }
    }

    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self
            .edges
            .iter()
            .flat_map(|e| {
                let (a, b) = e.endpoints();
                [a, b]
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Minimal vertex in dictionary order.
    pub fn anchor(&self) -> Vertex {
        self.vertices()[0]
    }

    pub fn translate(&self, t: Vertex) -> Self {
        Contour { edges: self.edges.iter().map(|e| e.translate(t)).collect() }
    }

    /// The contour moved so that its anchor is the origin.
    pub fn shape(&self) -> Self {
        let a = self.anchor();
        self.translate([-a[0], -a[1]])
    }

    pub fn extent(&self) -> i64 {
        self.vertices().iter().map(|v| v[0].abs().max(v[1].abs())).max().unwrap_or(0)
    }
}

/// Even degree at every vertex and connected under shared vertices.
pub fn is_closed_connected(edges: &[Plaquette]) -> bool {
    if edges.is_empty() {
        return false;
    }
    let mut deg: BTreeMap<Vertex, usize> = BTreeMap::new();
    for e in edges {
        let (a, b) = e.endpoints();
        *deg.entry(a).or_insert(0) += 1;
        *deg.entry(b).or_insert(0) += 1;
    }
    if deg.values().any(|d| d % 2 == 1) {
        return false;
    }
    components(edges).len() == 1
}

/// Pairwise compatibility: the supports share no dual vertex.
pub fn compatible(a: &Contour, b: &Contour) -> bool {
    let va = a.vertices();
    b.vertices().iter().all(|v| va.binary_search(v).is_err())
}

/// Connected components of an edge set under shared-vertex adjacency.
pub fn components(edges: &[Plaquette]) -> Vec<Contour> {
    let mut index: BTreeMap<Vertex, usize> = BTreeMap::new();
    for e in edges {
        let (a, b) = e.endpoints();
        let n = index.len();
        index.entry(a).or_insert(n);
        let n = index.len();
        index.entry(b).or_insert(n);
    }
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let n = p[y];
            p[y] = r;
            y = n;
        }
        r
    }
    for e in edges {
        let (a, b) = e.endpoints();
        let (ra, rb) = (find(&mut parent, index[&a]), find(&mut parent, index[&b]));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut groups: BTreeMap<usize, Vec<Plaquette>> = BTreeMap::new();
    for e in edges {
        let r = find(&mut parent, index[&e.endpoints().0]);
        groups.entry(r).or_default().push(*e);
    }
    let mut out: Vec<Contour> = groups.into_values().map(Contour::new).collect();
    out.sort();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeConstraint {
    /// One representative per shape, anchored at the origin.
    AllAnchored,
    /// Every located contour that contains the origin as a vertex.
    ThroughFixedVertex,
}

const STEPS: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

/// All contour shapes with at most `max_size` edges, by depth-first search
/// over closed trails from the anchor that never visit a vertex below it.
pub fn enumerate_shapes(max_size: usize, constraint: ShapeConstraint, node_cap: usize) -> Result<Vec<Contour>> {
    let mut found: BTreeSet<Contour> = BTreeSet::new();
    let mut used: Vec<Plaquette> = Vec::new();
    let mut nodes = 0usize;
    fn dfs(
        v: Vertex,
        max_size: usize,
        used: &mut Vec<Plaquette>,
        found: &mut BTreeSet<Contour>,
        nodes: &mut usize,
        cap: usize,
    ) -> Result<()> {
        *nodes += 1;
        if *nodes > cap {
            return Err(FfgError::BudgetExceeded(format!("shape enumeration exceeds {cap} nodes")));
        }
        if v == [0, 0] && !used.is_empty() {
            found.insert(Contour::new(used.clone()));
        }
        if used.len() == max_size {
            return Ok(());
        }
        for s in STEPS {
            let w = [v[0] + s[0], v[1] + s[1]];
            if w < [0, 0] {
                continue;
            }
            let remaining = max_size - used.len() - 1;
            if (w[0].abs() + w[1].abs()) as usize > remaining {
                continue;
            }
            let e = Plaquette::between(v, w);
            if used.contains(&e) {
                continue;
            }
            used.push(e);
            dfs(w, max_size, used, found, nodes, cap)?;
            used.pop();
        }
        Ok(())
    }
    dfs([0, 0], max_size, &mut used, &mut found, &mut nodes, node_cap)?;
    let mut shapes: Vec<Contour> = found.into_iter().collect();
    shapes.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
    Ok(match constraint {
        ShapeConstraint::AllAnchored => shapes,
        ShapeConstraint::ThroughFixedVertex => {
            let mut out: BTreeSet<Contour> = BTreeSet::new();
            for s in &shapes {
                for w in s.vertices() {
                    out.insert(s.translate([-w[0], -w[1]]));
                }
            }
            let mut v: Vec<Contour> = out.into_iter().collect();
            v.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(at: Vertex) -> Contour {
        Contour::new(vec![
            Plaquette::new(at, 0),
            Plaquette::new(at, 1),
            Plaquette::new([at[0] + 1, at[1]], 1),
            Plaquette::new([at[0], at[1] + 1], 0),
        ])
    }

    #[test]
    fn closedness_examples() {
        let sq = unit_square([0, 0]);
        assert!(is_closed_connected(&sq.edges));
        assert!(!is_closed_connected(&sq.edges[..3]));
        let mut two = sq.edges.clone();
        two.extend(unit_square([3, 0]).edges);
        assert!(!is_closed_connected(&two));
    }

    #[test]
    fn compatibility_examples() {
        let a = unit_square([0, 0]);
        assert!(compatible(&a, &unit_square([2, 0])));
        assert!(!compatible(&a, &unit_square([1, 1])));
        assert!(!compatible(&a, &a));
    }

    #[test]
    fn small_shape_counts() {
        let cap = 10_000_000;
        assert!(enumerate_shapes(3, ShapeConstraint::AllAnchored, cap).unwrap().is_empty());
        assert_eq!(enumerate_shapes(4, ShapeConstraint::AllAnchored, cap).unwrap().len(), 1);
        assert_eq!(enumerate_shapes(5, ShapeConstraint::AllAnchored, cap).unwrap().len(), 1);
        // Unit square and the two dominoes.
        assert_eq!(enumerate_shapes(6, ShapeConstraint::AllAnchored, cap).unwrap().len(), 3);
        assert_eq!(enumerate_shapes(4, ShapeConstraint::ThroughFixedVertex, cap).unwrap().len(), 4);
    }

    #[test]
    fn tiny_node_cap_is_reported() {
        assert!(matches!(
            enumerate_shapes(12, ShapeConstraint::AllAnchored, 100),
            Err(FfgError::BudgetExceeded(_))
        ));
    }
}
