//! Undirected graphs stored as sorted adjacency lists, with each neighbour
//! labelled by the edge set(s) it came from.

use std::fmt;

/// An unordered pair stored as `(i, j)` with `i < j`.
pub type Edge = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Geometric,
    ErdosRenyi,
    Both,
}

impl EdgeKind {
    pub fn tag(self) -> char {
        match self {
            EdgeKind::Geometric => 'G',
            EdgeKind::ErdosRenyi => 'E',
            EdgeKind::Both => 'B',
        }
    }

    pub fn from_tag(tag: char) -> Option<Self> {
        match tag {
            'G' => Some(EdgeKind::Geometric),
            'E' => Some(EdgeKind::ErdosRenyi),
            'B' => Some(EdgeKind::Both),
            _ => None,
        }
    }

    pub fn is_geometric(self) -> bool {
        matches!(self, EdgeKind::Geometric | EdgeKind::Both)
    }

    pub fn is_er(self) -> bool {
        matches!(self, EdgeKind::ErdosRenyi | EdgeKind::Both)
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

/// Per-node neighbourhood sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DegreeCounts {
    /// `|N_i|`
    pub union: usize,
    /// Neighbours reached only through an ER edge.
    pub er_only: usize,
    /// Neighbours reached through a geometric edge (possibly also ER).
    pub geometric: usize,
    /// Neighbours reached through an ER edge (possibly also geometric).
    pub er: usize,
}

/// Compressed adjacency of the union graph `E1 ∪ E2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    kinds: Vec<EdgeKind>,
}

impl Adjacency {
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Sorted neighbour ids of `i`.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Edge kinds aligned with [`Adjacency::neighbors`].
    pub fn kinds(&self, i: usize) -> &[EdgeKind] {
        &self.kinds[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degree_counts(&self, i: usize) -> DegreeCounts {
        let kinds = self.kinds(i);
        let mut c = DegreeCounts {
            union: kinds.len(),
            ..Default::default()
        };
        for k in kinds {
            match k {
                EdgeKind::ErdosRenyi => {
                    c.er_only += 1;
                    c.er += 1;
                }
                EdgeKind::Geometric => c.geometric += 1,
                EdgeKind::Both => {
                    c.geometric += 1;
                    c.er += 1;
                }
            }
        }
        c
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&(j as u32)).is_ok()
    }

    /// All undirected edges `(i, j, kind)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, EdgeKind)> + '_ {
        (0..self.num_nodes()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .zip(self.kinds(i))
                .filter(move |(&j, _)| j as usize > i)
                .map(move |(&j, &k)| (i as u32, j, k))
        })
    }

    /// Builds the adjacency from labelled edges sorted by `(i, j)` with `i < j`
    /// and no duplicates.
    pub(crate) fn from_sorted_labelled(n: usize, edges: &[(u32, u32, EdgeKind)]) -> Self {
        let mut deg = vec![0usize; n];
        for &(i, j, _) in edges {
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let total = *offsets.last().unwrap();
        let mut neighbors = vec![0u32; total];
        let mut kinds = vec![EdgeKind::Geometric; total];
        let mut fill = offsets[..n].to_vec();
        // Lexicographic order puts every `i < v` entry of v's list before the
        // `v < k` entries, so each list comes out sorted.
        for &(i, j, kind) in edges {
            let (i, j) = (i as usize, j as usize);
            neighbors[fill[i]] = j as u32;
            kinds[fill[i]] = kind;
            fill[i] += 1;
            neighbors[fill[j]] = i as u32;
            kinds[fill[j]] = kind;
            fill[j] += 1;
        }
        Adjacency {
            offsets,
            neighbors,
            kinds,
        }
    }
}

/// Coalesces the geometric and ER edge sets into one adjacency structure.
///
/// Both inputs must hold pairs `(i, j)` with `i < j < n`; they are sorted here
/// if needed. A pair present in both sets appears once, tagged [`EdgeKind::Both`].
pub fn assemble_graph(edges_geo: &[Edge], edges_er: &[Edge], n: usize) -> Adjacency {
    let geo = sorted_unique(edges_geo);
    let er = sorted_unique(edges_er);
    let mut merged = Vec::with_capacity(geo.len() + er.len());
    let (mut a, mut b) = (0, 0);
    while a < geo.len() || b < er.len() {
        let next = match (geo.get(a), er.get(b)) {
            (Some(&g), Some(&e)) if g == e => {
                a += 1;
                b += 1;
                (g, EdgeKind::Both)
            }
            (Some(&g), Some(&e)) if g < e => {
                a += 1;
                (g, EdgeKind::Geometric)
            }
            (Some(&g), None) => {
                a += 1;
                (g, EdgeKind::Geometric)
            }
            (_, Some(&e)) => {
                b += 1;
                (e, EdgeKind::ErdosRenyi)
            }
            (None, None) => unreachable!(),
        };
        merged.push((next.0 .0, next.0 .1, next.1));
    }
    Adjacency::from_sorted_labelled(n, &merged)
}

fn sorted_unique(edges: &[Edge]) -> Vec<Edge> {
    let mut v: Vec<Edge> = edges
        .iter()
        .map(|&(i, j)| {
            assert!(i != j, "self-loop ({i}, {i})");
            (i.min(j), i.max(j))
        })
        .collect();
    if !v.windows(2).all(|w| w[0] < w[1]) {
        v.sort_unstable();
        v.dedup();
    }
    v
}
