use std::fmt;

use serde::{Deserialize, Serialize};

/// Structural role of a motif in the TMFG taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotifKind {
    Edge,
    /// Triangular face that is not a separator.
    FaceTriangle,
    Separator,
    Tetrahedron,
}

impl MotifKind {
    pub const ALL: [MotifKind; 4] = [
        MotifKind::Edge,
        MotifKind::FaceTriangle,
        MotifKind::Separator,
        MotifKind::Tetrahedron,
    ];

    pub fn order(self) -> usize {
        match self {
            MotifKind::Edge => 2,
            MotifKind::FaceTriangle | MotifKind::Separator => 3,
            MotifKind::Tetrahedron => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MotifKind::Edge => "edge",
            MotifKind::FaceTriangle => "face-triangle",
            MotifKind::Separator => "separator",
            MotifKind::Tetrahedron => "tetrahedron",
        }
    }
}

impl fmt::Display for MotifKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MotifKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edge" => Ok(MotifKind::Edge),
            "face-triangle" | "triangle" | "face" => Ok(MotifKind::FaceTriangle),
            "separator" => Ok(MotifKind::Separator),
            "tetrahedron" | "clique" => Ok(MotifKind::Tetrahedron),
            other => Err(format!("unknown motif kind `{other}`")),
        }
    }
}

/// How vertex triples are matched across layers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriangleClassing {
    /// A triple persists whether it is a face or a separator in the later layer.
    #[default]
    Unified,
    /// The triple must keep the same role.
    Strict,
}

/// A motif: sorted vertex indices plus its kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Motif {
    pub kind: MotifKind,
    pub vertices: Vec<usize>,
}

impl Motif {
    /// Sorts the vertices; panics on duplicates or an order that does not match `kind`.
    pub fn new(kind: MotifKind, mut vertices: Vec<usize>) -> Self {
        vertices.sort_unstable();
        assert_eq!(
            vertices.len(),
            kind.order(),
            "wrong vertex count for {kind}"
        );
        assert!(
            vertices.windows(2).all(|w| w[0] < w[1]),
            "duplicate vertex in motif"
        );
        Self { kind, vertices }
    }

    pub fn edge(a: usize, b: usize) -> Self {
        Self::new(MotifKind::Edge, vec![a, b])
    }

    pub fn key(&self) -> u64 {
        pack(&self.vertices)
    }

    /// The three edges of a triangle or the six of a tetrahedron.
    pub fn edges(&self) -> Vec<Motif> {
        let v = &self.vertices;
        let mut out = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                out.push(Motif::edge(v[i], v[j]));
            }
        }
        out
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Vertex names in the given asset list.
    pub fn labels<'a>(&self, assets: &'a [String]) -> Vec<&'a str> {
        self.vertices.iter().map(|&v| assets[v].as_str()).collect()
    }
}

/// Largest vertex index a motif key can hold.
pub const MAX_VERTEX: usize = 0x7FFE;

/// Packs up to four sorted vertex indices (at most `MAX_VERTEX`) into one key:
/// a 3-bit length followed by 15-bit fields holding `index + 1`.
pub(crate) fn pack(v: &[usize]) -> u64 {
    debug_assert!(v.len() <= 4);
    let mut k = v.len() as u64;
    for &x in v {
        debug_assert!(x <= MAX_VERTEX);
        k = (k << 15) | (x as u64 + 1);
    }
    k
}

pub(crate) fn unpack(mut key: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(4);
    while key > 0x7 {
        out.push(((key & 0x7FFF) - 1) as usize);
        key >>= 15;
    }
    out.reverse();
    out
}

/// Every motif of one filtered graph, grouped by kind and sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MotifCatalog {
    pub(crate) edges: Vec<u64>,
    pub(crate) faces: Vec<u64>,
    pub(crate) separators: Vec<u64>,
    pub(crate) tetrahedra: Vec<u64>,
}

impl MotifCatalog {
    /// Builds a catalog from explicit vertex lists (each inner list is sorted here).
    pub fn from_lists(
        edges: &[[usize; 2]],
        faces: &[[usize; 3]],
        separators: &[[usize; 3]],
        tetrahedra: &[[usize; 4]],
    ) -> Self {
        fn keys<const K: usize>(items: &[[usize; K]]) -> Vec<u64> {
            let mut out: Vec<u64> = items
                .iter()
                .map(|m| {
                    let mut s = *m;
                    s.sort_unstable();
                    pack(&s)
                })
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        }
        Self {
            edges: keys(edges),
            faces: keys(faces),
            separators: keys(separators),
            tetrahedra: keys(tetrahedra),
        }
    }

    pub(crate) fn keys(&self, kind: MotifKind) -> &[u64] {
        match kind {
            MotifKind::Edge => &self.edges,
            MotifKind::FaceTriangle => &self.faces,
            MotifKind::Separator => &self.separators,
            MotifKind::Tetrahedron => &self.tetrahedra,
        }
    }

    /// Motifs of one kind, sorted by vertex tuple.
    pub fn motifs(&self, kind: MotifKind) -> Vec<Motif> {
        self.keys(kind)
            .iter()
            .map(|&k| Motif {
                kind,
                vertices: unpack(k),
            })
            .collect()
    }

    pub fn count(&self, kind: MotifKind) -> usize {
        self.keys(kind).len()
    }

    pub(crate) fn has_key(&self, kind: MotifKind, key: u64, classing: TriangleClassing) -> bool {
        let found = |ks: &[u64]| ks.binary_search(&key).is_ok();
        match (kind, classing) {
            (MotifKind::FaceTriangle | MotifKind::Separator, TriangleClassing::Unified) => {
                found(&self.faces) || found(&self.separators)
            }
            _ => found(self.keys(kind)),
        }
    }

    /// Presence of `motif` in this layer under the classing rule.
    pub fn contains(&self, motif: &Motif, classing: TriangleClassing) -> bool {
        self.has_key(motif.kind, motif.key(), classing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_round_trip() {
        for v in [vec![0, 1], vec![3, 9, 120], vec![0, 1, 2, MAX_VERTEX]] {
            assert_eq!(unpack(pack(&v)), v);
        }
        assert_ne!(pack(&[0, 1]), pack(&[0, 1, 2]));
        assert!(pack(&[0, 5]) < pack(&[1, 2]));
        assert!(pack(&[1, 2, 3]) < pack(&[1, 2, 4]));
    }

    #[test]
    fn motif_canonical() {
        let m = Motif::new(MotifKind::FaceTriangle, vec![5, 1, 3]);
        assert_eq!(m.vertices, vec![1, 3, 5]);
        assert_eq!(m.edges().len(), 3);
        assert!(m.contains_vertex(3));
        assert!(!m.contains_vertex(2));
    }

    #[test]
    #[should_panic]
    fn duplicate_vertex_panics() {
        Motif::new(MotifKind::Edge, vec![1, 1]);
    }

    #[test]
    fn classing_controls_role_matching() {
        let a = MotifCatalog::from_lists(&[], &[[0, 1, 2]], &[], &[]);
        let b = MotifCatalog::from_lists(&[], &[], &[[2, 1, 0]], &[]);
        let tri = Motif::new(MotifKind::FaceTriangle, vec![0, 1, 2]);
        assert!(b.contains(&tri, TriangleClassing::Unified));
        assert!(!b.contains(&tri, TriangleClassing::Strict));
        assert!(a.contains(&tri, TriangleClassing::Strict));
    }
}
