//! Triangulated Maximally Filtered Graph construction and motif taxonomy.
//!
//! The graph is grown greedily: start from the heaviest tetrahedron, then
//! repeatedly insert the free vertex/face pair with the largest gain
//! `W(v,a) + W(v,b) + W(v,c)`. The chosen face becomes a separator, a new
//! tetrahedron `{v,a,b,c}` is recorded and three new faces open up.
//!
//! Ties are resolved towards the lowest vertex index, then the
//! lexicographically smallest face, so the output is a pure function of the
//! input matrix.

mod check;
mod motif;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::CorrelationMatrix;
use crate::scalar::Scalar;

pub use check::{check_planarity_chordality, is_chordal, is_planar, StructureReport};
pub(crate) use motif::unpack;
pub use motif::{Motif, MotifCatalog, MotifKind, TriangleClassing, MAX_VERTEX};

/// Largest `C(N, 4)` for which the seed tetrahedron is found exhaustively.
pub const EXACT_SEED_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("TMFG needs at least 4 vertices, got {0}")]
    Size(usize),
    #[error("at most {max} vertices are supported, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error("non-finite edge weight between vertices {0} and {1}")]
    NonFinite(usize, usize),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Edge weight used for insertion gains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainTransform {
    #[default]
    Raw,
    Squared,
    Absolute,
}

impl GainTransform {
    fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            GainTransform::Raw => v,
            GainTransform::Squared => v * v,
            GainTransform::Absolute => v.abs(),
        }
    }
}

/// How the seed tetrahedron was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeedMethod {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmfgGraph {
    n: usize,
    seed: [usize; 4],
    seed_method: SeedMethod,
    /// `(vertex, face it was inserted into)` in insertion order.
    insertions: Vec<(usize, [usize; 3])>,
    edges: Vec<[usize; 2]>,
    tetrahedra: Vec<[usize; 4]>,
    separators: Vec<[usize; 3]>,
    faces: Vec<[usize; 3]>,
}

fn sorted3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut f = [a, b, c];
    f.sort_unstable();
    f
}

fn sorted4(mut t: [usize; 4]) -> [usize; 4] {
    t.sort_unstable();
    t
}

fn n_choose_4(n: usize) -> u128 {
    let n = n as u128;
    if n < 4 {
        return 0;
    }
    n * (n - 1) * (n - 2) * (n - 3) / 24
}

struct Weights<T> {
    n: usize,
    w: Vec<T>,
}

impl<T: Scalar> Weights<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.w[i * self.n + j]
    }

    #[inline]
    fn gain(&self, v: usize, f: &[usize; 3]) -> T {
        self.at(v, f[0]) + self.at(v, f[1]) + self.at(v, f[2])
    }

    fn exhaustive_seed(&self) -> [usize; 4] {
        let n = self.n;
        let mut best = [0, 1, 2, 3];
        let mut best_w = T::neg_infinity();
        for a in 0..n {
            for b in a + 1..n {
                let ab = self.at(a, b);
                for c in b + 1..n {
                    let abc = ab + self.at(a, c) + self.at(b, c);
                    for d in c + 1..n {
                        let s = abc + (self.at(a, d) + self.at(b, d) + self.at(c, d));
                        if s > best_w {
                            best_w = s;
                            best = [a, b, c, d];
                        }
                    }
                }
            }
        }
        best
    }

    fn greedy_seed(&self) -> [usize; 4] {
        let n = self.n;
        let (mut a0, mut b0, mut top) = (0, 1, T::neg_infinity());
        for a in 0..n {
            for b in a + 1..n {
                if self.at(a, b) > top {
                    top = self.at(a, b);
                    (a0, b0) = (a, b);
                }
            }
        }
        let mut set = vec![a0, b0];
        while set.len() < 4 {
            let mut best = (T::neg_infinity(), usize::MAX);
            for v in (0..n).filter(|v| !set.contains(v)) {
                let s = set.iter().fold(T::zero(), |acc, &u| acc + self.at(v, u));
                if s > best.0 {
                    best = (s, v);
                }
            }
            set.push(best.1);
        }
        sorted4([set[0], set[1], set[2], set[3]])
    }
}

/// Builds the TMFG of a correlation matrix using raw correlations as gains.
pub fn build_tmfg<T: Scalar>(c: &CorrelationMatrix<T>) -> Result<TmfgGraph, GraphError> {
    build_tmfg_with(c, GainTransform::Raw)
}

pub fn build_tmfg_with<T: Scalar>(
    c: &CorrelationMatrix<T>,
    transform: GainTransform,
) -> Result<TmfgGraph, GraphError> {
    let n = c.n();
    if n < 4 {
        return Err(GraphError::Size(n));
    }
    if n > motif::MAX_VERTEX + 1 {
        return Err(GraphError::TooLarge {
            got: n,
            max: motif::MAX_VERTEX + 1,
        });
    }
    let mut w = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = transform.apply(c.get(i, j));
            if !v.is_finite() {
                return Err(GraphError::NonFinite(i, j));
            }
            w.push(v);
        }
    }
    let weights = Weights { n, w };

    let (seed, seed_method) = if n_choose_4(n) <= EXACT_SEED_LIMIT {
        (weights.exhaustive_seed(), SeedMethod::Exhaustive)
    } else {
        (weights.greedy_seed(), SeedMethod::Greedy)
    };
    let [a, b, c4, d] = seed;

    let mut edges: BTreeSet<[usize; 2]> = BTreeSet::new();
    for i in 0..4 {
        for j in i + 1..4 {
            edges.insert([seed[i], seed[j]]);
        }
    }
    let mut faces: BTreeSet<[usize; 3]> = [
        sorted3(a, b, c4),
        sorted3(a, b, d),
        sorted3(a, c4, d),
        sorted3(b, c4, d),
    ]
    .into_iter()
    .collect();
    let mut tetrahedra = vec![seed];
    let mut separators = Vec::with_capacity(n - 4);
    let mut insertions = Vec::with_capacity(n - 4);

    let mut remaining: Vec<usize> = (0..n).filter(|v| !seed.contains(v)).collect();

    // best face per free vertex, kept as (gain, face)
    let scan = |v: usize, faces: &BTreeSet<[usize; 3]>| -> (T, [usize; 3]) {
        let mut best = (T::neg_infinity(), [usize::MAX; 3]);
        for f in faces {
            let g = weights.gain(v, f);
            if g > best.0 {
                best = (g, *f);
            }
        }
        best
    };
    let mut best: Vec<(T, [usize; 3])> = remaining.iter().map(|&v| scan(v, &faces)).collect();

    while !remaining.is_empty() {
        let mut pick = 0;
        for k in 1..remaining.len() {
            if best[k].0 > best[pick].0 {
                pick = k;
            }
        }
        let v = remaining.remove(pick);
        let (_, face) = best.remove(pick);

        faces.remove(&face);
        separators.push(face);
        tetrahedra.push(sorted4([face[0], face[1], face[2], v]));
        insertions.push((v, face));
        for &u in &face {
            edges.insert(if u < v { [u, v] } else { [v, u] });
        }
        let new_faces = [
            sorted3(face[0], face[1], v),
            sorted3(face[0], face[2], v),
            sorted3(face[1], face[2], v),
        ];
        faces.extend(new_faces);

        for (k, &u) in remaining.iter().enumerate() {
            if best[k].1 == face {
                best[k] = scan(u, &faces);
            } else {
                for f in &new_faces {
                    let g = weights.gain(u, f);
                    if g > best[k].0 || (g == best[k].0 && *f < best[k].1) {
                        best[k] = (g, *f);
                    }
                }
            }
        }
    }

    Ok(TmfgGraph {
        n,
        seed,
        seed_method,
        insertions,
        edges: edges.into_iter().collect(),
        tetrahedra,
        separators,
        faces: faces.into_iter().collect(),
    })
}

impl TmfgGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> [usize; 4] {
        self.seed
    }

    pub fn seed_method(&self) -> SeedMethod {
        self.seed_method
    }

    pub fn insertions(&self) -> &[(usize, [usize; 3])] {
        &self.insertions
    }

    /// Sorted edge list.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Tetrahedra in creation order, seed first.
    pub fn tetrahedra(&self) -> &[[usize; 4]] {
        &self.tetrahedra
    }

    /// Separators in creation order.
    pub fn separators(&self) -> &[[usize; 3]] {
        &self.separators
    }

    /// Sorted list of non-separator triangular faces.
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn structure(&self) -> StructureReport {
        check_planarity_chordality(self.n, &self.edges)
    }

    /// Dumps the graph as JSON with asset names in place of indices.
    pub fn write_json(&self, assets: &[String], path: &Path) -> Result<(), GraphError> {
        fn names<const K: usize>(items: &[[usize; K]], assets: &[String]) -> Vec<Vec<String>> {
            items
                .iter()
                .map(|m| {
                    let mut s = *m;
                    s.sort_unstable();
                    s.iter().map(|&v| assets[v].clone()).collect()
                })
                .collect()
        }
        let doc = serde_json::json!({
            "edges": names(&self.edges, assets),
            "tetrahedra": names(&self.tetrahedra, assets),
            "separators": names(&self.separators, assets),
            "faces": names(&self.faces, assets),
        });
        let text = serde_json::to_string_pretty(&doc).expect("json value serialises");
        std::fs::write(path, text).map_err(|e| GraphError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Canonical motif sets of a graph.
pub fn extract_motifs(g: &TmfgGraph) -> MotifCatalog {
    MotifCatalog::from_lists(&g.edges, &g.faces, &g.separators, &g.tetrahedra)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(n: usize, seed: u64) -> CorrelationMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
            for j in i + 1..n {
                let x = rng.random::<f64>() * 2.0 - 1.0;
                v[i * n + j] = x;
                v[j * n + i] = x;
            }
        }
        let assets = (0..n).map(|i| format!("A{i:03}")).collect();
        CorrelationMatrix::new(assets, v).unwrap()
    }

    fn counts(g: &TmfgGraph) -> [usize; 4] {
        [
            g.edges.len(),
            g.tetrahedra.len(),
            g.separators.len(),
            g.faces.len(),
        ]
    }

    #[test]
    fn four_vertices_give_k4() {
        let g = build_tmfg(&random_matrix(4, 1)).unwrap();
        assert_eq!(counts(&g), [6, 1, 0, 4]);
        let cat = extract_motifs(&g);
        assert_eq!(cat.count(MotifKind::Edge), 6);
        assert_eq!(cat.count(MotifKind::FaceTriangle), 4);
        assert_eq!(cat.count(MotifKind::Separator), 0);
        assert_eq!(cat.count(MotifKind::Tetrahedron), 1);
    }

    #[test]
    fn five_vertices() {
        let g = build_tmfg(&random_matrix(5, 2)).unwrap();
        assert_eq!(counts(&g), [9, 2, 1, 6]);
    }

    #[test]
    fn hundred_vertices_counts() {
        let g = build_tmfg(&random_matrix(100, 3)).unwrap();
        assert_eq!(counts(&g), [294, 97, 96, 196]);
        assert_eq!(g.faces.len() + g.separators.len(), 292);
        assert_eq!(g.seed_method(), SeedMethod::Exhaustive);
    }

    #[test]
    fn too_small_or_non_finite() {
        let m = CorrelationMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 0.1, 0.2, 0.1, 1.0, 0.3, 0.2, 0.3, 1.0],
        )
        .unwrap();
        assert_eq!(build_tmfg(&m), Err(GraphError::Size(3)));
    }

    /// Second, deliberately naive implementation of the same greedy rule.
    fn naive_insertion_order(c: &CorrelationMatrix<f64>) -> ([usize; 4], Vec<(usize, [usize; 3])>) {
        let n = c.n();
        let mut quads = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for cc in b + 1..n {
                    for d in cc + 1..n {
                        quads.push([a, b, cc, d]);
                    }
                }
            }
        }
        let total = |q: &[usize; 4]| {
            (c.get(q[0], q[1]) + c.get(q[0], q[2]) + c.get(q[1], q[2]))
                + (c.get(q[0], q[3]) + c.get(q[1], q[3]) + c.get(q[2], q[3]))
        };
        let seed = *quads
            .iter()
            .reduce(|a, b| if total(b) > total(a) { b } else { a })
            .unwrap();
        let mut faces: Vec<[usize; 3]> = vec![
            [seed[0], seed[1], seed[2]],
            [seed[0], seed[1], seed[3]],
            [seed[0], seed[2], seed[3]],
            [seed[1], seed[2], seed[3]],
        ];
        let mut free: Vec<usize> = (0..n).filter(|v| !seed.contains(v)).collect();
        let mut order = Vec::new();
        while !free.is_empty() {
            faces.sort();
            let mut best: Option<(f64, usize, [usize; 3])> = None;
            for &v in &free {
                for f in &faces {
                    let g = c.get(v, f[0]) + c.get(v, f[1]) + c.get(v, f[2]);
                    if best.is_none_or(|b| g > b.0) {
                        best = Some((g, v, *f));
                    }
                }
            }
            let (_, v, f) = best.unwrap();
            order.push((v, f));
            free.retain(|&u| u != v);
            faces.retain(|x| *x != f);
            let mut add = |a: usize, b: usize| {
                let mut t = [a, b, v];
                t.sort();
                faces.push(t);
            };
            add(f[0], f[1]);
            add(f[0], f[2]);
            add(f[1], f[2]);
        }
        (seed, order)
    }

    #[test]
    fn insertion_order_matches_naive_reimplementation() {
        // vertices 1,2,3,4 form a dominant block
        let n = 5;
        let mut v = vec![0.05; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for i in 1..5 {
            for j in 1..5 {
                if i != j {
                    v[i * n + j] = 0.8 + 0.01 * (i + j) as f64;
                }
            }
        }
        v[1] = 0.2;
        v[5] = 0.2;
        v[3] = 0.3;
        v[15] = 0.3;
        let assets = (0..n).map(|i| i.to_string()).collect();
        let m = CorrelationMatrix::new(assets, v).unwrap();
        let g = build_tmfg(&m).unwrap();
        let (seed, order) = naive_insertion_order(&m);
        assert_eq!(g.seed(), [1, 2, 3, 4]);
        assert_eq!(g.seed(), seed);
        assert_eq!(g.insertions(), order.as_slice());
        assert_eq!(g.insertions()[0].1, [1, 2, 3]);

        for seed in 0..20 {
            let m = random_matrix(12, 100 + seed);
            let g = build_tmfg(&m).unwrap();
            let (s, order) = naive_insertion_order(&m);
            assert_eq!(g.seed(), s);
            assert_eq!(g.insertions(), order.as_slice());
        }
    }

    #[test]
    fn greedy_seed_for_large_universe() {
        let g = build_tmfg(&random_matrix(140, 9)).unwrap();
        assert_eq!(g.seed_method(), SeedMethod::Greedy);
        assert_eq!(counts(&g), [3 * 140 - 6, 137, 136, 276]);
    }

    #[test]
    fn ties_resolve_deterministically() {
        let n = 9;
        let mut v = vec![0.5; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let assets = (0..n).map(|i| i.to_string()).collect();
        let m = CorrelationMatrix::new(assets, v).unwrap();
        let g = build_tmfg(&m).unwrap();
        assert_eq!(g.seed(), [0, 1, 2, 3]);
        assert_eq!(g.insertions()[0], (4, [0, 1, 2]));
        assert_eq!(g, build_tmfg(&m).unwrap());
    }

    #[test]
    fn gain_transform_changes_weights() {
        // strong negative correlations only attract under |.| or squared gains
        let n = 5;
        let mut v = vec![0.1; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for (i, j) in [(0, 4), (1, 4), (2, 4)] {
            v[i * n + j] = -0.9;
            v[j * n + i] = -0.9;
        }
        let assets = (0..n).map(|i| i.to_string()).collect();
        let m = CorrelationMatrix::new(assets, v).unwrap();
        let raw = build_tmfg(&m).unwrap();
        let abs = build_tmfg_with(&m, GainTransform::Absolute).unwrap();
        assert_eq!(raw.seed(), [0, 1, 2, 3]);
        assert!(abs.seed().contains(&4));
        let sq = build_tmfg_with(&m, GainTransform::Squared).unwrap();
        assert_eq!(sq.seed(), abs.seed());
    }

    #[test]
    fn json_dump_uses_names() {
        let g = build_tmfg(&random_matrix(6, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        let assets: Vec<String> = (0..6).map(|i| format!("S{i}")).collect();
        g.write_json(&assets, &p).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["edges"].as_array().unwrap().len(), 12);
        assert_eq!(v["faces"].as_array().unwrap().len(), 8);
        assert_eq!(v["separators"].as_array().unwrap().len(), 2);
        assert_eq!(v["tetrahedra"][0].as_array().unwrap().len(), 4);
        assert!(v["edges"][0][0].as_str().unwrap().starts_with('S'));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::collections::HashMap;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn structural_identities(n in 4usize..=150, seed in any::<u64>()) {
                let g = build_tmfg(&random_matrix(n, seed)).unwrap();
                prop_assert_eq!(g.edges.len(), 3 * n - 6);
                prop_assert_eq!(g.tetrahedra.len(), n - 3);
                prop_assert_eq!(g.separators.len(), n - 4);
                prop_assert_eq!(g.faces.len(), 2 * n - 4);
                prop_assert_eq!(g.faces.len() + g.separators.len(), 3 * n - 8);
                let rep = g.structure();
                prop_assert!(rep.planar);
                prop_assert!(rep.chordal);

                let mut in_tets: HashMap<[usize; 3], usize> = HashMap::new();
                for t in &g.tetrahedra {
                    for skip in 0..4 {
                        let f: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| t[k]).collect();
                        *in_tets.entry([f[0], f[1], f[2]]).or_default() += 1;
                    }
                }
                for s in &g.separators {
                    prop_assert_eq!(in_tets[s], 2);
                }
                for f in &g.faces {
                    prop_assert_eq!(in_tets[f], 1);
                    prop_assert!(!g.separators.contains(f));
                }
            }

            #[test]
            fn relabelling_gives_isomorphic_graph(n in 4usize..40, seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                let m = random_matrix(n, seed);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xABCD));
                // permuted[perm[i]][perm[j]] = m[i][j]
                let mut v = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        v[perm[i] * n + perm[j]] = m.get(i, j);
                    }
                }
                let pm = CorrelationMatrix::new(m.assets().to_vec(), v).unwrap();
                let g = build_tmfg(&m).unwrap();
                let h = build_tmfg(&pm).unwrap();
                let mut mapped: Vec<[usize; 2]> = g
                    .edges
                    .iter()
                    .map(|e| {
                        let (a, b) = (perm[e[0]], perm[e[1]]);
                        if a < b { [a, b] } else { [b, a] }
                    })
                    .collect();
                mapped.sort();
                prop_assert_eq!(mapped, h.edges.clone());
            }
        }
    }
}
