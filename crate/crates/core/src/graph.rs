//! Attributed graphs as dense matrix representatives.
//!
//! A graph of order `n` with attribute dimension `d` is stored as an
//! `n × n` array of `d`-vectors: cell `(i, i)` holds the attribute of vertex
//! `i`, cell `(i, j)` with `i != j` holds the attribute of the edge from `i`
//! to `j`, and the zero vector stands for the null attribute (no edge, or a
//! padding vertex).
//!
//! The representation space is Euclidean with the full-matrix Frobenius inner
//! product. Vertex permutations act by simultaneous row/column reordering,
//! so a graph is really the orbit of its matrix under that action; every
//! value computed on the orbit (length, kernel, distance) is independent of
//! which representative is held.

use std::fmt;

use crate::error::{Error, Result};

/// Attribute vector in the feature space `R^d`. The zero vector is the null
/// attribute.
pub type AttributeVector = Vec<f64>;

/// A bijection on `{0, .., n-1}`.
///
/// Composition follows the usual function convention:
/// `p.compose(&q)` maps `i` to `p(q(i))`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &v in &map {
            if v >= map.len() || seen[v] {
                return Err(Error::InvalidPermutation(map));
            }
            seen[v] = true;
        }
        Ok(Permutation(map))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len(), "composing permutations of different sizes");
        Permutation(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Permutation(inv)
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
        use rand::seq::SliceRandom;
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Permutation(map)
    }

    /// Steps to the lexicographically next permutation; returns `false` and
    /// leaves `self` untouched when already at the last one.
    pub fn advance(&mut self) -> bool {
        let v = &mut self.0;
        if v.len() < 2 {
            return false;
        }
        let mut i = v.len() - 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = v.len() - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
        true
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation{:?}", self.0)
    }
}

/// Dense `n × n × d` matrix representative of an attributed graph.
#[derive(Clone, PartialEq)]
pub struct AttributedGraph {
    order: usize,
    dim: usize,
    undirected: bool,
    cells: Vec<f64>,
}

impl fmt::Debug for AttributedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AttributedGraph")
            .field("order", &self.order)
            .field("dim", &self.dim)
            .field("undirected", &self.undirected)
            .field("cells", &self.cells)
            .finish()
    }
}

impl AttributedGraph {
    /// The all-null graph of the given order.
    pub fn zeros(order: usize, dim: usize) -> Self {
        AttributedGraph {
            order,
            dim,
            undirected: true,
            cells: vec![0.0; order * order * dim],
        }
    }

    /// Builds a graph from a flat row-major cell buffer of length `n²·d`.
    pub fn from_cells(order: usize, dim: usize, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != order * order * dim {
            return Err(Error::ShapeMismatch {
                left: format!("{order}x{order}x{dim}"),
                right: format!("{} cells", cells.len()),
            });
        }
        let mut g = AttributedGraph {
            order,
            dim,
            undirected: false,
            cells,
        };
        g.undirected = g.is_symmetric();
        Ok(g)
    }

    /// Dense graph from vertex attributes and an edge list.
    ///
    /// With `undirected` set, each listed edge `(i, j)` fills both `(i, j)`
    /// and `(j, i)`, and listing both orientations counts as a duplicate.
    pub fn from_edge_list(
        vertices: &[AttributeVector],
        edges: &[(usize, usize, AttributeVector)],
        undirected: bool,
    ) -> Result<Self> {
        let order = vertices.len();
        if order == 0 {
            return Err(Error::EmptyGraph);
        }
        let dim = vertices[0].len();
        let mut g = AttributedGraph::zeros(order, dim);
        g.undirected = undirected;
        for (i, a) in vertices.iter().enumerate() {
            check_dim(dim, a)?;
            g.cell_mut(i, i).copy_from_slice(a);
        }
        let mut seen = vec![false; order * order];
        for (i, j, a) in edges {
            let (i, j) = (*i, *j);
            for idx in [i, j] {
                if idx >= order {
                    return Err(Error::IndexOutOfRange { index: idx, order });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            check_dim(dim, a)?;
            if seen[i * order + j] {
                return Err(Error::DuplicateEdge { i, j });
            }
            seen[i * order + j] = true;
            g.cell_mut(i, j).copy_from_slice(a);
            if undirected {
                seen[j * order + i] = true;
                g.cell_mut(j, i).copy_from_slice(a);
            }
        }
        Ok(g)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether the graph was built (or has stayed) undirected.
    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.order).all(|i| (i + 1..self.order).all(|j| self.cell(i, j) == self.cell(j, i)))
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.order + j) * self.dim;
        &self.cells[start..start + self.dim]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.order + j) * self.dim;
        &mut self.cells[start..start + self.dim]
    }

    /// Flat row-major view of all `n²·d` coordinates.
    pub fn as_slice(&self) -> &[f64] {
        &self.cells
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    pub fn shape_string(&self) -> String {
        format!("order {} dim {}", self.order, self.dim)
    }

    pub fn check_same_shape(&self, other: &AttributedGraph) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                left: self.shape_string(),
                right: other.shape_string(),
            });
        }
        Ok(())
    }

    /// Aligns the graph to order `n` by appending isolated null vertices.
    pub fn pad_to_order(&self, n: usize) -> Result<AttributedGraph> {
        if n < self.order {
            return Err(Error::PadTooSmall {
                order: self.order,
                target: n,
            });
        }
        if n == self.order {
            return Ok(self.clone());
        }
        let mut out = AttributedGraph::zeros(n, self.dim);
        out.undirected = self.undirected;
        for i in 0..self.order {
            let src = i * self.order * self.dim;
            let dst = i * n * self.dim;
            let width = self.order * self.dim;
            out.cells[dst..dst + width].copy_from_slice(&self.cells[src..src + width]);
        }
        Ok(out)
    }

    /// The group action: `cells'[i][j] = cells[p(i)][p(j)]`.
    ///
    /// Acting twice composes on the right:
    /// `g.apply_permutation(p).apply_permutation(q) == g.apply_permutation(p.compose(q))`.
    pub fn apply_permutation(&self, p: &Permutation) -> Result<AttributedGraph> {
        if p.len() != self.order {
            return Err(Error::ShapeMismatch {
                left: self.shape_string(),
                right: format!("permutation of size {}", p.len()),
            });
        }
        Ok(self.permuted(p))
    }

    pub(crate) fn permuted(&self, p: &Permutation) -> AttributedGraph {
        let (n, d) = (self.order, self.dim);
        let mut cells = Vec::with_capacity(self.cells.len());
        for i in 0..n {
            let pi = p.get(i);
            for j in 0..n {
                let start = (pi * n + p.get(j)) * d;
                cells.extend_from_slice(&self.cells[start..start + d]);
            }
        }
        AttributedGraph {
            order: n,
            dim: d,
            undirected: self.undirected,
            cells,
        }
    }

    /// Frobenius inner product: sum over all `n²` cells of attribute dot
    /// products.
    pub fn frobenius_inner(&self, other: &AttributedGraph) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.cells, &other.cells))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.cells, &self.cells)
    }

    /// `sqrt(<g, g>)`, the same for every representative of the orbit.
    pub fn length(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &AttributedGraph) {
        debug_assert_eq!(self.cells.len(), other.cells.len());
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += alpha * b;
        }
        self.undirected &= other.undirected;
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.cells {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> AttributedGraph {
        let mut g = self.clone();
        g.scale(alpha);
        g
    }

    /// `self - other`; shapes must agree.
    pub fn sub(&self, other: &AttributedGraph) -> Result<AttributedGraph> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        self.cells.iter().all(|&c| c == 0.0)
    }

    /// Vertex attributes and nonzero edges, the inverse of
    /// [`AttributedGraph::from_edge_list`]. Undirected graphs list each edge once
    /// with `i < j`.
    pub fn to_edge_list(&self) -> (Vec<AttributeVector>, Vec<(usize, usize, AttributeVector)>, bool) {
        let undirected = self.undirected && self.is_symmetric();
        let vertices = (0..self.order).map(|i| self.cell(i, i).to_vec()).collect();
        let mut edges = Vec::new();
        for i in 0..self.order {
            for j in 0..self.order {
                if i == j || (undirected && j < i) {
                    continue;
                }
                let a = self.cell(i, j);
                if a.iter().any(|&c| c != 0.0) {
                    edges.push((i, j, a.to_vec()));
                }
            }
        }
        (vertices, edges, undirected)
    }
}

fn check_dim(dim: usize, a: &[f64]) -> Result<()> {
    if a.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.len(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A set of graphs padded to a common order.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub graphs: Vec<AttributedGraph>,
    pub common_order: usize,
    pub attr_dim: usize,
    pub labels: Option<Vec<f64>>,
}

impl GraphDataset {
    /// Pads every graph to the largest order present.
    pub fn new(graphs: Vec<AttributedGraph>, labels: Option<Vec<f64>>) -> Result<Self> {
        let first = graphs.first().ok_or(Error::EmptySample)?;
        let attr_dim = first.dim();
        let common_order = graphs.iter().map(|g| g.order()).max().unwrap_or(0);
        if let Some(g) = graphs.iter().find(|g| g.dim() != attr_dim) {
            return Err(Error::DimensionMismatch {
                expected: attr_dim,
                found: g.dim(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != graphs.len() {
                return Err(Error::config(
                    "labels",
                    format!("{} labels for {} graphs", labels.len(), graphs.len()),
                ));
            }
        }
        let graphs = graphs
            .iter()
            .map(|g| g.pad_to_order(common_order))
            .collect::<Result<Vec<_>>>()?;
        Ok(GraphDataset {
            graphs,
            common_order,
            attr_dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Graphs zipped with their labels; fails when labels are absent.
    pub fn labeled(&self) -> Result<Vec<(AttributedGraph, f64)>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::config("labels", "dataset has no labels"))?;
        Ok(self.graphs.iter().cloned().zip(labels.iter().copied()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, d: usize) -> AttributedGraph {
        let cells = (0..n * n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        AttributedGraph::from_cells(n, d, cells).unwrap()
    }

    fn triangle() -> AttributedGraph {
        AttributedGraph::from_edge_list(
            &[vec![0.0], vec![0.0], vec![0.0]],
            &[(0, 1, vec![1.0]), (1, 2, vec![1.0]), (0, 2, vec![1.0])],
            true,
        )
        .unwrap()
    }

    #[test]
    fn single_vertex() {
        let g = AttributedGraph::from_edge_list(&[vec![2.5, -1.0]], &[], true).unwrap();
        assert_eq!(g.order(), 1);
        assert_eq!(g.cell(0, 0), &[2.5, -1.0]);
    }

    #[test]
    fn triangle_is_symmetric() {
        let g = triangle();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 1.0 };
                assert_eq!(g.cell(i, j), &[expected]);
            }
        }
        assert!(g.is_symmetric());
    }

    #[test]
    fn edge_list_errors() {
        let v = [vec![0.0], vec![0.0]];
        let dup = AttributedGraph::from_edge_list(&v, &[(0, 1, vec![1.0]), (0, 1, vec![1.0])], false);
        assert!(matches!(dup, Err(Error::DuplicateEdge { i: 0, j: 1 })));
        let dup_rev = AttributedGraph::from_edge_list(&v, &[(0, 1, vec![1.0]), (1, 0, vec![1.0])], true);
        assert!(matches!(dup_rev, Err(Error::DuplicateEdge { .. })));
        let oob = AttributedGraph::from_edge_list(&v, &[(0, 2, vec![1.0])], false);
        assert!(matches!(oob, Err(Error::IndexOutOfRange { index: 2, order: 2 })));
        let dim = AttributedGraph::from_edge_list(&v, &[(0, 1, vec![1.0, 2.0])], false);
        assert!(matches!(dim, Err(Error::DimensionMismatch { expected: 1, found: 2 })));
        let looped = AttributedGraph::from_edge_list(&v, &[(1, 1, vec![1.0])], false);
        assert!(matches!(looped, Err(Error::SelfLoop(1))));
    }

    #[test]
    fn padding() {
        let g = AttributedGraph::from_edge_list(&[vec![3.0]], &[], true).unwrap();
        let p = g.pad_to_order(3).unwrap();
        assert_eq!(p.order(), 3);
        let nonzero: Vec<_> = p.as_slice().iter().enumerate().filter(|(_, &c)| c != 0.0).collect();
        assert_eq!(nonzero, vec![(0, &3.0)]);
        assert_eq!(g.pad_to_order(1).unwrap(), g);
        assert!(matches!(p.pad_to_order(2), Err(Error::PadTooSmall { .. })));
    }

    #[test]
    fn padding_preserves_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let g = random_graph(&mut rng, n, 2);
            let p = g.pad_to_order(n + 3).unwrap();
            assert_eq!(p.length(), g.length());
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(p.cell(i, j), g.cell(i, j));
                }
            }
        }
    }

    #[test]
    fn lengths_and_inner_products() {
        let g = AttributedGraph::from_edge_list(&[vec![3.0, 4.0]], &[], true).unwrap();
        assert_eq!(g.length(), 5.0);
        let two = AttributedGraph::from_edge_list(&[vec![2.0]], &[], true).unwrap();
        assert_eq!(two.frobenius_inner(&two).unwrap(), 4.0);
        let t = triangle();
        assert_eq!(t.frobenius_inner(&AttributedGraph::zeros(3, 1)).unwrap(), 0.0);
        assert_eq!(AttributedGraph::zeros(4, 2).length(), 0.0);
        assert!(t.frobenius_inner(&two).is_err());
    }

    #[test]
    fn permutation_validation_and_algebra() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let q = Permutation::new(vec![1, 0, 2]).unwrap();
        // (p ∘ q)(i) = p(q(i))
        assert_eq!(p.compose(&q).as_slice(), &[0, 2, 1]);
        assert!(p.compose(&p.inverse()).is_identity());
        assert!(p.inverse().compose(&p).is_identity());
        let mut count = 1;
        let mut it = Permutation::identity(4);
        while it.advance() {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(it.as_slice(), &[3, 2, 1, 0]);
    }

    #[test]
    fn group_action_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..7);
            let g = random_graph(&mut rng, n, 2);
            let h = random_graph(&mut rng, n, 2);
            let p = Permutation::random(n, &mut rng);
            let q = Permutation::random(n, &mut rng);
            assert_eq!(g.apply_permutation(&Permutation::identity(n)).unwrap(), g);
            let back = g.apply_permutation(&p).unwrap().apply_permutation(&p.inverse()).unwrap();
            assert_eq!(back, g);
            let twice = g.apply_permutation(&p).unwrap().apply_permutation(&q).unwrap();
            assert_eq!(twice, g.apply_permutation(&p.compose(&q)).unwrap());

            let gp = g.apply_permutation(&p).unwrap();
            let hp = h.apply_permutation(&p).unwrap();
            let lhs = gp.frobenius_inner(&hp).unwrap();
            let rhs = g.frobenius_inner(&h).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
            assert!((gp.length() - g.length()).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_graph(&mut rng, 4, 1);
        let p = Permutation::new(vec![3, 1, 0, 2]).unwrap();
        let gp = g.apply_permutation(&p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(gp.cell(i, j), g.cell(p.get(i), p.get(j)));
            }
        }
        assert!(g.apply_permutation(&Permutation::identity(3)).is_err());
    }

    #[test]
    fn edge_list_roundtrip() {
        let t = triangle().pad_to_order(4).unwrap();
        let (v, e, und) = t.to_edge_list();
        assert!(und);
        assert_eq!(e.len(), 3);
        assert_eq!(AttributedGraph::from_edge_list(&v, &e, und).unwrap(), t);
    }

    #[test]
    fn dataset_pads_to_max_order() {
        let a = AttributedGraph::from_edge_list(&[vec![1.0]], &[], true).unwrap();
        let ds = GraphDataset::new(vec![a, triangle()], Some(vec![1.0, -1.0])).unwrap();
        assert_eq!(ds.common_order, 3);
        assert!(ds.graphs.iter().all(|g| g.order() == 3));
        assert!(GraphDataset::new(vec![triangle()], Some(vec![])).is_err());
    }
}
