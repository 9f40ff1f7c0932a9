//! One-hop smoothing of the interpolated endorsement matrix over the
//! retweet graph.

use crate::error::{Error, Result};
use crate::linalg::{row_sums, spsp_dense, DenseMatrix, SparseMatrix};

/// Retweet graph: `a[i][j]` counts how often source `i` retweeted source `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    adjacency: SparseMatrix,
}

impl SocialGraph {
    /// Self-retweets are dropped.
    pub fn new(adjacency: SparseMatrix) -> Result<Self> {
        if adjacency.n_rows() != adjacency.n_cols() {
            return Err(Error::shape(
                "SocialGraph::new",
                format!("adjacency is {:?}, expected square", adjacency.shape()),
            ));
        }
        let off_diagonal = adjacency.iter().filter(|&(i, j, _)| i != j).collect();
        let adjacency = SparseMatrix::from_triplets(adjacency.n_rows(), adjacency.n_cols(), off_diagonal)?;
        Ok(Self { adjacency })
    }

    pub fn empty(n: usize) -> Self {
        Self { adjacency: SparseMatrix::zeros(n, n) }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.n_rows()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    /// `A + Aᵀ`, for treating retweets as undirected ties.
    pub fn symmetrized(&self) -> Self {
        let t = self.adjacency.transpose();
        let mut entries: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for (i, j, v) in self.adjacency.iter().chain(t.iter()) {
            *entries.entry((i, j)).or_insert(0.0) += v;
        }
        let n = self.n_nodes();
        let entries = entries.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        Self { adjacency: SparseMatrix::from_triplets(n, n, entries).expect("sum of valid graphs") }
    }
}

/// Row-stochastic propagation operator with half weight kept on the diagonal
/// for every node that has out-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    matrix: SparseMatrix,
}

impl PropagationOperator {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: SparseMatrix::identity(n) }
    }
}

/// Random-walk normalization `F⁻¹A` followed by the self-loop average
/// `½(F⁻¹A + I)`. Rows without out-edges become the unit self-loop.
pub fn build_operator(graph: &SocialGraph) -> PropagationOperator {
    let a = graph.adjacency();
    let degrees = row_sums(a);
    let mut rows = Vec::with_capacity(a.n_rows());
    for (i, &deg) in degrees.iter().enumerate() {
        let (cols, vals) = a.row(i);
        if deg <= 0.0 {
            rows.push(vec![(i, 1.0)]);
            continue;
        }
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(cols.len() + 1);
        let mut self_done = false;
        for (&j, &v) in cols.iter().zip(vals) {
            let j = j as usize;
            if !self_done && j > i {
                row.push((i, 0.5));
                self_done = true;
            }
            // the diagonal of A is always zero after SocialGraph::new
            row.push((j, 0.5 * (v / deg)));
        }
        if !self_done {
            row.push((i, 0.5));
        }
        rows.push(row);
    }
    PropagationOperator { matrix: SparseMatrix::from_sorted_rows(a.n_cols(), rows) }
}

/// `Ā · X^M`, materialized dense.
pub fn convolve(op: &PropagationOperator, xm: &SparseMatrix) -> Result<DenseMatrix> {
    if op.matrix.n_cols() != xm.n_rows() {
        return Err(Error::shape("convolve", format!("operator {:?} vs matrix {:?}", op.matrix.shape(), xm.shape())));
    }
    spsp_dense(&op.matrix, xm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(rows: &[&[f64]]) -> SocialGraph {
        SocialGraph::new(SparseMatrix::from_dense(&DenseMatrix::from_rows(rows).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn mutual_pair() {
        let op = build_operator(&graph(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(op.matrix().to_dense().to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let op2 = build_operator(&graph(&[&[0.0, 2.0], &[1.0, 0.0]]));
        assert_eq!(op2, op);
    }

    #[test]
    fn empty_graph_is_identity() {
        let op = build_operator(&SocialGraph::empty(3));
        assert_eq!(op.matrix().to_dense(), DenseMatrix::identity(3));
    }

    #[test]
    fn self_retweets_dropped() {
        let g = graph(&[&[5.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(g.adjacency().nnz(), 0);
        assert!(SocialGraph::new(SparseMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn weights_split_by_degree() {
        let op = build_operator(&graph(&[&[0.0, 1.0, 3.0], &[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0]]));
        let d = op.matrix().to_dense();
        assert_eq!(d.row(0), &[0.5, 0.125, 0.375]);
        assert_eq!(d.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(d.row(2), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn convolve_cases() {
        let xm = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let op = build_operator(&graph(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(convolve(&op, &xm).unwrap().to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(convolve(&PropagationOperator::identity(2), &xm).unwrap(), xm.to_dense());

        let col = SparseMatrix::from_triplets(3, 1, vec![(0, 0, 0.7), (1, 0, 0.7), (2, 0, 0.7)]).unwrap();
        let op = build_operator(&graph(&[&[0.0, 1.0, 3.0], &[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0]]));
        for v in convolve(&op, &col).unwrap().as_slice() {
            assert!((v - 0.7).abs() < 1e-12);
        }
        assert!(convolve(&op, &xm).is_err());
    }

    #[test]
    fn symmetrize_adds_transpose() {
        let g = graph(&[&[0.0, 2.0], &[0.0, 0.0]]).symmetrized();
        assert_eq!(g.adjacency().to_dense().to_rows(), vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
    }
}
