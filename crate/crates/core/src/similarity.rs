//! Silence interpolation through bag-of-words claim similarity.
//!
//! For every source, the claims it explicitly endorsed act as medoids. An
//! unobserved entry `(i, j)` is estimated as the sum of Gaussian RBF
//! similarities between claim `j` and each medoid of source `i`, clamped to
//! 1 and zeroed below a cutoff. Observed entries stay exactly 1.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Lowercases and splits on anything that is not a word character.
///
/// A leading `#` or `@` stays attached to the word that follows it.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c.is_alphanumeric() || c == '_' {
            cur.extend(c.to_lowercase());
        } else if (c == '#' || c == '@')
            && cur.is_empty()
            && chars.peek().is_some_and(|n| n.is_alphanumeric() || *n == '_')
        {
            cur.push(c);
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Gaussian RBF parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub epsilon: f64,
    pub cutoff: f64,
}

impl RbfParams {
    pub const DEFAULT_CUTOFF: f64 = 0.2;

    pub fn new(epsilon: f64, cutoff: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Argument(format!("RBF epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&cutoff) {
            return Err(Error::Argument(format!("cutoff must be in [0, 1), got {cutoff}")));
        }
        Ok(Self { epsilon, cutoff })
    }

    /// `φ(r) = exp(-(ε r)²)` evaluated from the squared distance.
    #[inline]
    pub fn kernel_sq(&self, r_sq: f64) -> f64 {
        (-(self.epsilon * self.epsilon) * r_sq.max(0.0)).exp()
    }
}

impl Default for RbfParams {
    fn default() -> Self {
        Self { epsilon: crate::factorize::FitConfig::DEFAULT_EPS_RBF, cutoff: Self::DEFAULT_CUTOFF }
    }
}

/// L2-normalized bag-of-words vector; `(token id, weight)` ascending by id.
#[derive(Debug, Clone, PartialEq)]
pub struct BowVector {
    entries: Vec<(u32, f64)>,
    norm_sq: f64,
}

impl BowVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    fn dot(&self, other: &BowVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }
}

/// Normalized BOW vectors for every claim over a shared vocabulary.
#[derive(Debug, Clone)]
pub struct BowTable {
    vectors: Vec<BowVector>,
    vocab_size: usize,
    /// token id -> (claim index, weight), claims ascending
    postings: Vec<Vec<(u32, f64)>>,
}

impl BowTable {
    /// Builds the vocabulary from all claims. A claim without tokens cannot
    /// serve as a medoid and is rejected.
    pub fn from_token_lists<T: AsRef<[S]>, S: AsRef<str>>(claims: &[T]) -> Result<Self> {
        let mut vocab: HashMap<&str, u32> = HashMap::new();
        let mut vectors = Vec::with_capacity(claims.len());
        for (c, tokens) in claims.iter().enumerate() {
            let tokens = tokens.as_ref();
            if tokens.is_empty() {
                return Err(Error::Input(format!("claim {c} has no tokens")));
            }
            let mut counts: HashMap<u32, f64> = HashMap::new();
            for t in tokens {
                let next = vocab.len() as u32;
                let id = *vocab.entry(t.as_ref()).or_insert(next);
                *counts.entry(id).or_insert(0.0) += 1.0;
            }
            let mut entries: Vec<(u32, f64)> = counts.into_iter().collect();
            entries.sort_unstable_by_key(|e| e.0);
            let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            for e in &mut entries {
                e.1 /= norm;
            }
            let norm_sq = entries.iter().map(|e| e.1 * e.1).sum();
            vectors.push(BowVector { entries, norm_sq });
        }
        let mut postings = vec![Vec::new(); vocab.len()];
        for (c, v) in vectors.iter().enumerate() {
            for &(t, w) in &v.entries {
                postings[t as usize].push((c as u32, w));
            }
        }
        Ok(Self { vectors, vocab_size: vocab.len(), postings })
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self> {
        let tokens: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
        Self::from_token_lists(&tokens)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn get(&self, claim: usize) -> &BowVector {
        &self.vectors[claim]
    }
}

fn distance_sq(a: &BowVector, b: &BowVector, dot: f64) -> f64 {
    a.norm_sq + b.norm_sq - 2.0 * dot
}

/// `exp(-(ε ‖a − b‖)²)` for two normalized vectors.
pub fn rbf_similarity(a: &BowVector, b: &BowVector, p: &RbfParams) -> f64 {
    p.kernel_sq(distance_sq(a, b, a.dot(b)))
}

/// Produces the interpolated endorsement matrix from a binary source-claim
/// matrix and one BOW vector per claim column.
pub fn interpolate(x: &SparseMatrix, bows: &BowTable, p: &RbfParams) -> Result<SparseMatrix> {
    let n_claims = x.n_cols();
    if bows.len() != n_claims {
        return Err(Error::shape("interpolate", format!("{n_claims} claim columns but {} BOW vectors", bows.len())));
    }
    if let Some((i, j, v)) = x.iter().find(|e| e.2 != 1.0) {
        return Err(Error::Input(format!("source-claim matrix is not binary: ({i}, {j}) = {v}")));
    }

    let rows: Vec<Vec<(usize, f64)>> = (0..x.n_rows())
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n_claims], vec![0.0f64; n_claims], Vec::new()),
            |(acc, dots, touched), i| interpolate_row(x.row(i).0, bows, p, acc, dots, touched),
        )
        .collect();
    Ok(SparseMatrix::from_sorted_rows(n_claims, rows))
}

fn interpolate_row(
    medoids: &[u32],
    bows: &BowTable,
    p: &RbfParams,
    acc: &mut [f64],
    dots: &mut [f64],
    touched: &mut Vec<usize>,
) -> Vec<(usize, f64)> {
    if medoids.is_empty() {
        return Vec::new();
    }
    acc.fill(0.0);
    for &k in medoids {
        let wk = bows.get(k as usize);
        // dot products with every claim sharing a token, accumulated in
        // ascending token order to match the pairwise merge
        for &(t, w) in wk.entries() {
            for &(c, wc) in &bows.postings[t as usize] {
                let c = c as usize;
                if dots[c] == 0.0 {
                    touched.push(c);
                }
                dots[c] += w * wc;
            }
        }
        for (j, a) in acc.iter_mut().enumerate() {
            *a += p.kernel_sq(distance_sq(wk, bows.get(j), dots[j]));
        }
        for c in touched.drain(..) {
            dots[c] = 0.0;
        }
    }

    let mut out = Vec::new();
    let mut observed = medoids.iter().map(|&k| k as usize).peekable();
    for (j, &s) in acc.iter().enumerate() {
        if observed.peek() == Some(&j) {
            observed.next();
            out.push((j, 1.0));
            continue;
        }
        let v = s.min(1.0);
        if v >= p.cutoff && v > 0.0 {
            out.push((j, v));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(eps: f64) -> RbfParams {
        RbfParams::new(eps, 0.2).unwrap()
    }

    #[test]
    fn tokenizer_cases() {
        assert_eq!(tokenize("Jamala WON!"), vec!["jamala", "won"]);
        assert_eq!(tokenize("#Ukraine @jamala"), vec!["#ukraine", "@jamala"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a#b, c @ d"), vec!["a", "b", "c", "d"]);
        assert_eq!(tokenize("  climate-change\tpolicy\n"), vec!["climate", "change", "policy"]);
    }

    #[test]
    fn params_validate() {
        assert!(RbfParams::new(0.0, 0.2).is_err());
        assert!(RbfParams::new(1.0, 1.0).is_err());
        assert!(RbfParams::new(1.0, -0.1).is_err());
        assert!(RbfParams::new(1.0, 0.0).is_ok());
    }

    #[test]
    fn rbf_cases() {
        let t = BowTable::from_texts(&["a b c", "a b c", "x y"]).unwrap();
        assert_eq!(rbf_similarity(t.get(0), t.get(1), &params(1.0)), 1.0);
        let d = rbf_similarity(t.get(0), t.get(2), &params(1.0));
        assert!((d - (-2.0f64).exp()).abs() < 1e-12, "{d}");
        assert!(rbf_similarity(t.get(0), t.get(2), &params(50.0)) < 1e-300);
    }

    #[test]
    fn normalized_vectors_have_unit_norm() {
        let t = BowTable::from_texts(&["a a b", "c", "d e f g g g"]).unwrap();
        for c in 0..t.len() {
            assert!((t.get(c).norm() - 1.0).abs() < 1e-9);
        }
        assert_eq!(t.vocab_size(), 7);
    }

    #[test]
    fn empty_claim_rejected() {
        let err = BowTable::from_texts(&["a", "!!"]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    fn x_of(n_rows: usize, n_cols: usize, ones: &[(usize, usize)]) -> SparseMatrix {
        SparseMatrix::from_triplets(n_rows, n_cols, ones.iter().map(|&(i, j)| (i, j, 1.0)).collect()).unwrap()
    }

    #[test]
    fn interpolation_examples() {
        let bows = BowTable::from_texts(&["vote jamala", "vote jamala", "brexit deal"]).unwrap();
        // source 0 endorses claim 0; source 1 is silent
        let x = x_of(2, 3, &[(0, 0)]);
        let xm = interpolate(&x, &bows, &params(1.0)).unwrap();
        assert_eq!(xm.get(0, 0), 1.0);
        assert_eq!(xm.get(0, 1), 1.0);
        // e^-2 ≈ 0.135 falls under the 0.2 cutoff
        assert_eq!(xm.get(0, 2), 0.0);
        assert_eq!(xm.row(1).0.len(), 0);
    }

    #[test]
    fn sum_over_medoids_is_clamped() {
        let bows = BowTable::from_texts(&["a b", "a c", "a d", "a"]).unwrap();
        let x = x_of(1, 4, &[(0, 0), (0, 1), (0, 2)]);
        let xm = interpolate(&x, &bows, &params(1.0)).unwrap();
        assert_eq!(xm.get(0, 3), 1.0);
        let p = params(1.0);
        let raw: f64 = (0..3).map(|k| rbf_similarity(bows.get(k), bows.get(3), &p)).sum();
        assert!(raw > 1.0);
    }

    #[test]
    fn rejects_non_binary_and_shape() {
        let bows = BowTable::from_texts(&["a", "b"]).unwrap();
        let x = SparseMatrix::from_triplets(1, 2, vec![(0, 0, 0.5)]).unwrap();
        assert!(interpolate(&x, &bows, &params(1.0)).is_err());
        let x = x_of(1, 3, &[(0, 0)]);
        assert!(interpolate(&x, &bows, &params(1.0)).is_err());
    }

    #[test]
    fn matches_pairwise_definition() {
        let texts = ["a b c", "a d", "b c e", "f g", "a b", "g h i", "c"];
        let bows = BowTable::from_texts(&texts).unwrap();
        let x = x_of(3, 7, &[(0, 0), (0, 3), (1, 5), (2, 2), (2, 6)]);
        let p = RbfParams::new(0.8, 0.2).unwrap();
        let xm = interpolate(&x, &bows, &p).unwrap();
        for i in 0..3 {
            let medoids = x.row(i).0;
            for j in 0..7 {
                let expected = if medoids.contains(&(j as u32)) {
                    1.0
                } else {
                    let s: f64 = medoids.iter().map(|&k| rbf_similarity(bows.get(k as usize), bows.get(j), &p)).sum();
                    let s = s.min(1.0);
                    if s < 0.2 {
                        0.0
                    } else {
                        s
                    }
                };
                assert_eq!(xm.get(i, j), expected, "({i}, {j})");
            }
        }
    }
}
