//! Belief mixture matrices.
//!
//! Entry `(p, q)` is 1 when sources holding belief `p` endorse claims that
//! espouse belief `q`. Region 0 of a star structure is the overlap region
//! shared by every belief.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BeliefMixtureJson", into = "BeliefMixtureJson")]
pub struct BeliefMixture {
    k: usize,
    rows: Vec<Vec<u8>>,
    names: Vec<String>,
}

/// On-disk JSON form: `{"k": 3, "rows": [[1,0,0],...], "names": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BeliefMixtureJson {
    k: usize,
    rows: Vec<Vec<f64>>,
    #[serde(default)]
    names: Vec<String>,
}

impl BeliefMixture {
    /// Overlap column plus an identity block for the exclusive beliefs.
    pub fn star(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Argument(format!("star structure needs k >= 2, got {k}")));
        }
        let rows = (0..k).map(|p| (0..k).map(|q| u8::from(q == 0 || q == p)).collect()).collect();
        let names = std::iter::once("o".to_string()).chain((1..k).map(|p| format!("b{p}"))).collect();
        Ok(Self { k, rows, names })
    }

    /// Disjoint beliefs; factorizing with this is standard NMF.
    pub fn identity(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("identity structure needs k >= 1".into()));
        }
        let rows = (0..k).map(|p| (0..k).map(|q| u8::from(p == q)).collect()).collect();
        Ok(Self { k, rows, names: Vec::new() })
    }

    /// Validates an arbitrary user-supplied structure.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::BeliefStructure("matrix is empty".into()));
        }
        let mut out = Vec::with_capacity(k);
        for (p, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != k {
                return Err(Error::BeliefStructure(format!(
                    "not square: row {p} has {} entries, expected {k}",
                    row.len()
                )));
            }
            let mut bits = Vec::with_capacity(k);
            for (q, &v) in row.iter().enumerate() {
                bits.push(match v {
                    v if v == 0.0 => 0,
                    v if v == 1.0 => 1,
                    _ => return Err(Error::BeliefStructure(format!("non-binary entry {v} at ({p}, {q})"))),
                });
            }
            out.push(bits);
        }
        for p in 0..k {
            if out[p].iter().all(|&v| v == 0) {
                return Err(Error::BeliefStructure(format!("zero row {p}")));
            }
            if out.iter().all(|r| r[p] == 0) {
                return Err(Error::BeliefStructure(format!("zero column {p}")));
            }
            if out[p][p] != 1 {
                return Err(Error::BeliefStructure(format!("zero diagonal entry at ({p}, {p})")));
            }
        }
        Ok(Self { k, rows: out, names: Vec::new() })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if !names.is_empty() && names.len() != self.k {
            return Err(Error::BeliefStructure(format!("{} region names for k = {}", names.len(), self.k)));
        }
        self.names = names;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn entry(&self, p: usize, q: usize) -> u8 {
        self.rows[p][q]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn is_identity(&self) -> bool {
        (0..self.k).all(|p| (0..self.k).all(|q| self.rows[p][q] == u8::from(p == q)))
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.k, self.k, |p, q| f64::from(self.rows[p][q]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("belief mixture serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: BeliefMixtureJson = serde_json::from_str(s)?;
        Self::try_from(j)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl TryFrom<BeliefMixtureJson> for BeliefMixture {
    type Error = Error;

    fn try_from(j: BeliefMixtureJson) -> Result<Self> {
        let b = Self::from_rows(&j.rows)?;
        if b.k != j.k {
            return Err(Error::BeliefStructure(format!("declared k = {} but matrix is {}x{}", j.k, b.k, b.k)));
        }
        b.with_names(j.names)
    }
}

impl From<BeliefMixture> for BeliefMixtureJson {
    fn from(b: BeliefMixture) -> Self {
        BeliefMixtureJson {
            k: b.k,
            rows: b.rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect(),
            names: b.names,
        }
    }
}

/// Command-line belief selector: `star:K`, `identity:K` or `file:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BeliefSpec {
    Star(usize),
    Identity(usize),
    File(String),
}

impl BeliefSpec {
    pub fn resolve(&self) -> Result<BeliefMixture> {
        match self {
            BeliefSpec::Star(k) => BeliefMixture::star(*k),
            BeliefSpec::Identity(k) => BeliefMixture::identity(*k),
            BeliefSpec::File(p) => BeliefMixture::from_json_file(Path::new(p)),
        }
    }
}

impl FromStr for BeliefSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) =
            s.split_once(':').ok_or_else(|| Error::Argument(format!("belief spec `{s}` is not KIND:ARG")))?;
        let count = || arg.parse::<usize>().map_err(|_| Error::Argument(format!("bad region count `{arg}` in `{s}`")));
        match kind {
            "star" => Ok(BeliefSpec::Star(count()?)),
            "identity" => Ok(BeliefSpec::Identity(count()?)),
            "file" => Ok(BeliefSpec::File(arg.to_string())),
            _ => Err(Error::Argument(format!("unknown belief structure kind `{kind}`"))),
        }
    }
}
