//! Sources, claims, endorsements and retweets, plus the plain-text file
//! formats they are exchanged in.
//!
//! A dataset directory holds:
//!
//! * `claims.jsonl`: one `{"claim_id": .., "text": ..}` object per line
//! * `incidences.csv`: `source_id,claim_id`
//! * `edges.csv`: `retweeter_id,author_id,count` (optional)
//! * `labels.csv`: `claim_id,region` (optional)
//! * `metadata.json` (optional)
//!
//! CSV files may start with a header row naming exactly those columns.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::propagation::SocialGraph;
use crate::similarity::{tokenize, BowTable};

pub const CLAIMS_FILE: &str = "claims.jsonl";
pub const INCIDENCES_FILE: &str = "incidences.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Claim {
    pub fn from_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self { id: id.into(), tokens: tokenize(&text), text }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub sources: Vec<String>,
    pub claims: Vec<Claim>,
    /// `(source index, claim index)`, sorted and unique.
    pub incidences: Vec<(usize, usize)>,
    /// `(retweeter index, author index, count)`.
    pub social_edges: Vec<(usize, usize, f64)>,
    /// Ground-truth region per claim index, when known.
    pub labels: BTreeMap<usize, usize>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// Locations of the files [`ingest`] reads.
#[derive(Debug, Clone)]
pub struct IngestPaths {
    pub claims: PathBuf,
    pub incidences: PathBuf,
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
}

impl IngestPaths {
    /// Standard file names inside `dir`; optional files are used if present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        Self {
            claims: dir.join(CLAIMS_FILE),
            incidences: dir.join(INCIDENCES_FILE),
            edges: opt(EDGES_FILE),
            labels: opt(LABELS_FILE),
            metadata: opt(METADATA_FILE),
        }
    }
}

impl Dataset {
    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_claims(&self) -> usize {
        self.claims.len()
    }

    /// Binary source-claim matrix.
    pub fn source_claim_matrix(&self) -> SparseMatrix {
        let entries = self.incidences.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        SparseMatrix::from_triplets(self.n_sources(), self.n_claims(), entries)
            .expect("incidences are unique and in range")
    }

    /// Retweet graph with repeated edges summed.
    pub fn social_graph(&self) -> Result<SocialGraph> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, c) in &self.social_edges {
            *merged.entry((i, j)).or_insert(0.0) += c;
        }
        let n = self.n_sources();
        let entries = merged.into_iter().map(|((i, j), c)| (i, j, c)).collect();
        SocialGraph::new(SparseMatrix::from_triplets(n, n, entries)?)
    }

    pub fn bow_table(&self) -> Result<BowTable> {
        let tokens: Vec<&Vec<String>> = self.claims.iter().map(|c| &c.tokens).collect();
        BowTable::from_token_lists(&tokens).map_err(|e| match e {
            Error::Input(_) => {
                let empty = self.claims.iter().find(|c| c.tokens.is_empty()).map(|c| c.id.as_str());
                Error::Input(format!("claim `{}` has no tokens", empty.unwrap_or("?")))
            }
            other => other,
        })
    }

    /// `(claim index, region)` pairs for every labeled claim.
    pub fn labeled_claims(&self) -> Vec<(usize, usize)> {
        self.labels.iter().map(|(&c, &r)| (c, r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(s)?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_reader(mut r: impl Read) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, nc) = (self.n_sources(), self.n_claims());
        for w in self.incidences.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Input("incidences must be sorted and unique".into()));
            }
        }
        if let Some(&(i, j)) = self.incidences.iter().find(|&&(i, j)| i >= ns || j >= nc) {
            return Err(Error::Input(format!("incidence ({i}, {j}) out of range")));
        }
        if let Some(e) = self.social_edges.iter().find(|e| e.0 >= ns || e.1 >= ns || !(e.2 >= 0.0)) {
            return Err(Error::Input(format!("invalid social edge {e:?}")));
        }
        if let Some((c, _)) = self.labels.iter().find(|(&c, _)| c >= nc) {
            return Err(Error::Input(format!("label for claim index {c} out of range")));
        }
        Ok(())
    }

    /// Writes the directory layout described in the module docs.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(CLAIMS_FILE))?);
        for c in &self.claims {
            serde_json::to_writer(&mut w, &ClaimRecord { claim_id: c.id.clone(), text: c.text.clone() })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(INCIDENCES_FILE)).map_err(csv_io)?;
        w.write_record(["source_id", "claim_id"]).map_err(csv_io)?;
        for &(i, j) in &self.incidences {
            w.write_record([&self.sources[i], &self.claims[j].id]).map_err(csv_io)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(EDGES_FILE)).map_err(csv_io)?;
        w.write_record(["retweeter_id", "author_id", "count"]).map_err(csv_io)?;
        for &(i, j, c) in &self.social_edges {
            w.write_record([self.sources[i].as_str(), self.sources[j].as_str(), &c.to_string()]).map_err(csv_io)?;
        }
        w.flush()?;

        if !self.labels.is_empty() {
            let mut w = csv::Writer::from_path(dir.join(LABELS_FILE)).map_err(csv_io)?;
            w.write_record(["claim_id", "region"]).map_err(csv_io)?;
            for (&c, &r) in &self.labels {
                w.write_record([self.claims[c].id.as_str(), &r.to_string()]).map_err(csv_io)?;
            }
            w.flush()?;
        }
        if !self.metadata.is_empty() {
            std::fs::write(dir.join(METADATA_FILE), serde_json::to_string_pretty(&self.metadata)?)?;
        }
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Serialize, Deserialize)]
struct ClaimRecord {
    claim_id: String,
    text: String,
}

fn file_name(p: &Path) -> String {
    p.display().to_string()
}

/// Reads a headerless-or-headed CSV, yielding `(line number, fields)`.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse { file: file_name(path), line: 0, msg: e.to_string() })?;
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            file: file_name(path),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if n == 0 && rec.iter().eq(header.iter().copied()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Parse {
                file: file_name(path),
                line,
                msg: format!("expected {} fields ({}), found {}", header.len(), header.join(","), rec.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// Builds a dataset from the individual files. Ids are interned to dense
/// indices in order of first appearance; sources are those named in the
/// incidence file.
pub fn ingest(paths: &IngestPaths) -> Result<Dataset> {
    let mut claims = Vec::new();
    let mut claim_index: HashMap<String, usize> = HashMap::new();
    let reader = BufReader::new(File::open(&paths.claims)?);
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClaimRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: file_name(&paths.claims),
            line: n as u64 + 1,
            msg: e.to_string(),
        })?;
        if claim_index.insert(rec.claim_id.clone(), claims.len()).is_some() {
            return Err(Error::Parse {
                file: file_name(&paths.claims),
                line: n as u64 + 1,
                msg: format!("duplicate claim_id `{}`", rec.claim_id),
            });
        }
        claims.push(Claim::from_text(rec.claim_id, rec.text));
    }

    let mut sources = Vec::new();
    let mut source_index: HashMap<String, usize> = HashMap::new();
    let mut incidences = Vec::new();
    for (_, f) in read_csv(&paths.incidences, &["source_id", "claim_id"])? {
        let claim = *claim_index.get(&f[1]).ok_or_else(|| Error::DanglingId {
            kind: "claim",
            id: f[1].clone(),
            file: file_name(&paths.incidences),
        })?;
        let next = sources.len();
        let src = *source_index.entry(f[0].clone()).or_insert_with(|| {
            sources.push(f[0].clone());
            next
        });
        incidences.push((src, claim));
    }
    incidences.sort_unstable();
    incidences.dedup();

    let mut social_edges = Vec::new();
    if let Some(p) = &paths.edges {
        for (line, f) in read_csv(p, &["retweeter_id", "author_id", "count"])? {
            let lookup = |id: &String| {
                source_index.get(id).copied().ok_or_else(|| Error::DanglingId {
                    kind: "source",
                    id: id.clone(),
                    file: file_name(p),
                })
            };
            let (i, j) = (lookup(&f[0])?, lookup(&f[1])?);
            let count: f64 = f[2].parse().ok().filter(|c: &f64| c.is_finite() && *c >= 0.0).ok_or_else(|| {
                Error::Parse { file: file_name(p), line, msg: format!("bad retweet count `{}`", f[2]) }
            })?;
            social_edges.push((i, j, count));
        }
    }

    let mut labels = BTreeMap::new();
    if let Some(p) = &paths.labels {
        for (line, f) in read_csv(p, &["claim_id", "region"])? {
            let claim = *claim_index.get(&f[0]).ok_or_else(|| Error::DanglingId {
                kind: "claim",
                id: f[0].clone(),
                file: file_name(p),
            })?;
            let region: usize = f[1].parse().map_err(|_| Error::Parse {
                file: file_name(p),
                line,
                msg: format!("bad region `{}`", f[1]),
            })?;
            labels.insert(claim, region);
        }
    }

    let mut metadata = BTreeMap::new();
    if let Some(p) = &paths.metadata {
        metadata = serde_json::from_str(&std::fs::read_to_string(p)?)?;
    }
    metadata.insert("ingested_from".into(), serde_json::Value::String(file_name(&paths.claims)));

    Ok(Dataset { sources, claims, incidences, social_edges, labels, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn fixture(dir: &Path) -> IngestPaths {
        write(
            dir,
            CLAIMS_FILE,
            "{\"claim_id\":\"c1\",\"text\":\"Jamala won\"}\n{\"claim_id\":\"c2\",\"text\":\"#Eurovision rigged\"}\n{\"claim_id\":\"c3\",\"text\":\"great song\"}\n",
        );
        write(dir, INCIDENCES_FILE, "source_id,claim_id\nalice,c1\nbob,c2\nbob,c3\n");
        IngestPaths::in_dir(dir)
    }

    #[test]
    fn ingest_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let ds = ingest(&fixture(dir.path())).unwrap();
        assert_eq!((ds.n_sources(), ds.n_claims()), (2, 3));
        assert_eq!(ds.incidences, vec![(0, 0), (1, 1), (1, 2)]);
        assert_eq!(ds.claims[1].tokens, vec!["#eurovision", "rigged"]);
        let x = ds.source_claim_matrix().to_dense();
        assert_eq!(x.to_rows(), vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]);
        // no edge file: zero graph
        assert_eq!(ds.social_graph().unwrap().adjacency().nnz(), 0);
    }

    #[test]
    fn empty_edges_and_duplicate_incidences() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture(dir.path());
        write(dir.path(), INCIDENCES_FILE, "alice,c1\nalice,c1\nbob,c2\n");
        paths.edges = Some(write(dir.path(), EDGES_FILE, ""));
        let ds = ingest(&paths).unwrap();
        assert_eq!(ds.incidences, vec![(0, 0), (1, 1)]);
        assert!(ds.social_edges.is_empty());
    }

    #[test]
    fn edges_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture(dir.path());
        paths.edges =
            Some(write(dir.path(), EDGES_FILE, "retweeter_id,author_id,count\nalice,bob,2\nalice,bob,1\nbob,bob,4\n"));
        paths.labels = Some(write(dir.path(), LABELS_FILE, "c1,0\nc3,2\n"));
        let ds = ingest(&paths).unwrap();
        assert_eq!(ds.labels, BTreeMap::from([(0, 0), (2, 2)]));
        let g = ds.social_graph().unwrap();
        assert_eq!(g.adjacency().to_dense().to_rows(), vec![vec![0.0, 3.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture(dir.path());
        write(dir.path(), INCIDENCES_FILE, "alice,c1\nbob\n");
        match ingest(&paths) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        write(dir.path(), CLAIMS_FILE, "{\"claim_id\":\"c1\",\"text\":\"x\"}\nnot json\n");
        match ingest(&paths) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_ids() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture(dir.path());
        paths.edges = Some(write(dir.path(), EDGES_FILE, "alice,carol,1\n"));
        assert!(matches!(ingest(&paths), Err(Error::DanglingId { kind: "source", .. })));
        paths.edges = None;
        write(dir.path(), INCIDENCES_FILE, "alice,c9\n");
        assert!(matches!(ingest(&paths), Err(Error::DanglingId { kind: "claim", .. })));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture(dir.path());
        paths.labels = Some(write(dir.path(), LABELS_FILE, "c2,1\n"));
        let ds = ingest(&paths).unwrap();
        let out = tempfile::tempdir().unwrap();
        ds.write_dir(out.path()).unwrap();
        let again = ingest(&IngestPaths::in_dir(out.path())).unwrap();
        assert_eq!(again.claims, ds.claims);
        assert_eq!(again.incidences, ds.incidences);
        assert_eq!(again.labels, ds.labels);
        let bundle = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
        assert_eq!(bundle, ds);
    }
}
