//! Labeled synthetic datasets with one overlap belief and `k − 1`
//! exclusive beliefs.
//!
//! Every belief owns a disjoint word corpus and a group of users. Overlap
//! users write only with the overlap corpus; users of an exclusive belief
//! draw each token from the overlap corpus with probability `overlap_mix`
//! and from their own corpus otherwise. Each message is a claim endorsed by
//! its author alone and labeled with the author's group. There are no
//! retweets, so the propagation operator is the identity.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Claim, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub k: usize,
    pub users_per_group: usize,
    pub messages_per_user: usize,
    pub vocab_per_corpus: usize,
    pub message_length: (usize, usize),
    pub overlap_mix: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            k: 4,
            users_per_group: 100,
            messages_per_user: 10,
            // larger corpora leave same-group messages nearly orthogonal
            vocab_per_corpus: 60,
            message_length: (8, 15),
            overlap_mix: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Argument(format!("need at least 2 belief regions, got {}", self.k)));
        }
        if self.vocab_per_corpus == 0 {
            return Err(Error::Argument("vocab_per_corpus must be positive to build disjoint corpora".into()));
        }
        let (lo, hi) = self.message_length;
        if lo == 0 || lo > hi {
            return Err(Error::Argument(format!("bad message length range [{lo}, {hi}]")));
        }
        if !(0.0..=1.0).contains(&self.overlap_mix) {
            return Err(Error::Argument(format!("overlap_mix {} outside [0, 1]", self.overlap_mix)));
        }
        if self.users_per_group == 0 || self.messages_per_user == 0 {
            return Err(Error::Argument("groups and users must be non-empty".into()));
        }
        Ok(())
    }
}

/// Token `index` of corpus `corpus`; corpus 0 is the overlap corpus.
pub fn corpus_token(corpus: usize, index: usize) -> String {
    format!("c{corpus}_w{index}")
}

/// Corpus a synthetic token belongs to, if it is one.
pub fn token_corpus(token: &str) -> Option<usize> {
    token.strip_prefix('c')?.split_once("_w")?.0.parse().ok()
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_users = spec.k * spec.users_per_group;
    let n_messages = n_users * spec.messages_per_user;
    let user_width = digits(n_users);
    let msg_width = digits(n_messages);

    let mut sources = Vec::with_capacity(n_users);
    let mut claims = Vec::with_capacity(n_messages);
    let mut incidences = Vec::with_capacity(n_messages);
    let mut labels = BTreeMap::new();
    for group in 0..spec.k {
        for _ in 0..spec.users_per_group {
            let user = sources.len();
            sources.push(format!("u{user:0user_width$}"));
            for _ in 0..spec.messages_per_user {
                let len = rng.gen_range(spec.message_length.0..=spec.message_length.1);
                let tokens: Vec<String> = (0..len)
                    .map(|_| {
                        let corpus = if group == 0 || rng.gen_bool(spec.overlap_mix) { 0 } else { group };
                        corpus_token(corpus, rng.gen_range(0..spec.vocab_per_corpus))
                    })
                    .collect();
                let id = claims.len();
                labels.insert(id, group);
                incidences.push((user, id));
                claims.push(Claim { id: format!("m{id:0msg_width$}"), text: tokens.join(" "), tokens });
            }
        }
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("generator".into(), serde_json::json!("synthetic"));
    metadata.insert("synth_spec".into(), serde_json::to_value(spec)?);
    Ok(Dataset { sources, claims, incidences, social_edges: Vec::new(), labels, metadata })
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}
