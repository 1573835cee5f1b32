//! Labeled utterance corpora.
//!
//! Target and source data share the same representation: utterances grouped
//! by session, each carrying an index into an ordered [`LabelSpace`].
//! Corpora are stored as JSON Lines with the keys `session`, `speaker`,
//! `text` and `label`.

mod synth;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use synth::{generate_synthetic, SynthCorpora, SynthSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub session_id: String,
    pub speaker: String,
    pub text: String,
    pub label_id: usize,
}

/// Ordered set of unique label names. Label ids are positions in this list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::LabelSpace(format!(
                "need at least 2 labels, got {}",
                names.len()
            )));
        }
        let mut lookup = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if lookup.insert(n.clone(), i).is_some() {
                return Err(Error::LabelSpace(format!("duplicate label {n:?}")));
            }
        }
        Ok(Self { names, lookup })
    }

    /// Label space from observed names, sorted lexicographically.
    pub fn inferred<'a>(observed: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut names: Vec<&str> = observed.into_iter().collect();
        names.sort_unstable();
        names.dedup();
        Self::new(names)
    }

    /// One label name per line; blank lines are ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }
}

#[derive(Serialize, Deserialize)]
struct Record<'a> {
    session: std::borrow::Cow<'a, str>,
    speaker: std::borrow::Cow<'a, str>,
    text: std::borrow::Cow<'a, str>,
    label: std::borrow::Cow<'a, str>,
}

/// An immutable collection of labeled utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    utterances: Vec<Utterance>,
    labels: LabelSpace,
    /// Sessions in first-appearance order, each with its utterance indices.
    sessions: Vec<(String, Vec<usize>)>,
}

impl Corpus {
    pub fn new(utterances: Vec<Utterance>, labels: LabelSpace) -> Result<Self> {
        let mut sessions: Vec<(String, Vec<usize>)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for (i, u) in utterances.iter().enumerate() {
            if u.label_id >= labels.len() {
                return Err(Error::LabelSpace(format!(
                    "utterance {i} has label id {} outside a space of {}",
                    u.label_id,
                    labels.len()
                )));
            }
            if u.session_id.is_empty() {
                return Err(Error::Config(format!("utterance {i} has an empty session id")));
            }
            match pos.get(u.session_id.as_str()) {
                Some(&s) => sessions[s].1.push(i),
                None => {
                    pos.insert(&u.session_id, sessions.len());
                    sessions.push((u.session_id.clone(), vec![i]));
                }
            }
        }
        Ok(Self {
            utterances,
            labels,
            sessions,
        })
    }

    /// Reads a JSONL corpus. Without `labels` the label space is inferred from
    /// the file, sorted by name.
    pub fn load(path: &Path, labels: Option<LabelSpace>) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut raw = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: e.to_string(),
            })?;
            raw.push((n + 1, rec.session.into_owned(), rec.speaker.into_owned(), rec.text.into_owned(), rec.label.into_owned()));
        }
        let labels = match labels {
            Some(l) => l,
            None if raw.is_empty() => return Err(Error::NoLabels),
            None => LabelSpace::inferred(raw.iter().map(|r| r.4.as_str()))?,
        };
        let mut utterances = Vec::with_capacity(raw.len());
        for (line, session_id, speaker, text, label) in raw {
            let label_id = labels
                .id(&label)
                .ok_or(Error::UnknownLabel { label, line })?;
            if session_id.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: "empty session id".into(),
                });
            }
            utterances.push(Utterance {
                session_id,
                speaker,
                text,
                label_id,
            });
        }
        Self::new(utterances, labels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for u in &self.utterances {
            let rec = Record {
                session: u.session_id.as_str().into(),
                speaker: u.speaker.as_str().into(),
                text: u.text.as_str().into(),
                label: self.labels.name(u.label_id).into(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn num_sessions(&self) -> usize {
        self.sessions.len()
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.sessions.iter().map(|(s, _)| s.as_str())
    }

    pub fn session_indices(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.sessions.iter().map(|(s, v)| (s.as_str(), v.as_slice()))
    }

    pub fn gold(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.label_id).collect()
    }

    /// Per-label utterance counts, indexed by label id.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for u in &self.utterances {
            counts[u.label_id] += 1;
        }
        counts
    }

    /// Sub-corpus made of the given sessions (by position), keeping utterance
    /// order within each session.
    fn with_sessions(&self, picks: &[usize]) -> Self {
        let mut utterances = Vec::new();
        let mut sessions = Vec::with_capacity(picks.len());
        for &s in picks {
            let (id, idx) = &self.sessions[s];
            let start = utterances.len();
            utterances.extend(idx.iter().map(|&i| self.utterances[i].clone()));
            sessions.push((id.clone(), (start..utterances.len()).collect()));
        }
        Self {
            utterances,
            labels: self.labels.clone(),
            sessions,
        }
    }

    /// Draws `n_train + n_val` distinct sessions uniformly without replacement
    /// and splits them into a training and a validation corpus.
    pub fn select_sessions(&self, n_train: usize, n_val: usize, seed: u64) -> Result<(Corpus, Corpus)> {
        let required = n_train + n_val;
        if required > self.sessions.len() {
            return Err(Error::InsufficientSessions {
                required,
                available: self.sessions.len(),
            });
        }
        let mut order: Vec<usize> = (0..self.sessions.len()).collect();
        order.shuffle(&mut rng::rng(seed));
        let (train, rest) = order[..required].split_at(n_train);
        Ok((self.with_sessions(train), self.with_sessions(rest)))
    }

    /// Relabels every utterance through `map` (old id -> new id) into `labels`.
    pub fn relabel(&self, labels: LabelSpace, map: &[usize]) -> Result<Corpus> {
        let utterances = self
            .utterances
            .iter()
            .map(|u| Utterance {
                label_id: map[u.label_id],
                ..u.clone()
            })
            .collect();
        Corpus::new(utterances, labels)
    }
}
