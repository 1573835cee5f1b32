use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, LabelSpace};
use crate::error::{Error, Result};

/// Reference 42-tag to 7-tag dialogue-act grouping
/// (statement, backchannel, question, agreement, appreciation, incomplete, other).
pub const SWDA_SEVEN_TAGS: &str = include_str!("../../data/swda_7tag.tsv");

/// Mapping from fine source tags to coarse tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMap {
    pairs: Vec<(String, String)>,
    lookup: HashMap<String, usize>,
}

impl TagMap {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(pairs.len());
        for (i, (fine, _)) in pairs.iter().enumerate() {
            if lookup.insert(fine.clone(), i).is_some() {
                return Err(Error::TagMap(format!("fine tag {fine:?} mapped twice")));
            }
        }
        Ok(Self { pairs, lookup })
    }

    /// Lines of `fine<TAB>coarse`.
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                l.split_once('\t')
                    .map(|(f, c)| (f.to_string(), c.trim_end_matches('\r').to_string()))
                    .ok_or_else(|| Error::TagMap(format!("line {}: expected fine<TAB>coarse", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.pairs.iter().map(|(f, c)| format!("{f}\t{c}\n")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn swda_seven() -> Self {
        Self::parse(SWDA_SEVEN_TAGS).expect("bundled tag map is well formed")
    }

    pub fn identity(labels: &LabelSpace) -> Self {
        Self::new(labels.names().iter().map(|n| (n.clone(), n.clone())).collect()).expect("unique names")
    }

    pub fn coarse_of(&self, fine: &str) -> Option<&str> {
        self.lookup.get(fine).map(|&i| self.pairs[i].1.as_str())
    }

    /// Coarse label space (sorted) and the fine-id to coarse-id table for `fine`.
    pub fn project(&self, fine: &LabelSpace) -> Result<(LabelSpace, Vec<usize>)> {
        let coarse_names = fine
            .names()
            .iter()
            .map(|n| {
                self.coarse_of(n)
                    .ok_or_else(|| Error::TagMap(format!("source label {n:?} has no coarse tag")))
            })
            .collect::<Result<Vec<_>>>()?;
        let coarse = LabelSpace::inferred(coarse_names.iter().copied())
            .map_err(|e| Error::TagMap(format!("coarse scheme: {e}")))?;
        let table = coarse_names.iter().map(|n| coarse.id(n).expect("present")).collect();
        Ok((coarse, table))
    }

    pub fn apply(&self, corpus: &Corpus) -> Result<Corpus> {
        let (coarse, table) = self.project(corpus.labels())?;
        corpus.relabel(coarse, &table)
    }
}
