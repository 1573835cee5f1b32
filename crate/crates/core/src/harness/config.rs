use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::meta::{Method, TagMap};
use crate::model::{OptimizerKind, Precision};

use super::protocol::ProtocolConfig;

/// A parsed `key = value` run file: protocol settings plus the data paths.
/// Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub protocol: ProtocolConfig,
    pub target: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Every recognized entry in file order, for echoing into reports.
    pub entries: Vec<(String, String)>,
}

pub const KEYS: &[&str] = &[
    "target",
    "test",
    "source",
    "out",
    "tag_map",
    "levels",
    "repeats",
    "methods",
    "k",
    "seed",
    "hash_buckets",
    "ngram_orders",
    "hidden_dim",
    "init_scale",
    "precision",
    "pretrain_lr",
    "pretrain_epochs",
    "pretrain_batch",
    "alpha",
    "beta",
    "inner_steps",
    "tasks_per_step",
    "meta_epochs",
    "meta_iterations",
    "meta_batch",
    "inner_optimizer",
    "enumeration_cap",
    "ft_lrs",
    "ft_epochs",
    "ft_batch",
    "dummy_lr",
    "dummy_epochs",
    "dummy_batch",
];

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn one<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// `#` starts a comment; blank lines are ignored. Unknown keys and bad
    /// values are configuration errors naming the line.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut rf = RunFile {
            protocol: ProtocolConfig::default(),
            target: None,
            test: None,
            source: None,
            out: None,
            entries: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            rf.set(k, v, base).map_err(|m| Error::Config(format!("line {}: {k}: {m}", i + 1)))?;
            rf.entries.push((k.to_string(), v.to_string()));
        }
        Ok(rf)
    }

    /// Applies a single setting, as from a config line or a CLI override.
    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> std::result::Result<(), String> {
        let p = &mut self.protocol;
        let path = || base.join(v);
        match key {
            "target" => self.target = Some(path()),
            "test" => self.test = Some(path()),
            "source" => self.source = Some(path()),
            "out" => self.out = Some(path()),
            "tag_map" => {
                p.recipe.tag_map = Some(if v == "swda7" {
                    TagMap::swda_seven()
                } else {
                    TagMap::load(&path()).map_err(|e| e.to_string())?
                })
            }
            "levels" => p.sparsity_levels = list(v)?,
            "repeats" => p.repeats = one(v)?,
            "methods" => {
                p.methods = if v == "all" {
                    Method::ALL.to_vec()
                } else {
                    list::<Method>(v)?
                }
            }
            "k" => p.k_values = list(v)?,
            "seed" => p.master_seed = one(v)?,
            "hash_buckets" => p.recipe.encoder.hash_buckets = one(v)?,
            "ngram_orders" => p.recipe.encoder.ngram_orders = list(v)?,
            "hidden_dim" => p.recipe.encoder.hidden_dim = one(v)?,
            "init_scale" => p.recipe.encoder.init_scale = one(v)?,
            "precision" => {
                p.recipe.encoder.precision = match v {
                    "double" => Precision::Double,
                    "single" => Precision::Single,
                    _ => return Err(format!("{v:?}: expected double or single")),
                }
            }
            "pretrain_lr" => p.recipe.pretrain.learning_rate = one(v)?,
            "pretrain_epochs" => p.recipe.pretrain.epochs = one(v)?,
            "pretrain_batch" => p.recipe.pretrain.batch_size = one(v)?,
            "alpha" => p.recipe.reptile.alpha = one(v)?,
            "beta" => p.recipe.reptile.beta = one(v)?,
            "inner_steps" => p.recipe.reptile.inner_steps = one(v)?,
            "tasks_per_step" => p.recipe.reptile.tasks_per_step = one(v)?,
            "meta_epochs" => p.recipe.reptile.epochs = one(v)?,
            "meta_iterations" => p.recipe.reptile.iterations = Some(one(v)?),
            "meta_batch" => p.recipe.reptile.batch_size = one(v)?,
            "inner_optimizer" => {
                p.recipe.reptile.inner_optimizer = match v {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => return Err(format!("{v:?}: expected adam or sgd")),
                }
            }
            "enumeration_cap" => p.recipe.enumeration_cap = one(v)?,
            "ft_lrs" => p.finetune.grid.learning_rates = list(v)?,
            "ft_epochs" => p.finetune.grid.epoch_choices = list(v)?,
            "ft_batch" => p.finetune.batch_size = one(v)?,
            "dummy_lr" => p.dummy.learning_rate = one(v)?,
            "dummy_epochs" => p.dummy.epochs = one(v)?,
            "dummy_batch" => p.dummy.batch_size = one(v)?,
            _ => return Err(format!("unknown key; known keys: {}", KEYS.join(", "))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_resolves_paths() {
        let rf = RunFile::parse(
            "# run\ntarget = t.jsonl\nlevels = 2, 4\nmethods = direct,reptile-ppts\nk=2,3\nseed=9 # trailing\nmeta_iterations=5\nprecision=single\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(rf.target, Some(PathBuf::from("/data/t.jsonl")));
        assert_eq!(rf.protocol.sparsity_levels, vec![2, 4]);
        assert_eq!(rf.protocol.methods, vec![Method::Direct, Method::ReptilePpts]);
        assert_eq!(rf.protocol.k_values, vec![2, 3]);
        assert_eq!(rf.protocol.master_seed, 9);
        assert_eq!(rf.protocol.recipe.reptile.iterations, Some(5));
        assert_eq!(rf.protocol.recipe.encoder.precision, Precision::Single);
        assert_eq!(rf.entries.len(), 7);
        assert_eq!(rf.entries[4], ("seed".to_string(), "9".to_string()));
    }

    #[test]
    fn errors_name_the_line() {
        let e = RunFile::parse("repeats = 3\nbogus = 1\n", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(!e.is_data_error());
        assert!(RunFile::parse("repeats three\n", Path::new(".")).is_err());
        assert!(RunFile::parse("repeats = x\n", Path::new(".")).is_err());
        assert!(RunFile::parse("methods = nope\n", Path::new(".")).is_err());
    }

    #[test]
    fn builtin_tag_map() {
        let rf = RunFile::parse("tag_map = swda7\n", Path::new(".")).unwrap();
        assert_eq!(rf.protocol.recipe.tag_map, Some(TagMap::swda_seven()));
    }
}
