use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::meta::Method;

use super::metrics::paired_ttest;
use super::protocol::{ProtocolOutcome, RunResult};

pub const CSV_HEADER: &str = "method,level,repeat,K,uar,chosen_lr,chosen_epochs";

/// One row per run. Floats use the shortest representation that parses back
/// to the same value, so the file round-trips exactly.
pub fn to_csv(results: &[RunResult]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.method, r.level, r.repeat, r.k, r.uar, r.chosen_lr, r.chosen_epochs
        );
    }
    s
}

/// Row of a results CSV (per-class recalls are not stored there).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub method: Method,
    pub level: usize,
    pub repeat: usize,
    pub k: usize,
    pub uar: f64,
    pub chosen_lr: f64,
    pub chosen_epochs: usize,
}

impl From<&RunResult> for CsvRow {
    fn from(r: &RunResult) -> Self {
        Self {
            method: r.method,
            level: r.level,
            repeat: r.repeat,
            k: r.k,
            uar: r.uar,
            chosen_lr: r.chosen_lr,
            chosen_epochs: r.chosen_epochs,
        }
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::Config(format!("results CSV must start with `{CSV_HEADER}`"))),
    }
    let err = |line: usize, msg: String| Error::Parse {
        path: "<csv>".into(),
        line: line + 1,
        msg,
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(i, format!("expected 7 fields, found {}", f.len())));
        }
        let num = |j: usize| f[j].parse::<usize>().map_err(|e| err(i, format!("field {j}: {e}")));
        let real = |j: usize| f[j].parse::<f64>().map_err(|e| err(i, format!("field {j}: {e}")));
        rows.push(CsvRow {
            method: f[0].parse().map_err(|e: Error| err(i, e.to_string()))?,
            level: num(1)?,
            repeat: num(2)?,
            k: num(3)?,
            uar: real(4)?,
            chosen_lr: real(5)?,
            chosen_epochs: num(6)?,
        });
    }
    Ok(rows)
}

/// Summary statistics for one table column (a sparsity level or a K value).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub key: usize,
    /// Mean UAR per method; `None` where the method has no runs.
    pub means: Vec<Option<f64>>,
    pub best: Option<usize>,
    pub runner_up: Option<usize>,
    /// Paired two-sided p-value of best vs runner-up over repeats; `None`
    /// when fewer than two pairs exist or the differences are constant.
    pub p_value: Option<f64>,
}

/// Groups runs by `key` (level or K) and computes means and the
/// best-vs-runner-up test, pairing runs by repeat index.
pub fn summarize(rows: &[CsvRow], methods: &[Method], key: impl Fn(&CsvRow) -> usize) -> Vec<ColumnSummary> {
    let mut cols: BTreeMap<usize, Vec<BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in rows {
        if let Some(mi) = methods.iter().position(|&m| m == r.method) {
            let col = cols.entry(key(r)).or_insert_with(|| vec![BTreeMap::new(); methods.len()]);
            col[mi].insert(r.repeat, r.uar);
        }
    }
    cols.into_iter()
        .map(|(key, per)| {
            let means: Vec<Option<f64>> = per
                .iter()
                .map(|v| (!v.is_empty()).then(|| v.values().sum::<f64>() / v.len() as f64))
                .collect();
            let mut order: Vec<usize> = (0..methods.len()).filter(|&i| means[i].is_some()).collect();
            // descending mean, ties to the earlier method
            order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            let best = order.first().copied();
            let runner_up = order.get(1).copied();
            let p_value = match (best, runner_up) {
                (Some(b), Some(r)) => {
                    let common: Vec<usize> = per[b].keys().filter(|k| per[r].contains_key(k)).copied().collect();
                    let a: Vec<f64> = common.iter().map(|k| per[b][k]).collect();
                    let c: Vec<f64> = common.iter().map(|k| per[r][k]).collect();
                    paired_ttest(&a, &c).ok().and_then(|t| t.p)
                }
                _ => None,
            };
            ColumnSummary {
                key,
                means,
                best,
                runner_up,
                p_value,
            }
        })
        .collect()
}

/// Markdown table with one row per method and one column per key. The best
/// mean in each column is bold.
pub fn markdown_table(summary: &[ColumnSummary], methods: &[Method], key_name: &str) -> String {
    let mut s = String::new();
    let _ = write!(s, "| method |");
    for c in summary {
        let _ = write!(s, " {key_name}={} |", c.key);
    }
    s.push('\n');
    s.push_str("|---|");
    for _ in summary {
        s.push_str("---:|");
    }
    s.push('\n');
    for (mi, m) in methods.iter().enumerate() {
        let _ = write!(s, "| {m} |");
        for c in summary {
            match c.means[mi] {
                Some(v) if c.best == Some(mi) => {
                    let _ = write!(s, " **{v:.4}** |");
                }
                Some(v) => {
                    let _ = write!(s, " {v:.4} |");
                }
                None => s.push_str(" n/a |"),
            }
        }
        s.push('\n');
    }
    let _ = write!(s, "| p (best vs runner-up) |");
    for c in summary {
        match c.p_value {
            Some(p) => {
                let _ = write!(s, " {p:.4} |");
            }
            None => s.push_str(" n/a |"),
        }
    }
    s.push('\n');
    s
}

/// Which dimension the Markdown table spreads across columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableAxis {
    Level,
    K,
}

/// Full Markdown report: `header` lines (run provenance) as a bullet list,
/// then one table per value of the other axis, then skipped runs.
pub fn markdown_report(outcome: &ProtocolOutcome, methods: &[Method], axis: TableAxis, header: &[(String, String)]) -> String {
    let rows: Vec<CsvRow> = outcome.results.iter().map(CsvRow::from).collect();
    let mut s = String::from("# Results\n\n");
    for (k, v) in header {
        let _ = writeln!(s, "- {k}: `{v}`");
    }
    if !header.is_empty() {
        s.push('\n');
    }
    if rows.is_empty() {
        s.push_str("No completed runs.\n");
    }
    let (outer, inner): (fn(&CsvRow) -> usize, fn(&CsvRow) -> usize) = match axis {
        TableAxis::Level => (|r| r.k, |r| r.level),
        TableAxis::K => (|r| r.level, |r| r.k),
    };
    let (outer_name, inner_name) = match axis {
        TableAxis::Level => ("K", "sessions"),
        TableAxis::K => ("sessions", "K"),
    };
    let mut groups: BTreeMap<usize, Vec<CsvRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(outer(&r)).or_default().push(r);
    }
    for (g, rs) in &groups {
        let _ = writeln!(s, "## {outer_name} = {g}\n");
        let present: Vec<Method> = methods.iter().copied().filter(|m| rs.iter().any(|r| r.method == *m)).collect();
        s.push_str(&markdown_table(&summarize(rs, &present, inner), &present, inner_name));
        s.push('\n');
    }
    if !outcome.skipped.is_empty() {
        s.push_str("## Skipped\n\n");
        for k in &outcome.skipped {
            let _ = writeln!(s, "- {} K={} level {} repeat {}: {}", k.method, k.k, k.level, k.repeat, k.reason);
        }
    }
    s
}

/// Writes `results.csv` and `report.md` into `dir`.
pub fn emit_report(dir: &Path, outcome: &ProtocolOutcome, methods: &[Method], axis: TableAxis, header: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), to_csv(&outcome.results))?;
    std::fs::write(dir.join("report.md"), markdown_report(outcome, methods, axis, header))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(method: Method, level: usize, repeat: usize, uar: f64) -> RunResult {
        RunResult {
            method,
            level,
            repeat,
            k: 3,
            uar,
            recalls: vec![],
            chosen_lr: 0.003,
            chosen_epochs: 5,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert!(parse_csv(&to_csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_exact() {
        let rs = vec![
            run(Method::Direct, 1, 0, 0.1 + 0.2),
            run(Method::ReptilePpts, 5, 2, 1.0 / 3.0),
        ];
        let back = parse_csv(&to_csv(&rs)).unwrap();
        assert_eq!(back, rs.iter().map(CsvRow::from).collect::<Vec<_>>());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(parse_csv("nope\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\ndirect,1,0\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nfoo,1,0,3,0.5,0.1,3\n")).is_err());
    }

    #[test]
    fn summary_picks_best_and_tests_pairs() {
        let mut rs = Vec::new();
        for r in 0..4 {
            rs.push(run(Method::Direct, 1, r, 0.5 + 0.01 * r as f64));
            rs.push(run(Method::ReptilePpts, 1, r, 0.6 + 0.013 * r as f64));
        }
        let rows: Vec<CsvRow> = rs.iter().map(CsvRow::from).collect();
        let methods = [Method::Direct, Method::ReptilePpts];
        let sm = summarize(&rows, &methods, |r| r.level);
        assert_eq!(sm.len(), 1);
        assert_eq!(sm[0].best, Some(1));
        assert_eq!(sm[0].runner_up, Some(0));
        assert!(sm[0].p_value.unwrap() < 0.01);
        let table = markdown_table(&sm, &methods, "sessions");
        assert!(table.contains("**0.6195**"));
        assert!(table.contains("| direct | 0.5150 |"));
    }

    #[test]
    fn report_lists_header_and_skips() {
        let out = ProtocolOutcome {
            results: vec![run(Method::Direct, 1, 0, 0.5)],
            skipped: vec![super::super::protocol::Skipped {
                method: Method::ReptilePpts,
                level: 1,
                repeat: 0,
                k: 9,
                reason: "pool".into(),
            }],
        };
        let md = markdown_report(&out, &Method::ALL, TableAxis::Level, &[("seed".into(), "7".into())]);
        assert!(md.contains("- seed: `7`"));
        assert!(md.contains("reptile-ppts K=9 level 1 repeat 0: pool"));
        assert!(md.contains("| p (best vs runner-up) | n/a |"));
    }
}
