use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Per-class recall for classes present in `gold` (`None` for absent
/// classes) and their unweighted mean.
pub fn recalls(predictions: &[usize], gold: &[usize], classes: usize) -> Result<(f64, Vec<Option<f64>>)> {
    if predictions.len() != gold.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            got: predictions.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("gold labels"));
    }
    let n = classes.max(gold.iter().copied().max().unwrap_or(0) + 1);
    let mut hit = vec![0usize; n];
    let mut tot = vec![0usize; n];
    for (&p, &g) in predictions.iter().zip(gold) {
        tot[g] += 1;
        if p == g {
            hit[g] += 1;
        }
    }
    let per: Vec<Option<f64>> = (0..n)
        .map(|c| (tot[c] > 0).then(|| hit[c] as f64 / tot[c] as f64))
        .collect();
    let present: Vec<f64> = per.iter().flatten().copied().collect();
    Ok((present.iter().sum::<f64>() / present.len() as f64, per))
}

/// Unweighted average recall.
pub fn uar(predictions: &[usize], gold: &[usize]) -> Result<f64> {
    recalls(predictions, gold, 0).map(|r| r.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    /// Two-sided p-value; `None` when the differences have zero variance.
    pub p: Option<f64>,
}

impl TTest {
    pub fn degenerate(&self) -> bool {
        self.p.is_none()
    }
}

/// Two-sided paired Student's t-test on `a − b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Empty("paired t-test needs at least 2 pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var <= 0.0 || !var.is_finite() {
        return Ok(TTest {
            mean_diff: mean,
            t: f64::NAN,
            df,
            p: None,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = 2.0 * dist.cdf(-t.abs());
    Ok(TTest {
        mean_diff: mean,
        t,
        df,
        p: Some(p.clamp(0.0, 1.0)),
    })
}
