//! Krippendorff's alpha over raters-by-units reliability data.
//!
//! Alpha is computed by direct pair enumeration, which keeps continuous
//! values exact instead of forcing them through a discretized coincidence
//! matrix. Missing values are first-class: units with fewer than two present
//! values drop out of the computation entirely.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{ScoredStatement, CRITERIA};

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("non-finite value in reliability matrix (rater {rater}, unit {unit})")]
    NonFiniteValue { rater: usize, unit: usize },

    #[error("mixed article data: {0}")]
    MixedArticle(String),

    #[error("need at least 2 runs to compare, got {0}")]
    InsufficientRuns(usize),
}

/// Disagreement metric for pairs of values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// delta^2(c, k) = 0 if c == k else 1.
    Nominal,
    /// delta^2(c, k) = (c - k)^2.
    Interval,
}

impl Metric {
    fn delta_sq(self, a: f64, b: f64) -> f64 {
        match self {
            Metric::Nominal => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            Metric::Interval => (a - b) * (a - b),
        }
    }
}

/// Raters-by-units grid of possibly-missing ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMatrix {
    pub raters: Vec<String>,
    pub units: Vec<String>,
    /// Row-major: `values[rater][unit]`.
    pub values: Vec<Vec<Option<f64>>>,
}

impl ReliabilityMatrix {
    pub fn new(raters: Vec<String>, units: Vec<String>, values: Vec<Vec<Option<f64>>>) -> Self {
        debug_assert_eq!(raters.len(), values.len());
        debug_assert!(values.iter().all(|row| row.len() == units.len()));
        Self {
            raters,
            units,
            values,
        }
    }

    fn unit_column(&self, unit: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(move |row| row[unit])
    }
}

/// Outcome of an alpha computation.
///
/// `alpha` is absent exactly when no unit carried two or more ratings
/// (`n_units_used == 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: Option<f64>,
    pub observed_disagreement: Option<f64>,
    pub expected_disagreement: Option<f64>,
    pub n_pairable_values: usize,
    pub n_units_used: usize,
    pub metric: Metric,
}

impl AlphaResult {
    pub fn not_computable(metric: Metric) -> Self {
        Self {
            alpha: None,
            observed_disagreement: None,
            expected_disagreement: None,
            n_pairable_values: 0,
            n_units_used: 0,
            metric,
        }
    }
}

/// Compute Krippendorff's alpha for a reliability matrix.
///
/// Units with fewer than two present values are dropped. Observed
/// disagreement averages the pairwise delta^2 within each surviving unit
/// (normalized by `m_u - 1`); expected disagreement pools all surviving
/// values and averages delta^2 over every ordered pair drawn from the pool.
/// `alpha = 1 - D_o / D_e`, with `D_e == 0` (all pooled values identical)
/// defined as perfect agreement.
pub fn krippendorff_alpha(
    matrix: &ReliabilityMatrix,
    metric: Metric,
) -> Result<AlphaResult, AgreementError> {
    for (r, row) in matrix.values.iter().enumerate() {
        for (u, v) in row.iter().enumerate() {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(AgreementError::NonFiniteValue { rater: r, unit: u });
                }
            }
        }
    }

    let n_units = matrix.units.len();
    let mut surviving = Vec::new();
    for u in 0..n_units {
        let m_u = matrix.unit_column(u).count();
        if m_u >= 2 {
            surviving.push((u, m_u));
        }
    }
    if surviving.is_empty() {
        return Ok(AlphaResult::not_computable(metric));
    }

    let n_total: usize = surviving.iter().map(|&(_, m)| m).sum();

    // D_o: within-unit ordered pairs, each unit normalized by m_u - 1.
    let mut d_o = 0.0;
    for &(u, m_u) in &surviving {
        let vals: Vec<f64> = matrix.unit_column(u).collect();
        let mut unit_sum = 0.0;
        for i in 0..vals.len() {
            for j in (i + 1)..vals.len() {
                unit_sum += 2.0 * metric.delta_sq(vals[i], vals[j]);
            }
        }
        d_o += unit_sum / (m_u as f64 - 1.0);
    }
    d_o /= n_total as f64;

    // D_e: ordered pairs over the pooled multiset of values, grouped by
    // distinct value so equal ratings cost one delta^2 evaluation.
    let mut pool: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &(u, _) in &surviving {
        for v in matrix.unit_column(u) {
            let entry = pool.entry(v.to_bits()).or_insert((v, 0));
            entry.1 += 1;
        }
    }
    let groups: Vec<(f64, usize)> = pool.into_values().collect();
    let mut d_e = 0.0;
    for i in 0..groups.len() {
        for j in (i + 1)..groups.len() {
            let (vi, ni) = groups[i];
            let (vj, nj) = groups[j];
            d_e += 2.0 * (ni * nj) as f64 * metric.delta_sq(vi, vj);
        }
    }
    d_e /= (n_total * (n_total - 1)) as f64;

    let alpha = if d_e == 0.0 { 1.0 } else { 1.0 - d_o / d_e };

    Ok(AlphaResult {
        alpha: Some(alpha),
        observed_disagreement: Some(d_o),
        expected_disagreement: Some(d_e),
        n_pairable_values: n_total,
        n_units_used: surviving.len(),
        metric,
    })
}

/// Build the per-article reliability matrix: one rater row per statement,
/// one unit column per criterion K0..K5, NA kept as missing.
pub fn article_reliability(
    article_scores: &[ScoredStatement],
    run: u32,
) -> Result<ReliabilityMatrix, AgreementError> {
    let Some(first) = article_scores.first() else {
        return Ok(ReliabilityMatrix::new(
            Vec::new(),
            CRITERIA.iter().map(|c| c.to_string()).collect(),
            Vec::new(),
        ));
    };
    for s in article_scores {
        if s.article_id != first.article_id {
            return Err(AgreementError::MixedArticle(format!(
                "expected article '{}', found '{}'",
                first.article_id, s.article_id
            )));
        }
        if s.run != run {
            return Err(AgreementError::MixedArticle(format!(
                "article '{}': expected run {}, found run {}",
                s.article_id, run, s.run
            )));
        }
    }
    let raters = article_scores
        .iter()
        .map(|s| s.statement_id.clone())
        .collect();
    let units = CRITERIA.iter().map(|c| c.to_string()).collect();
    let values = article_scores
        .iter()
        .map(|s| s.scores.values().to_vec())
        .collect();
    Ok(ReliabilityMatrix::new(raters, units, values))
}

/// Alpha for every article present in `scores`, restricted to one run.
///
/// The map is keyed (and therefore ordered) by article id; articles with no
/// records in the given run simply do not appear.
pub fn alpha_per_article(
    scores: &[ScoredStatement],
    run: u32,
    metric: Metric,
) -> Result<BTreeMap<String, AlphaResult>, AgreementError> {
    let mut by_article: BTreeMap<&str, Vec<ScoredStatement>> = BTreeMap::new();
    for s in scores {
        if s.run == run {
            by_article
                .entry(s.article_id.as_str())
                .or_default()
                .push(s.clone());
        }
    }
    let entries: Vec<(&str, Vec<ScoredStatement>)> = by_article.into_iter().collect();
    let results = crate::parallel::map(&entries, |(id, group)| {
        let matrix = article_reliability(group, run)?;
        Ok::<_, AgreementError>((id.to_string(), krippendorff_alpha(&matrix, metric)?))
    });
    results.into_iter().collect()
}

/// Alpha between whole annotation runs.
///
/// Raters are the run indices; units are the (article, statement, criterion)
/// cells present in at least one run.
pub fn alpha_across_runs(
    runs: &[Vec<ScoredStatement>],
    metric: Metric,
) -> Result<AlphaResult, AgreementError> {
    if runs.len() < 2 {
        return Err(AgreementError::InsufficientRuns(runs.len()));
    }
    let mut unit_keys: Vec<(String, String, usize)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for run in runs {
        for s in run {
            for k in 0..CRITERIA.len() {
                let key = (s.article_id.clone(), s.statement_id.clone(), k);
                if seen.insert(key.clone()) {
                    unit_keys.push(key);
                }
            }
        }
    }
    unit_keys.sort();

    let mut values = vec![vec![None; unit_keys.len()]; runs.len()];
    for (r, run) in runs.iter().enumerate() {
        let lookup: std::collections::HashMap<(&str, &str), &ScoredStatement> = run
            .iter()
            .map(|s| ((s.article_id.as_str(), s.statement_id.as_str()), s))
            .collect();
        for (u, (article, statement, k)) in unit_keys.iter().enumerate() {
            if let Some(s) = lookup.get(&(article.as_str(), statement.as_str())) {
                values[r][u] = s.scores.get(*k);
            }
        }
    }

    let raters = (0..runs.len()).map(|r| format!("run{r}")).collect();
    let units = unit_keys
        .iter()
        .map(|(a, s, k)| format!("{a}/{s}/{}", CRITERIA[*k]))
        .collect();
    krippendorff_alpha(&ReliabilityMatrix::new(raters, units, values), metric)
}
