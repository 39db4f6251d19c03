//! Mode comparison over metric tables: one-factor repeated-measures ANOVA,
//! Bonferroni-corrected paired t-tests and paired Cohen's d.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

use crate::metrics::RESULT_COLUMNS;
use crate::Mode;

/// Family-wise significance level.
pub const ALPHA: f64 = 0.05;
/// Number of pairwise mode comparisons.
pub const PAIRWISE_COMPARISONS: usize = 3;
/// Bonferroni-corrected per-comparison threshold.
pub const BONFERRONI_ALPHA: f64 = ALPHA / PAIRWISE_COMPARISONS as f64;
/// Upper bound of the "high significance" bucket.
pub const HIGH_SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("insufficient data for {metric}: {message}")]
    InsufficientData { metric: String, message: String },
    #[error("perfect separation: paired differences are constant ({0}) with zero variance")]
    PerfectSeparation(f64),
    #[error("zero variance of paired differences")]
    ZeroVariance,
    #[error("empty metric table")]
    EmptyTable,
    #[error("metric table parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub participant: String,
    pub mode: Mode,
    pub metric: String,
    pub value: f64,
}

/// Long-format table of (participant, mode, metric, value).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn push(&mut self, participant: impl Into<String>, mode: Mode, metric: impl Into<String>, value: f64) {
        self.rows.push(MetricRow {
            participant: participant.into(),
            mode,
            metric: metric.into(),
            value,
        });
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Metric names in first-appearance order.
    pub fn metrics(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.metric.clone()))
            .map(|r| r.metric.clone())
            .collect()
    }

    /// Per-participant cell means for `metric`, keeping only participants
    /// that have every mode in `modes` (listwise deletion).
    pub fn complete_cases(&self, metric: &str, modes: &[Mode]) -> Vec<(String, Vec<f64>)> {
        let mut cells: BTreeMap<&str, BTreeMap<Mode, (f64, usize)>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.metric == metric && r.value.is_finite()) {
            let e = cells
                .entry(r.participant.as_str())
                .or_default()
                .entry(r.mode)
                .or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
        cells
            .into_iter()
            .filter_map(|(p, by_mode)| {
                let values: Option<Vec<f64>> = modes
                    .iter()
                    .map(|m| by_mode.get(m).map(|&(s, n)| s / n as f64))
                    .collect();
                values.map(|v| (p.to_string(), v))
            })
            .collect()
    }

    /// Parses the wide results table written by the metrics module. Every
    /// numeric column other than the identifiers becomes a metric; `NA`
    /// cells are skipped.
    pub fn from_results_tsv(text: &str) -> Result<Self, StatsError> {
        let mut table = MetricTable::default();
        let mut header: Option<Vec<String>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let Some(cols) = &header else {
                for required in ["participant", "mode"] {
                    if !fields.contains(&required) {
                        return Err(StatsError::Parse {
                            line,
                            message: format!("header lacks `{required}` column"),
                        });
                    }
                }
                header = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            };
            if fields.len() != cols.len() {
                return Err(StatsError::Parse {
                    line,
                    message: format!("expected {} columns, found {}", cols.len(), fields.len()),
                });
            }
            let get = |name: &str| cols.iter().position(|c| c == name).map(|i| fields[i]);
            let participant = get("participant").unwrap_or_default().to_string();
            let mode: Mode = get("mode")
                .unwrap_or_default()
                .parse()
                .map_err(|e| StatsError::Parse {
                    line,
                    message: format!("{e}"),
                })?;
            for (col, value) in cols.iter().zip(&fields) {
                if matches!(col.as_str(), "participant" | "mode" | "image_id") || *value == "NA" || value.is_empty() {
                    continue;
                }
                let v: f64 = value.parse().map_err(|_| StatsError::Parse {
                    line,
                    message: format!("bad value `{value}` in column `{col}`"),
                })?;
                table.push(participant.clone(), mode, col.clone(), v);
            }
        }
        Ok(table)
    }

    /// Long-format TSV (`participant mode metric value`).
    pub fn to_long_tsv(&self) -> String {
        let mut s = String::from("participant\tmode\tmetric\tvalue\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.participant, r.mode, r.metric, r.value);
        }
        s
    }
}

/// Columns of the results table that carry metrics.
pub fn result_metric_columns() -> impl Iterator<Item = &'static str> {
    RESULT_COLUMNS
        .into_iter()
        .filter(|c| !matches!(*c, "participant" | "mode" | "image_id"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f_statistic: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p_value: f64,
    /// Partial eta squared: SS_conditions / (SS_conditions + SS_error).
    pub eta_squared: f64,
    pub ss_conditions: f64,
    pub ss_subjects: f64,
    pub ss_error: f64,
    pub n_subjects: usize,
}

impl AnovaResult {
    pub fn significant(&self) -> bool {
        self.p_value <= ALPHA
    }
}

/// Repeated-measures ANOVA on an n-subjects × k-conditions matrix.
pub fn rm_anova_matrix(data: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let insufficient = |message: &str| StatsError::InsufficientData {
        metric: String::new(),
        message: message.to_string(),
    };
    let n = data.len();
    if n < 2 {
        return Err(insufficient("need at least 2 complete participants"));
    }
    let k = data[0].len();
    if k < 2 || data.iter().any(|row| row.len() != k) {
        return Err(insufficient("need at least 2 conditions for every participant"));
    }
    let total = (n * k) as f64;
    let grand = data.iter().flatten().sum::<f64>() / total;
    let subject_means: Vec<f64> = data.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let condition_means: Vec<f64> = (0..k)
        .map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ss_conditions = n as f64 * condition_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_subjects = k as f64 * subject_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    // residual computed directly rather than by subtraction to avoid cancellation
    let ss_error: f64 = data
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            let sm = subject_means[i];
            row.iter()
                .zip(&condition_means)
                .map(move |(x, cm)| (x - sm - cm + grand).powi(2))
        })
        .sum();
    let df_between = (k - 1) as f64;
    let df_within = ((n - 1) * (k - 1)) as f64;
    let scale = data.iter().flatten().map(|x| (x - grand).abs()).fold(0.0, f64::max).max(grand.abs());
    let negligible = |ss: f64| ss <= (scale * 1e-12).powi(2) * total;
    let (f_statistic, p_value) = if negligible(ss_conditions) {
        (0.0, 1.0)
    } else if negligible(ss_error) {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ss_conditions / df_between) / (ss_error / df_within);
        (f, f_sf(f, df_between, df_within))
    };
    let eta_squared = if ss_conditions + ss_error > 0.0 {
        ss_conditions / (ss_conditions + ss_error)
    } else {
        0.0
    };
    Ok(AnovaResult {
        f_statistic,
        df_between,
        df_within,
        p_value,
        eta_squared,
        ss_conditions,
        ss_subjects,
        ss_error,
        n_subjects: n,
    })
}

/// Repeated-measures ANOVA of `metric` across all three modes.
pub fn rm_anova(table: &MetricTable, metric: &str) -> Result<AnovaResult, StatsError> {
    let cases = table.complete_cases(metric, &Mode::ALL);
    let data: Vec<Vec<f64>> = cases.into_iter().map(|(_, v)| v).collect();
    rm_anova_matrix(&data).map_err(|e| match e {
        StatsError::InsufficientData { message, .. } => StatsError::InsufficientData {
            metric: metric.to_string(),
            message,
        },
        other => other,
    })
}

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if !(f > 0.0) {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(df1, df2)
        .map(|d| d.sf(f).clamp(0.0, 1.0))
        .unwrap_or(f64::NAN)
}

/// Two-sided p-value of a Student t statistic.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, df)
        .map(|d| (2.0 * d.sf(t.abs())).clamp(0.0, 1.0))
        .unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectBand {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectBand {
    /// Bands on |d| with inclusive lower cut points 0.2, 0.5 and 0.8.
    pub fn of(d: f64) -> Self {
        let a = d.abs();
        if a < 0.2 {
            EffectBand::Negligible
        } else if a < 0.5 {
            EffectBand::Small
        } else if a < 0.8 {
            EffectBand::Medium
        } else {
            EffectBand::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EffectBand::Negligible => "negligible",
            EffectBand::Small => "small",
            EffectBand::Medium => "medium",
            EffectBand::Large => "large",
        }
    }
}

impl fmt::Display for EffectBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn paired_differences(a: &[f64], b: &[f64]) -> Result<(f64, f64, usize), StatsError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(StatsError::InsufficientData {
            metric: String::new(),
            message: format!("need at least 2 equal-length pairs, got {} and {}", a.len(), b.len()),
        });
    }
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let scale = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let sd = if var.sqrt() <= scale * 1e-12 { 0.0 } else { var.sqrt() };
    Ok((mean, sd, n))
}

/// Paired Cohen's d = mean(a − b) / sd(a − b).
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<(f64, EffectBand), StatsError> {
    let (mean, sd, _) = paired_differences(a, b)?;
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok((0.0, EffectBand::Negligible));
        }
        return Err(StatsError::ZeroVariance);
    }
    let d = mean / sd;
    Ok((d, EffectBand::of(d)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTResult {
    pub t_statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub cohens_d: f64,
    pub band: EffectBand,
    pub alpha: f64,
    pub significant_after_correction: bool,
}

/// Two-sided paired t-test of `a` against `b`.
pub fn paired_t_samples(a: &[f64], b: &[f64], alpha: f64) -> Result<PairedTResult, StatsError> {
    let (mean, sd, n) = paired_differences(a, b)?;
    let df = (n - 1) as f64;
    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(PairedTResult {
                t_statistic: 0.0,
                df,
                p_value: 1.0,
                cohens_d: 0.0,
                band: EffectBand::Negligible,
                alpha,
                significant_after_correction: false,
            });
        }
        return Err(StatsError::PerfectSeparation(mean));
    }
    let t = mean / (sd / (n as f64).sqrt());
    let p = t_two_sided(t, df);
    let d = mean / sd;
    Ok(PairedTResult {
        t_statistic: t,
        df,
        p_value: p,
        cohens_d: d,
        band: EffectBand::of(d),
        alpha,
        significant_after_correction: p <= alpha,
    })
}

/// Paired t-test of `metric` between two modes over complete participants.
pub fn pairwise_t(
    table: &MetricTable,
    metric: &str,
    mode_a: Mode,
    mode_b: Mode,
    alpha_corrected: f64,
) -> Result<PairedTResult, StatsError> {
    let cases = table.complete_cases(metric, &[mode_a, mode_b]);
    let a: Vec<f64> = cases.iter().map(|(_, v)| v[0]).collect();
    let b: Vec<f64> = cases.iter().map(|(_, v)| v[1]).collect();
    paired_t_samples(&a, &b, alpha_corrected).map_err(|e| match e {
        StatsError::InsufficientData { message, .. } => StatsError::InsufficientData {
            metric: metric.to_string(),
            message,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Significance {
    /// p ≤ 0.01
    High,
    /// 0.01 < p ≤ 0.05
    Moderate,
    NotSignificant,
}

impl Significance {
    pub fn of(p: f64) -> Self {
        if p <= HIGH_SIGNIFICANCE {
            Significance::High
        } else if p <= ALPHA {
            Significance::Moderate
        } else {
            Significance::NotSignificant
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Significance::High => "high significance",
            Significance::Moderate => "moderate significance",
            Significance::NotSignificant => "not significant",
        }
    }

    /// Row color used in rendered tables.
    pub fn color(self) -> &'static str {
        match self {
            Significance::High => "green",
            Significance::Moderate => "yellow",
            Significance::NotSignificant => "none",
        }
    }
}

pub const MODE_PAIRS: [(Mode, Mode); 3] = [
    (Mode::Static, Mode::Parallel),
    (Mode::Static, Mode::Tilt),
    (Mode::Parallel, Mode::Tilt),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseEntry {
    pub a: Mode,
    pub b: Mode,
    pub result: Result<PairedTResult, StatsError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricAnalysis {
    pub metric: String,
    pub anova: Result<AnovaResult, StatsError>,
    /// Present only when the ANOVA is significant.
    pub pairwise: Vec<PairwiseEntry>,
}

impl MetricAnalysis {
    pub fn significance(&self) -> Significance {
        self.anova
            .as_ref()
            .map_or(Significance::NotSignificant, |a| Significance::of(a.p_value))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metrics: Vec<MetricAnalysis>,
}

/// Runs the full analysis over every metric in the table.
pub fn report(table: &MetricTable) -> Result<Report, StatsError> {
    if table.is_empty() {
        return Err(StatsError::EmptyTable);
    }
    let metrics = table
        .metrics()
        .into_iter()
        .map(|metric| {
            let anova = rm_anova(table, &metric);
            let pairwise = match &anova {
                Ok(a) if a.significant() => MODE_PAIRS
                    .iter()
                    .map(|&(a, b)| PairwiseEntry {
                        a,
                        b,
                        result: pairwise_t(table, &metric, a, b, BONFERRONI_ALPHA),
                    })
                    .collect(),
                _ => Vec::new(),
            };
            MetricAnalysis {
                metric,
                anova,
                pairwise,
            }
        })
        .collect();
    Ok(Report { metrics })
}

impl Report {
    pub fn significant_metrics(&self) -> Vec<&str> {
        self.metrics
            .iter()
            .filter(|m| m.significance() != Significance::NotSignificant)
            .map(|m| m.metric.as_str())
            .collect()
    }

    /// One row per test: the ANOVA row of each metric, then its pairwise rows.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "metric\ttest\tstatistic\tdf1\tdf2\tp_value\teffect\teffect_band\tsignificance\tsignificant_after_correction\n",
        );
        for m in &self.metrics {
            match &m.anova {
                Ok(a) => {
                    let _ = writeln!(
                        s,
                        "{}\trm_anova\t{}\t{}\t{}\t{}\t{}\t\t{}\t",
                        m.metric,
                        a.f_statistic,
                        a.df_between,
                        a.df_within,
                        a.p_value,
                        a.eta_squared,
                        Significance::of(a.p_value).color()
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{}\trm_anova\tNA\tNA\tNA\tNA\tNA\t\terror: {e}\t", m.metric);
                }
            }
            for p in &m.pairwise {
                match &p.result {
                    Ok(t) => {
                        let _ = writeln!(
                            s,
                            "{}\tpaired_t {}-{}\t{}\t{}\t\t{}\t{}\t{}\t{}\t{}",
                            m.metric,
                            p.a,
                            p.b,
                            t.t_statistic,
                            t.df,
                            t.p_value,
                            t.cohens_d,
                            t.band,
                            Significance::of(t.p_value).color(),
                            t.significant_after_correction
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(
                            s,
                            "{}\tpaired_t {}-{}\tNA\tNA\t\tNA\tNA\t\terror: {e}\tfalse",
                            m.metric, p.a, p.b
                        );
                    }
                }
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Repeated-measures ANOVA per metric (alpha = {ALPHA}); pairwise paired t-tests at Bonferroni alpha = {BONFERRONI_ALPHA:.4}."
        );
        let _ = writeln!(s, "Legend: green = high significance (p <= 0.01), yellow = moderate (0.01 < p <= 0.05).\n");
        for m in &self.metrics {
            match &m.anova {
                Ok(a) => {
                    let _ = writeln!(
                        s,
                        "[{}] {}: F({}, {}) = {:.3}, p = {:.4}, partial eta^2 = {:.3} -> {}",
                        m.significance().color(),
                        m.metric,
                        a.df_between,
                        a.df_within,
                        a.f_statistic,
                        a.p_value,
                        a.eta_squared,
                        m.significance().as_str()
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "[none] {}: {e}", m.metric);
                }
            }
            for p in &m.pairwise {
                match &p.result {
                    Ok(t) => {
                        let _ = writeln!(
                            s,
                            "    {} vs {}: t({}) = {:.3}, p = {:.4}{}, d = {:.3} ({})",
                            p.a,
                            p.b,
                            t.df,
                            t.t_statistic,
                            t.p_value,
                            if t.significant_after_correction { " *" } else { "" },
                            t.cohens_d,
                            t.band
                        );
                    }
                    Err(e) => {
                        let _ = writeln!(s, "    {} vs {}: {e}", p.a, p.b);
                    }
                }
            }
        }
        s
    }
}
