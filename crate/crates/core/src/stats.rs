//! Friedman test and Nemenyi post-hoc analysis over accuracy tables.
//!
//! Methods are ranked per dataset from best (rank 1, highest accuracy) to
//! worst, ties sharing the average rank. With mean ranks `r_i` over `N`
//! datasets and `k` methods:
//!
//! ```text
//! tau_chi2 = 12N / (k(k+1)) * (sum r_i^2 - k(k+1)^2 / 4)
//! tau_F    = (N-1) tau_chi2 / (N(k-1) - tau_chi2)
//! CD       = q_alpha * sqrt(k(k+1) / (6N))
//! ```
//!
//! Two methods differ significantly when their mean ranks are more than `CD`
//! apart; on the Friedman graph each method spans `r_i +/- CD/2`.

use serde::Serialize;
use statrs::function::beta::checked_beta_reg;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("table shape: {0}")]
    Shape(String),
    #[error("accuracy for {method} on {dataset} is not a finite number")]
    NonFinite { method: String, dataset: String },
    #[error(
        "perfect agreement across datasets (tau_chi2 = {tau_chi2} = N(k-1)); tau_F is undefined"
    )]
    Degenerate { tau_chi2: f64 },
    #[error("{0}")]
    Range(String),
}

/// `k` methods by `N` datasets of accuracy percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `values[method][dataset]`
    pub values: Vec<Vec<f64>>,
}

impl AccuracyTable {
    pub fn new(
        methods: Vec<String>,
        datasets: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, StatsError> {
        if methods.len() < 2 {
            return Err(StatsError::Shape(format!(
                "need at least 2 methods, got {}",
                methods.len()
            )));
        }
        if datasets.is_empty() {
            return Err(StatsError::Shape("need at least 1 dataset".into()));
        }
        if values.len() != methods.len() {
            return Err(StatsError::Shape(format!(
                "{} methods but {} rows of values",
                methods.len(),
                values.len()
            )));
        }
        for (m, row) in methods.iter().zip(&values) {
            if row.len() != datasets.len() {
                return Err(StatsError::Shape(format!(
                    "{m} has {} values for {} datasets",
                    row.len(),
                    datasets.len()
                )));
            }
            for (d, v) in datasets.iter().zip(row) {
                if !v.is_finite() {
                    return Err(StatsError::NonFinite {
                        method: m.clone(),
                        dataset: d.clone(),
                    });
                }
            }
        }
        Ok(AccuracyTable {
            methods,
            datasets,
            values,
        })
    }

    /// Header `method,<dataset1>,...`, then one method per row.
    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| StatsError::Csv(e.to_string()))?
            .clone();
        let datasets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut methods = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| StatsError::Csv(e.to_string()))?;
            let method = record.get(0).unwrap_or_default().to_string();
            let row = record
                .iter()
                .skip(1)
                .zip(&datasets)
                .map(|(field, dataset)| {
                    field.parse::<f64>().map_err(|_| {
                        StatsError::Csv(format!("{method}/{dataset}: `{field}` is not a number"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            methods.push(method);
            values.push(row);
        }
        AccuracyTable::new(methods, datasets, values)
    }

    pub fn num_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn num_datasets(&self) -> usize {
        self.datasets.len()
    }
}

/// Per-dataset ranks and their per-method means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankMatrix {
    pub methods: Vec<String>,
    /// `ranks[method][dataset]`
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
}

impl RankMatrix {
    pub fn num_methods(&self) -> usize {
        self.ranks.len()
    }

    pub fn num_datasets(&self) -> usize {
        self.ranks.first().map_or(0, Vec::len)
    }
}

/// Higher accuracy ranks first; tied values share the mean of their ranks.
pub fn rank(table: &AccuracyTable) -> RankMatrix {
    let k = table.num_methods();
    let n = table.num_datasets();
    let mut ranks = vec![vec![0.0; n]; k];
    #[allow(clippy::needless_range_loop)]
    for d in 0..n {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| table.values[b][d].total_cmp(&table.values[a][d]));
        let mut start = 0;
        while start < k {
            let v = table.values[order[start]][d];
            let end = (start..k)
                .find(|&p| table.values[order[p]][d] != v)
                .unwrap_or(k);
            // positions start..end hold ranks start+1..=end
            let shared = (start + 1 + end) as f64 / 2.0;
            for &m in &order[start..end] {
                ranks[m][d] = shared;
            }
            start = end;
        }
    }
    let mean_ranks = ranks
        .iter()
        .map(|row| row.iter().sum::<f64>() / n as f64)
        .collect();
    RankMatrix {
        methods: table.methods.clone(),
        ranks,
        mean_ranks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub tau_chi2: f64,
    pub tau_f: f64,
    pub df1: usize,
    pub df2: usize,
    /// Upper tail of `F(df1, df2)` at `tau_F`; absent when `df2 == 0`.
    pub p_value: Option<f64>,
}

pub fn friedman(ranks: &RankMatrix) -> Result<FriedmanResult, StatsError> {
    let k = ranks.num_methods();
    let n = ranks.num_datasets();
    if k < 2 || n < 1 {
        return Err(StatsError::Shape(format!(
            "need k >= 2 and N >= 1, got k={k}, N={n}"
        )));
    }
    let (kf, nf) = (k as f64, n as f64);
    let sum_sq: f64 = ranks.mean_ranks.iter().map(|r| r * r).sum();
    let tau_chi2 = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0);
    let bound = nf * (kf - 1.0);
    let denom = bound - tau_chi2;
    if denom.abs() <= 1e-12 * bound.max(1.0) {
        return Err(StatsError::Degenerate { tau_chi2 });
    }
    let tau_f = (nf - 1.0) * tau_chi2 / denom;
    let df1 = k - 1;
    let df2 = (k - 1) * (n - 1);
    Ok(FriedmanResult {
        tau_chi2,
        tau_f,
        df1,
        df2,
        p_value: f_upper_tail(tau_f, df1 as f64, df2 as f64),
    })
}

/// `P[F(df1, df2) > x]` via the regularized incomplete beta function.
pub fn f_upper_tail(x: f64, df1: f64, df2: f64) -> Option<f64> {
    if !(df1 > 0.0 && df2 > 0.0) || !x.is_finite() {
        return None;
    }
    if x <= 0.0 {
        return Some(1.0);
    }
    checked_beta_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * x)).ok()
}

/// Two-tailed Nemenyi critical values for `k = 2..=10`.
const Q_ALPHA_05: [f64; 9] = [
    1.960, 2.334, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164,
];
const Q_ALPHA_10: [f64; 9] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920,
];

pub fn q_alpha(alpha: f64, k: usize) -> Result<f64, StatsError> {
    let row = if (alpha - 0.05).abs() < 1e-12 {
        &Q_ALPHA_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_ALPHA_10
    } else {
        return Err(StatsError::Range(format!(
            "alpha {alpha} is not tabulated (use 0.05 or 0.10)"
        )));
    };
    if !(2..=10).contains(&k) {
        return Err(StatsError::Range(format!(
            "k = {k} is outside the tabulated 2..=10"
        )));
    }
    Ok(row[k - 2])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankInterval {
    pub method: String,
    pub mean_rank: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NemenyiResult {
    pub alpha: f64,
    pub q_alpha: f64,
    pub cd: f64,
    /// In table order.
    pub intervals: Vec<RankInterval>,
    /// `significant[a][b]`: mean ranks of `a` and `b` differ by more than `cd`.
    pub significant: Vec<Vec<bool>>,
}

/// Strict: a difference of exactly `cd` is not significant.
pub fn significantly_different(a: f64, b: f64, cd: f64) -> bool {
    (a - b).abs() > cd
}

pub fn nemenyi(ranks: &RankMatrix, alpha: f64) -> Result<NemenyiResult, StatsError> {
    let k = ranks.num_methods();
    let n = ranks.num_datasets();
    let q = q_alpha(alpha, k)?;
    if n == 0 {
        return Err(StatsError::Shape("need at least 1 dataset".into()));
    }
    let cd = q * ((k * (k + 1)) as f64 / (6 * n) as f64).sqrt();
    let intervals = ranks
        .methods
        .iter()
        .zip(&ranks.mean_ranks)
        .map(|(m, &r)| RankInterval {
            method: m.clone(),
            mean_rank: r,
            lo: r - cd / 2.0,
            hi: r + cd / 2.0,
        })
        .collect();
    let significant = ranks
        .mean_ranks
        .iter()
        .map(|&a| {
            ranks
                .mean_ranks
                .iter()
                .map(|&b| significantly_different(a, b, cd))
                .collect()
        })
        .collect();
    Ok(NemenyiResult {
        alpha,
        q_alpha: q,
        cd,
        intervals,
        significant,
    })
}

/// Plot-ready Friedman graph: methods sorted by mean rank (best first).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanGraph {
    pub cd: f64,
    pub entries: Vec<RankInterval>,
    /// `overlap[a][b]` in `entries` order.
    pub overlap: Vec<Vec<bool>>,
}

pub fn friedman_graph_data(ranks: &RankMatrix, nemenyi: &NemenyiResult) -> FriedmanGraph {
    let mut order: Vec<usize> = (0..ranks.num_methods()).collect();
    order.sort_by(|&a, &b| ranks.mean_ranks[a].total_cmp(&ranks.mean_ranks[b]));
    let entries: Vec<RankInterval> = order
        .iter()
        .map(|&m| nemenyi.intervals[m].clone())
        .collect();
    let overlap = order
        .iter()
        .map(|&a| order.iter().map(|&b| !nemenyi.significant[a][b]).collect())
        .collect();
    FriedmanGraph {
        cd: nemenyi.cd,
        entries,
        overlap,
    }
}
