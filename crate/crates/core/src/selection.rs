//! mRMR feature ranking with a histogram mutual-information estimator.
//!
//! Values are binned by rank into equal-frequency bins, so any strictly
//! increasing transform of a series leaves its MI unchanged.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RANKING_HEADER: &str = "rank,feature_name,score";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutualInfoConfig {
    pub bins: usize,
}

impl Default for MutualInfoConfig {
    fn default() -> Self {
        Self { bins: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature_name: String,
    /// 1-based.
    pub rank: usize,
    pub score: f64,
}

/// Equal-frequency bin of every value: `floor(#{x_j < x_i} · bins / n)`.
/// Tied values share a bin. Returns `None` for a constant series.
fn bin_indices(x: &[f64], bins: usize) -> Option<Vec<usize>> {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return None;
    }
    Some(
        x.iter()
            .map(|v| {
                let below = sorted.partition_point(|s| s < v);
                below * bins / n
            })
            .collect(),
    )
}

fn check_series(x: &[f64], y: &[f64], bins: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(Error::InvalidParameter(format!("mutual information needs at least 4 values, got {}", x.len())));
    }
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("bins = {bins} must be at least 2")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mutual information input".into()));
    }
    Ok(())
}

fn mi_from_bins(a: &[usize], b: &[usize], bins: usize) -> f64 {
    let n = a.len();
    let mut joint = vec![0usize; bins * bins];
    let mut ca = vec![0usize; bins];
    let mut cb = vec![0usize; bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * bins + j] += 1;
        ca[i] += 1;
        cb[j] += 1;
    }
    let nf = n as f64;
    let mut terms: Vec<f64> = Vec::new();
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let ratio = (c * n) as f64 / (ca[i] * cb[j]) as f64;
                terms.push(c as f64 / nf * ratio.ln());
            }
        }
    }
    // Summing in sorted order makes the result independent of argument order.
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>().max(0.0)
}

/// Histogram estimate of I(x; y) in nats.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    check_series(x, y, bins)?;
    match (bin_indices(x, bins), bin_indices(y, bins)) {
        (Some(a), Some(b)) => Ok(mi_from_bins(&a, &b, bins)),
        _ => {
            warn!("constant series in mutual information; returning 0");
            Ok(0.0)
        }
    }
}

/// Greedy mRMR ranking (difference form). The first pick maximizes
/// relevance I(x; y); each later pick maximizes relevance minus the mean
/// MI with the already selected features. Ties go to the smaller name.
pub fn mrmr_rank(
    names: &[String],
    columns: &[Vec<f64>],
    labels: &[f64],
    cfg: &MutualInfoConfig,
) -> Result<Vec<RankedFeature>> {
    if names.len() != columns.len() {
        return Err(Error::LengthMismatch(format!("{} names for {} columns", names.len(), columns.len())));
    }
    if names.is_empty() {
        return Err(Error::InvalidParameter("no features to rank".into()));
    }
    for col in columns {
        check_series(col, labels, cfg.bins)?;
    }
    let binned: Vec<Option<Vec<usize>>> = columns.par_iter().map(|c| bin_indices(c, cfg.bins)).collect();
    let target = bin_indices(labels, cfg.bins);
    let mi = |a: &Option<Vec<usize>>, b: &Option<Vec<usize>>| match (a, b) {
        (Some(a), Some(b)) => mi_from_bins(a, b, cfg.bins),
        _ => 0.0,
    };
    if target.is_none() {
        warn!("constant target; every relevance is 0");
    }
    let relevance: Vec<f64> = binned.par_iter().map(|c| mi(c, &target)).collect();

    let n = names.len();
    let mut redundancy_sum = vec![0.0; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut ranked = Vec::with_capacity(n);
    while !remaining.is_empty() {
        let picked = ranked.len();
        let score = |k: usize| {
            if picked == 0 {
                relevance[k]
            } else {
                relevance[k] - redundancy_sum[k] / picked as f64
            }
        };
        let best_pos = (0..remaining.len())
            .reduce(|best, pos| {
                let (a, b) = (remaining[best], remaining[pos]);
                match score(b).total_cmp(&score(a)) {
                    std::cmp::Ordering::Greater => pos,
                    std::cmp::Ordering::Equal if names[b] < names[a] => pos,
                    _ => best,
                }
            })
            .expect("remaining is non-empty");
        let best = remaining.remove(best_pos);
        ranked.push(RankedFeature { feature_name: names[best].clone(), rank: picked + 1, score: score(best) });
        let added: Vec<(usize, f64)> = remaining.par_iter().map(|&k| (k, mi(&binned[k], &binned[best]))).collect();
        for (k, r) in added {
            redundancy_sum[k] += r;
        }
    }
    Ok(ranked)
}

/// Names of the first `k` features in rank order.
pub fn select_top_k(ranked: &[RankedFeature], k: usize) -> Result<Vec<String>> {
    if k == 0 || k > ranked.len() {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={}", ranked.len())));
    }
    let mut sorted: Vec<&RankedFeature> = ranked.iter().collect();
    sorted.sort_by_key(|r| r.rank);
    Ok(sorted[..k].iter().map(|r| r.feature_name.clone()).collect())
}

pub fn write_ranking_csv<W: Write>(ranked: &[RankedFeature], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(RANKING_HEADER.split(','))?;
    for r in ranked {
        w.write_record([r.rank.to_string(), r.feature_name.clone(), r.score.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_ranking_csv<R: Read>(source: R) -> Result<Vec<RankedFeature>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header: Vec<&str> = reader.headers()?.iter().collect();
    if header.join(",") != RANKING_HEADER {
        return Err(Error::Schema(format!("unexpected ranking header `{}`", header.join(","))));
    }
    let mut out: Vec<RankedFeature> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |m: String| Error::MalformedRow { line, message: m };
        let rank = record[0].parse().map_err(|_| bad(format!("cannot parse rank `{}`", &record[0])))?;
        let score: f64 = record[2].parse().map_err(|_| bad(format!("cannot parse score `{}`", &record[2])))?;
        out.push(RankedFeature { feature_name: record[1].to_string(), rank, score });
    }
    let mut ranks: Vec<usize> = out.iter().map(|r| r.rank).collect();
    ranks.sort_unstable();
    if ranks.iter().enumerate().any(|(k, &r)| r != k + 1) {
        return Err(Error::Schema("ranks are not a permutation of 1..n".into()));
    }
    Ok(out)
}

pub fn read_ranking_csv(path: &Path) -> Result<Vec<RankedFeature>> {
    let file = crate::fsutil::open(path)?;
    parse_ranking_csv(BufReader::new(file))
}
