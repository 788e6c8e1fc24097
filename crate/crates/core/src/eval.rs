//! Similarity-search metrics, the query-ranking harness, timing benchmarks
//! and their CSV formats.

use std::cmp::Ordering;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::bipartite::{assignment_ged, CostVariant, LsapAlgorithm};
use crate::dataset::{Corpus, DatasetError, LabelSet, Split};
use crate::ged::{astar_ged, beam_ged, ged_to_similarity, normalized_ged, BeamWidth, GedError};
use crate::graph::{Graph, Vocab};
use crate::model::{Model, ModelError, PreparedGraph};
use crate::nn::Tensor;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction list has {pred} entries, truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty input")]
    Empty,
    #[error("all values tied; rank correlation undefined")]
    DegenerateInput,
    #[error("k = {k} exceeds list length {len}")]
    KTooLarge { k: usize, len: usize },
    #[error("no ground truth for pair ({0}, {1})")]
    MissingLabels(String, String),
    #[error(transparent)]
    Ged(#[from] GedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        EvalError::Csv(e.to_string())
    }
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<(), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Mean squared difference.
pub fn mse_metric(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(total / pred.len() as f64)
}

/// Number of pairs within runs of equal values of a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of inversions removed.
fn merge_sort_swaps(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_swaps(&mut v[..mid], buf) + merge_sort_swaps(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b, computed in `O(n log n)`.
pub fn kendall_tau(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    let n = pred.len() as u64;
    let mut pairs: Vec<(f64, f64)> = pred.iter().copied().zip(truth.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total = n * (n - 1) / 2;
    let xs: Vec<u64> = pairs.iter().map(|p| p.0.to_bits()).collect();
    let tied_x = tied_pairs(&xs);
    let joint: Vec<(u64, u64)> = pairs.iter().map(|p| (p.0.to_bits(), p.1.to_bits())).collect();
    let tied_xy = tied_pairs(&joint);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = merge_sort_swaps(&mut ys, &mut buf);
    let yb: Vec<u64> = ys.iter().map(|y| y.to_bits()).collect();
    let tied_y = tied_pairs(&yb);
    let (dx, dy) = (total - tied_x, total - tied_y);
    if dx == 0 || dy == 0 {
        return Err(EvalError::DegenerateInput);
    }
    let concordant_minus_discordant =
        total as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * swaps as f64;
    Ok(concordant_minus_discordant / ((dx as f64) * (dy as f64)).sqrt())
}

/// Indices ordered by descending score, ties by ascending index.
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Overlap of the predicted and true top-`k` sets, divided by `k`. Ties are
/// broken by position, so callers pass lists ordered by graph id.
pub fn precision_at_k(pred: &[f64], truth: &[f64], k: usize) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    if k == 0 || k > pred.len() {
        return Err(EvalError::KTooLarge { k, len: pred.len() });
    }
    let mut in_true = vec![false; truth.len()];
    for &i in &rank_indices(truth)[..k] {
        in_true[i] = true;
    }
    let hits = rank_indices(pred)[..k].iter().filter(|&&i| in_true[i]).count();
    Ok(hits as f64 / k as f64)
}

/// A way of scoring the similarity of two graphs.
pub enum Scorer<'a> {
    GroundTruth(&'a LabelSet),
    Constant(f64),
    Hungarian(CostVariant),
    JonkerVolgenant(CostVariant),
    Beam(usize),
    Astar,
    /// A trained model; the method name follows its kind.
    Model(&'a Model, &'a Vocab),
}

impl Scorer<'_> {
    pub fn name(&self) -> String {
        match self {
            Scorer::GroundTruth(_) => "groundtruth".into(),
            Scorer::Constant(_) => "constant".into(),
            Scorer::Hungarian(_) => "hungarian".into(),
            Scorer::JonkerVolgenant(_) => "vj".into(),
            Scorer::Beam(w) => format!("beam{w}"),
            Scorer::Astar => "astar".into(),
            Scorer::Model(m, _) => m.config.method_name(),
        }
    }

    /// Predicted similarity in `(0, 1]`.
    pub fn score(&self, a: &Graph, b: &Graph) -> Result<f64, EvalError> {
        let (n1, n2) = (a.node_count(), b.node_count());
        let sim = |ged: u32| ged_to_similarity(ged, n1, n2);
        Ok(match self {
            Scorer::GroundTruth(labels) => {
                let ged = labels
                    .ged(a.id(), b.id())
                    .ok_or_else(|| EvalError::MissingLabels(a.id().into(), b.id().into()))?;
                sim(ged)
            }
            Scorer::Constant(c) => *c,
            Scorer::Hungarian(v) => sim(assignment_ged(a, b, LsapAlgorithm::Hungarian, *v)),
            Scorer::JonkerVolgenant(v) => sim(assignment_ged(a, b, LsapAlgorithm::JonkerVolgenant, *v)),
            Scorer::Beam(w) => sim(beam_ged(a, b, BeamWidth::Bounded(*w))?),
            Scorer::Astar => sim(astar_ged(a, b)?),
            Scorer::Model(model, vocab) => {
                model.score(&PreparedGraph::new(a, vocab)?, &PreparedGraph::new(b, vocab)?)?
            }
        })
    }
}

/// Database graphs ranked for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub query_id: String,
    /// Database ids by descending predicted similarity, ties by ascending id.
    pub db_ids: Vec<String>,
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
    pub true_nged: Vec<f64>,
}

/// One method's row of the metrics report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    /// Mean squared error in units of 10⁻³.
    pub mse_e3: f64,
    /// Macro-averaged tau-b; `None` when every query is degenerate.
    pub tau: Option<f64>,
    pub p_at_k: f64,
    /// Mean wall time per pair; `None` when timing is disabled.
    pub mean_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub k: usize,
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub record_time: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            record_time: true,
        }
    }
}

/// Scores of one query against every database graph, in database order.
struct QueryScores {
    pred: Vec<f64>,
    truth: Vec<f64>,
    nged: Vec<f64>,
    seconds: f64,
}

fn score_query(
    corpus: &Corpus,
    query: &str,
    database: &[String],
    labels: &LabelSet,
    scorer: &Scorer<'_>,
) -> Result<QueryScores, EvalError> {
    let gq = corpus.get(query)?;
    let mut out = QueryScores {
        pred: Vec::with_capacity(database.len()),
        truth: Vec::with_capacity(database.len()),
        nged: Vec::with_capacity(database.len()),
        seconds: 0.0,
    };
    for d in database {
        let gd = corpus.get(d)?;
        let ged = labels
            .ged(query, d)
            .ok_or_else(|| EvalError::MissingLabels(query.to_string(), d.clone()))?;
        let start = Instant::now();
        out.pred.push(scorer.score(gq, gd)?);
        out.seconds += start.elapsed().as_secs_f64();
        out.truth.push(ged_to_similarity(ged, gq.node_count(), gd.node_count()));
        out.nged.push(normalized_ged(ged as f64, gq.node_count(), gd.node_count()));
    }
    Ok(out)
}

fn ranking(query: &str, database: &[String], s: &QueryScores) -> RankingResult {
    let order = rank_indices(&s.pred);
    RankingResult {
        query_id: query.to_string(),
        db_ids: order.iter().map(|&i| database[i].clone()).collect(),
        pred: order.iter().map(|&i| s.pred[i]).collect(),
        truth: order.iter().map(|&i| s.truth[i]).collect(),
        true_nged: order.iter().map(|&i| s.nged[i]).collect(),
    }
}

/// Ranks `database` (sorted ids) for a single query.
pub fn rank_query(
    corpus: &Corpus,
    query: &str,
    database: &[String],
    labels: &LabelSet,
    scorer: &Scorer<'_>,
) -> Result<RankingResult, EvalError> {
    if database.is_empty() {
        return Err(EvalError::Empty);
    }
    let scores = score_query(corpus, query, database, labels, scorer)?;
    Ok(ranking(query, database, &scores))
}

/// Scores every test query against the database (train ∪ val), ranks, and
/// aggregates mse over all pairs and per-query tau and p@k by macro average.
pub fn run_eval(
    corpus: &Corpus,
    split: &Split,
    labels: &LabelSet,
    scorer: &Scorer<'_>,
    config: &EvalConfig,
) -> Result<(MetricsRow, Vec<RankingResult>), EvalError> {
    let database = split.database();
    if split.test.is_empty() || database.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut all_pred = Vec::new();
    let mut all_truth = Vec::new();
    let (mut tau_sum, mut tau_count, mut p_sum) = (0.0, 0usize, 0.0);
    let mut elapsed = 0.0;
    let mut rankings = Vec::with_capacity(split.test.len());
    for q in &split.test {
        let scores = score_query(corpus, q, &database, labels, scorer)?;
        match kendall_tau(&scores.pred, &scores.truth) {
            Ok(t) => {
                tau_sum += t;
                tau_count += 1;
            }
            Err(EvalError::DegenerateInput) => {}
            Err(e) => return Err(e),
        }
        p_sum += precision_at_k(&scores.pred, &scores.truth, config.k)?;
        elapsed += scores.seconds;
        rankings.push(ranking(q, &database, &scores));
        all_pred.extend(scores.pred);
        all_truth.extend(scores.truth);
    }
    let row = MetricsRow {
        method: scorer.name(),
        mse_e3: mse_metric(&all_pred, &all_truth)? * 1e3,
        tau: (tau_count > 0).then(|| tau_sum / tau_count as f64),
        p_at_k: p_sum / split.test.len() as f64,
        mean_time_ms: config
            .record_time
            .then(|| elapsed * 1e3 / all_pred.len() as f64),
    };
    Ok((row, rankings))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    pub pairs: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
}

/// Wall time per pair for each scorer, in the given order.
pub fn benchmark_time(scorers: &[Scorer<'_>], pairs: &[(&Graph, &Graph)]) -> Result<Vec<TimingRow>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rows = Vec::with_capacity(scorers.len());
    for scorer in scorers {
        let mut times = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let start = Instant::now();
            scorer.score(a, b)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
        }
        let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        let median_ms = if times.len() % 2 == 1 {
            times[mid]
        } else {
            (times[mid - 1] + times[mid]) / 2.0
        };
        rows.push(TimingRow {
            method: scorer.name(),
            pairs: pairs.len(),
            mean_ms,
            median_ms,
        });
    }
    Ok(rows)
}

const NOT_APPLICABLE: &str = "NA";

fn optional(v: Option<f64>) -> String {
    v.map_or_else(|| NOT_APPLICABLE.to_string(), |x| x.to_string())
}

fn parse_f64(field: &str) -> Result<f64, EvalError> {
    field
        .parse()
        .map_err(|_| EvalError::Csv(format!("not a number: {field:?}")))
}

fn parse_optional(field: &str) -> Result<Option<f64>, EvalError> {
    if field == NOT_APPLICABLE {
        Ok(None)
    } else {
        parse_f64(field).map(Some)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>10} {:>8} {:>8} {:>12}", "method", "mse(e-3)", "tau", format!("p@{}", self.k), "time(ms)")?;
        for r in &self.rows {
            let tau = r.tau.map_or(NOT_APPLICABLE.to_string(), |t| format!("{t:.4}"));
            let time = r.mean_time_ms.map_or(NOT_APPLICABLE.to_string(), |t| format!("{t:.4}"));
            writeln!(f, "{:<20} {:>10.4} {:>8} {:>8.4} {:>12}", r.method, r.mse_e3, tau, r.p_at_k, time)?;
        }
        Ok(())
    }
}

/// Writes `method, mse_e3, tau, p_at_<k>, mean_time_ms`.
pub fn write_report_csv(report: &MetricsReport, path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "mse_e3", "tau", &format!("p_at_{}", report.k), "mean_time_ms"])?;
    for r in &report.rows {
        w.write_record([
            r.method.clone(),
            r.mse_e3.to_string(),
            optional(r.tau),
            r.p_at_k.to_string(),
            optional(r.mean_time_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv(path: &Path) -> Result<MetricsReport, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let k = headers
        .get(3)
        .and_then(|h| h.strip_prefix("p_at_"))
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| EvalError::Csv(format!("unexpected header {headers:?}")))?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(EvalError::Csv(format!("expected 5 fields, got {}", rec.len())));
        }
        rows.push(MetricsRow {
            method: rec[0].to_string(),
            mse_e3: parse_f64(&rec[1])?,
            tau: parse_optional(&rec[2])?,
            p_at_k: parse_f64(&rec[3])?,
            mean_time_ms: parse_optional(&rec[4])?,
        });
    }
    Ok(MetricsReport { k, rows })
}

/// Writes `query_id, rank, db_id, pred_sim, true_sim, true_nged`.
pub fn write_rankings_csv(rankings: &[RankingResult], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["query_id", "rank", "db_id", "pred_sim", "true_sim", "true_nged"])?;
    for r in rankings {
        for (i, db) in r.db_ids.iter().enumerate() {
            w.write_record([
                r.query_id.clone(),
                (i + 1).to_string(),
                db.clone(),
                r.pred[i].to_string(),
                r.truth[i].to_string(),
                r.true_nged[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `method, pairs, mean_ms, median_ms`.
pub fn write_timing_csv(rows: &[TimingRow], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "pairs", "mean_ms", "median_ms"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.pairs.to_string(),
            r.mean_ms.to_string(),
            r.median_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Row-major matrix, one CSV row per matrix row.
pub fn write_matrix_csv(matrix: &Tensor, path: &Path) -> Result<(), EvalError> {
    let (rows, cols) = matrix.dims2().map_err(|e| EvalError::Csv(e.to_string()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(File::create(path)?);
    for i in 0..rows {
        w.write_record((0..cols).map(|j| matrix.at2(i, j).to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct count over all pairs.
    fn tau_b_quadratic(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut s, mut tx, mut ty) = (0i64, 0i64, 0i64);
        let total = (n * (n - 1) / 2) as i64;
        for i in 0..n {
            for j in i + 1..n {
                let dx = x[i].partial_cmp(&x[j]).unwrap() as i64;
                let dy = y[i].partial_cmp(&y[j]).unwrap() as i64;
                s += dx * dy;
                tx += (dx == 0) as i64;
                ty += (dy == 0) as i64;
            }
        }
        let denom = ((total - tx) as f64 * (total - ty) as f64).sqrt();
        (denom > 0.0).then(|| s as f64 / denom)
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_metric(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mse_metric(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        let (p, t) = ([0.1, 0.5, 0.9, 0.2], [0.2, 0.4, 0.6, 0.2]);
        let mut acc = 0.0;
        for i in 0..4 {
            let d = p[i] - t[i];
            acc += d * d;
        }
        assert!((mse_metric(&p, &t).unwrap() - acc / 4.0).abs() < 1e-15);
        assert!(matches!(mse_metric(&[1.0], &[]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(mse_metric(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn tau_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&x, &rev).unwrap(), -1.0);
        assert!(matches!(kendall_tau(&[0.5; 4], &x[..4]), Err(EvalError::DegenerateInput)));
        assert!(matches!(kendall_tau(&[1.0], &[2.0]), Err(EvalError::DegenerateInput)));
        let (a, b) = ([1.0, 1.0, 2.0, 3.0, 3.0, 4.0], [2.0, 1.0, 1.0, 3.0, 5.0, 5.0]);
        let want = tau_b_quadratic(&a, &b).unwrap();
        assert!((kendall_tau(&a, &b).unwrap() - want).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn tau_matches_quadratic_count(
            pairs in prop::collection::vec((0u8..5, 0u8..5), 2..40)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            match (kendall_tau(&x, &y), tau_b_quadratic(&x, &y)) {
                (Ok(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(EvalError::DegenerateInput), None) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn precision_examples() {
        let t = [0.9, 0.8, 0.7, 0.6, 0.5];
        for k in 1..=5 {
            assert_eq!(precision_at_k(&t, &t, k).unwrap(), 1.0);
        }
        let rev = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(precision_at_k(&rev, &t, 2).unwrap(), 0.0);
        assert!(matches!(precision_at_k(&t, &t, 6), Err(EvalError::KTooLarge { .. })));
        assert!(matches!(precision_at_k(&t, &t, 0), Err(EvalError::KTooLarge { .. })));
    }

    #[test]
    fn precision_with_ties_at_boundary() {
        // True top-3 by (score desc, index asc): 0 (0.9), then 1 and 2 of the
        // tied 0.5 group {1, 2, 4}. Predicted top-3: 4, 3, 1. Overlap {1}.
        let truth = [0.9, 0.5, 0.5, 0.2, 0.5, 0.1];
        let pred = [0.1, 0.6, 0.3, 0.7, 0.8, 0.2];
        assert!((precision_at_k(&pred, &truth, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // Predicted ties resolve the same way: all equal picks indices 0..k.
        let flat = [0.5; 6];
        assert!((precision_at_k(&flat, &truth, 3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_csv_roundtrip() {
        let report = MetricsReport {
            k: 10,
            rows: vec![
                MetricsRow {
                    method: "gsimcnn".into(),
                    mse_e3: 1.234_567_890_123,
                    tau: Some(0.7071067811865476),
                    p_at_k: 0.35,
                    mean_time_ms: Some(0.125),
                },
                MetricsRow {
                    method: "constant".into(),
                    mse_e3: 17.0,
                    tau: None,
                    p_at_k: 0.1,
                    mean_time_ms: None,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("method,mse_e3,tau,p_at_10,mean_time_ms\n"));
        assert_eq!(read_report_csv(&path).unwrap(), report);
    }

    #[test]
    fn benchmark_preserves_method_order() {
        let g = Graph::unlabeled("a", 3, &[(0, 1), (1, 2)]).unwrap();
        let h = Graph::unlabeled("b", 3, &[(0, 1)]).unwrap();
        let scorers = [Scorer::Astar, Scorer::Constant(0.5), Scorer::Hungarian(CostVariant::DegreeEnriched)];
        let rows = benchmark_time(&scorers, &[(&g, &h)]).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, ["astar", "constant", "hungarian"]);
        assert!(rows.iter().all(|r| r.pairs == 1 && r.mean_ms >= 0.0 && r.median_ms == r.mean_ms));
    }

    fn labeled_fixture() -> (Corpus, Split, LabelSet) {
        use crate::dataset::{generate_synthetic, label_pairs, split_corpus, DEFAULT_RATIOS};
        let corpus = generate_synthetic(30, 6, 3, 4).unwrap();
        let split = split_corpus(&corpus, DEFAULT_RATIOS, 4).unwrap();
        let (_, labels) = label_pairs(&split, &corpus, astar_ged, None).unwrap();
        (corpus, split, labels)
    }

    #[test]
    fn ground_truth_scorer_is_perfect() {
        let (corpus, split, labels) = labeled_fixture();
        let config = EvalConfig { k: 5, record_time: false };
        let (row, rankings) = run_eval(&corpus, &split, &labels, &Scorer::GroundTruth(&labels), &config).unwrap();
        assert_eq!(row.mse_e3, 0.0);
        assert_eq!(row.tau, Some(1.0));
        assert_eq!(row.p_at_k, 1.0);
        assert_eq!(row.mean_time_ms, None);
        assert_eq!(rankings.len(), split.test.len());
        let db = split.database().len();
        let full = EvalConfig { k: db, record_time: false };
        let (row, _) = run_eval(&corpus, &split, &labels, &Scorer::Constant(0.3), &full).unwrap();
        assert_eq!(row.p_at_k, 1.0);
    }

    #[test]
    fn constant_scorer_has_no_tau() {
        let (corpus, split, labels) = labeled_fixture();
        let config = EvalConfig { k: 5, record_time: true };
        let (row, _) = run_eval(&corpus, &split, &labels, &Scorer::Constant(0.5), &config).unwrap();
        assert_eq!(row.tau, None);
        let mut acc = 0.0;
        let mut n = 0;
        for q in &split.test {
            for d in split.database() {
                let (gq, gd) = (corpus.get(q).unwrap(), corpus.get(&d).unwrap());
                let s = ged_to_similarity(labels.ged(q, &d).unwrap(), gq.node_count(), gd.node_count());
                acc += (s - 0.5).powi(2);
                n += 1;
            }
        }
        assert!((row.mse_e3 - acc / n as f64 * 1e3).abs() < 1e-9);
        assert!(row.mean_time_ms.is_some());
    }

    #[test]
    fn hungarian_scorer_matches_recomputation() {
        let (corpus, split, labels) = labeled_fixture();
        let config = EvalConfig { k: 5, record_time: false };
        let scorer = Scorer::Hungarian(CostVariant::DegreeEnriched);
        let (row, rankings) = run_eval(&corpus, &split, &labels, &scorer, &config).unwrap();
        let (mut sq, mut n, mut taus) = (0.0, 0usize, Vec::new());
        for q in &split.test {
            let gq = corpus.get(q).unwrap();
            let (mut p, mut t) = (Vec::new(), Vec::new());
            for d in split.database() {
                let gd = corpus.get(&d).unwrap();
                let ub = assignment_ged(gq, gd, LsapAlgorithm::Hungarian, CostVariant::DegreeEnriched);
                let (n1, n2) = (gq.node_count(), gd.node_count());
                p.push(ged_to_similarity(ub, n1, n2));
                t.push(ged_to_similarity(labels.ged(q, &d).unwrap(), n1, n2));
            }
            for (a, b) in p.iter().zip(&t) {
                sq += (a - b).powi(2);
                n += 1;
            }
            if let Some(tau) = tau_b_quadratic(&p, &t) {
                taus.push(tau);
            }
        }
        assert!((row.mse_e3 - sq / n as f64 * 1e3).abs() < 1e-9);
        let mean_tau = taus.iter().sum::<f64>() / taus.len() as f64;
        assert!((row.tau.unwrap() - mean_tau).abs() < 1e-12);
        for r in &rankings {
            for w in 0..r.pred.len() - 1 {
                assert!(r.pred[w] > r.pred[w + 1] || (r.pred[w] == r.pred[w + 1] && r.db_ids[w] < r.db_ids[w + 1]));
            }
        }
    }

    #[test]
    fn missing_labels_are_reported() {
        let (corpus, split, _) = labeled_fixture();
        let empty = LabelSet::default();
        let err = run_eval(&corpus, &split, &empty, &Scorer::Astar, &EvalConfig::default()).unwrap_err();
        assert!(matches!(err, EvalError::MissingLabels(_, _)));
    }
}
