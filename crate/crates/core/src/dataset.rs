//! Corpus files, synthetic corpora, train/validation/test splits and
//! ground-truth GED labels with an on-disk cache.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bipartite::{assignment_ged, CostVariant, LsapAlgorithm};
use crate::ged::{astar_ged, beam_ged, ged_to_similarity, normalized_ged, BeamWidth, GedError};
use crate::graph::{Graph, GraphError, GraphRecord, Vocab};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {0}: malformed record: {1}")]
    ParseError(usize, String),
    #[error("line {0}: invalid graph: {1}")]
    ValidationError(usize, GraphError),
    #[error("line {0}: duplicate graph id {1:?}")]
    DuplicateId(usize, String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corpus of {0} graphs is too small to split (need at least 5)")]
    CorpusTooSmall(usize),
    #[error("unknown graph id {0:?}")]
    UnknownGraph(String),
    #[error("ground truth failed for ({a}, {b}): {cause}")]
    OracleFailure { a: String, b: String, cause: GedError },
    #[error("label cache line {0} is corrupt: {1}")]
    CacheCorrupt(usize, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A collection of graphs with unique ids and the label vocabulary they use.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    pub seed: Option<u64>,
    graphs: Vec<Graph>,
    vocab: Vocab,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, seed: Option<u64>, graphs: Vec<Graph>) -> Result<Corpus, DatasetError> {
        let mut index = HashMap::with_capacity(graphs.len());
        for (i, g) in graphs.iter().enumerate() {
            if index.insert(g.id().to_string(), i).is_some() {
                return Err(DatasetError::DuplicateId(i + 1, g.id().to_string()));
            }
        }
        let vocab = Vocab::from_graphs(&graphs);
        Ok(Corpus {
            name: name.into(),
            seed,
            graphs,
            vocab,
            index,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Graph, DatasetError> {
        self.index
            .get(id)
            .map(|&i| &self.graphs[i])
            .ok_or_else(|| DatasetError::UnknownGraph(id.to_string()))
    }

    /// One JSON record per line, in corpus order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for g in &self.graphs {
            out.push_str(&serde_json::to_string(&g.to_record()).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// Reads a JSON Lines corpus, validating every graph. Blank lines are skipped;
/// line numbers in errors are 1-based.
pub fn load_corpus(path: &Path) -> Result<Corpus, DatasetError> {
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&name, &text)
}

pub fn parse_corpus(name: &str, text: &str) -> Result<Corpus, DatasetError> {
    let mut graphs = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(line)
            .map_err(|e| DatasetError::ParseError(line_no, e.to_string()))?;
        let g = Graph::validate(record).map_err(|e| DatasetError::ValidationError(line_no, e))?;
        if seen.insert(g.id().to_string(), line_no).is_some() {
            return Err(DatasetError::DuplicateId(line_no, g.id().to_string()));
        }
        graphs.push(g);
    }
    Corpus::new(name, None, graphs)
}

/// Probability of each non-tree edge in synthetic graphs.
pub const EXTRA_EDGE_PROBABILITY: f64 = 0.15;

fn label_name(k: usize) -> String {
    const SYMBOLS: [&str; 12] = ["C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "Si", "Se"];
    SYMBOLS
        .get(k)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("X{k}"))
}

/// Random connected graphs: a random spanning tree plus independent extra
/// edges, uniform node labels and shuffled node ids. Deterministic in `seed`.
pub fn generate_synthetic(
    count: usize,
    max_nodes: usize,
    label_count: usize,
    seed: u64,
) -> Result<Corpus, DatasetError> {
    generate_synthetic_sized(count, 2, max_nodes, label_count, seed)
}

/// Like [`generate_synthetic`] with node counts drawn from
/// `min_nodes..=max_nodes`.
pub fn generate_synthetic_sized(
    count: usize,
    min_nodes: usize,
    max_nodes: usize,
    label_count: usize,
    seed: u64,
) -> Result<Corpus, DatasetError> {
    if count == 0 || min_nodes < 2 || max_nodes < min_nodes || label_count == 0 {
        return Err(DatasetError::InvalidConfig(format!(
            "count {count}, nodes {min_nodes}..={max_nodes}, labels {label_count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (count - 1).to_string().len().max(4);
    let graphs = (0..count)
        .map(|k| {
            let n = rng.gen_range(min_nodes..=max_nodes);
            let labels: Vec<String> = (0..n)
                .map(|_| label_name(rng.gen_range(0..label_count)))
                .collect();
            let mut edges = BTreeSet::new();
            for v in 1..n {
                let u = rng.gen_range(0..v);
                edges.insert((u, v));
            }
            for u in 0..n {
                for v in u + 1..n {
                    if !edges.contains(&(u, v)) && rng.gen_bool(EXTRA_EDGE_PROBABILITY) {
                        edges.insert((u, v));
                    }
                }
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let edges: Vec<(usize, usize)> = edges.into_iter().collect();
            Graph::new(format!("g{k:0width$}"), labels, &edges)
                .expect("generated graphs are valid")
                .permuted(&order)
        })
        .collect();
    Corpus::new(format!("synthetic-{seed}"), Some(seed), graphs)
}

/// Disjoint train / validation / test id sets, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    /// Train and validation graphs: the database that queries are ranked against.
    pub fn database(&self) -> Vec<String> {
        let mut db: Vec<String> = self.train.iter().chain(&self.val).cloned().collect();
        db.sort();
        db
    }
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Shuffles ids with `seed`; validation and test sizes are rounded down and
/// the remainder goes to training.
pub fn split_corpus(c: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<Split, DatasetError> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|&r| !(0.0..=1.0).contains(&r)) || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidConfig(format!("split ratios {ratios:?}")));
    }
    let n = c.len();
    if n < 5 {
        return Err(DatasetError::CorpusTooSmall(n));
    }
    let mut ids: Vec<String> = c.graphs().iter().map(|g| g.id().to_string()).collect();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * rv + 1e-9).floor() as usize;
    let n_test = (n as f64 * rs + 1e-9).floor() as usize;
    let mut test = ids.split_off(n - n_test);
    let mut val = ids.split_off(n - n_test - n_val);
    let mut train = ids;
    train.sort();
    val.sort();
    test.sort();
    Ok(Split { train, val, test })
}

/// Unordered id pair in canonical (lexicographic) order.
pub fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Distinct unordered pairs with one graph from the training set and the
/// other from training or validation.
pub fn training_pairs(split: &Split) -> Vec<(String, String)> {
    let db = split.database();
    let mut pairs = BTreeSet::new();
    for a in &split.train {
        for b in &db {
            if a != b {
                pairs.insert(pair_key(a, b));
            }
        }
    }
    pairs.into_iter().collect()
}

/// Distinct unordered pairs within the validation set.
pub fn validation_pairs(split: &Split) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    for (i, a) in split.val.iter().enumerate() {
        for b in &split.val[i + 1..] {
            pairs.push(pair_key(a, b));
        }
    }
    pairs
}

/// Every (query, database graph) pair, queries from the test set.
pub fn evaluation_pairs(split: &Split) -> Vec<(String, String)> {
    let db = split.database();
    split
        .test
        .iter()
        .flat_map(|q| db.iter().map(move |d| (q.clone(), d.clone())))
        .collect()
}

/// Ground-truth GED and its derived similarity for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub id_a: String,
    pub id_b: String,
    pub ged: u32,
    pub nged: f64,
    pub sim: f64,
}

impl LabeledPair {
    pub fn new(a: &Graph, b: &Graph, ged: u32) -> LabeledPair {
        let (n1, n2) = (a.node_count(), b.node_count());
        LabeledPair {
            id_a: a.id().to_string(),
            id_b: b.id().to_string(),
            ged,
            nged: normalized_ged(ged as f64, n1, n2),
            sim: ged_to_similarity(ged, n1, n2),
        }
    }
}

/// How ground-truth GEDs are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelPolicy {
    /// A* search.
    Exact,
    /// Minimum of the beam (width 10), Hungarian and Jonker-Volgenant upper
    /// bounds, for graphs too large for exact search.
    MinUpperBound,
}

pub const MIN_BOUND_BEAM_WIDTH: usize = 10;

pub fn ground_truth(policy: LabelPolicy, a: &Graph, b: &Graph) -> Result<u32, GedError> {
    match policy {
        LabelPolicy::Exact => astar_ged(a, b),
        LabelPolicy::MinUpperBound => {
            let beam = beam_ged(a, b, BeamWidth::Bounded(MIN_BOUND_BEAM_WIDTH))?;
            let variant = CostVariant::DegreeEnriched;
            let h = assignment_ged(a, b, LsapAlgorithm::Hungarian, variant);
            let vj = assignment_ged(a, b, LsapAlgorithm::JonkerVolgenant, variant);
            Ok(beam.min(h).min(vj))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    a: String,
    b: String,
    ged: u32,
}

/// Ground-truth GEDs keyed by unordered id pair.
#[derive(Debug, Clone, Default)]
pub struct LabelSet {
    geds: HashMap<(String, String), u32>,
}

impl LabelSet {
    pub fn insert(&mut self, a: &str, b: &str, ged: u32) {
        self.geds.insert(pair_key(a, b), ged);
    }

    pub fn ged(&self, a: &str, b: &str) -> Option<u32> {
        if a == b {
            return Some(0);
        }
        self.geds.get(&pair_key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.geds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geds.is_empty()
    }

    pub fn labeled(&self, corpus: &Corpus, a: &str, b: &str) -> Result<Option<LabeledPair>, DatasetError> {
        let (ga, gb) = (corpus.get(a)?, corpus.get(b)?);
        Ok(self.ged(a, b).map(|ged| LabeledPair::new(ga, gb, ged)))
    }

    /// Reads a cache file; a missing file is an empty set.
    pub fn load_cache(path: &Path) -> Result<LabelSet, DatasetError> {
        let mut set = LabelSet::default();
        if !path.exists() {
            return Ok(set);
        }
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CacheRecord = serde_json::from_str(&line)
                .map_err(|e| DatasetError::CacheCorrupt(i + 1, e.to_string()))?;
            if let Some(prev) = set.ged(&rec.a, &rec.b) {
                if prev != rec.ged {
                    return Err(DatasetError::CacheCorrupt(
                        i + 1,
                        format!("conflicting GED for ({}, {})", rec.a, rec.b),
                    ));
                }
            }
            set.insert(&rec.a, &rec.b, rec.ged);
        }
        Ok(set)
    }
}

/// Labels every listed pair, reusing and extending the cache at `cache_path`.
/// Newly computed labels are appended to the cache in pair order.
pub fn label_pair_list<F>(
    pairs: &[(String, String)],
    corpus: &Corpus,
    mut oracle: F,
    cache_path: Option<&Path>,
) -> Result<(Vec<LabeledPair>, LabelSet), DatasetError>
where
    F: FnMut(&Graph, &Graph) -> Result<u32, GedError>,
{
    let mut set = match cache_path {
        Some(p) => LabelSet::load_cache(p)?,
        None => LabelSet::default(),
    };
    let mut writer = match cache_path {
        Some(p) => Some(BufWriter::new(
            OpenOptions::new().create(true).append(true).open(p)?,
        )),
        None => None,
    };
    let mut out = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let (ga, gb) = (corpus.get(a)?, corpus.get(b)?);
        let ged = match set.ged(a, b) {
            Some(ged) => ged,
            None => {
                let ged = oracle(ga, gb).map_err(|cause| DatasetError::OracleFailure {
                    a: a.clone(),
                    b: b.clone(),
                    cause,
                })?;
                set.insert(a, b, ged);
                if let Some(w) = writer.as_mut() {
                    let (ka, kb) = pair_key(a, b);
                    let rec = CacheRecord { a: ka, b: kb, ged };
                    writeln!(w, "{}", serde_json::to_string(&rec).expect("records serialize"))?;
                }
                ged
            }
        };
        out.push(LabeledPair::new(ga, gb, ged));
    }
    if let Some(mut w) = writer {
        w.flush()?;
    }
    Ok((out, set))
}

/// Labels the training, validation and evaluation pairs of `split`.
pub fn label_pairs<F>(
    split: &Split,
    corpus: &Corpus,
    oracle: F,
    cache_path: Option<&Path>,
) -> Result<(Vec<LabeledPair>, LabelSet), DatasetError>
where
    F: FnMut(&Graph, &Graph) -> Result<u32, GedError>,
{
    let mut seen = BTreeSet::new();
    let pairs: Vec<(String, String)> = training_pairs(split)
        .into_iter()
        .chain(validation_pairs(split))
        .chain(evaluation_pairs(split))
        .filter(|(a, b)| a != b && seen.insert(pair_key(a, b)))
        .collect();
    label_pair_list(&pairs, corpus, oracle, cache_path)
}
