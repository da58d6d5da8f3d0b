//! Synthetic graph and dataset generation.
//!
//! Topologies are built front-to-back: a block of input nodes, then a block
//! of operation nodes each wiring its two operands to already-created
//! nodes, then one output node per otherwise-unconsumed operation. Edges
//! always point from lower to higher ids, so every generated graph is
//! acyclic by construction and node ids are already topological. Inputs the
//! operand draws never picked are dropped at the end (every kept node lies
//! on a path from an input to an output), so generated graphs survive a
//! source-emission round trip without loss.
//!
//! Operand selection mixes two draws: with probability `locality_weight`
//! the operand comes from a geometric recency window over the most recent
//! candidates (biasing toward deep, chain-like structure), otherwise it is
//! uniform over everything created so far. The default weights were tuned
//! so default-sized graphs average between 8 and 20 operation levels.
//!
//! A dataset is a grid of `topologies x variants`: each topology is costed
//! under several random directive assignments (one uniform directive
//! density per variant). The train/test split is by topology, never by
//! variant, so no test graph shares a topology with a training graph.

use crate::dfg::{Assignment, Dfg, DfgJsonError, Node, NodeKind};
use crate::io::atomic_write;
use crate::nn::subseed;
use crate::oracle;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Bitwidths sampled for operation nodes (chosen to straddle the DSP cost
/// tiers at 18 and 25 bits).
pub const BITWIDTH_CHOICES: [u8; 7] = [4, 8, 12, 16, 18, 24, 32];

#[derive(Copy, Clone, Debug)]
pub struct TopologyConfig {
    /// Inclusive range for the number of operation nodes.
    pub ops_range: (usize, usize),
    /// Inclusive range for the number of input nodes.
    pub inputs_range: (usize, usize),
    /// Probability an operation is a mul (otherwise an add).
    pub mul_prob: f64,
    /// Success probability of the geometric recency window.
    pub locality_p: f64,
    /// Probability an operand uses the recency window instead of a uniform
    /// draw over all candidates.
    pub locality_weight: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            ops_range: (100, 200),
            inputs_range: (10, 30),
            mul_prob: 0.5,
            locality_p: 0.3,
            locality_weight: 0.3,
        }
    }
}

/// Geometric draw: number of failures before the first success, capped so
/// degenerate RNG draws cannot loop forever.
fn geometric<R: Rng>(rng: &mut R, p: f64) -> usize {
    let u: f64 = rng.gen();
    if u <= 0.0 {
        return 0;
    }
    let k = ((1.0 - u).ln() / (1.0 - p).ln()).floor();
    if k.is_finite() && k >= 0.0 {
        (k as usize).min(100_000)
    } else {
        0
    }
}

/// Generates one valid, acyclic topology. Panics if a range in `cfg` is
/// reversed (low > high); ranges are otherwise unrestricted.
pub fn generate_topology(seed: u64, cfg: &TopologyConfig) -> Dfg {
    assert!(
        cfg.ops_range.0 <= cfg.ops_range.1 && cfg.inputs_range.0 <= cfg.inputs_range.1,
        "config ranges must be low <= high"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = rng.gen_range(cfg.inputs_range.0..=cfg.inputs_range.1);
    let n_ops = rng.gen_range(cfg.ops_range.0..=cfg.ops_range.1);

    let mut nodes = Vec::with_capacity(n_inputs + n_ops);
    let mut edges = Vec::new();
    for id in 0..n_inputs {
        nodes.push(Node::new(id, NodeKind::Input, 0));
    }

    // Every already-created input or operation is an operand candidate.
    let mut candidates: Vec<usize> = (0..n_inputs).collect();
    for _ in 0..n_ops {
        let id = nodes.len();
        let kind = if rng.gen_bool(cfg.mul_prob) {
            NodeKind::Mul
        } else {
            NodeKind::Add
        };
        let bitwidth = BITWIDTH_CHOICES[rng.gen_range(0..BITWIDTH_CHOICES.len())];
        for _ in 0..2 {
            let pick = if rng.gen::<f64>() < cfg.locality_weight {
                let back = geometric(&mut rng, cfg.locality_p) % candidates.len();
                candidates[candidates.len() - 1 - back]
            } else {
                candidates[rng.gen_range(0..candidates.len())]
            };
            edges.push((pick, id));
        }
        nodes.push(Node::new(id, kind, bitwidth));
        candidates.push(id);
    }

    // Attach an output to every operation nothing consumes.
    let mut consumed = vec![false; nodes.len()];
    for &(src, _) in &edges {
        consumed[src] = true;
    }
    let op_ids: Vec<usize> = (n_inputs..nodes.len()).collect();
    for op_id in op_ids {
        if !consumed[op_id] {
            let out_id = nodes.len();
            nodes.push(Node::new(out_id, NodeKind::Output, 0));
            edges.push((op_id, out_id));
        }
    }

    // Drop inputs the operand draws never picked, keeping ids dense and
    // topological.
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut kept = Vec::with_capacity(nodes.len());
    for mut node in nodes {
        if node.kind == NodeKind::Input && !consumed[node.id] {
            continue;
        }
        remap[node.id] = kept.len();
        node.id = kept.len();
        kept.push(node);
    }
    let edges: Vec<(usize, usize)> = edges.iter().map(|&(s, d)| (remap[s], remap[d])).collect();

    Dfg::new(format!("gen-{seed}"), kept, edges)
}

/// Samples one directive assignment: draws a directive density `p` uniform
/// in `[0, 1)`, then flips each multiplier on independently with
/// probability `p`. This spreads variants over the whole density range
/// instead of clustering near half-on.
pub fn sample_directives(dfg: &Dfg, seed: u64) -> Assignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: f64 = rng.gen();
    (0..dfg.mul_count()).map(|_| rng.gen_bool(p)).collect()
}

#[derive(Clone, Debug)]
pub struct DatasetConfig {
    /// Distinct topologies to generate.
    pub topologies: usize,
    /// Directive variants per topology.
    pub variants: usize,
    /// How many topologies (from the front) form the training split.
    pub train_topologies: usize,
    pub seed: u64,
    pub topo: TopologyConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            topologies: 25,
            variants: 50,
            train_topologies: 20,
            seed: 0,
            topo: TopologyConfig::default(),
        }
    }
}

/// One dataset file entry (fields alphabetical for canonical JSON).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub topology: usize,
    pub variant: usize,
}

/// Dataset manifest (fields alphabetical for canonical JSON).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub files: Vec<ManifestEntry>,
    pub seed: u64,
    pub test_topologies: Vec<usize>,
    pub train_topologies: Vec<usize>,
    pub variants: usize,
}

impl DatasetManifest {
    pub fn is_train_topology(&self, topology: usize) -> bool {
        self.train_topologies.contains(&topology)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset config: {detail}")]
    BadConfig { detail: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] DfgJsonError),
    #[error("manifest error: {detail}")]
    Manifest { detail: String },
    #[error("label error in {path} line {line}: {detail}")]
    Label {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("generated graph {file} failed validation: {violations:?}")]
    InvalidGraph {
        file: String,
        violations: Vec<crate::dfg::Violation>,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

const TAG_TOPOLOGY: u64 = 1 << 40;
const TAG_DIRECTIVES: u64 = 2 << 40;

/// Generates, labels, and writes a dataset:
/// - `dfg_t<TTT>_v<VVV>.json` per variant,
/// - `labels.csv` with `file,lut,dsp,cp_ns,latency`,
/// - `manifest.json` recording the topology-level train/test split.
pub fn build_dataset(out_dir: &Path, cfg: &DatasetConfig) -> Result<DatasetManifest, DatasetError> {
    if cfg.topologies == 0 || cfg.variants == 0 {
        return Err(DatasetError::BadConfig {
            detail: "topologies and variants must be nonzero".to_string(),
        });
    }
    if cfg.train_topologies == 0 || cfg.train_topologies >= cfg.topologies {
        return Err(DatasetError::BadConfig {
            detail: format!(
                "train_topologies must be in 1..topologies (got {} of {})",
                cfg.train_topologies, cfg.topologies
            ),
        });
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;

    let mut files = Vec::new();
    let mut labels = String::from("file,lut,dsp,cp_ns,latency\n");
    for t in 0..cfg.topologies {
        let topo = generate_topology(subseed(cfg.seed, TAG_TOPOLOGY + t as u64), &cfg.topo);
        let latency = oracle::latency(&topo);
        for v in 0..cfg.variants {
            let file = format!("dfg_t{t:03}_v{v:03}.json");
            let dir_seed = subseed(cfg.seed, TAG_DIRECTIVES + (t * cfg.variants + v) as u64);
            let bits = sample_directives(&topo, dir_seed);
            let mut dfg = topo
                .with_assignment(&bits)
                .expect("assignment length matches by construction");
            dfg.set_name(file.trim_end_matches(".json").to_string());
            let violations = dfg.validate();
            if !violations.is_empty() {
                return Err(DatasetError::InvalidGraph { file, violations });
            }
            let costs = oracle::evaluate_unchecked::<f64>(&dfg);
            labels.push_str(&format!(
                "{file},{},{},{},{latency}\n",
                costs.lut, costs.dsp, costs.cp_ns
            ));
            dfg.write_json(&out_dir.join(&file))?;
            files.push(ManifestEntry {
                file,
                topology: t,
                variant: v,
            });
        }
    }

    let manifest = DatasetManifest {
        files,
        seed: cfg.seed,
        test_topologies: (cfg.train_topologies..cfg.topologies).collect(),
        train_topologies: (0..cfg.train_topologies).collect(),
        variants: cfg.variants,
    };

    let labels_path = out_dir.join("labels.csv");
    atomic_write(&labels_path, labels.as_bytes()).map_err(|e| io_err(&labels_path, e))?;
    let manifest_path = out_dir.join("manifest.json");
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    atomic_write(&manifest_path, manifest_json.as_bytes())
        .map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest)
}

/// One loaded dataset row.
#[derive(Clone, Debug)]
pub struct DatasetEntry {
    pub dfg: Dfg,
    pub file: String,
    pub topology: usize,
    pub is_train: bool,
    pub lut: u64,
    pub dsp: u64,
    pub cp_ns: f64,
    pub latency: u32,
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub entries: Vec<DatasetEntry>,
}

impl LoadedDataset {
    pub fn train_entries(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(|e| e.is_train)
    }

    pub fn test_entries(&self) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(|e| !e.is_train)
    }
}

/// Reads a dataset directory written by [`build_dataset`].
pub fn load_dataset(dir: &Path) -> Result<LoadedDataset, DatasetError> {
    let manifest_path = dir.join("manifest.json");
    let manifest_text =
        std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&manifest_text).map_err(|e| DatasetError::Manifest {
            detail: e.to_string(),
        })?;

    let labels_path = dir.join("labels.csv");
    let labels_text =
        std::fs::read_to_string(&labels_path).map_err(|e| io_err(&labels_path, e))?;
    let mut labels = std::collections::BTreeMap::new();
    for (i, line) in labels_text.lines().enumerate() {
        if i == 0 {
            if line != "file,lut,dsp,cp_ns,latency" {
                return Err(DatasetError::Label {
                    path: labels_path.display().to_string(),
                    line: 1,
                    detail: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(DatasetError::Label {
                path: labels_path.display().to_string(),
                line: i + 1,
                detail: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| DatasetError::Label {
            path: labels_path.display().to_string(),
            line: i + 1,
            detail: format!("bad {what} value"),
        };
        let lut: u64 = fields[1].parse().map_err(|_| parse_err("lut"))?;
        let dsp: u64 = fields[2].parse().map_err(|_| parse_err("dsp"))?;
        let cp_ns: f64 = fields[3].parse().map_err(|_| parse_err("cp_ns"))?;
        let latency: u32 = fields[4].parse().map_err(|_| parse_err("latency"))?;
        labels.insert(fields[0].to_string(), (lut, dsp, cp_ns, latency));
    }

    let mut entries = Vec::with_capacity(manifest.files.len());
    for entry in &manifest.files {
        let dfg = Dfg::read_json(&dir.join(&entry.file))?;
        let &(lut, dsp, cp_ns, latency) =
            labels.get(&entry.file).ok_or_else(|| DatasetError::Label {
                path: labels_path.display().to_string(),
                line: 0,
                detail: format!("no label row for {}", entry.file),
            })?;
        entries.push(DatasetEntry {
            dfg,
            file: entry.file.clone(),
            topology: entry.topology,
            is_train: manifest.is_train_topology(entry.topology),
            lut,
            dsp,
            cp_ns,
            latency,
        });
    }
    Ok(LoadedDataset { manifest, entries })
}
