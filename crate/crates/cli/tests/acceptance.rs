//! Acceptance gate for the whole pipeline: one test walks the nine
//! shipping criteria in order and prints one `[criterion N] PASS/FAIL`
//! line per criterion straight to stdout (bypassing libtest capture), then
//! fails if any criterion failed.
//!
//! Heavy fixtures (the benchmark dataset, the trained predictor, the
//! pretrained agent) are built once and cached under
//! `target/acceptance-cache` so criteria can share them; criterion 1
//! always retrains from scratch and refreshes the cache. Set
//! `ACCEPTANCE_ONLY=4,5` (comma-separated criterion numbers) to run a
//! subset while iterating; cached fixtures from an earlier full run are
//! reused then.

use dfgforge_core::baselines::{
    exhaustive_search, genetic_search, simulated_annealing, GaParams, SaParams,
};
use dfgforge_core::ct;
use dfgforge_core::datagen::{
    build_dataset, generate_topology, load_dataset, DatasetConfig, LoadedDataset, TopologyConfig,
    BITWIDTH_CHOICES,
};
use dfgforge_core::dfg::{Dfg, NodeKind};
use dfgforge_core::evaluator::OracleEvaluator;
use dfgforge_core::explore::{default_target_grid, max_dsp, parse_targets};
use dfgforge_core::features::GraphTensors;
use dfgforge_core::gpp::{
    self, mae_loss_grad, msle_loss_grad, GppModel, GppTrainConfig, LabeledGraph, TargetModel,
    TENSORS_PER_TARGET,
};
use dfgforge_core::gradcheck::sampled_distance;
use dfgforge_core::nn::subseed;
use dfgforge_core::oracle::{self, evaluate_unchecked, mul_dsp_cost};
use dfgforge_core::reward::{terminal_reward, CostPrediction, RewardParams};
use dfgforge_core::rlmd::train::{
    discounted_deltas, fine_tune, train_rlmd, FineTuneConfig, RlTrainConfig,
};
use dfgforge_core::rlmd::{ActorCritic, STATE_DIM};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

/// Root seed for every fixture and randomized check in this suite.
const SEED: u64 = 42;

type CriterionFn = fn(&mut Fixtures) -> Result<String, String>;

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY").ok().map(|s| {
        s.split(',')
            .filter_map(|p| p.trim().parse().ok())
            .collect()
    });
    let mut fx = Fixtures::new();
    let criteria: [(usize, CriterionFn); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = Vec::new();
    for (n, run) in criteria {
        if let Some(filter) = &only {
            if !filter.contains(&n) {
                emit(&format!("[criterion {n}] SKIP: filtered out by ACCEPTANCE_ONLY\n"));
                continue;
            }
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut fx)));
        let secs = started.elapsed().as_secs_f64();
        let line = match outcome {
            Ok(Ok(msg)) => format!("[criterion {n}] PASS: {msg} [{secs:.1}s]\n"),
            Ok(Err(msg)) => {
                failed.push(n);
                format!("[criterion {n}] FAIL: {msg} [{secs:.1}s]\n")
            }
            Err(payload) => {
                failed.push(n);
                let text = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "non-string panic payload".to_string());
                format!("[criterion {n}] FAIL: panicked: {text} [{secs:.1}s]\n")
            }
        };
        emit(&line);
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}

/// Prints directly to the real stdout so the per-criterion verdicts are
/// visible even though libtest captures `println!`.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).expect("stdout write");
    out.flush().expect("stdout flush");
}

fn workspace_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Fresh `Command` for the compiled CLI, isolated from ambient seed state.
fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dfgforge"));
    c.env_remove("DFGFORGE_SEED");
    c
}

fn run_cli(mut cmd: Command) -> Result<std::process::Output, String> {
    let out = cmd
        .output()
        .map_err(|e| format!("failed to launch the CLI: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "CLI {:?} exited with {}: {}",
            cmd.get_args().collect::<Vec<_>>(),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

/// Shared heavyweight fixtures, built lazily and cached on disk.
struct Fixtures {
    cache: PathBuf,
    dataset: Option<LoadedDataset>,
    gpp: Option<GppModel<f64>>,
    agent: Option<ActorCritic<f64>>,
}

impl Fixtures {
    fn new() -> Self {
        let cache = workspace_path("target/acceptance-cache");
        fs::create_dir_all(&cache).expect("create fixture cache dir");
        Fixtures {
            cache,
            dataset: None,
            gpp: None,
            agent: None,
        }
    }

    fn dataset_dir(&self) -> PathBuf {
        self.cache.join("dataset")
    }

    fn gpp_path(&self) -> PathBuf {
        self.cache.join("gpp.bin")
    }

    fn agent_path(&self) -> PathBuf {
        self.cache.join("agent.bin")
    }

    /// Benchmark dataset: 25 topologies x 50 directive variants, the first
    /// 20 topologies forming the training split. Generation is
    /// deterministic, so an existing cache is byte-equivalent to a rebuild.
    fn ensure_dataset(&mut self) -> Result<(), String> {
        if self.dataset.is_some() {
            return Ok(());
        }
        let dir = self.dataset_dir();
        if !dir.join("manifest.json").exists() {
            build_dataset(
                &dir,
                &DatasetConfig {
                    seed: SEED,
                    ..DatasetConfig::default()
                },
            )
            .map_err(|e| format!("dataset generation failed: {e}"))?;
        }
        self.dataset =
            Some(load_dataset(&dir).map_err(|e| format!("dataset load failed: {e}"))?);
        Ok(())
    }

    /// Trains the cost predictor on the training split and reports
    /// (lut_mape, cp_mape, dsp_rmse) on the held-out split. Always trains
    /// fresh; stores the model in memory and on disk for later criteria.
    fn train_gpp_fresh(&mut self) -> Result<(f64, f64, f64), String> {
        self.ensure_dataset()?;
        let ds = self.dataset.as_ref().unwrap();
        let mut samples = Vec::new();
        for e in ds.train_entries() {
            let tensors =
                GraphTensors::new(&e.dfg).map_err(|v| format!("bad training graph: {v:?}"))?;
            samples.push(LabeledGraph::with_labels(
                tensors,
                e.lut as f64,
                e.dsp as f64,
                e.cp_ns,
            ));
        }
        let cfg = GppTrainConfig {
            seed: SEED,
            ..GppTrainConfig::default()
        };
        let (model, _) =
            gpp::train(&samples, &cfg).map_err(|e| format!("training failed: {e}"))?;

        let (mut lp, mut lt) = (Vec::new(), Vec::new());
        let (mut dp, mut dt) = (Vec::new(), Vec::new());
        let (mut cp, mut ct_) = (Vec::new(), Vec::new());
        for e in ds.test_entries() {
            let pred = model
                .predict_dfg(&e.dfg)
                .map_err(|v| format!("bad test graph: {v:?}"))?;
            lp.push(pred.lut);
            lt.push(e.lut as f64);
            dp.push(pred.dsp);
            dt.push(e.dsp as f64);
            cp.push(pred.cp_ns);
            ct_.push(e.cp_ns);
        }
        let lut_mape = gpp::mape(&lp, &lt).map_err(|e| e.to_string())?;
        let cp_mape = gpp::mape(&cp, &ct_).map_err(|e| e.to_string())?;
        let dsp_rmse = gpp::rmse(&dp, &dt).map_err(|e| e.to_string())?;

        model
            .save(&self.gpp_path())
            .map_err(|e| format!("saving predictor: {e}"))?;
        self.gpp = Some(model);
        Ok((lut_mape, cp_mape, dsp_rmse))
    }

    fn ensure_gpp(&mut self) -> Result<(), String> {
        if self.gpp.is_some() {
            return Ok(());
        }
        let path = self.gpp_path();
        if path.exists() {
            self.gpp =
                Some(GppModel::load(&path).map_err(|e| format!("loading predictor: {e}"))?);
            return Ok(());
        }
        self.train_gpp_fresh().map(|_| ())
    }

    /// Pretrains the explorer agent against the predictor, over one cleared
    /// base design per training topology crossed with the default DSP
    /// target grid (the same task derivation the CLI uses).
    fn ensure_agent(&mut self) -> Result<(), String> {
        if self.agent.is_some() {
            return Ok(());
        }
        self.ensure_gpp()?;
        let path = self.agent_path();
        if path.exists() {
            self.agent =
                Some(ActorCritic::load(&path).map_err(|e| format!("loading agent: {e}"))?);
            return Ok(());
        }
        self.ensure_dataset()?;
        let ds = self.dataset.as_ref().unwrap();
        let mut bases: BTreeMap<usize, Dfg> = BTreeMap::new();
        for e in ds.train_entries() {
            bases.entry(e.topology).or_insert_with(|| {
                e.dfg
                    .with_assignment(&vec![false; e.dfg.mul_count()])
                    .expect("assignment sized to the graph")
            });
        }
        let mut tasks = Vec::new();
        for base in bases.values() {
            for target in default_target_grid(base) {
                tasks.push((base.clone(), target));
            }
        }
        let cfg = RlTrainConfig {
            seed: SEED,
            ..RlTrainConfig::default()
        };
        let (agent, _) = train_rlmd(self.gpp.as_ref().unwrap(), &tasks, &cfg)
            .map_err(|e| format!("agent pretraining failed: {e}"))?;
        agent
            .save(&path)
            .map_err(|e| format!("saving agent: {e}"))?;
        self.agent = Some(agent);
        Ok(())
    }
}

/// Criterion 1: train the predictor on 20 topologies x 50 variants and
/// evaluate on 5 held-out topologies x 50 variants; LUT MAPE <= 10%,
/// CP MAPE <= 6%, DSP RMSE <= 6, end-to-end runtime <= 20 minutes.
fn criterion_1(fx: &mut Fixtures) -> Result<String, String> {
    let t0 = Instant::now();
    let (lut_mape, cp_mape, dsp_rmse) = fx.train_gpp_fresh()?;
    let secs = t0.elapsed().as_secs_f64();
    let msg = format!(
        "held-out LUT MAPE {lut_mape:.2}% (<=10), CP MAPE {cp_mape:.2}% (<=6), \
         DSP RMSE {dsp_rmse:.2} (<=6), runtime {secs:.0}s (<=1200)"
    );
    if lut_mape <= 10.0 && cp_mape <= 6.0 && dsp_rmse <= 6.0 && secs <= 1200.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 2: analytic gradients of both networks match central finite
/// differences (normalized distance < 1e-4) on at least 20 random small
/// graphs and 20 random states.
fn criterion_2(_fx: &mut Fixtures) -> Result<String, String> {
    let mut worst = 0.0_f64;
    let mut worst_case = String::new();
    let mut over = 0usize;
    let mut checks = 0usize;
    let mut coords_total = 0usize;
    let mut coords_kinked = 0usize;

    // Predictor: per-target model over random small graphs, alternating
    // pooling scale and loss.
    let topo = TopologyConfig {
        ops_range: (4, 12),
        inputs_range: (2, 5),
        ..TopologyConfig::default()
    };
    for i in 0..20u64 {
        let dfg = generate_topology(subseed(SEED, 200 + i), &topo);
        let tensors = GraphTensors::new(&dfg).map_err(|v| format!("graph tensors: {v:?}"))?;
        let x = tensors.features().clone();
        let adj = tensors.adj().clone();
        let scale = i % 2 == 0;
        let use_msle = i % 3 != 0;
        let mut model = TargetModel::<f64>::new(subseed(SEED, 300 + i), scale);
        model.output_scale = 0.5 + i as f64 * 0.25;

        let fwd = model.forward(&x, &adj);
        let truth = fwd.prediction * 1.5 + 7.0;
        let d_pred = if use_msle {
            msle_loss_grad(fwd.prediction, truth).1
        } else {
            mae_loss_grad(fwd.prediction, truth).1
        };
        let analytic = model.backward(&x, &adj, &fwd, d_pred);

        let mut rng = ChaCha8Rng::seed_from_u64(subseed(SEED, 400 + i));
        for t_idx in 0..TENSORS_PER_TARGET {
            let mut probe = model.params()[t_idx].clone();
            let len = probe.len();
            let coords: Vec<usize> = (0..len.min(12)).map(|_| rng.gen_range(0..len)).collect();
            let mut loss = |p: &Array2<f64>| {
                let mut m = model.clone();
                m.params_mut()[t_idx].assign(p);
                let f = m.forward(&x, &adj);
                if use_msle {
                    msle_loss_grad(f.prediction, truth).0
                } else {
                    mae_loss_grad(f.prediction, truth).0
                }
            };
            let numeric = smooth_fd(&mut probe, &coords, &mut loss, &mut coords_kinked);
            coords_total += coords.len();
            let d = sampled_distance(&analytic[t_idx], &numeric);
            if !d.is_finite() {
                return Err(format!("non-finite gradient distance on graph {i}"));
            }
            if d > 1e-4 {
                over += 1;
            }
            if d > worst {
                worst = d;
                worst_case = format!("graph {i} tensor {t_idx} (msle={use_msle})");
            }
            checks += 1;
        }
    }

    // Explorer agent: the per-step policy-gradient loss over random states.
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(SEED, 500 + i));
        let state = Array2::from_shape_fn((1, STATE_DIM), |_| rng.gen_range(-1.0..1.0));
        let net = ActorCritic::<f64>::new(subseed(SEED, 600 + i));
        let delta: f64 = rng.gen_range(-2.0..2.0);
        let action = (i % 2) as usize;

        let loss_of = |m: &ActorCritic<f64>| {
            let f = m.forward(&state);
            -delta * (f.value + f.log_probs[action])
        };
        let fwd = net.forward(&state);
        let mut d_logits = [delta * fwd.probs[0], delta * fwd.probs[1]];
        d_logits[action] -= delta;
        let analytic = net.backward(&state, &fwd, d_logits, -delta);

        for t_idx in 0..ActorCritic::<f64>::param_names().len() {
            let mut probe = net.params()[t_idx].clone();
            let len = probe.len();
            let coords: Vec<usize> = (0..len.min(12)).map(|_| rng.gen_range(0..len)).collect();
            let mut loss = |p: &Array2<f64>| {
                let mut m = net.clone();
                m.params_mut()[t_idx].assign(p);
                loss_of(&m)
            };
            let numeric = smooth_fd(&mut probe, &coords, &mut loss, &mut coords_kinked);
            coords_total += coords.len();
            let d = sampled_distance(&analytic[t_idx], &numeric);
            if !d.is_finite() {
                return Err(format!("non-finite gradient distance on state {i}"));
            }
            if d > 1e-4 {
                over += 1;
            }
            if d > worst {
                worst = d;
                worst_case = format!("state {i} tensor {t_idx}");
            }
            checks += 1;
        }
    }

    let msg = format!(
        "worst normalized gradient distance {worst:.2e} at {worst_case}; {over}/{checks} \
         tensors over 1e-4; {coords_kinked}/{coords_total} coordinates excluded as \
         non-smooth (20 graphs + 20 states)"
    );
    if worst < 1e-4 && coords_kinked * 100 <= coords_total {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Central differences restricted to `coords`, validated at two step
/// sizes. The activations are piecewise linear, so a coordinate whose
/// probe window straddles a kink yields step-size-dependent estimates;
/// central differences carry no information there, and such coordinates
/// (counted in `kinked`) are excluded. The caller caps the excluded
/// fraction so a systematic mismatch cannot hide behind the filter.
fn smooth_fd(
    param: &mut Array2<f64>,
    coords: &[usize],
    loss: &mut dyn FnMut(&Array2<f64>) -> f64,
    kinked: &mut usize,
) -> Vec<(usize, f64)> {
    let estimate = |param: &mut Array2<f64>, idx: usize, h: f64, loss: &mut dyn FnMut(&Array2<f64>) -> f64| {
        let (r, c) = (idx / param.ncols(), idx % param.ncols());
        let orig = param[[r, c]];
        param[[r, c]] = orig + h;
        let up = loss(param);
        param[[r, c]] = orig - h;
        let down = loss(param);
        param[[r, c]] = orig;
        (up - down) / (2.0 * h)
    };
    let mut kept = Vec::with_capacity(coords.len());
    for &idx in coords {
        let wide = estimate(param, idx, 1e-5, loss);
        let narrow = estimate(param, idx, 5e-6, loss);
        if (wide - narrow).abs() <= 1e-3 * wide.abs().max(narrow.abs()).max(1e-6) {
            kept.push((idx, narrow));
        } else {
            *kinked += 1;
        }
    }
    kept
}

/// Criterion 3: latency never depends on the pragma assignment (1000
/// random cases), and flagging a single multiplier trades exactly
/// `b^2 - 2b` LUTs for `dsp(b)` DSPs at every generator bitwidth.
fn criterion_3(_fx: &mut Fixtures) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(SEED, 700));
    let topo = TopologyConfig {
        ops_range: (3, 30),
        inputs_range: (1, 6),
        ..TopologyConfig::default()
    };
    for case in 0..1000 {
        let dfg = generate_topology(rng.gen(), &topo);
        let base = oracle::latency(&dfg);
        let m = dfg.mul_count();
        let random: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        let with_random = dfg.with_assignment(&random).expect("sized assignment");
        let with_all = dfg.with_assignment(&vec![true; m]).expect("sized assignment");
        if oracle::latency(&with_random) != base || oracle::latency(&with_all) != base {
            return Err(format!("latency changed with the assignment on case {case}"));
        }
    }

    for &b in &BITWIDTH_CHOICES {
        let src = format!("in a:int{b};\nin c:int{b};\nout y:int{b};\ny = a*c;\n");
        let prog = ct::parser::parse(&src).map_err(|e| format!("parse int{b}: {e}"))?;
        let lowered = ct::lower::lower(&prog).map_err(|e| format!("lower int{b}: {e}"))?;
        let plain = lowered.dfg.with_assignment(&[false]).expect("one mul");
        let flagged = lowered.dfg.with_assignment(&[true]).expect("one mul");
        let costs_plain = evaluate_unchecked::<f64>(&plain);
        let costs_flagged = evaluate_unchecked::<f64>(&flagged);
        let b64 = b as u64;
        if costs_flagged.lut + 2 * b64 != costs_plain.lut + b64 * b64 {
            return Err(format!(
                "LUT exchange at int{b}: plain {} vs flagged {} (want +{})",
                costs_plain.lut,
                costs_flagged.lut,
                b64 * b64 - 2 * b64
            ));
        }
        if costs_flagged.dsp != 0 || costs_plain.dsp != mul_dsp_cost(b) {
            return Err(format!(
                "DSP exchange at int{b}: plain {} -> flagged {} (want dsp(b) {} -> 0)",
                costs_plain.dsp,
                costs_flagged.dsp,
                mul_dsp_cost(b)
            ));
        }
    }
    Ok(format!(
        "latency assignment-invariant on 1000 random graphs; exact b^2-2b LUT / dsp(b) DSP \
         exchange at bitwidths {BITWIDTH_CHOICES:?}"
    ))
}

/// Criterion 4: on 25 random graphs with at most 12 multipliers, the
/// fine-tuned agent (500 episodes) reaches a reward within 5% of the
/// exhaustive optimum in every case and hits the exact DSP target in at
/// least 90% of cases.
fn criterion_4(fx: &mut Fixtures) -> Result<String, String> {
    fx.ensure_agent()?;
    let gpp_model = fx.gpp.as_ref().unwrap();
    let agent0 = fx.agent.as_ref().unwrap();
    let params = RewardParams::<f64>::default();
    let topo = TopologyConfig {
        ops_range: (8, 26),
        inputs_range: (2, 6),
        ..TopologyConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(SEED, 800));
    let mut cases = 0u64;
    let (mut within, mut hits) = (0usize, 0usize);
    let mut worst_gap = 0.0_f64;
    while cases < 25 {
        let dfg = generate_topology(rng.gen(), &topo);
        let m = dfg.mul_count();
        if !(2..=12).contains(&m) {
            continue;
        }
        // An achievable target: the DSP usage of a random assignment.
        let probe: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
        let target =
            evaluate_unchecked::<f64>(&dfg.with_assignment(&probe).expect("sized")).dsp as u32;

        let mut ev = OracleEvaluator::new(&dfg);
        let opt = exhaustive_search(&mut ev, target, &params)
            .map_err(|e| format!("exhaustive search: {e}"))?;

        let mut agent = agent0.clone();
        let mut ev = OracleEvaluator::new(&dfg);
        // Budget 501 = the greedy seed evaluation + exactly 500 episodes.
        let cfg = FineTuneConfig {
            budget: 501,
            seed: subseed(SEED, 900 + cases),
            ..FineTuneConfig::default()
        };
        let res = fine_tune(&mut agent, gpp_model, &dfg, target, &mut ev, &cfg)
            .map_err(|e| format!("fine-tuning: {e}"))?;

        let gap = opt.reward - res.reward;
        worst_gap = worst_gap.max(gap / opt.reward.abs().max(1e-12));
        if res.reward >= opt.reward - 0.05 * opt.reward.abs() {
            within += 1;
        } else if std::env::var("ACCEPTANCE_DEBUG").is_ok() {
            let widths: Vec<u8> = dfg
                .nodes()
                .iter()
                .filter(|n| matches!(n.kind, NodeKind::Mul))
                .map(|n| n.bitwidth)
                .collect();
            emit(&format!(
                "  [c4 case {cases}] m={m} target={target} widths={widths:?} \
                 opt={:.4}@{:?} rl={:.4}@{:?}\n",
                opt.reward, opt.assignment, res.reward, res.assignment
            ));
        }
        let got =
            evaluate_unchecked::<f64>(&dfg.with_assignment(&res.assignment).expect("sized")).dsp;
        if got as u32 == target {
            hits += 1;
        }
        cases += 1;
    }
    let msg = format!(
        "{within}/25 within 5% of the exhaustive optimum (worst gap {:.2}%), \
         exact DSP target hit {hits}/25 (need >=23)",
        worst_gap * 100.0
    );
    if within == 25 && hits >= 23 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 5: under equal 2000-evaluation budgets on 20 held-out
/// (graph, target) pairs, the fine-tuned agent's LUT cost is at most the
/// annealer's and the genetic searcher's on at least 60% of pairs, and its
/// exact-target hit count is strictly higher than both.
fn criterion_5(fx: &mut Fixtures) -> Result<String, String> {
    fx.ensure_agent()?;
    let gpp_model = fx.gpp.as_ref().unwrap();
    let agent0 = fx.agent.as_ref().unwrap();
    let params = RewardParams::<f64>::default();
    let budget = 2000usize;
    let topo = TopologyConfig {
        ops_range: (24, 48),
        inputs_range: (4, 10),
        ..TopologyConfig::default()
    };
    let mut pairs = 0usize;
    let mut lut_wins = 0usize;
    let (mut rl_hits, mut sa_hits, mut ga_hits) = (0usize, 0usize, 0usize);
    for t in 0..5u64 {
        // Fresh topology seeds: disjoint from every dataset stream, so these
        // graphs are held out by construction.
        let dfg = generate_topology(subseed(SEED, 1000 + t), &topo);
        let targets =
            parse_targets("20:80:20%", max_dsp(&dfg)).map_err(|e| format!("target grid: {e}"))?;
        for (ti, &target) in targets.iter().enumerate() {
            let tag = 1100 + t * 10 + ti as u64;

            let mut agent = agent0.clone();
            let mut ev = OracleEvaluator::new(&dfg);
            let cfg = FineTuneConfig {
                budget,
                seed: subseed(SEED, tag),
                ..FineTuneConfig::default()
            };
            let rl = fine_tune(&mut agent, gpp_model, &dfg, target, &mut ev, &cfg)
                .map_err(|e| format!("fine-tuning: {e}"))?;
            let rl_costs =
                evaluate_unchecked::<f64>(&dfg.with_assignment(&rl.assignment).expect("sized"));

            let mut ev = OracleEvaluator::new(&dfg);
            let sa = simulated_annealing(
                &mut ev,
                target,
                &params,
                budget,
                subseed(SEED, tag + 1000),
                &SaParams::default(),
            );
            let sa_costs =
                evaluate_unchecked::<f64>(&dfg.with_assignment(&sa.assignment).expect("sized"));

            let mut ev = OracleEvaluator::new(&dfg);
            let ga = genetic_search(
                &mut ev,
                target,
                &params,
                budget,
                subseed(SEED, tag + 2000),
                &GaParams::default(),
                None,
            );
            let ga_costs =
                evaluate_unchecked::<f64>(&dfg.with_assignment(&ga.assignment).expect("sized"));

            if rl_costs.lut <= sa_costs.lut && rl_costs.lut <= ga_costs.lut {
                lut_wins += 1;
            }
            rl_hits += usize::from(rl_costs.dsp as u32 == target);
            sa_hits += usize::from(sa_costs.dsp as u32 == target);
            ga_hits += usize::from(ga_costs.dsp as u32 == target);
            pairs += 1;
        }
    }
    let msg = format!(
        "LUT <= both baselines on {lut_wins}/{pairs} pairs (need >={}), exact-target hits \
         rl {rl_hits} vs sa {sa_hits} / ga {ga_hits} (need strictly higher)",
        pairs * 3 / 5
    );
    if lut_wins * 5 >= pairs * 3 && rl_hits > sa_hits && rl_hits > ga_hits {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Criterion 6: the worked reward example and its temporal-difference
/// vector are reproduced bit-exactly.
fn criterion_6(_fx: &mut Fixtures) -> Result<String, String> {
    let costs = CostPrediction {
        lut: 1000.0_f64,
        dsp: 4.0,
        cp_ns: 5.0,
    };
    let r = terminal_reward(&costs, 4, &RewardParams::default());
    if r.to_bits() != (-2.1_f64).to_bits() {
        return Err(format!("reward {r:?} != -2.1"));
    }
    let deltas =
        discounted_deltas(Some(r), &[0.0_f64; 3], 0.95).map_err(|e| format!("deltas: {e}"))?;
    // The middle delta is gamma * r. Its decimal value -1.995 is exact in
    // hand arithmetic, but no correctly rounded f64 product of 0.95 and
    // -2.1 can land on the f64 nearest that decimal (it falls one ulp
    // short), so the bit-exact reference is the rounded product itself.
    let expected = [-1.89525_f64, 0.95_f64 * -2.1, -2.1];
    for (k, (d, e)) in deltas.iter().zip(expected).enumerate() {
        if d.to_bits() != e.to_bits() {
            return Err(format!("delta[{k}] = {d:?}, want {e:?}"));
        }
    }
    if (deltas[1] - (-1.995)).abs() > f64::EPSILON {
        return Err(format!(
            "delta[1] = {:?} farther than one ulp from -1.995",
            deltas[1]
        ));
    }
    Ok(
        "reward -2.1 and deltas [-1.89525, -1.995 (one ulp, the correctly rounded product), \
         -2.1] bit-exact"
            .to_string(),
    )
}

/// Criterion 7: the AST walker and the lowered-graph interpreter agree on
/// 200 random programs; the 8-term multiply-accumulate kernel lowers to
/// 8 muls, 7 adds, latency 4; emitted pragma counts equal the assignment
/// popcount.
fn criterion_7(_fx: &mut Fixtures) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(SEED, 1300));
    for p in 0..200 {
        let (src, input_keys) = random_program(&mut rng);
        let prog = ct::parser::parse(&src)
            .map_err(|e| format!("generated program {p} failed to parse: {e}\n{src}"))?;
        let lowered = ct::lower::lower(&prog)
            .map_err(|e| format!("generated program {p} failed to lower: {e}\n{src}"))?;
        for _ in 0..3 {
            let mut inputs = BTreeMap::new();
            for k in &input_keys {
                inputs.insert(k.clone(), rng.gen::<u64>());
            }
            let via_ast = ct::interp::eval_program(&prog, &inputs)
                .map_err(|e| format!("AST walk of program {p}: {e}\n{src}"))?;
            let via_dfg = ct::interp::eval_dfg(&lowered, &inputs)
                .map_err(|e| format!("graph eval of program {p}: {e}\n{src}"))?;
            if via_ast != via_dfg {
                return Err(format!(
                    "interpreters disagree on program {p}:\n{src}\nAST: {via_ast:?}\nDFG: {via_dfg:?}"
                ));
            }
        }
    }

    let mac8_src = fs::read_to_string(workspace_path("kernels/mac8.ct"))
        .map_err(|e| format!("reading kernels/mac8.ct: {e}"))?;
    let mac8 = ct::lower::lower(&ct::parser::parse(&mac8_src).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let muls = mac8
        .dfg
        .nodes()
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Mul))
        .count();
    let adds = mac8
        .dfg
        .nodes()
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Add))
        .count();
    let lat = oracle::latency(&mac8.dfg);
    if (muls, adds, lat) != (8, 7, 4) {
        return Err(format!(
            "mac8 shape: {muls} muls / {adds} adds / latency {lat}, want 8 / 7 / 4"
        ));
    }

    // Pragma round trip: the emitted source carries exactly one directive
    // per flagged multiplier.
    for k in 0..=8usize {
        let assignment: Vec<bool> = (0..8).map(|i| i < k).collect();
        let emitted = ct::emit::emit_code(&mac8.dfg.with_assignment(&assignment).expect("8 muls"));
        let pragmas = emitted
            .lines()
            .filter(|l| l.trim_start().starts_with("#pragma"))
            .count();
        if pragmas != k {
            return Err(format!("emitted {pragmas} pragmas for popcount {k}"));
        }
    }
    let mixed_src = fs::read_to_string(workspace_path("kernels/mixed_pragma.ct"))
        .map_err(|e| format!("reading kernels/mixed_pragma.ct: {e}"))?;
    let mixed = ct::lower::lower(&ct::parser::parse(&mixed_src).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let popcount = mixed.dfg.assignment().iter().filter(|&&b| b).count();
    let emitted = ct::emit::emit_code(&mixed.dfg);
    let pragmas = emitted
        .lines()
        .filter(|l| l.trim_start().starts_with("#pragma"))
        .count();
    if popcount != 1 || pragmas != popcount {
        return Err(format!(
            "mixed-pragma kernel: popcount {popcount}, emitted pragmas {pragmas}"
        ));
    }

    Ok(
        "AST and graph interpreters agree on 200 random programs (3 input sets each); \
         mac8 = 8 muls / 7 adds / latency 4; emitted pragma count equals assignment popcount"
            .to_string(),
    )
}

/// Criterion 8: the full CLI pipeline (gen-dataset, train-gpp, train-rlmd,
/// dse) produces byte-identical artifacts across two runs with the same
/// seed.
fn criterion_8(_fx: &mut Fixtures) -> Result<String, String> {
    let base = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
    for run in 0..2 {
        let dir = base.path().join(format!("run{run}"));
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let cfg = dir.join("pipeline.conf");
        fs::write(
            &cfg,
            "dataset.topologies=4\ndataset.variants=3\ndataset.train-topologies=3\n\
             gpp.epochs=3\nrl.episodes=10\n",
        )
        .map_err(|e| e.to_string())?;
        let ds = dir.join("dataset");
        let gpp_bin = dir.join("gpp.bin");
        let agent_bin = dir.join("agent.bin");

        let mut c = cli();
        c.args(["--quiet", "--seed", "7", "--config"])
            .arg(&cfg)
            .args(["gen-dataset", "--out"])
            .arg(&ds);
        run_cli(c)?;

        let mut c = cli();
        c.args(["--quiet", "--seed", "7", "--config"])
            .arg(&cfg)
            .args(["train-gpp", "--dataset"])
            .arg(&ds)
            .arg("--out")
            .arg(&gpp_bin)
            .arg("--losses")
            .arg(dir.join("losses.csv"));
        run_cli(c)?;

        let mut c = cli();
        c.args(["--quiet", "--seed", "7", "--config"])
            .arg(&cfg)
            .args(["train-rlmd", "--dataset"])
            .arg(&ds)
            .arg("--gpp")
            .arg(&gpp_bin)
            .arg("--out")
            .arg(&agent_bin)
            .arg("--log")
            .arg(dir.join("rlmd_log.csv"));
        run_cli(c)?;

        let mut c = cli();
        c.args(["--quiet", "--seed", "7", "--config"])
            .arg(&cfg)
            .args(["dse", "--dfg"])
            .arg(ds.join("dfg_t000_v000.json"))
            .args(["--dsp-target", "5", "--agent"])
            .arg(&agent_bin)
            .arg("--gpp")
            .arg(&gpp_bin)
            .args(["--finetune", "10", "--out"])
            .arg(dir.join("dse"));
        run_cli(c)?;

        let mut files = BTreeMap::new();
        collect_files(&dir, Path::new(""), &mut files)?;
        trees.push(files);
    }
    let (a, b) = (&trees[0], &trees[1]);
    if a.keys().collect::<Vec<_>>() != b.keys().collect::<Vec<_>>() {
        return Err(format!(
            "runs produced different file sets: {:?} vs {:?}",
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>()
        ));
    }
    for (path, bytes) in a {
        if b[path] != *bytes {
            return Err(format!("artifact differs between runs: {path}"));
        }
    }
    Ok(format!(
        "{} artifacts byte-identical across two seed-7 pipeline runs \
         (gen-dataset, train-gpp, train-rlmd, dse)",
        a.len()
    ))
}

/// Criterion 9: greedy `dse` inference on a 200-operation graph finishes
/// in under 5 seconds, and exhaustive search over 12 multipliers finishes
/// in under 60 seconds.
fn criterion_9(fx: &mut Fixtures) -> Result<String, String> {
    fx.ensure_agent()?; // guarantees gpp.bin / agent.bin exist on disk
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;

    let topo = TopologyConfig {
        ops_range: (200, 200),
        inputs_range: (10, 30),
        ..TopologyConfig::default()
    };
    let big = generate_topology(subseed(SEED, 1400), &topo);
    let ops = big
        .nodes()
        .iter()
        .filter(|n| matches!(n.kind, NodeKind::Add | NodeKind::Mul))
        .count();
    let big_path = dir.path().join("big.json");
    big.write_json(&big_path).map_err(|e| e.to_string())?;
    let target = (max_dsp(&big) * 2 / 5) as u32;

    let t0 = Instant::now();
    let mut c = cli();
    c.args(["--quiet", "dse", "--dfg"])
        .arg(&big_path)
        .arg("--dsp-target")
        .arg(target.to_string())
        .arg("--agent")
        .arg(fx.agent_path())
        .arg("--gpp")
        .arg(fx.gpp_path())
        .args(["--finetune", "0", "--out"])
        .arg(dir.path().join("dse"));
    run_cli(c)?;
    let dse_secs = t0.elapsed().as_secs_f64();

    let small_topo = TopologyConfig {
        ops_range: (20, 30),
        inputs_range: (3, 8),
        ..TopologyConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(SEED, 1500));
    let dfg12 = loop {
        let d = generate_topology(rng.gen(), &small_topo);
        if d.mul_count() == 12 {
            break d;
        }
    };
    let target12 = (max_dsp(&dfg12) / 2) as u32;
    let mut ev = OracleEvaluator::new(&dfg12);
    let t1 = Instant::now();
    let res = exhaustive_search(&mut ev, target12, &RewardParams::<f64>::default())
        .map_err(|e| format!("exhaustive search: {e}"))?;
    let ex_secs = t1.elapsed().as_secs_f64();
    if res.evaluator_calls != 1 << 12 {
        return Err(format!(
            "exhaustive search made {} evaluations, want 4096",
            res.evaluator_calls
        ));
    }

    let msg = format!(
        "greedy dse on a {ops}-op graph took {dse_secs:.2}s (<5); exhaustive search over \
         12 multipliers (4096 evaluations) took {ex_secs:.2}s (<60)"
    );
    if dse_secs < 5.0 && ex_secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn collect_files(
    root: &Path,
    rel: &Path,
    out: &mut BTreeMap<String, Vec<u8>>,
) -> Result<(), String> {
    let dir = root.join(rel);
    for entry in fs::read_dir(&dir).map_err(|e| format!("reading {}: {e}", dir.display()))? {
        let entry = entry.map_err(|e| e.to_string())?;
        let name = entry
            .file_name()
            .into_string()
            .map_err(|_| "non-UTF-8 file name".to_string())?;
        let sub = rel.join(&name);
        if entry.file_type().map_err(|e| e.to_string())?.is_dir() {
            collect_files(root, &sub, out)?;
        } else {
            let bytes =
                fs::read(root.join(&sub)).map_err(|e| format!("reading {}: {e}", sub.display()))?;
            out.insert(sub.to_string_lossy().into_owned(), bytes);
        }
    }
    Ok(())
}

/// A random source program exercising scalars, arrays, accumulation
/// loops, array-element loops, and multiplier pragmas. Every atom is
/// assigned before use and every output slot is assigned, so both
/// interpreters must accept the program.
fn random_program(rng: &mut ChaCha8Rng) -> (String, Vec<String>) {
    let mut decls: Vec<String> = Vec::new();
    let mut stmts: Vec<String> = Vec::new();
    let mut atoms: Vec<String> = Vec::new();
    let mut input_keys: Vec<String> = Vec::new();
    let mut arrays: Vec<(String, u64)> = Vec::new();

    let n_inputs = rng.gen_range(1..=3);
    for i in 0..n_inputs {
        let w = rng.gen_range(2..=32);
        let name = format!("a{i}");
        if rng.gen_bool(0.4) {
            let len = rng.gen_range(2..=4) as u64;
            decls.push(format!("in {name}:int{w}[{len}];"));
            for j in 0..len {
                atoms.push(format!("{name}[{j}]"));
                input_keys.push(format!("{name}[{j}]"));
            }
            arrays.push((name, len));
        } else {
            decls.push(format!("in {name}:int{w};"));
            atoms.push(name.clone());
            input_keys.push(name);
        }
    }

    let n_vars = rng.gen_range(0..=2);
    for v in 0..n_vars {
        let w = rng.gen_range(2..=32);
        let name = format!("t{v}");
        decls.push(format!("var {name}:int{w};"));
        if rng.gen_bool(0.35) && !atoms.is_empty() {
            // A pure product, the only statement shape a pragma may target.
            let x = atoms[rng.gen_range(0..atoms.len())].clone();
            let y = atoms[rng.gen_range(0..atoms.len())].clone();
            stmts.push(format!("#pragma HLS resource variable={name} core=Mul_LUT"));
            stmts.push(format!("{name} = {x}*{y};"));
        } else {
            stmts.push(format!("{name} = {};", rand_expr(rng, &atoms)));
        }
        atoms.push(name);
    }

    let n_outs = rng.gen_range(1..=2);
    for o in 0..n_outs {
        let w = rng.gen_range(2..=32);
        let name = format!("y{o}");
        if rng.gen_bool(0.3) {
            // Array output, with a loop covering every slot exactly.
            let len = rng.gen_range(2..=3) as u64;
            decls.push(format!("out {name}:int{w}[{len}];"));
            let candidates: Vec<(String, u64)> = arrays
                .iter()
                .filter(|(_, l)| *l >= len)
                .cloned()
                .collect();
            let body = if !candidates.is_empty() && rng.gen_bool(0.7) {
                let (arr, _) = &candidates[rng.gen_range(0..candidates.len())];
                format!(
                    "{name}[i] = {arr}[i]*{} + {};",
                    rng.gen_range(1..=9),
                    rng.gen_range(1..=9)
                )
            } else {
                format!("{name}[i] = {};", rand_expr(rng, &atoms))
            };
            stmts.push(format!("for i in 0..{len} {{"));
            stmts.push(format!("    {body}"));
            stmts.push("}".to_string());
        } else {
            decls.push(format!("out {name}:int{w};"));
            if !arrays.is_empty() && rng.gen_bool(0.5) {
                // Multiply-accumulate over the shorter of two arrays.
                let (xa, xl) = arrays[rng.gen_range(0..arrays.len())].clone();
                let (ya, yl) = arrays[rng.gen_range(0..arrays.len())].clone();
                let len = xl.min(yl);
                if rng.gen_bool(0.5) {
                    stmts.push(format!("{name} = {};", rng.gen_range(1..=9)));
                }
                stmts.push(format!("for i in 0..{len} {{"));
                stmts.push(format!("    {name} += {xa}[i]*{ya}[i];"));
                stmts.push("}".to_string());
            } else {
                stmts.push(format!("{name} = {};", rand_expr(rng, &atoms)));
                if rng.gen_bool(0.4) {
                    stmts.push(format!("{name} += {};", rand_expr(rng, &atoms)));
                }
            }
        }
    }

    (
        format!("{}\n{}\n", decls.join("\n"), stmts.join("\n")),
        input_keys,
    )
}

/// Sum of one to three terms, each one or two factors drawn from the
/// readable atoms and small constants.
fn rand_expr(rng: &mut ChaCha8Rng, atoms: &[String]) -> String {
    let terms = rng.gen_range(1..=3);
    let mut parts = Vec::with_capacity(terms);
    for _ in 0..terms {
        let factors = rng.gen_range(1..=2);
        let mut fs = Vec::with_capacity(factors);
        for _ in 0..factors {
            if atoms.is_empty() || rng.gen_bool(0.25) {
                fs.push(rng.gen_range(1..=9).to_string());
            } else {
                fs.push(atoms[rng.gen_range(0..atoms.len())].clone());
            }
        }
        parts.push(fs.join("*"));
    }
    parts.join(" + ")
}
