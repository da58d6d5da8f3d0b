//! Design-space sweeps and engine comparison.
//!
//! A sweep runs one search engine over a grid of DSP targets on a single
//! topology, re-scores every winning assignment with the exact analytic
//! model, and reports per-target records plus the nondominated (DSP, LUT)
//! frontier. The comparison report aggregates records engine by engine:
//! how often the exact DSP target was met, the mean achieved/target ratio,
//! and the mean LUT cost over met targets. Everything except wall-clock
//! runtime is deterministic for a seed; runtime appears only in the
//! per-run records and never feeds the frontier or the comparison, so
//! those artifacts are byte-reproducible. Report arithmetic uses only
//! fields present in the records CSV, so a report can be recomputed from
//! the CSV alone.
//!
//! Per-target runs are independent and execute on separate threads; the
//! merge is by target order, so concurrency never changes the output.

use crate::baselines::{
    exhaustive_search, genetic_search, simulated_annealing, GaParams, SaParams,
};
use crate::dfg::Dfg;
use crate::evaluator::{CostEvaluator, OracleEvaluator};
use crate::gpp::GppModel;
use crate::nn::subseed;
use crate::oracle::{self, CostTriple};
use crate::reward::RewardParams;
use crate::rlmd::{fine_tune, ActorCritic, FineTuneConfig};
use crate::scalar::Scalar;
use std::fmt::Write as _;
use std::time::Instant;

/// A search engine a sweep can run.
#[derive(Copy, Clone)]
pub enum DseMethod<'a, T: Scalar> {
    Exhaustive,
    Annealing,
    Genetic,
    /// Greedy decode from the pretrained agent, then budgeted fine-tuning
    /// against the exact evaluator. The sweep clones the agent per target,
    /// so every target fine-tunes from the same pretrained weights.
    Rlmd {
        agent: &'a ActorCritic<T>,
        gpp: &'a GppModel<T>,
    },
}

impl<T: Scalar> DseMethod<'_, T> {
    pub fn name(&self) -> &'static str {
        match self {
            DseMethod::Exhaustive => "exhaustive",
            DseMethod::Annealing => "sa",
            DseMethod::Genetic => "ga",
            DseMethod::Rlmd { .. } => "rlmd",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig<T> {
    /// Evaluator-call budget per target. Exhaustive search ignores it (it
    /// either enumerates everything or refuses).
    pub budget: usize,
    pub seed: u64,
    pub reward: RewardParams<T>,
    pub sa: SaParams<T>,
    pub ga: GaParams<T>,
    /// Budget/seed fields are overridden per run; the learning constants
    /// apply to the RLMD engine's fine-tuning.
    pub fine_tune: FineTuneConfig<T>,
}

impl<T: Scalar> Default for SweepConfig<T> {
    fn default() -> Self {
        SweepConfig {
            budget: 500,
            seed: 0,
            reward: RewardParams::default(),
            sa: SaParams::default(),
            ga: GaParams::default(),
            fine_tune: FineTuneConfig::default(),
        }
    }
}

/// One completed target run, scored by the exact model.
#[derive(Clone, Debug)]
pub struct SweepRecord<T> {
    pub dsp_target: u32,
    pub engine: String,
    pub assignment: Vec<bool>,
    pub reward: T,
    pub lut: u64,
    pub dsp: u64,
    pub cp_ns: T,
    /// Schedule depth in op levels; assignment-independent, so constant
    /// across a sweep.
    pub latency: u32,
    pub evaluator_calls: usize,
    pub runtime_ms: f64,
}

/// A target run that could not produce a result.
#[derive(Clone, Debug)]
pub struct SweepError {
    pub dsp_target: u32,
    pub engine: String,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct SweepReport<T> {
    pub records: Vec<SweepRecord<T>>,
    pub errors: Vec<SweepError>,
}

/// DSP usage of the unflagged design: every multiplier on DSP blocks.
pub fn max_dsp(dfg: &Dfg) -> u64 {
    let clean = dfg
        .with_assignment(&vec![false; dfg.mul_count()])
        .expect("assignment sized to the graph");
    oracle::evaluate_unchecked::<f64>(&clean).dsp
}

/// Default sweep grid: 20% to 80% of the unflagged design's DSP usage in
/// steps of 10%, rounded to integers and deduplicated.
pub fn default_target_grid(dfg: &Dfg) -> Vec<u32> {
    percent_grid(20, 80, 10, max_dsp(dfg))
}

fn percent_grid(lo: u32, hi: u32, step: u32, max: u64) -> Vec<u32> {
    let mut grid: Vec<u32> = (lo..=hi)
        .step_by(step as usize)
        .map(|pct| ((pct as f64 / 100.0) * max as f64).round() as u32)
        .collect();
    grid.dedup();
    grid
}

/// Parses a target grid: either `LO:HI:STEP%` (percentages of `max_dsp`,
/// e.g. `20:80:10%`) or a comma-separated list of absolute DSP counts.
pub fn parse_targets(spec: &str, max_dsp: u64) -> Result<Vec<u32>, String> {
    let spec = spec.trim();
    if let Some(body) = spec.strip_suffix('%') {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected LO:HI:STEP%, got `{spec}`"));
        }
        let nums: Vec<u32> = parts
            .iter()
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad percent `{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        let (lo, hi, step) = (nums[0], nums[1], nums[2]);
        if step == 0 {
            return Err("step must be nonzero".into());
        }
        if lo > hi {
            return Err(format!("empty percent range {lo}:{hi}"));
        }
        Ok(percent_grid(lo, hi, step, max_dsp))
    } else {
        let grid: Vec<u32> = spec
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad target `{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        if grid.is_empty() {
            return Err("target list is empty".into());
        }
        Ok(grid)
    }
}

/// Indices of the nondominated points when minimizing both coordinates, in
/// input order. A point is dominated if some other point is no worse in
/// both coordinates and strictly better in at least one; exact duplicates
/// do not dominate each other.
pub fn nondominated_indices<V: PartialOrd + Copy>(points: &[(V, V)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().enumerate().any(|(j, &(x, y))| {
                j != i
                    && x <= points[i].0
                    && y <= points[i].1
                    && (x < points[i].0 || y < points[i].1)
            })
        })
        .collect()
}

/// The nondominated subset of `(dsp, lut)` points, sorted by DSP ascending
/// and deduplicated. On a frontier each DSP value carries a unique LUT
/// value, so the order is total.
pub fn nondominated_filter<V: Ord + Copy>(points: &[(V, V)]) -> Vec<(V, V)> {
    let mut front: Vec<(V, V)> = nondominated_indices(points)
        .into_iter()
        .map(|i| points[i])
        .collect();
    front.sort();
    front.dedup();
    front
}

/// Indices of the sweep records on the (DSP, LUT) frontier, DSP ascending,
/// one record per frontier point (ties keep the earliest record).
pub fn frontier_indices<T: Scalar>(records: &[SweepRecord<T>]) -> Vec<usize> {
    let points: Vec<(u64, u64)> = records.iter().map(|r| (r.dsp, r.lut)).collect();
    let mut keep = nondominated_indices(&points);
    keep.sort_by_key(|&i| (points[i], i));
    keep.dedup_by_key(|i| points[*i]);
    keep
}

fn run_engine<T: Scalar>(
    method: &DseMethod<'_, T>,
    dfg: &Dfg,
    dsp_target: u32,
    run_seed: u64,
    cfg: &SweepConfig<T>,
) -> Result<(Vec<bool>, usize), String> {
    let mut ev = OracleEvaluator::new(dfg);
    match method {
        DseMethod::Exhaustive => exhaustive_search(&mut ev, dsp_target, &cfg.reward)
            .map(|r| (r.assignment, r.evaluator_calls))
            .map_err(|e| e.to_string()),
        DseMethod::Annealing => {
            let r = simulated_annealing(
                &mut ev,
                dsp_target,
                &cfg.reward,
                cfg.budget,
                run_seed,
                &cfg.sa,
            );
            Ok((r.assignment, r.evaluator_calls))
        }
        DseMethod::Genetic => {
            let r = genetic_search(
                &mut ev,
                dsp_target,
                &cfg.reward,
                cfg.budget,
                run_seed,
                &cfg.ga,
                None,
            );
            Ok((r.assignment, r.evaluator_calls))
        }
        DseMethod::Rlmd { agent, gpp } => {
            let mut tuned = (*agent).clone();
            let ft = FineTuneConfig {
                budget: cfg.budget,
                seed: run_seed,
                reward: cfg.reward,
                ..cfg.fine_tune
            };
            fine_tune(&mut tuned, gpp, dfg, dsp_target, &mut ev, &ft)
                .map(|r| (r.assignment, r.evaluator_calls))
                .map_err(|e| e.to_string())
        }
    }
}

/// Runs the engine at every DSP target (the default 20–80% grid when
/// `targets` is `None`), scoring winners with the exact model. Targets run
/// concurrently and merge in grid order, so the report is deterministic
/// for a seed. A failed target (for example, exhaustive search on an
/// oversized topology) becomes an error record and the sweep continues.
pub fn sweep_pareto<T: Scalar>(
    method: &DseMethod<'_, T>,
    dfg: &Dfg,
    targets: Option<&[u32]>,
    cfg: &SweepConfig<T>,
) -> SweepReport<T> {
    let grid: Vec<u32> = match targets {
        Some(t) => t.to_vec(),
        None => default_target_grid(dfg),
    };
    let latency = oracle::latency(dfg);
    let engine = method.name();

    let outcomes: Vec<Result<SweepRecord<T>, SweepError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .iter()
            .enumerate()
            .map(|(t_idx, &dsp_target)| {
                scope.spawn(move || {
                    let run_seed =
                        subseed(cfg.seed, ((t_idx as u64) << 20) | 0xD5E);
                    let started = Instant::now();
                    match run_engine(method, dfg, dsp_target, run_seed, cfg) {
                        Err(message) => Err(SweepError {
                            dsp_target,
                            engine: engine.to_string(),
                            message,
                        }),
                        Ok((assignment, evaluator_calls)) => {
                            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
                            let scored = dfg
                                .with_assignment(&assignment)
                                .expect("searchers preserve assignment length");
                            let costs: CostTriple<T> = oracle::evaluate_unchecked(&scored);
                            let mut ev = OracleEvaluator::new(dfg);
                            let reward = ev.reward(&assignment, dsp_target, &cfg.reward);
                            Ok(SweepRecord {
                                dsp_target,
                                engine: engine.to_string(),
                                assignment,
                                reward,
                                lut: costs.lut,
                                dsp: costs.dsp,
                                cp_ns: costs.cp_ns,
                                latency,
                                evaluator_calls,
                                runtime_ms,
                            })
                        }
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut report = SweepReport {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for outcome in outcomes {
        match outcome {
            Ok(r) => report.records.push(r),
            Err(e) => report.errors.push(e),
        }
    }
    report
}

/// Aggregate per-engine quality across sweep records.
#[derive(Clone, Debug, PartialEq)]
pub struct EngineSummary<T> {
    pub engine: String,
    pub runs: usize,
    /// Fraction of targets met: achieved DSP equals the target exactly, or
    /// is at most the target when `slack` was requested.
    pub met_fraction: T,
    /// Mean achieved/target DSP ratio. A zero target contributes 1 when
    /// met exactly and infinity otherwise.
    pub mean_ratio: T,
    /// Mean LUT cost over met targets; `None` when no target was met.
    pub mean_lut_at_met: Option<T>,
}

/// Summarizes records engine by engine, in first-appearance order.
/// `slack = false` counts a target as met only on exact DSP equality;
/// `slack = true` accepts any DSP usage at or below the target.
pub fn compare_report<T: Scalar>(records: &[SweepRecord<T>], slack: bool) -> Vec<EngineSummary<T>> {
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        if !order.iter().any(|e| *e == r.engine) {
            order.push(&r.engine);
        }
    }
    order
        .into_iter()
        .map(|engine| {
            let rs: Vec<&SweepRecord<T>> =
                records.iter().filter(|r| r.engine == engine).collect();
            let met: Vec<&&SweepRecord<T>> = rs
                .iter()
                .filter(|r| {
                    if slack {
                        r.dsp <= u64::from(r.dsp_target)
                    } else {
                        r.dsp == u64::from(r.dsp_target)
                    }
                })
                .collect();
            let n = T::of_usize(rs.len());
            let mean_ratio = rs
                .iter()
                .map(|r| {
                    if r.dsp_target == 0 {
                        if r.dsp == 0 {
                            T::one()
                        } else {
                            T::infinity()
                        }
                    } else {
                        T::of(r.dsp as f64) / T::of(f64::from(r.dsp_target))
                    }
                })
                .sum::<T>()
                / n;
            let mean_lut_at_met = if met.is_empty() {
                None
            } else {
                Some(
                    met.iter().map(|r| T::of(r.lut as f64)).sum::<T>()
                        / T::of_usize(met.len()),
                )
            };
            EngineSummary {
                engine: engine.to_string(),
                runs: rs.len(),
                met_fraction: T::of_usize(met.len()) / n,
                mean_ratio,
                mean_lut_at_met,
            }
        })
        .collect()
}

fn assignment_bits(assignment: &[bool]) -> String {
    assignment.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

const RECORDS_HEADER: &str =
    "dsp_target,engine,reward,lut,dsp,cp_ns,latency,evaluator_calls,runtime_ms,assignment";

/// Per-run records as CSV. Runtime is included here (and only here).
pub fn records_csv<T: Scalar>(records: &[SweepRecord<T>]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3},{}",
            r.dsp_target,
            r.engine,
            r.reward,
            r.lut,
            r.dsp,
            r.cp_ns,
            r.latency,
            r.evaluator_calls,
            r.runtime_ms,
            assignment_bits(&r.assignment),
        )
        .expect("string write");
    }
    out
}

/// Parses a records CSV produced by [`records_csv`]; used by the
/// comparison flow to rebuild reports from files alone.
pub fn parse_records_csv<T: Scalar>(text: &str) -> Result<Vec<SweepRecord<T>>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORDS_HEADER => {}
        other => return Err(format!("bad records header: {other:?}")),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = idx + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(format!("row {row}: expected 10 columns, got {}", cols.len()));
        }
        let num = |i: usize| -> Result<f64, String> {
            cols[i]
                .parse::<f64>()
                .map_err(|e| format!("row {row}, column {}: {e}", i + 1))
        };
        let assignment: Vec<bool> = cols[9]
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("row {row}: bad assignment bit `{other}`")),
            })
            .collect::<Result<_, _>>()?;
        records.push(SweepRecord {
            dsp_target: num(0)? as u32,
            engine: cols[1].to_string(),
            reward: T::of(num(2)?),
            lut: num(3)? as u64,
            dsp: num(4)? as u64,
            cp_ns: T::of(num(5)?),
            latency: num(6)? as u32,
            evaluator_calls: num(7)? as usize,
            runtime_ms: num(8)?,
            assignment,
        });
    }
    Ok(records)
}

/// Per-engine nondominated (DSP, LUT) frontier as CSV, engines in
/// first-appearance order, rows DSP ascending. Deterministic for a seed.
pub fn frontier_csv<T: Scalar>(records: &[SweepRecord<T>]) -> String {
    let mut out = String::from("engine,dsp,lut,dsp_target\n");
    let mut engines: Vec<&str> = Vec::new();
    for r in records {
        if !engines.iter().any(|e| *e == r.engine) {
            engines.push(&r.engine);
        }
    }
    for engine in engines {
        let rs: Vec<&SweepRecord<T>> =
            records.iter().filter(|r| r.engine == engine).collect();
        let owned: Vec<SweepRecord<T>> = rs.iter().map(|r| (*r).clone()).collect();
        for i in frontier_indices(&owned) {
            writeln!(out, "{},{},{},{}", engine, rs[i].dsp, rs[i].lut, rs[i].dsp_target)
                .expect("string write");
        }
    }
    out
}

/// Comparison table as CSV (no runtime column, so byte-reproducible). An
/// engine that met no target leaves `mean_lut_at_met` empty.
pub fn compare_csv<T: Scalar>(summaries: &[EngineSummary<T>]) -> String {
    let mut out = String::from("engine,runs,met_fraction,mean_ratio,mean_lut_at_met\n");
    for s in summaries {
        let lut = s
            .mean_lut_at_met
            .map(|v| v.to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            s.engine, s.runs, s.met_fraction, s.mean_ratio, lut
        )
        .expect("string write");
    }
    out
}
