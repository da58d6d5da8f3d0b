//! Classical search baselines over directive assignments: exhaustive
//! enumeration, simulated annealing, and a genetic algorithm. All three run
//! through [`CostEvaluator`], so they work identically against the exact
//! analytic model or the learned predictor, and all are fully seeded.
//!
//! Budgets count evaluator calls made by the searcher (an evaluator shared
//! across searches keeps a running total; searchers measure their own
//! consumption relative to its value on entry).

use crate::evaluator::CostEvaluator;
use crate::reward::{terminal_reward, RewardParams};
use crate::scalar::Scalar;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Outcome of one search run.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult<T> {
    /// Best assignment found (one flag per multiplier, id order).
    pub assignment: Vec<bool>,
    /// Reward of that assignment.
    pub reward: T,
    /// Evaluator calls this search consumed.
    pub evaluator_calls: usize,
}

/// Exhaustive enumeration refuses above this many multipliers (2^23 or
/// more candidates).
pub const EXHAUSTIVE_MAX_MULS: usize = 22;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExhaustiveError {
    #[error("exhaustive search supports at most {EXHAUSTIVE_MAX_MULS} multipliers, got {0}")]
    TooManyMultipliers(usize),
}

/// Scores every assignment. Candidates are enumerated as integers `k`
/// ascending, where bit `i` of `k` flags multiplier `i`; ties on reward
/// keep the lower-LUT candidate, and remaining ties keep the earlier `k`,
/// so the result is deterministic and unique.
pub fn exhaustive_search<T: Scalar, E: CostEvaluator<T>>(
    ev: &mut E,
    dsp_target: u32,
    params: &RewardParams<T>,
) -> Result<SearchResult<T>, ExhaustiveError> {
    let m = ev.mul_count();
    if m > EXHAUSTIVE_MAX_MULS {
        return Err(ExhaustiveError::TooManyMultipliers(m));
    }
    let start = ev.calls();
    let mut best: Option<(Vec<bool>, T, T)> = None; // (assignment, reward, lut)
    for k in 0u64..(1u64 << m) {
        let assignment: Vec<bool> = (0..m).map(|i| (k >> i) & 1 == 1).collect();
        let costs = ev.costs(&assignment);
        let reward = terminal_reward(&costs, dsp_target, params);
        let better = match &best {
            None => true,
            Some((_, r, lut)) => reward > *r || (reward == *r && costs.lut < *lut),
        };
        if better {
            best = Some((assignment, reward, costs.lut));
        }
    }
    let (assignment, reward, _) = best.expect("at least the empty assignment is scored");
    Ok(SearchResult {
        assignment,
        reward,
        evaluator_calls: ev.calls() - start,
    })
}

/// Simulated-annealing knobs.
#[derive(Copy, Clone, Debug)]
pub struct SaParams<T> {
    pub initial_temp: T,
    /// Multiplicative temperature decay applied after every evaluation.
    pub cooling: T,
}

impl<T: Scalar> Default for SaParams<T> {
    /// Temperature 1.0, cooling 0.995 per evaluation.
    fn default() -> Self {
        SaParams {
            initial_temp: T::one(),
            cooling: T::of(0.995),
        }
    }
}

/// Single-flip simulated annealing from the all-unflagged start. A
/// proposal flips one uniformly chosen bit; improvements (and ties) are
/// always accepted, regressions with probability `exp(delta / temp)`. The
/// initial evaluation counts toward `budget`, and the best assignment ever
/// visited is returned even if the walk later moved away from it.
pub fn simulated_annealing<T: Scalar, E: CostEvaluator<T>>(
    ev: &mut E,
    dsp_target: u32,
    params: &RewardParams<T>,
    budget: usize,
    seed: u64,
    sa: &SaParams<T>,
) -> SearchResult<T> {
    assert!(budget >= 1, "annealing needs at least one evaluation");
    let m = ev.mul_count();
    let start = ev.calls();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut current = vec![false; m];
    let mut current_reward = ev.reward(&current, dsp_target, params);
    let mut temp = sa.initial_temp * sa.cooling;
    let mut best = current.clone();
    let mut best_reward = current_reward;

    while m > 0 && ev.calls() - start < budget {
        let flip = rng.gen_range(0..m);
        let mut candidate = current.clone();
        candidate[flip] = !candidate[flip];
        let candidate_reward = ev.reward(&candidate, dsp_target, params);
        let delta = candidate_reward - current_reward;
        let accept = delta >= T::zero() || {
            let threshold = (delta / temp).exp();
            T::of(rng.gen::<f64>()) < threshold
        };
        if accept {
            current = candidate;
            current_reward = candidate_reward;
        }
        if candidate_reward > best_reward {
            best = current.clone();
            best_reward = candidate_reward;
        }
        temp = temp * sa.cooling;
    }

    SearchResult {
        assignment: best,
        reward: best_reward,
        evaluator_calls: ev.calls() - start,
    }
}

/// Genetic-algorithm knobs. The per-bit mutation probability is
/// `1 / mul_count` and is not configurable.
#[derive(Copy, Clone, Debug)]
pub struct GaParams<T> {
    pub population: usize,
    pub crossover_prob: T,
    pub tournament_k: usize,
    /// Top individuals copied unchanged (and not re-evaluated) each
    /// generation.
    pub elitism: usize,
}

impl<T: Scalar> Default for GaParams<T> {
    /// Population 32, crossover 0.9, tournament size 2, one elite.
    fn default() -> Self {
        GaParams {
            population: 32,
            crossover_prob: T::of(0.9),
            tournament_k: 2,
            elitism: 1,
        }
    }
}

/// Generational GA with tournament selection, single-point crossover, and
/// per-bit mutation at rate `1 / mul_count`.
///
/// `initial` seeds the first population (useful for testing recovery from
/// degenerate populations); missing slots are filled with uniform random
/// individuals. The search stops as soon as the evaluation budget is
/// spent, even mid-generation.
pub fn genetic_search<T: Scalar, E: CostEvaluator<T>>(
    ev: &mut E,
    dsp_target: u32,
    params: &RewardParams<T>,
    budget: usize,
    seed: u64,
    ga: &GaParams<T>,
    initial: Option<&[Vec<bool>]>,
) -> SearchResult<T> {
    assert!(budget >= 1, "the GA needs at least one evaluation");
    assert!(ga.population >= 2, "population must hold at least two individuals");
    assert!(ga.tournament_k >= 1, "tournament size must be at least 1");
    assert!(
        ga.elitism < ga.population,
        "elitism must leave room for offspring"
    );
    let m = ev.mul_count();
    let start = ev.calls();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut population: Vec<Vec<bool>> = Vec::with_capacity(ga.population);
    if let Some(seeded) = initial {
        for ind in seeded.iter().take(ga.population) {
            assert_eq!(ind.len(), m, "seeded individual length matches the topology");
            population.push(ind.clone());
        }
    }
    while population.len() < ga.population {
        population.push((0..m).map(|_| rng.gen_bool(0.5)).collect());
    }

    let mut best: Option<(Vec<bool>, T)> = None;
    let mut fitness: Vec<T> = Vec::with_capacity(ga.population);
    for ind in &population {
        if ev.calls() - start >= budget {
            break;
        }
        let r = ev.reward(ind, dsp_target, params);
        if best.as_ref().map_or(true, |(_, b)| r > *b) {
            best = Some((ind.clone(), r));
        }
        fitness.push(r);
    }
    // Individuals never evaluated (budget ran out) are dropped.
    population.truncate(fitness.len());

    let mutation_prob = 1.0 / m.max(1) as f64;
    while ev.calls() - start < budget && population.len() >= 2 {
        // Rank current generation best-first (stable on ties).
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            fitness[b]
                .partial_cmp(&fitness[a])
                .expect("rewards are finite")
        });

        let mut next_pop: Vec<Vec<bool>> = Vec::with_capacity(ga.population);
        let mut next_fit: Vec<T> = Vec::with_capacity(ga.population);
        for &i in order.iter().take(ga.elitism) {
            next_pop.push(population[i].clone());
            next_fit.push(fitness[i]);
        }

        let tournament = |rng: &mut ChaCha8Rng| -> usize {
            let mut winner = rng.gen_range(0..population.len());
            for _ in 1..ga.tournament_k {
                let c = rng.gen_range(0..population.len());
                if fitness[c] > fitness[winner] {
                    winner = c;
                }
            }
            winner
        };

        while next_pop.len() < ga.population && ev.calls() - start < budget {
            let p1 = tournament(&mut rng);
            let p2 = tournament(&mut rng);
            let mut child = if m >= 2 && T::of(rng.gen::<f64>()) < ga.crossover_prob {
                let point = rng.gen_range(1..m);
                let mut c = population[p1][..point].to_vec();
                c.extend_from_slice(&population[p2][point..]);
                c
            } else {
                population[p1].clone()
            };
            for bit in child.iter_mut() {
                if rng.gen_bool(mutation_prob) {
                    *bit = !*bit;
                }
            }
            let r = ev.reward(&child, dsp_target, params);
            if best.as_ref().map_or(true, |(_, b)| r > *b) {
                best = Some((child.clone(), r));
            }
            next_pop.push(child);
            next_fit.push(r);
        }

        population = next_pop;
        fitness = next_fit;
    }

    let (assignment, reward) = best.expect("budget >= 1 evaluates at least one individual");
    SearchResult {
        assignment,
        reward,
        evaluator_calls: ev.calls() - start,
    }
}
