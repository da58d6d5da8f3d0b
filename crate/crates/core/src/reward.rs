//! Scalarized objective shared by every search engine.
//!
//! A candidate directive assignment is scored by the terminal reward
//!
//! ```text
//! r = -alpha * LUT - beta * |dsp_target - DSP| - lambda * CP
//! ```
//!
//! i.e. LUT usage and critical path are penalized, and the DSP count is
//! pulled toward an explicit target rather than minimized — the point of
//! the whole exercise is hitting a resource budget, not zeroing DSPs.
//! Larger rewards are better; rewards are never positive.

use crate::oracle::CostTriple;
use crate::scalar::Scalar;

/// The three objective weights.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RewardParams<T> {
    /// LUT weight.
    pub alpha: T,
    /// DSP-target deviation weight.
    pub beta: T,
    /// Critical-path weight.
    pub lambda: T,
}

impl<T: Scalar> Default for RewardParams<T> {
    /// alpha = 0.002, beta = 5, lambda = 0.02.
    fn default() -> Self {
        RewardParams {
            alpha: T::of(0.002),
            beta: T::of(5.0),
            lambda: T::of(0.02),
        }
    }
}

/// Cost triple in continuous form, as produced by the learned predictor or
/// by lifting exact oracle counts.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CostPrediction<T> {
    pub lut: T,
    pub dsp: T,
    pub cp_ns: T,
}

impl<T: Scalar> From<CostTriple<T>> for CostPrediction<T> {
    fn from(c: CostTriple<T>) -> Self {
        CostPrediction {
            lut: T::of(c.lut as f64),
            dsp: T::of(c.dsp as f64),
            cp_ns: c.cp_ns,
        }
    }
}

/// Scalar reward for a finished assignment (see module docs).
pub fn terminal_reward<T: Scalar>(
    costs: &CostPrediction<T>,
    dsp_target: u32,
    params: &RewardParams<T>,
) -> T {
    let lut_term = params.alpha * costs.lut;
    let dsp_term = params.beta * (T::of(f64::from(dsp_target)) - costs.dsp).abs();
    let cp_term = params.lambda * costs.cp_ns;
    -lut_term - dsp_term - cp_term
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weights() {
        let p = RewardParams::<f64>::default();
        assert_eq!((p.alpha, p.beta, p.lambda), (0.002, 5.0, 0.02));
    }

    #[test]
    fn reward_at_default_weights_is_exact() {
        // lut=1000, dsp=4, target=4, cp=5: r = -2.0 - 0.0 - 0.1 = -2.1,
        // and every product involved is exact in binary64.
        let costs = CostPrediction {
            lut: 1000.0,
            dsp: 4.0,
            cp_ns: 5.0,
        };
        let r = terminal_reward(&costs, 4, &RewardParams::default());
        assert_eq!(r, -2.1);
    }

    #[test]
    fn dsp_deviation_is_symmetric() {
        let params = RewardParams::<f64>::default();
        let below = CostPrediction {
            lut: 0.0,
            dsp: 2.0,
            cp_ns: 0.0,
        };
        let above = CostPrediction {
            lut: 0.0,
            dsp: 6.0,
            cp_ns: 0.0,
        };
        assert_eq!(
            terminal_reward(&below, 4, &params),
            terminal_reward(&above, 4, &params)
        );
        assert_eq!(terminal_reward(&below, 4, &params), -10.0);
    }

    #[test]
    fn reward_is_never_positive() {
        let params = RewardParams::<f64>::default();
        let costs = CostPrediction {
            lut: 0.0,
            dsp: 0.0,
            cp_ns: 0.0,
        };
        assert_eq!(terminal_reward(&costs, 0, &params), 0.0);
    }

    #[test]
    fn lifting_oracle_counts_preserves_values() {
        let triple = CostTriple {
            lut: 42,
            dsp: 3,
            cp_ns: 2.16_f64,
        };
        let pred: CostPrediction<f64> = triple.into();
        assert_eq!((pred.lut, pred.dsp, pred.cp_ns), (42.0, 3.0, 2.16));
    }
}
