//! Expected-call cost model: a stage-1 solve followed by an LCU-style
//! filter whose failures can be detected halfway through.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::order_for;
use crate::linalg::bures_from_infidelity;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostAssumptions {
    /// A failed filter run costs half its degree on average.
    pub early_halving: bool,
    /// Stage-1 calls count double (controlled `A`/`A†` selection).
    pub doubled_stage1: bool,
}

/// Filter stage for one input state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterCost {
    pub eta: f64,
    pub degree: usize,
    pub success: f64,
    pub expected_calls: f64,
}

impl FilterCost {
    /// No filtering at all.
    pub const NONE: FilterCost = FilterCost {
        eta: 1.0,
        degree: 0,
        success: 1.0,
        expected_calls: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub stage1_degree: usize,
    pub q_succ: f64,
    pub filter_degree: usize,
    pub filter_success: f64,
    pub expected_total: f64,
    pub assumptions: CostAssumptions,
}

/// Trace-distance budget equivalent to a Bures (phase-aligned ℓ2) error
/// `epsilon` between pure states.
pub fn trace_budget(epsilon: f64) -> f64 {
    epsilon * (1.0 - epsilon * epsilon / 4.0).sqrt()
}

/// Projection filter taking an input of infidelity `mu_sq` to final error
/// `epsilon`.
///
/// An exact input (`mu_sq = 0`) still pays for the cheapest filter, with
/// `η = 1`.
pub fn filter_cost(mu_sq: f64, epsilon: f64, kappa: f64, early_halving: bool) -> Result<FilterCost> {
    if !(0.0..1.0).contains(&mu_sq) {
        return Err(Error::domain("input infidelity", format!("{mu_sq} not in [0, 1)")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::domain("final error", format!("{epsilon} must be positive")));
    }
    if !(kappa > 1.0) {
        return Err(Error::domain("kappa", format!("{kappa} must exceed 1")));
    }
    let eta = if mu_sq == 0.0 {
        1.0
    } else {
        let input_error = bures_from_infidelity(mu_sq)?;
        if epsilon >= input_error {
            return Err(Error::FilterUnnecessary { epsilon, input_error });
        }
        let mu = mu_sq.sqrt();
        (trace_budget(epsilon) * (1.0 - mu_sq).sqrt() / mu).min(1.0)
    };
    let degree = 2 * order_for(1.0 / kappa, eta)?;
    let success = 1.0 - mu_sq;
    let fail_weight = if early_halving { 0.5 } else { 1.0 };
    Ok(FilterCost {
        eta,
        degree,
        success,
        expected_calls: degree as f64 * (success + (1.0 - success) * fail_weight),
    })
}

/// Rule for folding stage-1 and filter costs into expected calls per
/// accepted output.
pub trait CostCombiner {
    fn combine(&self, stage1: f64, q_succ: f64, filter: &FilterCost) -> Result<f64>;
}

/// Repeat stage 1 until it succeeds, filter, and restart everything when the
/// filter rejects: `(d₁ + q·E_f)/(q·p_f)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpectedCalls;

impl CostCombiner for ExpectedCalls {
    fn combine(&self, stage1: f64, q_succ: f64, filter: &FilterCost) -> Result<f64> {
        let joint = q_succ * filter.success;
        if !(joint > 0.0) {
            return Err(Error::DivergentCost);
        }
        Ok((stage1 + q_succ * filter.expected_calls) / joint)
    }
}

pub fn total_cost(
    stage1_degree: usize,
    q_succ: f64,
    filter: &FilterCost,
    assumptions: CostAssumptions,
) -> Result<CostBreakdown> {
    total_cost_with(&ExpectedCalls, stage1_degree, q_succ, filter, assumptions)
}

pub fn total_cost_with(
    combiner: &dyn CostCombiner,
    stage1_degree: usize,
    q_succ: f64,
    filter: &FilterCost,
    assumptions: CostAssumptions,
) -> Result<CostBreakdown> {
    if q_succ == 0.0 || filter.success == 0.0 {
        return Err(Error::DivergentCost);
    }
    if !(q_succ > 0.0 && q_succ <= 1.0) {
        return Err(Error::domain("q_succ", format!("{q_succ} not in (0, 1]")));
    }
    let stage1 = stage1_degree as f64 * if assumptions.doubled_stage1 { 2.0 } else { 1.0 };
    let expected_total = combiner.combine(stage1, q_succ, filter)?;
    if !expected_total.is_finite() {
        return Err(Error::DivergentCost);
    }
    Ok(CostBreakdown {
        stage1_degree,
        q_succ,
        filter_degree: filter.degree,
        filter_success: filter.success,
        expected_total,
        assumptions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order_oracle(kappa: f64, eta: f64) -> usize {
        ((2.0 / eta).ln() * kappa / 2.0).ceil() as usize
    }

    #[test]
    fn exact_input_gets_cheapest_filter() {
        let f = filter_cost(0.0, 1e-3, 320.0, true).unwrap();
        assert_eq!(f.eta, 1.0);
        assert_eq!(f.degree, 2 * order_oracle(320.0, 1.0));
        assert_eq!(f.success, 1.0);
        assert_eq!(f.expected_calls, f.degree as f64);
    }

    #[test]
    fn halving_discounts_failures() {
        let f = filter_cost(0.04, 1e-3, 320.0, true).unwrap();
        assert!((f.expected_calls - 0.98 * f.degree as f64).abs() < 1e-9 * f.degree as f64);
        let g = filter_cost(0.04, 1e-3, 320.0, false).unwrap();
        assert_eq!(g.expected_calls, g.degree as f64);
        // η from the trace-distance budget
        let eta = 1e-3 * (1.0 - 0.25e-6f64).sqrt() * 0.96f64.sqrt() / 0.2;
        assert!((f.eta - eta).abs() < 1e-15);
        assert_eq!(f.degree, 2 * order_oracle(320.0, eta));
    }

    #[test]
    fn final_error_above_input_is_rejected() {
        let err = filter_cost(0.01, 0.2, 20.0, true).unwrap_err();
        assert!(matches!(err, Error::FilterUnnecessary { .. }));
    }

    #[test]
    fn single_stage_identity() {
        let none = FilterCost::NONE;
        let c = total_cost(100, 1.0, &none, CostAssumptions::default()).unwrap();
        assert_eq!(c.expected_total, 100.0);
        let c = total_cost(100, 0.5, &none, CostAssumptions::default()).unwrap();
        assert_eq!(c.expected_total, 200.0);
    }

    #[test]
    fn perfect_successes_add_degrees() {
        let f = FilterCost {
            eta: 0.5,
            degree: 40,
            success: 1.0,
            expected_calls: 40.0,
        };
        let c = total_cost(100, 1.0, &f, CostAssumptions::default()).unwrap();
        assert_eq!(c.expected_total, 140.0);
    }

    #[test]
    fn zero_success_diverges() {
        let f = FilterCost {
            success: 0.0,
            ..FilterCost::NONE
        };
        assert!(matches!(total_cost(10, 0.5, &f, CostAssumptions::default()), Err(Error::DivergentCost)));
        assert!(matches!(
            total_cost(10, 0.0, &FilterCost::NONE, CostAssumptions::default()),
            Err(Error::DivergentCost)
        ));
    }

    #[test]
    fn doubling_scales_stage_one_only() {
        let f = filter_cost(0.04, 1e-3, 320.0, true).unwrap();
        let a = CostAssumptions::default();
        let d = CostAssumptions {
            doubled_stage1: true,
            ..a
        };
        let one = total_cost(1000, 0.3, &f, a).unwrap().expected_total;
        let two = total_cost(1000, 0.3, &f, d).unwrap().expected_total;
        let stage1_share = 1000.0 / (0.3 * f.success);
        assert!((two - one - stage1_share).abs() < 1e-9 * two);
    }

    struct Sum;
    impl CostCombiner for Sum {
        fn combine(&self, stage1: f64, _q: f64, filter: &FilterCost) -> Result<f64> {
            Ok(stage1 + filter.degree as f64)
        }
    }

    #[test]
    fn combiner_is_pluggable() {
        let f = filter_cost(0.04, 1e-3, 20.0, false).unwrap();
        let c = total_cost_with(&Sum, 10, 0.5, &f, CostAssumptions::default()).unwrap();
        assert_eq!(c.expected_total, 10.0 + f.degree as f64);
    }
}
