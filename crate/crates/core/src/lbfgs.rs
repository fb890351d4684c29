//! Limited-memory BFGS with a projected backtracking (Armijo) line search.
//!
//! Box constraints are handled by projecting every trial point; the Armijo
//! test is applied to the projected displacement so the accepted cost
//! sequence is non-increasing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearch {
    pub initial_step: f64,
    pub shrink: f64,
    /// Sufficient-decrease constant `c1`.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsParams {
    pub memory: usize,
    pub max_iters: usize,
    pub line_search: LineSearch,
    /// Stop as soon as the cost drops to this value.
    pub cost_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsRun {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iters: usize,
    /// Cost before the first step followed by the cost after every accepted step.
    pub history: Vec<f64>,
}

/// Minimizes `objective` starting at `x0`. The objective writes the gradient
/// into its second argument and returns the cost; `project` maps a trial
/// point back into the feasible set in place.
pub fn minimize<F, P>(x0: Vec<f64>, mut objective: F, project: P, params: &LbfgsParams) -> LbfgsRun
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let n = x0.len();
    let mut x = x0;
    project(&mut x);
    let mut grad = vec![0.0; n];
    let mut cost = objective(&x, &mut grad);
    let mut history = vec![cost];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(params.memory);

    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut iters = 0;
    while iters < params.max_iters && cost > params.cost_tolerance {
        let mut dir = two_loop(&grad, &pairs);
        if dot(&dir, &grad) >= 0.0 {
            pairs.clear();
            dir = grad.iter().map(|g| -g).collect();
        }

        let mut step = params.line_search.initial_step;
        let mut accepted = None;
        for _ in 0..params.line_search.max_backtracks {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            project(&mut trial);
            let decrease: f64 = (0..n).map(|i| grad[i] * (trial[i] - x[i])).sum();
            if decrease < 0.0 {
                let c = objective(&trial, &mut trial_grad);
                if c <= cost + params.line_search.armijo * decrease {
                    accepted = Some(c);
                    break;
                }
            }
            step *= params.line_search.shrink;
        }

        let Some(new_cost) = accepted else {
            if pairs.is_empty() {
                break;
            }
            // Retry from steepest descent with a fresh memory.
            pairs.clear();
            continue;
        };

        let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| trial_grad[i] - grad[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if pairs.len() == params.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        } else {
            // Armijo alone does not guarantee positive curvature; stale pairs
            // would keep producing vanishing steps.
            pairs.clear();
        }
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        cost = new_cost;
        history.push(cost);
        iters += 1;
    }
    LbfgsRun { x, cost, iters, history }
}

fn two_loop(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
