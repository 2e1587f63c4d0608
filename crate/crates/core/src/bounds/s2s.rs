//! Grid checks of the condition under which symbol-by-symbol coding stays optimal
//! with lookahead and complete feedback memory.
//!
//! The condition is sufficient. It ranges over every belief, including ones the
//! system never reaches, so a violation alone does not show that symbol-by-symbol
//! coding loses distortion.

use serde::{Deserialize, Serialize};

use super::symbol::{d0_distortion, symbol_loss, SymbolPolicy};
use crate::bayes::{g_weights, respond, tuple_marginal};
use crate::coding::{digit, SimplexGrid};
use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::lookahead::{build_markov_kernel, MarkovKernel};
use crate::models::ProblemSpec;
use crate::par::map_range;

/// Largest gap tolerated before a grid point counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tuple: Vec<usize>,
    pub belief: Vec<f64>,
    /// `lhs - rhs`, positive.
    pub gap: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Minimizing encoder map `V -> X` (smallest index among ties).
    pub action: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// No violation found at this resolution; evidence, not a proof.
    pub holds_on_grid: bool,
    pub resolution: usize,
    pub policy: SymbolPolicy,
    pub points_checked: u64,
    pub max_gap: f64,
    pub first_violation: Option<Violation>,
}

struct Checker<'a> {
    spec: &'a ProblemSpec,
    kernel: MarkovKernel,
    policy: &'a SymbolPolicy,
}

impl Checker<'_> {
    /// `f_μ[β, y]`, falling back to the prior when `y` cannot occur.
    fn posterior(&self, prior: &[f64], y: usize) -> Vec<f64> {
        let w: Vec<f64> = prior
            .iter()
            .enumerate()
            .map(|(u, &b)| b * self.spec.channel.get(self.policy.get(u), y))
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter().map(|x| x / total).collect()
        } else {
            prior.to_vec()
        }
    }

    /// `Σ_ŷ P(ŷ | μ(u)) B(f_μ[β_k, ŷ])`.
    fn term(&self, marginal: &[f64], u: usize) -> f64 {
        self.spec
            .channel
            .row(self.policy.get(u))
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(y, &p)| p * respond(&self.posterior(marginal, y), &self.spec.distortion).1)
            .sum()
    }

    fn marginals(&self, belief: &[f64]) -> Vec<Vec<f64>> {
        (1..=self.kernel.lookahead() + 1).map(|k| tuple_marginal(belief, &self.kernel, k)).collect()
    }

    /// `-B(β_1) - Σ_{k=2}^{d+1} Σ_ŷ P(ŷ | μ(u_k)) B(f_μ[β_k, ŷ])`.
    fn h(&self, v: usize, belief: &[f64]) -> f64 {
        let marg = self.marginals(belief);
        let codec = self.kernel.codec();
        let mut h = -respond(&marg[0], &self.spec.distortion).1;
        for k in 2..=self.kernel.lookahead() + 1 {
            h -= self.term(&marg[k - 1], codec.component(v, k));
        }
        h
    }

    /// Returns `(lhs, min rhs, minimizing action)` at tuple `v` and belief `β`.
    fn sides(&self, d0: f64, v: usize, belief: &[f64]) -> (f64, f64, usize) {
        let d = self.kernel.lookahead();
        let codec = self.kernel.codec();
        let v_count = self.kernel.num_states();
        let (u_count, x_count, y_count) = (self.spec.source_size(), self.spec.input_size(), self.spec.output_size());
        let lhs = d0 - (self.h(v, belief) + respond(&tuple_marginal(belief, &self.kernel, 1), &self.spec.distortion).1);
        let push: Vec<f64> = {
            let mut w = vec![0.0; v_count];
            for (s, &b) in belief.iter().enumerate() {
                for (next, q) in self.kernel.successors(s) {
                    w[next] += b * q;
                }
            }
            w
        };
        let actions = checked_pow(x_count, v_count) as usize;
        let mut best = (f64::INFINITY, 0);
        for a in 0..actions {
            let map: Vec<usize> = (0..v_count).map(|w| digit(a, x_count, v_count, w)).collect();
            // Per ỹ: B(β̃_1) + Σ_{k=2}^{d} term(β̃_k, u_{k+1}), and β̃_{d+1}.
            let per_y: Vec<(f64, Vec<f64>)> = (0..y_count)
                .map(|y| {
                    let mut w = g_weights(belief, &self.kernel, &self.spec.channel, &map, y);
                    let total: f64 = w.iter().sum();
                    if total > 0.0 {
                        w.iter_mut().for_each(|x| *x /= total);
                    } else {
                        w = push.clone();
                    }
                    let marg = self.marginals(&w);
                    let mut fixed = respond(&marg[0], &self.spec.distortion).1;
                    for k in 2..=d {
                        fixed += self.term(&marg[k - 1], codec.component(v, k + 1));
                    }
                    (fixed, marg[d].clone())
                })
                .collect();
            let mut rhs = 0.0;
            for un in 0..u_count {
                let next_v = codec.shift(v, un);
                let x = map[next_v];
                for (y, &py) in self.spec.channel.row(x).iter().enumerate() {
                    if py == 0.0 {
                        continue;
                    }
                    let (fixed, last) = &per_y[y];
                    rhs += self.spec.source[un] * py * (fixed + self.term(last, un));
                }
            }
            if rhs < best.0 - 1e-15 {
                best = (rhs, a);
            }
        }
        (lhs, best.0, best.1)
    }
}

fn check_policy(spec: &ProblemSpec, d: usize, grid: &SimplexGrid, policy: &SymbolPolicy, limits: &Limits) -> Result<CheckReport> {
    if d == 0 {
        return Err(Error::invalid("the symbol-by-symbol condition needs lookahead d >= 1"));
    }
    if policy.map.len() != spec.source_size() || policy.map.iter().any(|&x| x >= spec.input_size()) {
        return Err(Error::invalid("symbol policy does not match the problem alphabets"));
    }
    let kernel = build_markov_kernel(&spec.source, d, limits)?;
    let v_count = kernel.num_states();
    if grid.dim() != v_count {
        return Err(Error::invalid(format!(
            "belief grid dimension {} must equal |U|^(d+1) = {v_count}",
            grid.dim()
        )));
    }
    limits.check_actions("encoder maps |X|^(|U|^(d+1))", checked_pow(spec.input_size(), v_count))?;
    let checker = Checker { spec, kernel, policy };
    let d0 = symbol_loss(spec, &policy.map);
    let g_count = grid.len();
    let gaps = map_range(v_count * g_count, |i| {
        let (v, g) = (i / g_count, i % g_count);
        let belief = grid.belief(g);
        let (lhs, rhs, a) = checker.sides(d0, v, &belief);
        (lhs - rhs, lhs, rhs, a)
    });
    let max_gap = gaps.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let first_violation = gaps.iter().enumerate().find(|(_, t)| t.0 > VIOLATION_TOL).map(|(i, &(gap, lhs, rhs, a))| {
        let (v, g) = (i / g_count, i % g_count);
        Violation {
            tuple: (1..=d + 1).map(|k| checker.kernel.codec().component(v, k)).collect(),
            belief: grid.belief(g),
            gap,
            lhs,
            rhs,
            action: (0..v_count).map(|w| digit(a, spec.input_size(), v_count, w)).collect(),
        }
    });
    Ok(CheckReport {
        holds_on_grid: first_violation.is_none(),
        resolution: grid.resolution(),
        policy: policy.clone(),
        points_checked: gaps.len() as u64,
        max_gap,
        first_violation,
    })
}

/// Checks every `D(0)`-optimal symbol map; holds if any of them shows no violation,
/// otherwise reports the first minimizer's first violation.
pub fn symbol_by_symbol_check(spec: &ProblemSpec, d: usize, grid: &SimplexGrid, limits: &Limits) -> Result<CheckReport> {
    let bound = d0_distortion(spec, limits)?;
    let mut first = None;
    for policy in &bound.minimizers {
        let report = check_policy(spec, d, grid, policy, limits)?;
        if report.holds_on_grid {
            return Ok(report);
        }
        first.get_or_insert(report);
    }
    first.ok_or_else(|| Error::Internal("no symbol map attains D(0)".into()))
}

/// The check specialized to uncoded transmission `x = u`.
pub fn uncoded_condition_check(spec: &ProblemSpec, d: usize, grid: &SimplexGrid, limits: &Limits) -> Result<CheckReport> {
    let policy = SymbolPolicy::uncoded(spec.source_size(), spec.input_size())?;
    check_policy(spec, d, grid, &policy, limits)
}

/// Closed-form bias of the symbol-by-symbol policy at tuple `u` and tuple belief `β`.
pub fn h_closed_form(
    tuple: &[usize],
    belief: &[f64],
    spec: &ProblemSpec,
    d: usize,
    policy: &SymbolPolicy,
    limits: &Limits,
) -> Result<f64> {
    let kernel = build_markov_kernel(&spec.source, d, limits)?;
    if belief.len() != kernel.num_states() {
        return Err(Error::invalid("belief must be over lookahead tuples"));
    }
    let v = kernel.codec().encode(tuple)?;
    if policy.map.len() != spec.source_size() || policy.map.iter().any(|&x| x >= spec.input_size()) {
        return Err(Error::invalid("symbol policy does not match the problem alphabets"));
    }
    Ok(Checker { spec, kernel, policy }.h(v, belief))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::simplex_grid;

    fn lim() -> Limits {
        Limits::default()
    }

    fn grid(d: usize, r: usize) -> SimplexGrid {
        simplex_grid(1 << (d + 1), r, &lim()).unwrap()
    }

    #[test]
    fn h_at_zero_lookahead_is_minus_envelope() {
        let spec = ProblemSpec::binary(0.3, 0.2).unwrap();
        let id = SymbolPolicy::uncoded(2, 2).unwrap();
        let h = h_closed_form(&[1], &[0.35, 0.65], &spec, 0, &id, &lim()).unwrap();
        assert!((h + 0.35).abs() < 1e-15);
    }

    #[test]
    fn h_vanishes_on_point_mass_over_perfect_channel() {
        let spec = ProblemSpec::binary(0.3, 0.0).unwrap();
        let id = SymbolPolicy::uncoded(2, 2).unwrap();
        let h = h_closed_form(&[0, 1, 1], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &spec, 2, &id, &lim()).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn h_matches_hand_expansion_at_d1() {
        let spec = ProblemSpec::binary(0.3, 0.2).unwrap();
        let id = SymbolPolicy::uncoded(2, 2).unwrap();
        // β over (u1, u2) in order 00, 01, 10, 11.
        let beta = [0.1, 0.2, 0.3, 0.4];
        let b1 = [0.3, 0.7];
        let b2 = [0.4, 0.6];
        let env = |w: [f64; 2]| w[0].min(w[1]);
        for u2 in 0..2 {
            // Σ_y P(y|u2) B(post(b2, y)); with Hamming, P(y) B(post) = min of the joint weights.
            let mut term = 0.0;
            for y in 0..2 {
                let w = [b2[0] * spec.channel.get(0, y), b2[1] * spec.channel.get(1, y)];
                let py = w[0] + w[1];
                term += spec.channel.get(u2, y) * env(w) / py;
            }
            let want = -env(b1) - term;
            let got = h_closed_form(&[0, u2], &beta, &spec, 1, &id, &lim()).unwrap();
            assert!((got - want).abs() < 1e-14, "u2={u2}");
        }
    }

    #[test]
    fn useless_channel_holds() {
        for p in [0.1, 0.3, 0.5] {
            let spec = ProblemSpec::binary(p, 0.5).unwrap();
            let r = symbol_by_symbol_check(&spec, 1, &grid(1, 6), &lim()).unwrap();
            assert!(r.holds_on_grid, "p={p}: {:?}", r.first_violation);
            assert!(r.max_gap.abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_channel_holds() {
        for p in [0.0, 0.2, 0.5] {
            let spec = ProblemSpec::binary(p, 0.0).unwrap();
            assert!(symbol_by_symbol_check(&spec, 1, &grid(1, 6), &lim()).unwrap().holds_on_grid);
            assert!(uncoded_condition_check(&spec, 1, &grid(1, 6), &lim()).unwrap().holds_on_grid);
        }
    }

    #[test]
    fn preconditions() {
        let spec = ProblemSpec::binary(0.3, 0.2).unwrap();
        assert!(symbol_by_symbol_check(&spec, 0, &simplex_grid(2, 3, &lim()).unwrap(), &lim()).is_err());
        assert!(symbol_by_symbol_check(&spec, 1, &simplex_grid(3, 3, &lim()).unwrap(), &lim()).is_err());
    }
}
