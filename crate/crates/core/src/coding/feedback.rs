//! Channel-output feedback: finite decoder memory (exact) and complete memory
//! (belief over lookahead tuples on a simplex grid).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{simplex_grid, SimplexGrid};
use super::memory::MemorySpec;
use super::report::{clamp_distortion, Diagnostics, Parameters, Scenario, ScenarioSolveReport, FLAG_APPROXIMATE};
use super::{digit, pick_min, table_digits, SolveOptions};
use crate::bayes::{g_weights, respond, tuple_marginal};
use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::lookahead::{build_markov_kernel, MarkovKernel};
use crate::mdp::{relative_value_iteration, FiniteMdp, TransitionBuilder, Transitions};
use crate::models::ProblemSpec;
use crate::par::map_range;

/// Decoder tables are indexed by `y * |Z| + z`.
pub(crate) fn check_decoder(decoder: &[usize], len: usize, reconstructions: usize) -> Result<()> {
    if decoder.len() != len {
        return Err(Error::invalid(format!("decoder table has {} entries, expected {len}", decoder.len())));
    }
    if let Some(i) = decoder.iter().position(|&uh| uh >= reconstructions) {
        return Err(Error::invalid(format!("decoder entry {i} is outside the reconstruction alphabet")));
    }
    Ok(())
}

/// Number of slice actions `|X|^{|U|}`, checked against the limits.
pub(crate) fn slice_actions(spec: &ProblemSpec, limits: &Limits) -> Result<usize> {
    let count = checked_pow(spec.input_size(), spec.source_size());
    limits.check_actions("encoder slice actions |X|^|U|", count)?;
    Ok(count as usize)
}

/// Finite-memory feedback model; dynamics shared by every decoder table.
#[derive(Debug, Clone)]
pub struct FeedbackFiniteModel {
    spec: ProblemSpec,
    kernel: MarkovKernel,
    memory: MemorySpec,
    num_actions: usize,
    transitions: Arc<Transitions>,
}

impl FeedbackFiniteModel {
    pub fn new(spec: &ProblemSpec, d: usize, memory: &MemorySpec, limits: &Limits) -> Result<Self> {
        if memory.inputs() != spec.output_size() {
            return Err(Error::invalid("memory update alphabet must be the channel output alphabet"));
        }
        let kernel = build_markov_kernel(&spec.source, d, limits)?;
        let v_count = kernel.num_states();
        let states = v_count as u128 * memory.size() as u128;
        limits.check_states("feedback states |U|^(d+1)·|Z|", states)?;
        let num_actions = slice_actions(spec, limits)?;
        let (u_count, x_count, y_count) = (spec.source_size(), spec.input_size(), spec.output_size());
        let z_count = memory.size();
        let mut b = TransitionBuilder::new(v_count * z_count, num_actions)?;
        let mut row = Vec::with_capacity(u_count * y_count);
        for v in 0..v_count {
            for z in 0..z_count {
                for a in 0..num_actions {
                    row.clear();
                    for (next_v, pu) in kernel.successors(v) {
                        let x = digit(a, x_count, u_count, next_v % u_count);
                        for (y, &py) in spec.channel.row(x).iter().enumerate() {
                            row.push((next_v * z_count + memory.update(z, y), pu * py));
                        }
                    }
                    b.push_row(row.iter().copied())?;
                }
            }
        }
        Ok(FeedbackFiniteModel {
            spec: spec.clone(),
            kernel,
            memory: memory.clone(),
            num_actions,
            transitions: Arc::new(b.finish()?),
        })
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states() * self.memory.size()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn kernel(&self) -> &MarkovKernel {
        &self.kernel
    }

    pub fn decoder_len(&self) -> usize {
        self.spec.output_size() * self.memory.size()
    }

    pub fn decoder_count(&self) -> u128 {
        checked_pow(self.spec.reconstruction_size(), self.decoder_len())
    }

    /// `g(v, z, a) = -Σ P_U(ũ) P(ỹ | a(ũ)) Λ(u_2, decoder(ỹ, z))`.
    pub fn rewards(&self, decoder: &[usize]) -> Result<Vec<f64>> {
        check_decoder(decoder, self.decoder_len(), self.spec.reconstruction_size())?;
        let (u_count, x_count) = (self.spec.source_size(), self.spec.input_size());
        let z_count = self.memory.size();
        let codec = self.kernel.codec();
        let mut out = Vec::with_capacity(self.num_states() * self.num_actions);
        for v in 0..self.kernel.num_states() {
            for z in 0..z_count {
                for a in 0..self.num_actions {
                    let mut loss = 0.0;
                    for (next_v, pu) in self.kernel.successors(v) {
                        let x = digit(a, x_count, u_count, next_v % u_count);
                        let u2 = codec.component(next_v, 1);
                        for (y, &py) in self.spec.channel.row(x).iter().enumerate() {
                            loss += pu * py * self.spec.distortion.get(u2, decoder[y * z_count + z]);
                        }
                    }
                    out.push(-loss);
                }
            }
        }
        Ok(out)
    }

    pub fn mdp(&self, decoder: &[usize]) -> Result<FiniteMdp> {
        FiniteMdp::new(Arc::clone(&self.transitions), self.rewards(decoder)?)
    }
}

/// The finite-memory feedback MDP for one decoder table; states `v * |Z| + z`.
pub fn build_feedback_finite(
    spec: &ProblemSpec,
    d: usize,
    memory: &MemorySpec,
    decoder: &[usize],
    limits: &Limits,
) -> Result<FiniteMdp> {
    FeedbackFiniteModel::new(spec, d, memory, limits)?.mdp(decoder)
}

/// `D(d, f_m, |Z|)`: best stationary decoder table by enumeration, RVI per table.
pub fn solve_feedback_finite(
    spec: &ProblemSpec,
    d: usize,
    memory: &MemorySpec,
    opts: &SolveOptions,
) -> Result<ScenarioSolveReport> {
    let model = FeedbackFiniteModel::new(spec, d, memory, &opts.limits)?;
    let count = model.decoder_count();
    opts.limits.check_tables("decoder tables |Û|^(|Y|·|Z|); use a smaller memory", count)?;
    let (base, len) = (spec.reconstruction_size(), model.decoder_len());
    let results = map_range(count as usize, |t| {
        let decoder = table_digits(t, base, len);
        let solve = relative_value_iteration(&model.mdp(&decoder)?, &opts.rvi)?;
        Ok(Some((-solve.gain, solve)))
    });
    let best = pick_min(results)?;
    let solve = best.payload;
    let mut report = ScenarioSolveReport {
        scenario: Scenario::FeedbackFinite,
        distortion: clamp_distortion(solve.gain, spec.distortion.max_loss()),
        flags: Vec::new(),
        stability_delta: None,
        decoder: table_digits(best.index, base, len),
        vending_map: None,
        encoder_policy: solve.policy,
        parameters: Parameters {
            d,
            memory_size: memory.size(),
            side_memory_size: None,
            grid_resolution: None,
            budget: None,
        },
        diagnostics: Diagnostics {
            gain: solve.gain,
            iterations: solve.iterations,
            final_span: solve.final_span,
            num_states: model.num_states(),
            num_actions: model.num_actions(),
            tables_evaluated: count as u64,
            tables_skipped: best.skipped,
            lambda_star: None,
            avg_action_cost: None,
            dual_evaluations: None,
        },
    };
    if best.nonconverged > 0 {
        report.add_flag(super::report::FLAG_NONCONVERGED);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompleteOptions {
    pub resolution: usize,
    /// Also solve at twice the resolution and report the change.
    pub stability: bool,
}

/// Complete-memory feedback MDP on a tuple-belief grid; states `v * |grid| + g`.
///
/// Actions are full maps `V -> X` (digit `ṽ` of the action index, most significant
/// first). The reward is the expected Bayes envelope of the first marginal of the
/// exact updated belief `G(β, a, ỹ)`; the next belief is its grid projection. If the
/// true tuple makes an observation possible that the grid belief rules out, the
/// belief is carried forward by the kernel alone.
pub fn build_feedback_complete_discretized(
    spec: &ProblemSpec,
    d: usize,
    grid: &SimplexGrid,
    limits: &Limits,
) -> Result<FiniteMdp> {
    let kernel = build_markov_kernel(&spec.source, d, limits)?;
    let v_count = kernel.num_states();
    if grid.dim() != v_count {
        return Err(Error::invalid(format!(
            "belief grid dimension {} must equal |U|^(d+1) = {v_count}",
            grid.dim()
        )));
    }
    let x_count = spec.input_size();
    let y_count = spec.output_size();
    let actions = checked_pow(x_count, v_count);
    limits.check_actions("encoder maps |X|^(|U|^(d+1))", actions)?;
    let actions = actions as usize;
    let g_count = grid.len();
    limits.check_states("complete-memory states |U|^(d+1)·|grid|", v_count as u128 * g_count as u128)?;

    // Per (grid point, action, ỹ): projected next belief and envelope of the exact update.
    let step: Vec<Vec<(usize, f64)>> = map_range(g_count * actions, |ga| {
        let (g, a) = (ga / actions, ga % actions);
        let beta = grid.belief(g);
        let map: Vec<usize> = (0..v_count).map(|w| digit(a, x_count, v_count, w)).collect();
        (0..y_count)
            .map(|y| {
                let mut w = g_weights(&beta, &kernel, &spec.channel, &map, y);
                let mut total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    w = vec![0.0; v_count];
                    for (v, &b) in beta.iter().enumerate() {
                        for (next, q) in kernel.successors(v) {
                            w[next] += b * q;
                        }
                    }
                    total = w.iter().sum();
                }
                w.iter_mut().for_each(|x| *x /= total);
                let env = respond(&tuple_marginal(&w, &kernel, 1), &spec.distortion).1;
                (grid.project(&w), env)
            })
            .collect()
    });

    let mut b = TransitionBuilder::new(v_count * g_count, actions)?;
    let mut reward = Vec::with_capacity(v_count * g_count * actions);
    let mut row = Vec::new();
    for v in 0..v_count {
        for g in 0..g_count {
            for a in 0..actions {
                let outcomes = &step[g * actions + a];
                row.clear();
                let mut r = 0.0;
                for (next_v, pu) in kernel.successors(v) {
                    let x = digit(a, x_count, v_count, next_v);
                    for (y, &py) in spec.channel.row(x).iter().enumerate() {
                        let (next_g, env) = outcomes[y];
                        row.push((next_v * g_count + next_g, pu * py));
                        r -= pu * py * env;
                    }
                }
                b.push_row(row.iter().copied())?;
                reward.push(r);
            }
        }
    }
    FiniteMdp::new(Arc::new(b.finish()?), reward)
}

/// Approximate `D(d)` with complete decoder memory.
pub fn solve_feedback_complete(
    spec: &ProblemSpec,
    d: usize,
    complete: &CompleteOptions,
    opts: &SolveOptions,
) -> Result<ScenarioSolveReport> {
    let v_count = checked_pow(spec.source_size(), d + 1);
    opts.limits.check_states("lookahead tuple states |U|^(d+1)", v_count)?;
    let solve_at = |r: usize| -> Result<(crate::mdp::SolveResult, usize, usize)> {
        let grid = simplex_grid(v_count as usize, r, &opts.limits)?;
        let mdp = build_feedback_complete_discretized(spec, d, &grid, &opts.limits)?;
        let s = relative_value_iteration(&mdp, &opts.rvi)?;
        Ok((s, mdp.num_states(), mdp.num_actions()))
    };
    let (solve, num_states, num_actions) = solve_at(complete.resolution)?;
    let max_loss = spec.distortion.max_loss();
    let distortion = clamp_distortion(solve.gain, max_loss);
    let stability_delta = if complete.stability {
        let (fine, _, _) = solve_at(2 * complete.resolution)?;
        Some(clamp_distortion(fine.gain, max_loss) - distortion)
    } else {
        None
    };
    Ok(ScenarioSolveReport {
        scenario: Scenario::FeedbackComplete,
        distortion,
        flags: vec![FLAG_APPROXIMATE.to_string()],
        stability_delta,
        decoder: Vec::new(),
        vending_map: None,
        encoder_policy: solve.policy,
        parameters: Parameters {
            d,
            memory_size: 0,
            side_memory_size: None,
            grid_resolution: Some(complete.resolution),
            budget: None,
        },
        diagnostics: Diagnostics {
            gain: solve.gain,
            iterations: solve.iterations,
            final_span: solve.final_span,
            num_states,
            num_actions,
            tables_evaluated: 1,
            tables_skipped: 0,
            lambda_star: None,
            avg_action_cost: None,
            dual_evaluations: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::memory::memory_last_m;
    use crate::mdp::{exhaustive_policy_search, RviOptions};
    use crate::models::{bernoulli_source, bsc, hamming, ProbVector, StochasticMatrix};

    fn binary(p: f64, delta: f64) -> ProblemSpec {
        ProblemSpec::binary(p, delta).unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn counts_at_zero_lookahead() {
        let mem = memory_last_m(0, 2, &Limits::default()).unwrap();
        let mdp = build_feedback_finite(&binary(0.3, 0.3), 0, &mem, &[0, 1], &Limits::default()).unwrap();
        assert_eq!((mdp.num_states(), mdp.num_actions()), (2, 4));
    }

    #[test]
    fn spot_reward_matches_enumeration() {
        let spec = binary(0.3, 0.2);
        let mem = memory_last_m(1, 2, &Limits::default()).unwrap();
        let decoder = [1, 0, 0, 1];
        let mdp = build_feedback_finite(&spec, 1, &mem, &decoder, &Limits::default()).unwrap();
        // State v = (0, 1), z = 1; slice action 2 = (ũ=0 -> 1, ũ=1 -> 0).
        let (v, z, a) = (1, 1, 2);
        let mut want = 0.0;
        for un in 0..2 {
            let x = if un == 0 { 1 } else { 0 };
            for y in 0..2 {
                let uh = decoder[y * 2 + z];
                want -= spec.source[un] * spec.channel.get(x, y) * spec.distortion.get(1, uh);
            }
        }
        assert!((mdp.reward(v * 2 + z, a) - want).abs() < 1e-15);
    }

    #[test]
    fn noiseless_channel_reaches_zero() {
        for (d, m) in [(0, 0), (1, 1), (1, 2), (2, 0)] {
            let mem = memory_last_m(m, 2, &Limits::default()).unwrap();
            let r = solve_feedback_finite(&binary(0.3, 0.0), d, &mem, &opts()).unwrap();
            assert!(r.distortion.abs() < 1e-9, "d={d} m={m}: {}", r.distortion);
        }
    }

    #[test]
    fn zero_lookahead_is_min_of_p_and_delta() {
        for m in 0..=2 {
            let mem = memory_last_m(m, 2, &Limits::default()).unwrap();
            let r = solve_feedback_finite(&binary(0.3, 0.3), 0, &mem, &opts()).unwrap();
            assert!((r.distortion - 0.3).abs() < 1e-9, "m={m}: {}", r.distortion);
        }
    }

    #[test]
    fn rvi_matches_exhaustive_on_a_decoder() {
        let spec = binary(0.25, 0.15);
        let mem = memory_last_m(1, 2, &Limits::default()).unwrap();
        let mdp = build_feedback_finite(&spec, 0, &mem, &[0, 0, 1, 1], &Limits::default()).unwrap();
        let ex = exhaustive_policy_search(&mdp, 1 << 20).unwrap();
        let rvi = relative_value_iteration(&mdp, &RviOptions::default()).unwrap();
        assert!((ex.gain - rvi.gain).abs() < 1e-8);
    }

    /// Full maps `V -> X` instead of slices, for the equivalence check.
    fn full_map_mdp(spec: &ProblemSpec, d: usize, mem: &MemorySpec, decoder: &[usize]) -> FiniteMdp {
        let kernel = build_markov_kernel(&spec.source, d, &Limits::default()).unwrap();
        let (vc, zc) = (kernel.num_states(), mem.size());
        let actions = 1usize << vc;
        let mut b = TransitionBuilder::new(vc * zc, actions).unwrap();
        let mut reward = Vec::new();
        for v in 0..vc {
            for z in 0..zc {
                for a in 0..actions {
                    let mut row = Vec::new();
                    let mut r = 0.0;
                    for (nv, pu) in kernel.successors(v) {
                        let x = digit(a, 2, vc, nv);
                        let u2 = kernel.codec().component(nv, 1);
                        for y in 0..2 {
                            let p = pu * spec.channel.get(x, y);
                            row.push((nv * zc + mem.update(z, y), p));
                            r -= p * spec.distortion.get(u2, decoder[y * zc + z]);
                        }
                    }
                    b.push_row(row).unwrap();
                    reward.push(r);
                }
            }
        }
        FiniteMdp::new(Arc::new(b.finish().unwrap()), reward).unwrap()
    }

    #[test]
    fn slice_actions_match_full_maps() {
        let spec = binary(0.3, 0.3);
        let mem = memory_last_m(1, 2, &Limits::default()).unwrap();
        for t in 0..16 {
            let decoder = table_digits(t, 2, 4);
            let slice = build_feedback_finite(&spec, 1, &mem, &decoder, &Limits::default()).unwrap();
            let full = full_map_mdp(&spec, 1, &mem, &decoder);
            let gs = relative_value_iteration(&slice, &RviOptions::default()).unwrap().gain;
            let gf = relative_value_iteration(&full, &RviOptions::default()).unwrap().gain;
            assert!((gs - gf).abs() < 1e-9, "table {t}: {gs} vs {gf}");
        }
    }

    #[test]
    fn decoder_table_limit() {
        let mem = memory_last_m(3, 2, &Limits::default()).unwrap();
        let tight = SolveOptions { limits: Limits { max_tables: 100, ..Limits::default() }, ..opts() };
        let err = solve_feedback_finite(&binary(0.3, 0.3), 1, &mem, &tight).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(err.to_string().contains("smaller memory"));
    }

    #[test]
    fn complete_memory_noiseless_vertices() {
        let r = solve_feedback_complete(
            &binary(0.3, 0.0),
            1,
            &CompleteOptions { resolution: 1, stability: false },
            &opts(),
        )
        .unwrap();
        assert!(r.distortion.abs() < 1e-9);
        assert!(r.is_approximate());
    }

    #[test]
    fn complete_memory_zero_lookahead_is_sandwiched() {
        let r = solve_feedback_complete(
            &binary(0.3, 0.3),
            0,
            &CompleteOptions { resolution: 4, stability: true },
            &opts(),
        )
        .unwrap();
        assert!(r.distortion <= 0.3 + 1e-9);
        assert!(r.distortion >= 0.2214 - 1e-3);
        assert!(r.stability_delta.is_some());
    }

    #[test]
    fn complete_memory_grid_dimension_checked() {
        let grid = simplex_grid(3, 2, &Limits::default()).unwrap();
        assert!(build_feedback_complete_discretized(&binary(0.3, 0.3), 1, &grid, &Limits::default()).is_err());
    }

    #[test]
    fn larger_alphabets() {
        let spec = ProblemSpec::new(
            ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap(),
            StochasticMatrix::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap(),
            hamming(3).unwrap(),
        )
        .unwrap();
        let mem = memory_last_m(0, 2, &Limits::default()).unwrap();
        let r = solve_feedback_finite(&spec, 0, &mem, &opts()).unwrap();
        assert!(r.distortion > 0.0 && r.distortion < 0.5);
        let _ = (bernoulli_source(0.1), bsc(0.1));
    }
}
