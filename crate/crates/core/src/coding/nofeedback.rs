//! No feedback: the encoder tracks a belief over the decoder's finite memory.

use std::sync::Arc;

use super::feedback::{check_decoder, slice_actions};
use super::grid::{simplex_grid, SimplexGrid};
use super::memory::MemorySpec;
use super::report::{
    clamp_distortion, Diagnostics, Parameters, Scenario, ScenarioSolveReport, FLAG_APPROXIMATE, FLAG_NONCONVERGED,
};
use super::{digit, pick_min, table_digits, SolveOptions};
use crate::bayes::xi_given_input;
use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::lookahead::{build_markov_kernel, MarkovKernel};
use crate::mdp::{relative_value_iteration, FiniteMdp, TransitionBuilder, Transitions};
use crate::models::ProblemSpec;
use crate::par::map_range;

/// States `v * |grid| + g`, `g` a grid point over `Z`. Dynamics are shared by all decoders.
#[derive(Debug, Clone)]
pub struct NoFeedbackModel {
    spec: ProblemSpec,
    kernel: MarkovKernel,
    memory: MemorySpec,
    grid: SimplexGrid,
    num_actions: usize,
    transitions: Arc<Transitions>,
}

impl NoFeedbackModel {
    pub fn new(spec: &ProblemSpec, d: usize, memory: &MemorySpec, grid: SimplexGrid, limits: &Limits) -> Result<Self> {
        if memory.inputs() != spec.output_size() {
            return Err(Error::invalid("memory update alphabet must be the channel output alphabet"));
        }
        if grid.dim() != memory.size() {
            return Err(Error::invalid(format!(
                "belief grid dimension {} must equal the memory size {}",
                grid.dim(),
                memory.size()
            )));
        }
        let kernel = build_markov_kernel(&spec.source, d, limits)?;
        let (v_count, g_count) = (kernel.num_states(), grid.len());
        limits.check_states("no-feedback states |U|^(d+1)·|grid|", v_count as u128 * g_count as u128)?;
        let num_actions = slice_actions(spec, limits)?;
        let (u_count, x_count) = (spec.source_size(), spec.input_size());

        let next_belief: Vec<usize> = (0..g_count * x_count)
            .map(|gx| {
                let (g, x) = (gx / x_count, gx % x_count);
                grid.project(&xi_given_input(&grid.belief(g), &spec.channel, x, memory))
            })
            .collect();

        let mut b = TransitionBuilder::new(v_count * g_count, num_actions)?;
        for v in 0..v_count {
            for g in 0..g_count {
                for a in 0..num_actions {
                    b.push_row(kernel.successors(v).map(|(next_v, pu)| {
                        let x = digit(a, x_count, u_count, next_v % u_count);
                        (next_v * g_count + next_belief[g * x_count + x], pu)
                    }))?;
                }
            }
        }
        Ok(NoFeedbackModel {
            spec: spec.clone(),
            kernel,
            memory: memory.clone(),
            grid,
            num_actions,
            transitions: Arc::new(b.finish()?),
        })
    }

    pub fn num_states(&self) -> usize {
        self.kernel.num_states() * self.grid.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn decoder_len(&self) -> usize {
        self.spec.output_size() * self.memory.size()
    }

    pub fn decoder_count(&self) -> u128 {
        checked_pow(self.spec.reconstruction_size(), self.decoder_len())
    }

    /// `g(v, β, a) = -Σ P_U(ũ) Σ_z β(z) Σ_y P(y | a(ũ)) Λ(u_2, decoder(y, z))`.
    pub fn rewards(&self, decoder: &[usize]) -> Result<Vec<f64>> {
        check_decoder(decoder, self.decoder_len(), self.spec.reconstruction_size())?;
        let (u_count, x_count) = (self.spec.source_size(), self.spec.input_size());
        let (z_count, g_count) = (self.memory.size(), self.grid.len());
        // loss[(g * |X| + x) * |U| + u]
        let mut loss = vec![0.0; g_count * x_count * u_count];
        for g in 0..g_count {
            let beta = self.grid.belief(g);
            for x in 0..x_count {
                for u in 0..u_count {
                    let mut acc = 0.0;
                    for (z, &bz) in beta.iter().enumerate() {
                        if bz == 0.0 {
                            continue;
                        }
                        for (y, &py) in self.spec.channel.row(x).iter().enumerate() {
                            acc += bz * py * self.spec.distortion.get(u, decoder[y * z_count + z]);
                        }
                    }
                    loss[(g * x_count + x) * u_count + u] = acc;
                }
            }
        }
        let codec = self.kernel.codec();
        let mut out = Vec::with_capacity(self.num_states() * self.num_actions);
        for v in 0..self.kernel.num_states() {
            for g in 0..g_count {
                for a in 0..self.num_actions {
                    let r: f64 = self
                        .kernel
                        .successors(v)
                        .map(|(next_v, pu)| {
                            let x = digit(a, x_count, u_count, next_v % u_count);
                            pu * loss[(g * x_count + x) * u_count + codec.component(next_v, 1)]
                        })
                        .sum();
                    out.push(-r);
                }
            }
        }
        Ok(out)
    }

    pub fn mdp(&self, decoder: &[usize]) -> Result<FiniteMdp> {
        FiniteMdp::new(Arc::clone(&self.transitions), self.rewards(decoder)?)
    }
}

/// The no-feedback MDP for one decoder table on a belief grid over `Z`.
pub fn build_nofeedback_finite(
    spec: &ProblemSpec,
    d: usize,
    memory: &MemorySpec,
    decoder: &[usize],
    grid: &SimplexGrid,
    limits: &Limits,
) -> Result<FiniteMdp> {
    NoFeedbackModel::new(spec, d, memory, grid.clone(), limits)?.mdp(decoder)
}

/// Best decoder table without feedback. Flagged approximate when `|Z| > 1`.
pub fn solve_nofeedback(
    spec: &ProblemSpec,
    d: usize,
    memory: &MemorySpec,
    resolution: usize,
    opts: &SolveOptions,
) -> Result<ScenarioSolveReport> {
    let grid = simplex_grid(memory.size(), resolution, &opts.limits)?;
    let model = NoFeedbackModel::new(spec, d, memory, grid, &opts.limits)?;
    let count = model.decoder_count();
    opts.limits.check_tables("decoder tables |Û|^(|Y|·|Z|); use a smaller memory", count)?;
    let (base, len) = (spec.reconstruction_size(), model.decoder_len());
    let results = map_range(count as usize, |t| {
        let solve = relative_value_iteration(&model.mdp(&table_digits(t, base, len))?, &opts.rvi)?;
        Ok(Some((-solve.gain, solve)))
    });
    let best = pick_min(results)?;
    let solve = best.payload;
    let mut report = ScenarioSolveReport {
        scenario: Scenario::NoFeedback,
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
            grid_resolution: Some(resolution),
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
    if memory.size() > 1 {
        report.add_flag(FLAG_APPROXIMATE);
    }
    if best.nonconverged > 0 {
        report.add_flag(FLAG_NONCONVERGED);
    }
    Ok(report)
}
