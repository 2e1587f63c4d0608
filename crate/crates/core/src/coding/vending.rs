//! Vending-machine side information: the encoder output reaches the decoder
//! noiselessly and also selects a costly side-information action, subject to an
//! average-cost budget handled through the Lagrangian dual.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::feedback::check_decoder;
use super::grid::{simplex_grid, SimplexGrid};
use super::memory::MemorySpec;
use super::report::{
    clamp_distortion, Diagnostics, Parameters, Scenario, ScenarioSolveReport, FLAG_APPROXIMATE, FLAG_BRACKET,
    FLAG_NONCONVERGED, FLAG_RANDOMIZED,
};
use super::{digit, pick_min, table_digits, CandidateResult, SolveOptions};
use crate::bayes::{xi_m_given_input, xi_n_given};
use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::lookahead::{build_markov_kernel, MarkovKernel};
use crate::mdp::{
    constrained_solve, min_average_cost, relative_value_iteration, ConstrainedMdp, DualOptions, FiniteMdp,
    TransitionBuilder, Transitions,
};
use crate::models::{ProblemSpec, VendingSpec};
use crate::par::map_range;

/// Decoder memories: `inputs` over `X` (size `|M|`), `side` over `Y` (size `|N|`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VendingMemories {
    pub inputs: MemorySpec,
    pub side: MemorySpec,
}

/// How the action budget enters a vending solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VendingMode {
    /// Average action cost at most the given budget.
    Budget(f64),
    /// No cost constraint.
    Unconstrained,
    /// Only zero-cost actions may be vended.
    ZeroCostOnly,
}

fn vending_parts(spec: &ProblemSpec, mems: &VendingMemories) -> Result<VendingSpec> {
    let vending = spec.vending()?.clone();
    if !spec.channel.is_identity() {
        return Err(Error::invalid("vending problems need a noiseless encoder link (identity channel)"));
    }
    if mems.inputs.inputs() != spec.input_size() {
        return Err(Error::invalid("input memory must update on the encoder alphabet"));
    }
    if mems.side.inputs() != vending.side_outputs() {
        return Err(Error::invalid("side memory must update on the side-information alphabet"));
    }
    Ok(vending)
}

/// Shared pieces of either vending model.
#[derive(Debug, Clone)]
struct Common {
    spec: ProblemSpec,
    vending: VendingSpec,
    kernel: MarkovKernel,
    num_actions: usize,
    m_count: usize,
    n_count: usize,
}

impl Common {
    fn new(spec: &ProblemSpec, d: usize, mems: &VendingMemories, limits: &Limits) -> Result<Self> {
        let vending = vending_parts(spec, mems)?;
        let kernel = build_markov_kernel(&spec.source, d, limits)?;
        let num_actions = super::feedback::slice_actions(spec, limits)?;
        Ok(Common {
            spec: spec.clone(),
            vending,
            kernel,
            num_actions,
            m_count: mems.inputs.size(),
            n_count: mems.side.size(),
        })
    }

    fn av_len(&self) -> usize {
        self.spec.input_size()
    }

    fn av_count(&self) -> u128 {
        checked_pow(self.vending.actions(), self.av_len())
    }

    fn decoder_len(&self) -> usize {
        self.spec.input_size() * self.vending.side_outputs() * self.m_count * self.n_count
    }

    fn decoder_count(&self) -> u128 {
        checked_pow(self.spec.reconstruction_size(), self.decoder_len())
    }

    /// Index into decoder tables: `((x * |Y| + y) * |M| + m) * |N| + n`.
    #[inline]
    fn dec_index(&self, x: usize, y: usize, m: usize, n: usize) -> usize {
        ((x * self.vending.side_outputs() + y) * self.m_count + m) * self.n_count + n
    }

    fn check_av(&self, av: &[usize]) -> Result<()> {
        if av.len() != self.av_len() || av.iter().any(|&a| a >= self.vending.actions()) {
            return Err(Error::invalid("vending map must send every encoder symbol to a vending action"));
        }
        Ok(())
    }

    fn x_of(&self, a: usize, next_v: usize) -> usize {
        let u_count = self.spec.source_size();
        digit(a, self.spec.input_size(), u_count, next_v % u_count)
    }

    /// Expected action cost `Σ P_U(ũ) C(av(a(ũ)))` per (state, action); the state only enters through `v`.
    fn costs(&self, av: &[usize], states_per_v: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.kernel.num_states() * states_per_v * self.num_actions);
        for v in 0..self.kernel.num_states() {
            let row: Vec<f64> = (0..self.num_actions)
                .map(|a| {
                    self.kernel
                        .successors(v)
                        .map(|(nv, pu)| pu * self.vending.costs.cost(av[self.x_of(a, nv)]))
                        .sum()
                })
                .collect();
            for _ in 0..states_per_v {
                out.extend_from_slice(&row);
            }
        }
        out
    }
}

/// Feedback vending model with finite decoder memories; states `(v * |M| + m) * |N| + n`.
#[derive(Debug, Clone)]
pub struct VendingFeedbackModel {
    common: Common,
    mems: VendingMemories,
}

impl VendingFeedbackModel {
    pub fn new(spec: &ProblemSpec, d: usize, mems: &VendingMemories, limits: &Limits) -> Result<Self> {
        let common = Common::new(spec, d, mems, limits)?;
        let states = common.kernel.num_states() as u128 * common.m_count as u128 * common.n_count as u128;
        limits.check_states("vending states |U|^(d+1)·|M|·|N|", states)?;
        Ok(VendingFeedbackModel { common, mems: mems.clone() })
    }

    pub fn num_states(&self) -> usize {
        self.common.kernel.num_states() * self.common.m_count * self.common.n_count
    }

    pub fn num_actions(&self) -> usize {
        self.common.num_actions
    }

    pub fn transitions(&self, av: &[usize]) -> Result<Transitions> {
        let c = &self.common;
        c.check_av(av)?;
        let (mc, nc) = (c.m_count, c.n_count);
        let mut b = TransitionBuilder::new(self.num_states(), c.num_actions)?;
        let mut row = Vec::new();
        for v in 0..c.kernel.num_states() {
            for m in 0..mc {
                for n in 0..nc {
                    for a in 0..c.num_actions {
                        row.clear();
                        for (nv, pu) in c.kernel.successors(v) {
                            let x = c.x_of(a, nv);
                            let u2 = c.kernel.codec().component(nv, 1);
                            let next_m = self.mems.inputs.update(m, x);
                            for y in 0..c.vending.side_outputs() {
                                let py = c.vending.prob(y, u2, av[x]);
                                row.push(((nv * mc + next_m) * nc + self.mems.side.update(n, y), pu * py));
                            }
                        }
                        b.push_row(row.iter().copied())?;
                    }
                }
            }
        }
        b.finish()
    }

    /// Distortion reward `-Σ P_U(ũ) Σ_y P(y | u_2, av(x)) Λ(u_2, decoder(x, y, m, n))`.
    pub fn rewards(&self, decoder: &[usize], av: &[usize]) -> Result<Vec<f64>> {
        let c = &self.common;
        c.check_av(av)?;
        check_decoder(decoder, c.decoder_len(), c.spec.reconstruction_size())?;
        let mut out = Vec::with_capacity(self.num_states() * c.num_actions);
        for v in 0..c.kernel.num_states() {
            for m in 0..c.m_count {
                for n in 0..c.n_count {
                    for a in 0..c.num_actions {
                        let mut loss = 0.0;
                        for (nv, pu) in c.kernel.successors(v) {
                            let x = c.x_of(a, nv);
                            let u2 = c.kernel.codec().component(nv, 1);
                            for y in 0..c.vending.side_outputs() {
                                let py = c.vending.prob(y, u2, av[x]);
                                if py > 0.0 {
                                    loss += pu * py * c.spec.distortion.get(u2, decoder[c.dec_index(x, y, m, n)]);
                                }
                            }
                        }
                        out.push(-loss);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn costs(&self, av: &[usize]) -> Result<Vec<f64>> {
        self.common.check_av(av)?;
        Ok(self.common.costs(av, self.common.m_count * self.common.n_count))
    }
}

/// Vending model without feedback; states `(v * |grid_M| + b) * |grid_N| + g`.
#[derive(Debug, Clone)]
pub struct VendingNoFeedbackModel {
    common: Common,
    mems: VendingMemories,
    grid_m: SimplexGrid,
    grid_n: SimplexGrid,
    /// Projected `ξ_m` per `(b, x)`.
    next_m: Vec<usize>,
}

impl VendingNoFeedbackModel {
    pub fn new(spec: &ProblemSpec, d: usize, mems: &VendingMemories, resolution: usize, limits: &Limits) -> Result<Self> {
        let common = Common::new(spec, d, mems, limits)?;
        let grid_m = simplex_grid(mems.inputs.size(), resolution, limits)?;
        let grid_n = simplex_grid(mems.side.size(), resolution, limits)?;
        let states = common.kernel.num_states() as u128 * grid_m.len() as u128 * grid_n.len() as u128;
        limits.check_states("vending no-feedback states |U|^(d+1)·|grid_M|·|grid_N|", states)?;
        let x_count = spec.input_size();
        let next_m = (0..grid_m.len() * x_count)
            .map(|bx| grid_m.project(&xi_m_given_input(&grid_m.belief(bx / x_count), bx % x_count, &mems.inputs)))
            .collect();
        Ok(VendingNoFeedbackModel { common, mems: mems.clone(), grid_m, grid_n, next_m })
    }

    pub fn num_states(&self) -> usize {
        self.common.kernel.num_states() * self.grid_m.len() * self.grid_n.len()
    }

    pub fn num_actions(&self) -> usize {
        self.common.num_actions
    }

    pub fn transitions(&self, av: &[usize]) -> Result<Transitions> {
        let c = &self.common;
        c.check_av(av)?;
        let (bm, gn) = (self.grid_m.len(), self.grid_n.len());
        let (u_count, a_count, x_count) = (c.spec.source_size(), c.vending.actions(), c.spec.input_size());
        // Projected ξ_n per (g, u, vending action).
        let next_n: Vec<usize> = (0..gn * u_count * a_count)
            .map(|i| {
                let (g, u, act) = (i / (u_count * a_count), (i / a_count) % u_count, i % a_count);
                self.grid_n.project(&xi_n_given(&self.grid_n.belief(g), &c.vending, u, act, &self.mems.side))
            })
            .collect();
        let mut b = TransitionBuilder::new(self.num_states(), c.num_actions)?;
        for v in 0..c.kernel.num_states() {
            for bi in 0..bm {
                for g in 0..gn {
                    for a in 0..c.num_actions {
                        b.push_row(c.kernel.successors(v).map(|(nv, pu)| {
                            let x = c.x_of(a, nv);
                            let u2 = c.kernel.codec().component(nv, 1);
                            let nm = self.next_m[bi * x_count + x];
                            let nn = next_n[(g * u_count + u2) * a_count + av[x]];
                            ((nv * bm + nm) * gn + nn, pu)
                        }))?;
                    }
                }
            }
        }
        b.finish()
    }

    /// `-Σ P_U(ũ) Σ_{m,n} β(m) γ(n) Σ_y P(y | u_2, av(x)) Λ(u_2, decoder(x, y, m, n))`.
    pub fn rewards(&self, decoder: &[usize], av: &[usize]) -> Result<Vec<f64>> {
        let c = &self.common;
        c.check_av(av)?;
        check_decoder(decoder, c.decoder_len(), c.spec.reconstruction_size())?;
        let (bm, gn) = (self.grid_m.len(), self.grid_n.len());
        let (u_count, x_count) = (c.spec.source_size(), c.spec.input_size());
        let betas: Vec<Vec<f64>> = (0..bm).map(|i| self.grid_m.belief(i)).collect();
        let gammas: Vec<Vec<f64>> = (0..gn).map(|i| self.grid_n.belief(i)).collect();
        // loss[((bi * gn + g) * |X| + x) * |U| + u]
        let mut loss = vec![0.0; bm * gn * x_count * u_count];
        for (bi, beta) in betas.iter().enumerate() {
            for (g, gamma) in gammas.iter().enumerate() {
                for x in 0..x_count {
                    for u in 0..u_count {
                        let mut acc = 0.0;
                        for (m, &wm) in beta.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                            for (n, &wn) in gamma.iter().enumerate().filter(|(_, w)| **w > 0.0) {
                                for y in 0..c.vending.side_outputs() {
                                    let py = c.vending.prob(y, u, av[x]);
                                    if py > 0.0 {
                                        acc += wm * wn * py * c.spec.distortion.get(u, decoder[c.dec_index(x, y, m, n)]);
                                    }
                                }
                            }
                        }
                        loss[((bi * gn + g) * x_count + x) * u_count + u] = acc;
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(self.num_states() * c.num_actions);
        for v in 0..c.kernel.num_states() {
            for bi in 0..bm {
                for g in 0..gn {
                    for a in 0..c.num_actions {
                        let r: f64 = c
                            .kernel
                            .successors(v)
                            .map(|(nv, pu)| {
                                let x = c.x_of(a, nv);
                                pu * loss[((bi * gn + g) * x_count + x) * u_count + c.kernel.codec().component(nv, 1)]
                            })
                            .sum();
                        out.push(-r);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn costs(&self, av: &[usize]) -> Result<Vec<f64>> {
        self.common.check_av(av)?;
        Ok(self.common.costs(av, self.grid_m.len() * self.grid_n.len()))
    }
}

/// Lagrangian MDP `g^λ = g + λ (Γ - l)` of the feedback vending model for one table pair.
#[allow(clippy::too_many_arguments)]
pub fn build_vending_feedback_finite(
    spec: &ProblemSpec,
    d: usize,
    mems: &VendingMemories,
    decoder: &[usize],
    av_map: &[usize],
    lambda: f64,
    limits: &Limits,
) -> Result<FiniteMdp> {
    let model = VendingFeedbackModel::new(spec, d, mems, limits)?;
    let base = FiniteMdp::new(Arc::new(model.transitions(av_map)?), model.rewards(decoder, av_map)?)?;
    let budget = spec.vending()?.costs.budget();
    crate::mdp::lagrangian_mdp(&ConstrainedMdp::new(base, model.costs(av_map)?, budget)?, lambda)
}

/// Lagrangian MDP of the no-feedback vending model on belief grids over `M` and `N`.
#[allow(clippy::too_many_arguments)]
pub fn build_vending_nofeedback_discretized(
    spec: &ProblemSpec,
    d: usize,
    mems: &VendingMemories,
    decoder: &[usize],
    av_map: &[usize],
    lambda: f64,
    resolution: usize,
    limits: &Limits,
) -> Result<FiniteMdp> {
    let model = VendingNoFeedbackModel::new(spec, d, mems, resolution, limits)?;
    let base = FiniteMdp::new(Arc::new(model.transitions(av_map)?), model.rewards(decoder, av_map)?)?;
    let budget = spec.vending()?.costs.budget();
    crate::mdp::lagrangian_mdp(&ConstrainedMdp::new(base, model.costs(av_map)?, budget)?, lambda)
}

trait VendingModel: Sync {
    fn common(&self) -> &Common;
    fn num_states(&self) -> usize;
    fn transitions(&self, av: &[usize]) -> Result<Transitions>;
    fn rewards(&self, decoder: &[usize], av: &[usize]) -> Result<Vec<f64>>;
    fn costs(&self, av: &[usize]) -> Result<Vec<f64>>;
}

impl VendingModel for VendingFeedbackModel {
    fn common(&self) -> &Common {
        &self.common
    }
    fn num_states(&self) -> usize {
        VendingFeedbackModel::num_states(self)
    }
    fn transitions(&self, av: &[usize]) -> Result<Transitions> {
        VendingFeedbackModel::transitions(self, av)
    }
    fn rewards(&self, decoder: &[usize], av: &[usize]) -> Result<Vec<f64>> {
        VendingFeedbackModel::rewards(self, decoder, av)
    }
    fn costs(&self, av: &[usize]) -> Result<Vec<f64>> {
        VendingFeedbackModel::costs(self, av)
    }
}

impl VendingModel for VendingNoFeedbackModel {
    fn common(&self) -> &Common {
        &self.common
    }
    fn num_states(&self) -> usize {
        VendingNoFeedbackModel::num_states(self)
    }
    fn transitions(&self, av: &[usize]) -> Result<Transitions> {
        VendingNoFeedbackModel::transitions(self, av)
    }
    fn rewards(&self, decoder: &[usize], av: &[usize]) -> Result<Vec<f64>> {
        VendingNoFeedbackModel::rewards(self, decoder, av)
    }
    fn costs(&self, av: &[usize]) -> Result<Vec<f64>> {
        VendingNoFeedbackModel::costs(self, av)
    }
}

struct Candidate {
    gain: f64,
    iterations: usize,
    final_span: f64,
    policy: Vec<usize>,
    lambda_star: Option<f64>,
    avg_cost: f64,
    evaluations: Option<usize>,
    bracket: bool,
}

struct AvPlan {
    map: Vec<usize>,
    transitions: Arc<Transitions>,
    costs: Vec<f64>,
    feasible: bool,
}

struct PairChoice {
    cand: Candidate,
    decoder: Vec<usize>,
    av_map: Vec<usize>,
    evaluated: u64,
    skipped: u64,
    nonconverged: u64,
}

fn solve_pairs<M: VendingModel>(model: &M, mode: VendingMode, opts: &SolveOptions) -> Result<PairChoice> {
    let c = model.common();
    let (a_count, av_len) = (c.vending.actions(), c.av_len());
    let (dec_base, dec_len) = (c.spec.reconstruction_size(), c.decoder_len());
    let pairs = c.decoder_count().saturating_mul(c.av_count());
    opts.limits.check_tables(
        "decoder and vending table pairs |Û|^(|X|·|Y|·|M|·|N|)·|A_v|^|X|; use smaller memories",
        pairs,
    )?;
    let budget = match mode {
        VendingMode::Budget(b) => {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::invalid(format!("invalid budget {b}")));
            }
            Some(b)
        }
        _ => None,
    };
    let lambda_max = c.spec.distortion.max_loss() / c.vending.costs.min_positive_cost().unwrap_or(1.0);
    let lambda_max = if lambda_max > 0.0 { lambda_max } else { 1.0 };

    let plans: Vec<Result<AvPlan>> = map_range(c.av_count() as usize, |i| {
        let map = table_digits(i, a_count, av_len);
        let zero_only = map.iter().all(|&a| c.vending.costs.cost(a) == 0.0);
        let transitions = Arc::new(model.transitions(&map)?);
        let costs = model.costs(&map)?;
        let feasible = match (mode, budget) {
            (VendingMode::ZeroCostOnly, _) => zero_only,
            (_, Some(b)) => {
                let probe = FiniteMdp::new(Arc::clone(&transitions), vec![0.0; costs.len()])?;
                let cmdp = ConstrainedMdp::new(probe, costs.clone(), b)?;
                min_average_cost(&cmdp, &opts.rvi)? <= b + 1e-9
            }
            _ => true,
        };
        Ok(AvPlan { map, transitions, costs, feasible })
    });
    let plans: Vec<AvPlan> = plans.into_iter().collect::<Result<_>>()?;

    let dec_count = c.decoder_count() as usize;
    let results: Vec<CandidateResult<Candidate>> = map_range(dec_count * plans.len(), |i| {
        let plan = &plans[i % plans.len()];
        if !plan.feasible {
            return Ok(None);
        }
        let decoder = table_digits(i / plans.len(), dec_base, dec_len);
        let base = FiniteMdp::new(Arc::clone(&plan.transitions), model.rewards(&decoder, &plan.map)?)?;
        let cand = match budget {
            Some(b) => {
                let cmdp = ConstrainedMdp::new(base, plan.costs.clone(), b)?;
                let dual = constrained_solve(
                    &cmdp,
                    &DualOptions { lambda_max: Some(lambda_max), rvi: opts.rvi, ..DualOptions::default() },
                )?;
                Candidate {
                    gain: dual.dual_value,
                    iterations: 0,
                    final_span: 0.0,
                    policy: dual.policy,
                    lambda_star: Some(dual.lambda_star),
                    avg_cost: dual.avg_constraint_cost,
                    evaluations: Some(dual.evaluations),
                    bracket: dual.bracket_warning,
                }
            }
            None => {
                let s = relative_value_iteration(&base, &opts.rvi)?;
                let avg_cost = crate::mdp::evaluate_policy_reward(&base, &s.policy, &plan.costs, &Default::default())?.gain;
                Candidate {
                    gain: s.gain,
                    iterations: s.iterations,
                    final_span: s.final_span,
                    policy: s.policy,
                    lambda_star: None,
                    avg_cost,
                    evaluations: None,
                    bracket: false,
                }
            }
        };
        Ok(Some((-cand.gain, cand)))
    });
    let best = pick_min(results)?;
    let decoder = table_digits(best.index / plans.len(), dec_base, dec_len);
    let av_map = plans[best.index % plans.len()].map.clone();
    Ok(PairChoice {
        cand: best.payload,
        decoder,
        av_map,
        evaluated: pairs as u64,
        skipped: best.skipped,
        nonconverged: best.nonconverged,
    })
}

fn vending_report<M: VendingModel>(
    model: &M,
    scenario: Scenario,
    d: usize,
    mems: &VendingMemories,
    resolution: Option<usize>,
    mode: VendingMode,
    opts: &SolveOptions,
) -> Result<ScenarioSolveReport> {
    let PairChoice { cand, decoder, av_map, evaluated, skipped, nonconverged } = solve_pairs(model, mode, opts)?;
    let c = model.common();
    let mut report = ScenarioSolveReport {
        scenario,
        distortion: clamp_distortion(cand.gain, c.spec.distortion.max_loss()),
        flags: Vec::new(),
        stability_delta: None,
        decoder,
        vending_map: Some(av_map),
        encoder_policy: cand.policy,
        parameters: Parameters {
            d,
            memory_size: mems.inputs.size(),
            side_memory_size: Some(mems.side.size()),
            grid_resolution: resolution,
            budget: match mode {
                VendingMode::Budget(b) => Some(b),
                VendingMode::ZeroCostOnly => Some(0.0),
                VendingMode::Unconstrained => None,
            },
        },
        diagnostics: Diagnostics {
            gain: cand.gain,
            iterations: cand.iterations,
            final_span: cand.final_span,
            num_states: model.num_states(),
            num_actions: c.num_actions,
            tables_evaluated: evaluated,
            tables_skipped: skipped,
            lambda_star: cand.lambda_star,
            avg_action_cost: Some(cand.avg_cost),
            dual_evaluations: cand.evaluations,
        },
    };
    if resolution.is_some() && (mems.inputs.size() > 1 || mems.side.size() > 1) {
        report.add_flag(FLAG_APPROXIMATE);
    }
    if cand.bracket {
        report.add_flag(FLAG_BRACKET);
    }
    if nonconverged > 0 {
        report.add_flag(FLAG_NONCONVERGED);
    }
    if matches!(mode, VendingMode::Budget(b) if cand.avg_cost > b + 1e-9) {
        report.add_flag(FLAG_RANDOMIZED);
    }
    Ok(report)
}

/// Best (decoder, vending map) pair with feedback under `mode`.
pub fn solve_vending_feedback(
    spec: &ProblemSpec,
    d: usize,
    mems: &VendingMemories,
    mode: VendingMode,
    opts: &SolveOptions,
) -> Result<ScenarioSolveReport> {
    let model = VendingFeedbackModel::new(spec, d, mems, &opts.limits)?;
    vending_report(&model, Scenario::VendingFeedback, d, mems, None, mode, opts)
}

/// Best pair without feedback, beliefs over both memories on grids of `resolution`.
pub fn solve_vending_nofeedback(
    spec: &ProblemSpec,
    d: usize,
    mems: &VendingMemories,
    resolution: usize,
    mode: VendingMode,
    opts: &SolveOptions,
) -> Result<ScenarioSolveReport> {
    let model = VendingNoFeedbackModel::new(spec, d, mems, resolution, &opts.limits)?;
    vending_report(&model, Scenario::VendingNoFeedback, d, mems, Some(resolution), mode, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::memory::memory_last_m;
    use crate::models::{hamming, ActionCostVector, ProbVector, StochasticMatrix};

    /// Ternary uniform source, binary encoder output; action 1 reveals `u` at cost 1.
    pub(crate) fn toy(budget: f64) -> ProblemSpec {
        let mut rows = Vec::new();
        for u in 0..3 {
            rows.push(vec![1.0, 0.0, 0.0]);
            let mut reveal = vec![0.0; 3];
            reveal[u] = 1.0;
            rows.push(reveal);
        }
        ProblemSpec::new(ProbVector::uniform(3).unwrap(), StochasticMatrix::identity(2).unwrap(), hamming(3).unwrap())
            .unwrap()
            .with_vending(VendingSpec {
                kernel: StochasticMatrix::new(rows).unwrap(),
                costs: ActionCostVector::new(vec![0.0, 1.0], budget).unwrap(),
            })
            .unwrap()
    }

    fn mems() -> VendingMemories {
        VendingMemories {
            inputs: memory_last_m(0, 2, &Limits::default()).unwrap(),
            side: memory_last_m(0, 3, &Limits::default()).unwrap(),
        }
    }

    fn solve(mode: VendingMode) -> ScenarioSolveReport {
        solve_vending_feedback(&toy(0.0), 0, &mems(), mode, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn budget_endpoints() {
        let free = solve(VendingMode::Unconstrained);
        let zero = solve(VendingMode::ZeroCostOnly);
        assert!(free.distortion.abs() < 1e-9, "{}", free.distortion);
        // One bit over a ternary uniform source with no side information: 1/3.
        assert!((zero.distortion - 1.0 / 3.0).abs() < 1e-9, "{}", zero.distortion);
        let b0 = solve(VendingMode::Budget(0.0));
        assert!((b0.distortion - zero.distortion).abs() < 1e-7);
        let big = solve(VendingMode::Budget(5.0));
        assert!((big.distortion - free.distortion).abs() < 1e-7);
    }

    #[test]
    fn over_budget_policy_is_flagged() {
        let r = solve_vending_feedback(&toy(0.0), 1, &mems(), VendingMode::Budget(0.5), &SolveOptions::default())
            .unwrap();
        assert!((r.distortion - 1.0 / 6.0).abs() < 1e-7, "{}", r.distortion);
        let spent = r.diagnostics.avg_action_cost.unwrap();
        assert_eq!(r.flags.contains(&FLAG_RANDOMIZED.to_string()), spent > 0.5 + 1e-9);
        assert!(!solve(VendingMode::Budget(0.0)).flags.contains(&FLAG_RANDOMIZED.to_string()));
    }

    #[test]
    fn distortion_decreases_with_budget() {
        let mut prev = f64::INFINITY;
        for b in [0.0, 0.1, 0.25, 0.5, 1.0] {
            let r = solve(VendingMode::Budget(b));
            assert!(r.distortion <= prev + 1e-7, "budget {b}");
            assert!(r.diagnostics.avg_action_cost.unwrap() <= b + 1e-6);
            prev = r.distortion;
        }
    }

    #[test]
    fn nofeedback_with_trivial_memories_matches_feedback() {
        let f = solve_vending_feedback(&toy(0.0), 0, &mems(), VendingMode::Budget(0.3), &SolveOptions::default()).unwrap();
        let n = solve_vending_nofeedback(&toy(0.0), 0, &mems(), 1, VendingMode::Budget(0.3), &SolveOptions::default())
            .unwrap();
        assert!((f.distortion - n.distortion).abs() < 1e-7);
        assert!(!n.is_approximate());
    }

    #[test]
    fn requires_vending_and_identity_channel() {
        let spec = ProblemSpec::binary(0.3, 0.1).unwrap();
        let m = VendingMemories {
            inputs: memory_last_m(0, 2, &Limits::default()).unwrap(),
            side: memory_last_m(0, 2, &Limits::default()).unwrap(),
        };
        assert!(VendingFeedbackModel::new(&spec, 0, &m, &Limits::default()).is_err());
    }

    #[test]
    fn spot_lagrangian_reward() {
        let spec = toy(0.4);
        let decoder: Vec<usize> = (0..6).map(|i| (i + 1) % 3).collect();
        let mdp = build_vending_feedback_finite(&spec, 0, &mems(), &decoder, &[1, 0], 2.0, &Limits::default()).unwrap();
        // Slice action 5 = digits (0, 1, 2) over base 2 with 3 digits: ũ=0 -> 1, ũ=1 -> 0, ũ=2 -> 1.
        let a = 5;
        let mut want = 0.0;
        let mut cost = 0.0;
        for u in 0..3 {
            let x = digit(a, 2, 3, u);
            let act = [1, 0][x];
            cost += spec.vending.as_ref().unwrap().costs.cost(act) / 3.0;
            for y in 0..3 {
                let p = spec.vending.as_ref().unwrap().prob(y, u, act);
                want -= p / 3.0 * spec.distortion.get(u, decoder[x * 3 + y]);
            }
        }
        want += 2.0 * (0.4 - cost);
        assert!((mdp.reward(0, a) - want).abs() < 1e-12);
    }
}
