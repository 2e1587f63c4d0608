//! Monte Carlo simulation of a policy bundle on the true system.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{xi_given_input, xi_m_given_input, xi_n_given};
use crate::coding::{digit, simplex_grid, MemorySpec, Scenario, ScenarioSolveReport, SimplexGrid};
use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::lookahead::{build_markov_kernel, TupleCodec};
use crate::models::ProblemSpec;
use crate::par::map_range;

/// Steps discarded before averaging.
pub const BURN_IN: u64 = 1000;

/// Encoder, decoder memory and decoder table (plus vending map) to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBundle {
    pub scenario: Scenario,
    /// Action per MDP state of the matching builder.
    pub encoder: Vec<usize>,
    /// Decoder memory (over `Y`; over `X` for vending).
    pub memory: MemorySpec,
    /// Side-information memory for vending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_memory: Option<MemorySpec>,
    pub decoder: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vending_map: Option<Vec<usize>>,
    /// Belief grid resolution of the no-feedback builders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
}

impl PolicyBundle {
    pub fn from_report(report: &ScenarioSolveReport, memory: MemorySpec, side_memory: Option<MemorySpec>) -> Self {
        PolicyBundle {
            scenario: report.scenario,
            encoder: report.encoder_policy.clone(),
            memory,
            side_memory,
            decoder: report.decoder.clone(),
            vending_map: report.vending_map.clone(),
            grid_resolution: report.parameters.grid_resolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub horizon: u64,
    pub replications: usize,
    pub seed: u64,
    pub mean_distortion: f64,
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_action_cost: Option<f64>,
    pub replication_means: Vec<f64>,
}

/// Tracked state of the encoder and decoder during one run.
struct Sim<'a> {
    spec: &'a ProblemSpec,
    bundle: &'a PolicyBundle,
    codec: TupleCodec,
    source: WeightedIndex<f64>,
    channel: Vec<WeightedIndex<f64>>,
    /// Vending side channel per `u * |A_v| + a_v`.
    side: Vec<WeightedIndex<f64>>,
    grid_a: Option<SimplexGrid>,
    grid_b: Option<SimplexGrid>,
    /// Projected belief steps: `next_a[g * |X| + x]`, `next_b[(g * |U| + u) * |A_v| + a_v]`.
    next_a: Vec<usize>,
    next_b: Vec<usize>,
    states: usize,
}

fn weighted(row: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(row.iter().copied()).map_err(|e| Error::Internal(format!("sampling table: {e}")))
}

impl<'a> Sim<'a> {
    fn new(spec: &'a ProblemSpec, d: usize, bundle: &'a PolicyBundle, limits: &Limits) -> Result<Self> {
        let kernel = build_markov_kernel(&spec.source, d, limits)?;
        let codec = *kernel.codec();
        let (u_count, x_count) = (spec.source_size(), spec.input_size());
        let actions = checked_pow(x_count, u_count) as usize;
        let mem = &bundle.memory;
        let channel = (0..x_count).map(|x| weighted(spec.channel.row(x))).collect::<Result<Vec<_>>>()?;
        let mut sim = Sim {
            spec,
            bundle,
            codec,
            source: weighted(spec.source.as_slice())?,
            channel,
            side: Vec::new(),
            grid_a: None,
            grid_b: None,
            next_a: Vec::new(),
            next_b: Vec::new(),
            states: 0,
        };
        let v_count = sim.codec.size();
        let vending = matches!(bundle.scenario, Scenario::VendingFeedback | Scenario::VendingNoFeedback);
        let decoder_len;
        if vending {
            let v = spec.vending()?;
            if !spec.channel.is_identity() {
                return Err(Error::Config("vending bundles need an identity channel".into()));
            }
            let side_mem = bundle
                .side_memory
                .as_ref()
                .ok_or_else(|| Error::Config("vending bundle lacks a side memory".into()))?;
            let av = bundle
                .vending_map
                .as_ref()
                .ok_or_else(|| Error::Config("vending bundle lacks a vending map".into()))?;
            if av.len() != x_count || av.iter().any(|&a| a >= v.actions()) {
                return Err(Error::Config("vending map does not fit the problem".into()));
            }
            if mem.inputs() != x_count || side_mem.inputs() != v.side_outputs() {
                return Err(Error::Config("vending memories do not match the alphabets".into()));
            }
            sim.side = (0..u_count * v.actions()).map(|i| weighted(v.kernel.row(i))).collect::<Result<Vec<_>>>()?;
            decoder_len = x_count * v.side_outputs() * mem.size() * side_mem.size();
        } else {
            if mem.inputs() != spec.output_size() {
                return Err(Error::Config("decoder memory must update on the channel output alphabet".into()));
            }
            decoder_len = spec.output_size() * mem.size();
        }
        match bundle.scenario {
            Scenario::FeedbackFinite => sim.states = v_count * mem.size(),
            Scenario::VendingFeedback => sim.states = v_count * mem.size() * bundle.side_memory.as_ref().map_or(1, |m| m.size()),
            Scenario::NoFeedback | Scenario::VendingNoFeedback => {
                let r = bundle
                    .grid_resolution
                    .ok_or_else(|| Error::Config("no-feedback bundle lacks a grid resolution".into()))?;
                let ga = simplex_grid(mem.size(), r, limits)?;
                sim.next_a = if vending {
                    (0..ga.len() * x_count)
                        .map(|i| ga.project(&xi_m_given_input(&ga.belief(i / x_count), i % x_count, mem)))
                        .collect()
                } else {
                    (0..ga.len() * x_count)
                        .map(|i| ga.project(&xi_given_input(&ga.belief(i / x_count), &spec.channel, i % x_count, mem)))
                        .collect()
                };
                sim.states = v_count * ga.len();
                if vending {
                    let v = spec.vending()?;
                    let side_mem = bundle.side_memory.as_ref().expect("checked above");
                    let gb = simplex_grid(side_mem.size(), r, limits)?;
                    let a_count = v.actions();
                    sim.next_b = (0..gb.len() * u_count * a_count)
                        .map(|i| {
                            let (g, u, act) = (i / (u_count * a_count), (i / a_count) % u_count, i % a_count);
                            gb.project(&xi_n_given(&gb.belief(g), v, u, act, side_mem))
                        })
                        .collect();
                    sim.states *= gb.len();
                    sim.grid_b = Some(gb);
                }
                sim.grid_a = Some(ga);
            }
            Scenario::FeedbackComplete => {
                return Err(Error::Config("complete-memory bundles cannot be simulated; use a finite memory".into()))
            }
        }
        if bundle.encoder.len() != sim.states || bundle.encoder.iter().any(|&a| a >= actions) {
            return Err(Error::Config(format!(
                "encoder table has {} entries for {} states (or an action out of range)",
                bundle.encoder.len(),
                sim.states
            )));
        }
        if bundle.decoder.len() != decoder_len || bundle.decoder.iter().any(|&uh| uh >= spec.reconstruction_size()) {
            return Err(Error::Config(format!("decoder table must have {decoder_len} in-range entries")));
        }
        Ok(sim)
    }

    /// Runs `BURN_IN + horizon` steps; returns `(distortion, action cost)` sums over the kept steps,
    /// and per-batch distortion sums.
    fn run(&self, rng: &mut ChaCha8Rng, horizon: u64, batches: u64) -> (f64, f64, Vec<f64>) {
        let spec = self.spec;
        let b = self.bundle;
        let (u_count, x_count) = (spec.source_size(), spec.input_size());
        let mem = &b.memory;
        let side_mem = b.side_memory.as_ref();
        let vending = spec.vending.as_ref();
        let (mut v, mut z, mut n) = (0usize, 0usize, 0usize);
        let (mut ga, mut gb) = (
            self.grid_a.as_ref().map_or(0, |g| g.vertex(0)),
            self.grid_b.as_ref().map_or(0, |g| g.vertex(0)),
        );
        let (size_a, size_b) = (self.grid_a.as_ref().map_or(0, |g| g.len()), self.grid_b.as_ref().map_or(0, |g| g.len()));
        let (mut dist, mut cost) = (0.0, 0.0);
        let batch_len = (horizon / batches.max(1)).max(1);
        let mut batch_sums = vec![0.0; batches as usize];
        for step in 0..BURN_IN + horizon {
            let state = match b.scenario {
                Scenario::FeedbackFinite => v * mem.size() + z,
                Scenario::NoFeedback => v * size_a + ga,
                Scenario::VendingFeedback => (v * mem.size() + z) * side_mem.map_or(1, |m| m.size()) + n,
                _ => (v * size_a + ga) * size_b + gb,
            };
            let a = b.encoder[state];
            let un = self.source.sample(rng);
            let next_v = self.codec.shift(v, un);
            let u2 = self.codec.component(next_v, 1);
            let x = digit(a, x_count, u_count, un);
            let (loss, c) = match (b.scenario, vending, side_mem) {
                (Scenario::VendingFeedback | Scenario::VendingNoFeedback, Some(vs), Some(sm)) => {
                    let act = b.vending_map.as_ref().expect("checked at setup")[x];
                    let y = self.side[u2 * vs.actions() + act].sample(rng);
                    let idx = ((x * vs.side_outputs() + y) * mem.size() + z) * sm.size() + n;
                    let loss = spec.distortion.get(u2, b.decoder[idx]);
                    z = mem.update(z, x);
                    n = sm.update(n, y);
                    if b.scenario == Scenario::VendingNoFeedback {
                        ga = self.next_a[ga * x_count + x];
                        gb = self.next_b[(gb * u_count + u2) * vs.actions() + act];
                    }
                    (loss, vs.costs.cost(act))
                }
                _ => {
                    let y = self.channel[x].sample(rng);
                    let loss = spec.distortion.get(u2, b.decoder[y * mem.size() + z]);
                    z = mem.update(z, y);
                    if b.scenario == Scenario::NoFeedback {
                        ga = self.next_a[ga * x_count + x];
                    }
                    (loss, 0.0)
                }
            };
            v = next_v;
            if step >= BURN_IN {
                dist += loss;
                cost += c;
                let k = ((step - BURN_IN) / batch_len).min(batches.saturating_sub(1)) as usize;
                if let Some(s) = batch_sums.get_mut(k) {
                    *s += loss;
                }
            }
        }
        (dist, cost, batch_sums)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Simulates `bundle` for `replications` independent runs of `horizon` steps after burn-in.
/// Replication `r` uses stream `r` of a ChaCha generator seeded with `seed`. With a single
/// replication the standard error comes from 20 batch means.
pub fn simulate(
    bundle: &PolicyBundle,
    spec: &ProblemSpec,
    d: usize,
    horizon: u64,
    replications: usize,
    seed: u64,
    limits: &Limits,
) -> Result<SimReport> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    let sim = Sim::new(spec, d, bundle, limits)?;
    let batches = if replications == 1 { 20.min(horizon) } else { 1 };
    let runs = map_range(replications, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        sim.run(&mut rng, horizon, batches)
    });
    let h = horizon as f64;
    let means: Vec<f64> = runs.iter().map(|r| r.0 / h).collect();
    let (mean, se) = if replications == 1 {
        let per = (horizon / batches) as f64;
        let bm: Vec<f64> = runs[0].2.iter().map(|s| s / per).collect();
        (means[0], mean_and_se(&bm).1)
    } else {
        mean_and_se(&means)
    };
    let mean_action_cost = spec
        .vending
        .as_ref()
        .filter(|_| matches!(bundle.scenario, Scenario::VendingFeedback | Scenario::VendingNoFeedback))
        .map(|_| runs.iter().map(|r| r.1 / h).sum::<f64>() / replications as f64);
    Ok(SimReport {
        horizon,
        replications,
        seed,
        mean_distortion: mean,
        std_error: se,
        mean_action_cost,
        replication_means: means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{memory_last_m, solve_feedback_finite, solve_nofeedback, SolveOptions};

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn perfect_channel_identity_bundle_is_lossless() {
        let spec = ProblemSpec::binary(0.3, 0.0).unwrap();
        let mem = memory_last_m(0, 2, &lim()).unwrap();
        // d = 0: slice action 1 maps ũ -> ũ; decoder y -> y.
        let bundle = PolicyBundle {
            scenario: Scenario::FeedbackFinite,
            encoder: vec![1, 1],
            memory: mem,
            side_memory: None,
            decoder: vec![0, 1],
            vending_map: None,
            grid_resolution: None,
        };
        let r = simulate(&bundle, &spec, 0, 5000, 3, 1, &lim()).unwrap();
        assert_eq!(r.mean_distortion, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn guess_the_mode() {
        let spec = ProblemSpec::binary(0.3, 0.5).unwrap();
        let mem = memory_last_m(0, 2, &lim()).unwrap();
        let bundle = PolicyBundle {
            scenario: Scenario::FeedbackFinite,
            encoder: vec![0, 0],
            memory: mem,
            side_memory: None,
            decoder: vec![0, 0],
            vending_map: None,
            grid_resolution: None,
        };
        let r = simulate(&bundle, &spec, 0, 20_000, 8, 42, &lim()).unwrap();
        assert!((r.mean_distortion - 0.3).abs() < 3.0 * r.std_error, "{r:?}");
        let one = simulate(&bundle, &spec, 0, 20_000, 1, 42, &lim()).unwrap();
        assert!(one.std_error > 0.0);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let spec = ProblemSpec::binary(0.3, 0.2).unwrap();
        let mem = memory_last_m(1, 2, &lim()).unwrap();
        let rep = solve_feedback_finite(&spec, 1, &mem, &SolveOptions::default()).unwrap();
        let bundle = PolicyBundle::from_report(&rep, mem, None);
        let a = simulate(&bundle, &spec, 1, 10_000, 4, 7, &lim()).unwrap();
        let b = simulate(&bundle, &spec, 1, 10_000, 4, 7, &lim()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = simulate(&bundle, &spec, 1, 10_000, 4, 8, &lim()).unwrap();
        assert_ne!(a.replication_means, c.replication_means);
    }

    #[test]
    fn nofeedback_bundle_tracks_gain() {
        let spec = ProblemSpec::binary(0.3, 0.2).unwrap();
        let mem = memory_last_m(1, 2, &lim()).unwrap();
        let rep = solve_nofeedback(&spec, 1, &mem, 8, &SolveOptions::default()).unwrap();
        let bundle = PolicyBundle::from_report(&rep, mem, None);
        let r = simulate(&bundle, &spec, 1, 100_000, 6, 3, &lim()).unwrap();
        // The grid model is approximate; the simulated policy can only be as good as the true optimum.
        assert!(r.mean_distortion > 0.0 && r.mean_distortion <= 0.2 + 4.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let spec = ProblemSpec::binary(0.3, 0.2).unwrap();
        let bundle = PolicyBundle {
            scenario: Scenario::FeedbackFinite,
            encoder: vec![0; 3],
            memory: memory_last_m(0, 2, &lim()).unwrap(),
            side_memory: None,
            decoder: vec![0, 1],
            vending_map: None,
            grid_resolution: None,
        };
        assert!(matches!(simulate(&bundle, &spec, 0, 10, 1, 0, &lim()), Err(Error::Config(_))));
        assert!(simulate(&bundle, &spec, 0, 0, 1, 0, &lim()).is_err());
    }
}
