//! Bayes response and envelope, and the belief updates used by the belief-state builders.

use crate::coding::memory::MemorySpec;
use crate::error::{Error, Result};
use crate::lookahead::MarkovKernel;
use crate::models::{DistortionMatrix, ProbVector, StochasticMatrix, VendingSpec};

pub type Belief = ProbVector;

/// Best reconstruction and its expected loss; ties go to the smallest index.
#[inline]
pub(crate) fn respond(belief: &[f64], distortion: &DistortionMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for uh in 0..distortion.reconstructions() {
        let loss: f64 = belief.iter().enumerate().map(|(u, &b)| b * distortion.get(u, uh)).sum();
        if loss < best.1 {
            best = (uh, loss);
        }
    }
    best
}

fn check_dim<T>(belief: &[T], expected: usize, what: &str) -> Result<()> {
    if belief.len() != expected {
        return Err(Error::invalid(format!(
            "dimension mismatch: {what} has {} entries, expected {expected}",
            belief.len()
        )));
    }
    Ok(())
}

pub fn bayes_response(belief: &[f64], distortion: &DistortionMatrix) -> Result<usize> {
    check_dim(belief, distortion.sources(), "belief")?;
    Ok(respond(belief, distortion).0)
}

pub fn bayes_envelope(belief: &[f64], distortion: &DistortionMatrix) -> Result<f64> {
    check_dim(belief, distortion.sources(), "belief")?;
    Ok(respond(belief, distortion).1)
}

fn normalize(mut v: Vec<f64>, what: impl FnOnce() -> Error) -> Result<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if !(total > 0.0) {
        return Err(what());
    }
    v.iter_mut().for_each(|x| *x /= total);
    Ok(v)
}

/// Unnormalized `P_U(u) P(y | μ(u))`.
pub(crate) fn posterior_weights(prior: &[f64], channel: &StochasticMatrix, policy: &[usize], y: usize) -> Vec<f64> {
    prior.iter().zip(policy).map(|(&p, &x)| p * channel.get(x, y)).collect()
}

/// `f_μ[β, y]`, the posterior over `U` after observing `y` under the symbol map `μ`.
pub fn posterior_symbol(
    prior: &[f64],
    channel: &StochasticMatrix,
    policy: &[usize],
    y: usize,
) -> Result<Belief> {
    check_dim(policy, prior.len(), "symbol policy")?;
    if y >= channel.outputs() || policy.iter().any(|&x| x >= channel.inputs()) {
        return Err(Error::invalid("symbol policy or output outside the channel alphabets"));
    }
    let w = posterior_weights(prior, channel, policy, y);
    let post = normalize(w, || Error::UnreachableObservation(format!("y = {y} has zero probability")))?;
    Ok(ProbVector::renormalized(post))
}

/// Unnormalized `β^T K(ṽ) P(y | a(ṽ))`.
pub(crate) fn g_weights(
    belief: &[f64],
    kernel: &MarkovKernel,
    channel: &StochasticMatrix,
    action: &[usize],
    y: usize,
) -> Vec<f64> {
    let mut w = vec![0.0; kernel.num_states()];
    for (v, &b) in belief.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        for (next, q) in kernel.successors(v) {
            w[next] += b * q;
        }
    }
    for (next, wv) in w.iter_mut().enumerate() {
        *wv *= channel.get(action[next], y);
    }
    w
}

/// The feedback belief update `G(β, a, y)` over lookahead tuples.
pub fn belief_update_g(
    belief: &[f64],
    kernel: &MarkovKernel,
    channel: &StochasticMatrix,
    action: &[usize],
    y: usize,
) -> Result<Belief> {
    check_dim(belief, kernel.num_states(), "belief")?;
    check_dim(action, kernel.num_states(), "encoder map")?;
    let w = g_weights(belief, kernel, channel, action, y);
    let out = normalize(w, || Error::UnreachableObservation(format!("y = {y} has zero probability under β")))?;
    Ok(ProbVector::renormalized(out))
}

/// Marginal of the tuple belief at 1-based `slot`.
pub fn tuple_marginal(belief: &[f64], kernel: &MarkovKernel, slot: usize) -> Vec<f64> {
    let codec = kernel.codec();
    let mut out = vec![0.0; codec.base()];
    for (v, &b) in belief.iter().enumerate() {
        out[codec.component(v, slot)] += b;
    }
    out
}

fn check_transition(kernel: &MarkovKernel, v_prev: usize, v_cur: usize) -> Result<()> {
    let n = kernel.num_states();
    if v_prev >= n || v_cur >= n {
        return Err(Error::invalid("tuple index out of range"));
    }
    if kernel.prob(v_prev, v_cur) <= 0.0 {
        return Err(Error::invalid(format!("transition {v_prev} -> {v_cur} has zero probability")));
    }
    Ok(())
}

/// Memory belief after the input `x` passes through the channel, the output unseen.
pub(crate) fn xi_given_input(belief: &[f64], channel: &StochasticMatrix, x: usize, memory: &MemorySpec) -> Vec<f64> {
    let mut out = vec![0.0; memory.size()];
    for (z, &b) in belief.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        for (y, &q) in channel.row(x).iter().enumerate() {
            out[memory.update(z, y)] += b * q;
        }
    }
    out
}

/// No-feedback update `ξ` of the encoder's belief over decoder memory.
pub fn belief_update_xi(
    belief: &[f64],
    kernel: &MarkovKernel,
    v_prev: usize,
    v_cur: usize,
    channel: &StochasticMatrix,
    action: &[usize],
    memory: &MemorySpec,
) -> Result<Belief> {
    check_dim(belief, memory.size(), "memory belief")?;
    check_dim(action, kernel.num_states(), "encoder map")?;
    check_transition(kernel, v_prev, v_cur)?;
    let w = xi_given_input(belief, channel, action[v_cur], memory);
    let out = normalize(w, || Error::UnreachableTransition(format!("{v_prev} -> {v_cur}")))?;
    Ok(ProbVector::renormalized(out))
}

pub(crate) fn xi_m_given_input(belief: &[f64], x: usize, memory: &MemorySpec) -> Vec<f64> {
    let mut out = vec![0.0; memory.size()];
    for (m, &b) in belief.iter().enumerate() {
        out[memory.update(m, x)] += b;
    }
    out
}

/// Update `ξ_m` of the belief over the decoder's channel-input memory.
pub fn belief_update_xi_m(
    belief: &[f64],
    kernel: &MarkovKernel,
    v_prev: usize,
    v_cur: usize,
    action: &[usize],
    memory: &MemorySpec,
) -> Result<Belief> {
    check_dim(belief, memory.size(), "memory belief")?;
    check_dim(action, kernel.num_states(), "encoder map")?;
    check_transition(kernel, v_prev, v_cur)?;
    let w = xi_m_given_input(belief, action[v_cur], memory);
    let out = normalize(w, || Error::UnreachableTransition(format!("{v_prev} -> {v_cur}")))?;
    Ok(ProbVector::renormalized(out))
}

pub(crate) fn xi_n_given(belief: &[f64], vending: &VendingSpec, u: usize, av: usize, memory: &MemorySpec) -> Vec<f64> {
    let mut out = vec![0.0; memory.size()];
    let row = vending.kernel.row(u * vending.actions() + av);
    for (n, &g) in belief.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (y, &q) in row.iter().enumerate() {
            out[memory.update(n, y)] += g * q;
        }
    }
    out
}

/// Update `ξ_n` of the belief over the decoder's side-information memory.
#[allow(clippy::too_many_arguments)]
pub fn belief_update_xi_n(
    belief: &[f64],
    kernel: &MarkovKernel,
    v_prev: usize,
    v_cur: usize,
    vending: &VendingSpec,
    av_map: &[usize],
    action: &[usize],
    memory: &MemorySpec,
) -> Result<Belief> {
    check_dim(belief, memory.size(), "memory belief")?;
    check_dim(action, kernel.num_states(), "encoder map")?;
    check_transition(kernel, v_prev, v_cur)?;
    let x = action[v_cur];
    if x >= av_map.len() {
        return Err(Error::invalid("vending map does not cover the encoder output"));
    }
    let u = kernel.codec().component(v_cur, 1);
    let w = xi_n_given(belief, vending, u, av_map[x], memory);
    let out = normalize(w, || Error::UnreachableTransition(format!("{v_prev} -> {v_cur}")))?;
    Ok(ProbVector::renormalized(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::memory::memory_last_m;
    use crate::limits::Limits;
    use crate::lookahead::build_markov_kernel;
    use crate::models::{bernoulli_source, bsc, hamming, ActionCostVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn response_examples() {
        let h = hamming(2).unwrap();
        assert_eq!(bayes_response(&[0.3, 0.7], &h).unwrap(), 1);
        assert_eq!(bayes_response(&[0.5, 0.5], &h).unwrap(), 0);
        let skew = DistortionMatrix::new(vec![vec![0.0, 10.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(bayes_response(&[0.2, 0.8], &skew).unwrap(), 0);
        assert!(bayes_response(&[1.0], &h).is_err());
    }

    #[test]
    fn envelope_examples() {
        let h = hamming(2).unwrap();
        assert!((bayes_envelope(&[0.3, 0.7], &h).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(bayes_envelope(&[1.0, 0.0], &h).unwrap(), 0.0);
        assert_eq!(bayes_envelope(&[0.5, 0.5], &h).unwrap(), 0.5);
    }

    #[test]
    fn posterior_examples() {
        let src = bernoulli_source(0.3).unwrap();
        let id = [0, 1];
        let p = posterior_symbol(src.as_slice(), &bsc(0.0).unwrap(), &id, 0).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        for map in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            for y in 0..2 {
                let p = posterior_symbol(src.as_slice(), &bsc(0.5).unwrap(), &map, y).unwrap();
                assert!(close(p.as_slice(), src.as_slice(), 1e-15));
            }
        }
        let p = posterior_symbol(src.as_slice(), &bsc(0.2).unwrap(), &id, 0).unwrap();
        assert!(close(p.as_slice(), &[0.56 / 0.62, 0.06 / 0.62], 1e-12));
        assert!((p[0] - 0.9032).abs() < 1e-4);
        let err = posterior_symbol(&[1.0, 0.0], &bsc(0.0).unwrap(), &id, 1).unwrap_err();
        assert!(matches!(err, Error::UnreachableObservation(_)));
    }

    #[test]
    fn g_at_zero_lookahead() {
        let src = bernoulli_source(0.3).unwrap();
        let k = build_markov_kernel(&src, 0, &Limits::default()).unwrap();
        for beta in [[0.1, 0.9], [1.0, 0.0]] {
            for y in 0..2 {
                let out = belief_update_g(&beta, &k, &bsc(0.5).unwrap(), &[0, 1], y).unwrap();
                assert!(close(out.as_slice(), src.as_slice(), 1e-15));
            }
        }
        let out = belief_update_g(&[0.4, 0.6], &k, &bsc(0.0).unwrap(), &[0, 1], 1).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 1.0]);
    }

    /// Brute force over the joint `(V_{i-1}, V_i, Y_i)`.
    fn g_oracle(beta: &[f64], src: &[f64], ch: &StochasticMatrix, action: &[usize], y: usize) -> Vec<f64> {
        let n = beta.len();
        let mut joint = vec![0.0; n];
        for (v, &b) in beta.iter().enumerate() {
            let u2 = v % 2;
            for un in 0..2 {
                let next = u2 * 2 + un;
                joint[next] += b * src[un] * ch.get(action[next], y);
            }
        }
        let s: f64 = joint.iter().sum();
        joint.iter().map(|x| x / s).collect()
    }

    #[test]
    fn g_matches_joint_enumeration_at_lookahead_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = bernoulli_source(0.35).unwrap();
        let k = build_markov_kernel(&src, 1, &Limits::default()).unwrap();
        let ch = bsc(0.2).unwrap();
        for _ in 0..50 {
            let beta = random_simplex(&mut rng, 4);
            let action: Vec<usize> = (0..4).map(|_| rng.gen_range(0..2)).collect();
            for y in 0..2 {
                let got = belief_update_g(&beta, &k, &ch, &action, y).unwrap();
                assert!(close(got.as_slice(), &g_oracle(&beta, src.as_slice(), &ch, &action, y), 1e-12));
            }
        }
    }

    #[test]
    fn g_with_useless_channel_is_pushforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = bernoulli_source(0.2).unwrap();
        let k = build_markov_kernel(&src, 1, &Limits::default()).unwrap();
        let useless = StochasticMatrix::new(vec![vec![0.6, 0.4], vec![0.6, 0.4]]).unwrap();
        let beta = random_simplex(&mut rng, 4);
        let mut push = vec![0.0; 4];
        for (v, &b) in beta.iter().enumerate() {
            for (w, q) in k.successors(v) {
                push[w] += b * q;
            }
        }
        for y in 0..2 {
            let got = belief_update_g(&beta, &k, &useless, &[0, 1, 1, 0], y).unwrap();
            assert!(close(got.as_slice(), &push, 1e-12));
        }
    }

    #[test]
    fn xi_examples() {
        let src = bernoulli_source(0.3).unwrap();
        let k = build_markov_kernel(&src, 0, &Limits::default()).unwrap();
        let single = memory_last_m(0, 2, &Limits::default()).unwrap();
        let out = belief_update_xi(&[1.0], &k, 0, 1, &bsc(0.3).unwrap(), &[0, 1], &single).unwrap();
        assert_eq!(out.as_slice(), &[1.0]);
        let last = memory_last_m(1, 2, &Limits::default()).unwrap();
        let out = belief_update_xi(&[0.5, 0.5], &k, 0, 1, &bsc(0.0).unwrap(), &[0, 1], &last).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 1.0]);
        let zero = build_markov_kernel(&bernoulli_source(0.0).unwrap(), 0, &Limits::default()).unwrap();
        assert!(belief_update_xi(&[0.5, 0.5], &zero, 0, 1, &bsc(0.0).unwrap(), &[0, 1], &last).is_err());
    }

    #[test]
    fn xi_matches_joint_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = bernoulli_source(0.4).unwrap();
        let k = build_markov_kernel(&src, 1, &Limits::default()).unwrap();
        let ch = bsc(0.15).unwrap();
        let mem = MemorySpec::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        for _ in 0..30 {
            let beta = random_simplex(&mut rng, 2);
            let action: Vec<usize> = (0..4).map(|_| rng.gen_range(0..2)).collect();
            let v_prev = rng.gen_range(0..4);
            let v_cur = (v_prev % 2) * 2 + rng.gen_range(0..2);
            let got = belief_update_xi(&beta, &k, v_prev, v_cur, &ch, &action, &mem).unwrap();
            let mut joint = [0.0; 2];
            for zp in 0..2 {
                for y in 0..2 {
                    for z in 0..2 {
                        if z == mem.update(zp, y) {
                            joint[z] += beta[zp] * k.prob(v_prev, v_cur) * ch.get(action[v_cur], y);
                        }
                    }
                }
            }
            let s: f64 = joint.iter().sum();
            let want: Vec<f64> = joint.iter().map(|x| x / s).collect();
            assert!(close(got.as_slice(), &want, 1e-12));
        }
    }

    fn toy_vending(noiseless: bool) -> VendingSpec {
        let rows = if noiseless {
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]
        } else {
            vec![vec![0.5, 0.5], vec![0.9, 0.1], vec![0.5, 0.5], vec![0.2, 0.8]]
        };
        VendingSpec {
            kernel: StochasticMatrix::new(rows).unwrap(),
            costs: ActionCostVector::new(vec![0.0, 1.0], 0.5).unwrap(),
        }
    }

    #[test]
    fn vending_updates_examples() {
        let src = bernoulli_source(0.3).unwrap();
        let k = build_markov_kernel(&src, 0, &Limits::default()).unwrap();
        let single = MemorySpec::trivial(2).unwrap();
        let out = belief_update_xi_m(&[1.0], &k, 0, 1, &[0, 1], &single).unwrap();
        assert_eq!(out.as_slice(), &[1.0]);
        let out = belief_update_xi_n(&[1.0], &k, 0, 1, &toy_vending(false), &[0, 1], &[0, 1], &single).unwrap();
        assert_eq!(out.as_slice(), &[1.0]);
        let last = memory_last_m(1, 2, &Limits::default()).unwrap();
        let out = belief_update_xi_n(&[0.3, 0.7], &k, 0, 1, &toy_vending(true), &[0, 0], &[1, 0], &last).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 1.0]);
        let out = belief_update_xi_m(&[0.3, 0.7], &k, 0, 1, &[1, 0], &last).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn xi_n_matches_joint_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = bernoulli_source(0.45).unwrap();
        let k = build_markov_kernel(&src, 1, &Limits::default()).unwrap();
        let vend = toy_vending(false);
        let mem = MemorySpec::new(3, 2, vec![1, 2, 0, 0, 2, 1]).unwrap();
        for _ in 0..30 {
            let gamma = random_simplex(&mut rng, 3);
            let action: Vec<usize> = (0..4).map(|_| rng.gen_range(0..2)).collect();
            let av: Vec<usize> = (0..2).map(|_| rng.gen_range(0..2)).collect();
            let v_prev = rng.gen_range(0..4);
            let v_cur = (v_prev % 2) * 2 + rng.gen_range(0..2);
            let got = belief_update_xi_n(&gamma, &k, v_prev, v_cur, &vend, &av, &action, &mem).unwrap();
            let u = v_cur / 2;
            let mut joint = [0.0; 3];
            for np in 0..3 {
                for x in 0..2 {
                    if x != action[v_cur] {
                        continue;
                    }
                    for y in 0..2 {
                        joint[mem.update(np, y)] += gamma[np] * k.prob(v_prev, v_cur) * vend.prob(y, u, av[x]);
                    }
                }
            }
            let s: f64 = joint.iter().sum();
            let want: Vec<f64> = joint.iter().map(|x| x / s).collect();
            assert!(close(got.as_slice(), &want, 1e-12));
        }
    }

    proptest! {
        #[test]
        fn envelope_is_concave(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let d = DistortionMatrix::new(vec![vec![0.0, 2.0, 1.0], vec![1.5, 0.0, 0.5], vec![0.3, 1.0, 0.0]]).unwrap();
            let b1 = [a / 2.0, 0.5 - a / 2.0, 0.5];
            let b2 = [b * c, b * (1.0 - c), 1.0 - b];
            let mix: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let lhs = bayes_envelope(&mix, &d).unwrap();
            let rhs = t * bayes_envelope(&b1, &d).unwrap() + (1.0 - t) * bayes_envelope(&b2, &d).unwrap();
            prop_assert!(lhs >= rhs - 1e-12);
        }

        #[test]
        fn response_attains_envelope(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let d = DistortionMatrix::new(vec![vec![0.0, 2.0], vec![1.5, 0.0], vec![0.3, 1.0]]).unwrap();
            let beta = [a * b, a * (1.0 - b), 1.0 - a];
            let uh = bayes_response(&beta, &d).unwrap();
            let loss: f64 = (0..3).map(|u| beta[u] * d.get(u, uh)).sum();
            prop_assert_eq!(loss, bayes_envelope(&beta, &d).unwrap());
        }

        #[test]
        fn updates_stay_on_simplex(seed in 0u64..500, y in 0usize..2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = bernoulli_source(rng.gen_range(0.05..0.95)).unwrap();
            let k = build_markov_kernel(&src, 1, &Limits::default()).unwrap();
            let ch = bsc(rng.gen_range(0.01..0.49)).unwrap();
            let beta = random_simplex(&mut rng, 4);
            let action: Vec<usize> = (0..4).map(|_| rng.gen_range(0..2)).collect();
            let out = belief_update_g(&beta, &k, &ch, &action, y).unwrap();
            prop_assert!((out.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(out.as_slice().iter().all(|&x| x >= 0.0));
        }
    }
}
