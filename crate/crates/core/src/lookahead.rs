//! Lookahead source as a Markov chain over tuples `v = (u_1, ..., u_{d+1})`.

use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::models::{DistortionMatrix, ProbVector};

/// Base-`|U|` index codec for fixed-width tuples, `u_1` most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleCodec {
    base: usize,
    width: usize,
    size: usize,
    /// `base^(width-1)`.
    top: usize,
}

impl TupleCodec {
    pub fn new(base: usize, width: usize, limits: &Limits) -> Result<Self> {
        if base == 0 || width == 0 {
            return Err(Error::invalid("tuple codec needs base >= 1 and width >= 1"));
        }
        let size = checked_pow(base, width);
        limits.check_states("lookahead tuple states |U|^(d+1)", size)?;
        let size = size as usize;
        Ok(TupleCodec { base, width, size, top: size / base })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn encode(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.width {
            return Err(Error::invalid(format!(
                "tuple has {} components, expected {}",
                tuple.len(),
                self.width
            )));
        }
        let mut idx = 0;
        for (k, &u) in tuple.iter().enumerate() {
            if u >= self.base {
                return Err(Error::invalid(format!("component {k} = {u} is outside 0..{}", self.base)));
            }
            idx = idx * self.base + u;
        }
        Ok(idx)
    }

    pub fn decode(&self, idx: usize) -> Result<Vec<usize>> {
        if idx >= self.size {
            return Err(Error::invalid(format!("tuple index {idx} is outside 0..{}", self.size)));
        }
        let mut out = vec![0; self.width];
        let mut rest = idx;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.base;
            rest /= self.base;
        }
        Ok(out)
    }

    /// Component at 1-based `slot` of the tuple with index `idx`.
    #[inline]
    pub fn component(&self, idx: usize, slot: usize) -> usize {
        debug_assert!(slot >= 1 && slot <= self.width);
        let mut div = 1;
        for _ in slot..self.width {
            div *= self.base;
        }
        (idx / div) % self.base
    }

    /// `(u_1, ..., u_{d+1}) -> (u_2, ..., u_{d+1}, u_new)`.
    #[inline]
    pub fn shift(&self, idx: usize, u_new: usize) -> usize {
        (idx % self.top) * self.base + u_new
    }

    /// Tuple index of the all-`u` tuple.
    pub fn constant(&self, u: usize) -> usize {
        (0..self.width).fold(0, |acc, _| acc * self.base + u)
    }
}

/// `K(v, ṽ) = 1{shift} · P_U(ũ_{d+1})`, stored implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    codec: TupleCodec,
    d: usize,
    source: ProbVector,
}

pub fn build_markov_kernel(source: &ProbVector, d: usize, limits: &Limits) -> Result<MarkovKernel> {
    let codec = TupleCodec::new(source.len(), d + 1, limits)?;
    Ok(MarkovKernel { codec, d, source: source.clone() })
}

impl MarkovKernel {
    pub fn codec(&self) -> &TupleCodec {
        &self.codec
    }

    pub fn lookahead(&self) -> usize {
        self.d
    }

    pub fn source(&self) -> &ProbVector {
        &self.source
    }

    pub fn num_states(&self) -> usize {
        self.codec.size()
    }

    /// The `|U|` successors of `v` with their probabilities (zero-probability ones included).
    pub fn successors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.codec.base()).map(move |u| (self.codec.shift(v, u), self.source[u]))
    }

    pub fn prob(&self, v: usize, next: usize) -> f64 {
        if self.codec.shift(v, 0) == next - next % self.codec.base() {
            self.source[next % self.codec.base()]
        } else {
            0.0
        }
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.num_states();
        (0..n)
            .map(|v| {
                let mut row = vec![0.0; n];
                for (w, p) in self.successors(v) {
                    row[w] += p;
                }
                row
            })
            .collect()
    }
}

/// Loss table indexed by `v * |Û| + û`, charging `Λ(v[slot], û)`.
pub fn modified_distortion(distortion: &DistortionMatrix, codec: &TupleCodec, slot: usize) -> Result<Vec<f64>> {
    if slot == 0 || slot > codec.width() {
        return Err(Error::invalid(format!("slot {slot} is outside 1..={}", codec.width())));
    }
    if distortion.sources() != codec.base() {
        return Err(Error::invalid("distortion rows do not match the tuple alphabet"));
    }
    let r = distortion.reconstructions();
    let mut out = Vec::with_capacity(codec.size() * r);
    for v in 0..codec.size() {
        let u = codec.component(v, slot);
        out.extend((0..r).map(|uh| distortion.get(u, uh)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{bernoulli_source, hamming};
    use proptest::prelude::*;

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn iid_rows_at_zero_lookahead() {
        let k = build_markov_kernel(&bernoulli_source(0.3).unwrap(), 0, &limits()).unwrap();
        assert_eq!(k.dense(), vec![vec![0.7, 0.3], vec![0.7, 0.3]]);
    }

    #[test]
    fn shift_structure_at_lookahead_one() {
        let k = build_markov_kernel(&bernoulli_source(0.3).unwrap(), 1, &limits()).unwrap();
        let c = k.codec();
        let v01 = c.encode(&[0, 1]).unwrap();
        assert_eq!(k.prob(v01, c.encode(&[1, 0]).unwrap()), 0.7);
        assert_eq!(k.prob(v01, c.encode(&[0, 0]).unwrap()), 0.0);
        assert_eq!(k.prob(v01, c.encode(&[0, 1]).unwrap()), 0.0);
        for row in k.dense() {
            assert_eq!(row.iter().filter(|&&x| x > 0.0).count(), 2);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn codec_examples() {
        let c = TupleCodec::new(2, 2, &limits()).unwrap();
        assert_eq!(c.encode(&[0, 1]).unwrap(), 1);
        assert_eq!(c.decode(2).unwrap(), vec![1, 0]);
        assert!(c.encode(&[0, 2]).is_err());
        assert!(c.decode(4).is_err());
    }

    #[test]
    fn capacity_guard_names_limit() {
        let tight = Limits { max_states: 8, ..Limits::default() };
        let err = build_markov_kernel(&bernoulli_source(0.3).unwrap(), 3, &tight).unwrap_err();
        assert!(matches!(err, Error::Capacity { count: 16, limit: 8, .. }), "{err}");
    }

    #[test]
    fn modified_distortion_examples() {
        let c = TupleCodec::new(2, 2, &limits()).unwrap();
        let t = modified_distortion(&hamming(2).unwrap(), &c, 2).unwrap();
        assert_eq!(t[c.encode(&[0, 1]).unwrap() * 2 + 1], 0.0);
        assert_eq!(t[c.encode(&[1, 0]).unwrap() * 2 + 1], 1.0);
        let c0 = TupleCodec::new(2, 1, &limits()).unwrap();
        assert_eq!(modified_distortion(&hamming(2).unwrap(), &c0, 1).unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
        assert!(modified_distortion(&hamming(2).unwrap(), &c, 3).is_err());
    }

    #[test]
    fn product_measure_is_stationary() {
        let src = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let k = build_markov_kernel(&src, 2, &limits()).unwrap();
        let c = *k.codec();
        let n = c.size();
        let product: Vec<f64> = (0..n)
            .map(|v| c.decode(v).unwrap().iter().map(|&u| src[u]).product())
            .collect();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..200 {
            let mut next = vec![0.0; n];
            for v in 0..n {
                for (w, p) in k.successors(v) {
                    next[w] += pi[v] * p;
                }
            }
            pi = next;
        }
        for (a, b) in pi.iter().zip(&product) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn codec_round_trip(base in 1usize..5, width in 1usize..5, seed in 0usize..10_000) {
            let c = TupleCodec::new(base, width, &Limits::default()).unwrap();
            let idx = seed % c.size();
            let t = c.decode(idx).unwrap();
            prop_assert_eq!(c.encode(&t).unwrap(), idx);
            for (k, &u) in t.iter().enumerate() {
                prop_assert_eq!(c.component(idx, k + 1), u);
            }
        }

        #[test]
        fn last_component_marginal_is_source(p in 0.0f64..=1.0, d in 0usize..4) {
            let src = bernoulli_source(p).unwrap();
            let k = build_markov_kernel(&src, d, &Limits::default()).unwrap();
            let c = *k.codec();
            for v in 0..c.size() {
                let mut marg = [0.0; 2];
                for (w, q) in k.successors(v) {
                    marg[c.component(w, d + 1)] += q;
                }
                prop_assert!((marg[0] - src[0]).abs() < 1e-15 && (marg[1] - src[1]).abs() < 1e-15);
            }
        }
    }
}
