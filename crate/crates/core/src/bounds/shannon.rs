//! Separation limit `D(∞)`: distortion where the rate-distortion function meets capacity.

use crate::error::{Error, Result};
use crate::models::{DistortionMatrix, ProbVector, ProblemSpec, StochasticMatrix};

const BA_TOL: f64 = 1e-10;
const BA_MAX_ITER: usize = 100_000;

/// `h(x)` in bits.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |t: f64| if t <= 0.0 { 0.0 } else { -t * t.log2() };
    term(x) + term(1.0 - x)
}

/// Capacity in nats by alternating maximization over input distributions.
pub fn channel_capacity(channel: &StochasticMatrix) -> Result<f64> {
    let (nx, ny) = (channel.inputs(), channel.outputs());
    let mut r = vec![1.0 / nx as f64; nx];
    let mut c = vec![0.0; nx];
    for _ in 0..BA_MAX_ITER {
        let q: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| r[x] * channel.get(x, y)).sum()).collect();
        for (x, cx) in c.iter_mut().enumerate() {
            *cx = channel
                .row(x)
                .iter()
                .zip(&q)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &qy)| p * (p / qy).ln())
                .sum();
        }
        let lower: f64 = r.iter().zip(&c).map(|(ri, ci)| ri * ci).sum();
        let upper = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower < BA_TOL {
            return Ok(lower.max(0.0));
        }
        let mut total = 0.0;
        for (ri, ci) in r.iter_mut().zip(&c) {
            *ri *= (ci - upper).exp();
            total += *ri;
        }
        r.iter_mut().for_each(|ri| *ri /= total);
    }
    Err(Error::AlternatingOptimization(format!("capacity did not converge in {BA_MAX_ITER} iterations")))
}

/// `(D, R)` in nats on the rate-distortion curve at slope `-s`, `s ≥ 0`.
pub fn rate_distortion_at_slope(source: &ProbVector, distortion: &DistortionMatrix, s: f64) -> Result<(f64, f64)> {
    let (nu, nh) = (source.len(), distortion.reconstructions());
    let mut q = vec![1.0 / nh as f64; nh];
    let mut cond = vec![0.0; nu * nh];
    let expo: Vec<f64> = (0..nu * nh).map(|i| (-s * distortion.get(i / nh, i % nh)).exp()).collect();
    for _ in 0..BA_MAX_ITER {
        for u in 0..nu {
            let row = &mut cond[u * nh..(u + 1) * nh];
            let mut total = 0.0;
            for (uh, c) in row.iter_mut().enumerate() {
                *c = q[uh] * expo[u * nh + uh];
                total += *c;
            }
            row.iter_mut().for_each(|c| *c /= total);
        }
        let next: Vec<f64> = (0..nh).map(|uh| (0..nu).map(|u| source[u] * cond[u * nh + uh]).sum()).collect();
        let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if change < BA_TOL * 1e-2 {
            let mut d = 0.0;
            let mut r = 0.0;
            for u in 0..nu {
                for uh in 0..nh {
                    let joint = source[u] * cond[u * nh + uh];
                    if joint > 0.0 {
                        d += joint * distortion.get(u, uh);
                        r += joint * (cond[u * nh + uh] / q[uh]).ln();
                    }
                }
            }
            return Ok((d, r.max(0.0)));
        }
    }
    Err(Error::AlternatingOptimization(format!("rate-distortion did not converge in {BA_MAX_ITER} iterations")))
}

/// `D(∞)`: smallest `D` with `R(D) ≤ C`, one channel use per source symbol.
pub fn shannon_limit(spec: &ProblemSpec) -> Result<f64> {
    let source = &spec.source;
    let dist = &spec.distortion;
    let d_max = (0..dist.reconstructions())
        .map(|uh| (0..source.len()).map(|u| source[u] * dist.get(u, uh)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let d_min: f64 = (0..source.len())
        .map(|u| source[u] * (0..dist.reconstructions()).map(|uh| dist.get(u, uh)).fold(f64::INFINITY, f64::min))
        .sum();
    let capacity = channel_capacity(&spec.channel)?;
    if capacity <= BA_TOL {
        return Ok(d_max);
    }
    // R(D_min) is the entropy of the source restricted to distortion-free reconstruction;
    // it is reached as the slope steepens. Bisect the slope for R = C.
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        let (d, r) = rate_distortion_at_slope(source, dist, hi)?;
        if r >= capacity {
            break;
        }
        if hi > 1e3 || d - d_min < 1e-12 {
            return Ok(d_min);
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut d_hi = rate_distortion_at_slope(source, dist, lo)?.0;
    let mut d_lo = rate_distortion_at_slope(source, dist, hi)?.0;
    for _ in 0..200 {
        if d_hi - d_lo < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (d, r) = rate_distortion_at_slope(source, dist, mid)?;
        if r >= capacity {
            hi = mid;
            d_lo = d;
        } else {
            lo = mid;
            d_hi = d;
        }
    }
    Ok((0.5 * (d_lo + d_hi)).clamp(d_min, d_max))
}

/// Bernoulli(p) over BSC(δ) with Hamming loss: `D` with `h(D) = h(p) - 1 + h(δ)`.
pub fn binary_shannon_closed_form(p: f64, delta: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&p) || !(0.0..=0.5).contains(&delta) {
        return Err(Error::invalid(format!("p = {p} and δ = {delta} must lie in [0, 0.5]")));
    }
    let target = binary_entropy(p) - 1.0 + binary_entropy(delta);
    if target <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, p);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
