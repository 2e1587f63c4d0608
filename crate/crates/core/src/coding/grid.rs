use crate::error::{Error, Result};
use crate::limits::Limits;

/// Points `k / r` of the probability simplex, `k` a composition of `r` into `dim` parts.
///
/// Points are ordered lexicographically by `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    dim: usize,
    resolution: usize,
    count: usize,
    points: Vec<u32>,
    /// `ways[n * (dim + 1) + parts]`: compositions of `n` into `parts` parts.
    ways: Vec<usize>,
}

/// `C(n + parts - 1, parts - 1)` with saturation.
fn compositions(n: usize, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(n == 0);
    }
    let (top, k) = (n + parts - 1, (parts - 1).min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((top - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn simplex_grid(dim: usize, resolution: usize, limits: &Limits) -> Result<SimplexGrid> {
    if dim == 0 {
        return Err(Error::invalid("simplex grid needs dimension >= 1"));
    }
    if resolution == 0 {
        return Err(Error::invalid("simplex grid needs resolution >= 1"));
    }
    let count = compositions(resolution, dim);
    limits.check_states("simplex grid points", count)?;
    let count = count as usize;
    let mut ways = vec![0usize; (resolution + 1) * (dim + 1)];
    for n in 0..=resolution {
        for parts in 0..=dim {
            ways[n * (dim + 1) + parts] = compositions(n, parts) as usize;
        }
    }
    let mut points = Vec::with_capacity(count * dim);
    let mut current = vec![0u32; dim];
    fill(&mut points, &mut current, 0, resolution);
    debug_assert_eq!(points.len(), count * dim);
    Ok(SimplexGrid { dim, resolution, count, points, ways })
}

fn fill(out: &mut Vec<u32>, current: &mut [u32], pos: usize, remaining: usize) {
    if pos + 1 == current.len() {
        current[pos] = remaining as u32;
        out.extend_from_slice(current);
        return;
    }
    for k in 0..=remaining {
        current[pos] = k as u32;
        fill(out, current, pos + 1, remaining - k);
    }
}

impl SimplexGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn counts(&self, idx: usize) -> &[u32] {
        &self.points[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn belief(&self, idx: usize) -> Vec<f64> {
        let r = self.resolution as f64;
        self.counts(idx).iter().map(|&k| k as f64 / r).collect()
    }

    /// Index of the vertex (point mass) at coordinate `at`.
    pub fn vertex(&self, at: usize) -> usize {
        let mut k = vec![0u32; self.dim];
        k[at] = self.resolution as u32;
        self.rank(&k)
    }

    /// Lexicographic rank of a composition.
    pub fn rank(&self, k: &[u32]) -> usize {
        let mut idx = 0;
        let mut rem = self.resolution;
        for (i, &ki) in k.iter().enumerate().take(self.dim - 1) {
            let parts = self.dim - i - 1;
            for c in 0..ki as usize {
                idx += self.ways[(rem - c) * (self.dim + 1) + parts];
            }
            rem -= ki as usize;
        }
        idx
    }

    /// L1-nearest grid point by largest remainders; ties resolve to the lexicographically smallest point.
    pub fn project(&self, belief: &[f64]) -> usize {
        let r = self.resolution as f64;
        let mut k = vec![0u32; self.dim];
        let mut frac = Vec::with_capacity(self.dim);
        let mut assigned: i64 = 0;
        for (i, &b) in belief.iter().enumerate() {
            let scaled = (b * r).max(0.0);
            let fl = scaled.floor();
            k[i] = fl as u32;
            assigned += fl as i64;
            frac.push(((scaled - fl) * (1u64 << 40) as f64).round() as i64);
        }
        let mut order: Vec<usize> = (0..self.dim).collect();
        // Largest remainder first; on equal remainders the later coordinate is raised,
        // which keeps the point lexicographically smaller.
        order.sort_by(|&a, &b| frac[b].cmp(&frac[a]).then(b.cmp(&a)));
        let mut deficit = self.resolution as i64 - assigned;
        let mut i = 0;
        while deficit > 0 {
            k[order[i % self.dim]] += 1;
            deficit -= 1;
            i += 1;
        }
        let mut j = self.dim;
        while deficit < 0 {
            j = if j == 0 { self.dim - 1 } else { j - 1 };
            let c = order[j];
            if k[c] > 0 {
                k[c] -= 1;
                deficit += 1;
            }
        }
        self.rank(&k)
    }
}
