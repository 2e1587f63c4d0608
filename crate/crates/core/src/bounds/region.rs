use serde::{Deserialize, Serialize};

use super::symbol::d0_distortion;
use crate::coding::{memory_last_m, solve_feedback_finite, SolveOptions};
use crate::error::Result;
use crate::models::ProblemSpec;
use crate::par::map_range;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOptions {
    pub d: usize,
    pub m: usize,
    /// A point is flagged when `D(d, m) < D(0) - margin`.
    pub margin: f64,
    pub solve: SolveOptions,
}

impl RegionOptions {
    pub fn new(d: usize, m: usize) -> Self {
        RegionOptions { d, m, margin: 1e-6, solve: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub p: f64,
    pub delta: f64,
    pub d0: Option<f64>,
    pub ddm: Option<f64>,
    pub suboptimal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub d: usize,
    pub m: usize,
    pub margin: f64,
    /// Ordered by `p`, then `δ`.
    pub points: Vec<RegionPoint>,
    pub region_nonempty: bool,
    pub count: usize,
    /// `[p_min, p_max, δ_min, δ_max]` over flagged points.
    pub bounding_box: Option<[f64; 4]>,
}

fn point(p: f64, delta: f64, opts: &RegionOptions) -> Result<(f64, f64)> {
    let spec = ProblemSpec::binary(p, delta)?;
    let d0 = d0_distortion(&spec, &opts.solve.limits)?.value;
    let memory = memory_last_m(opts.m, 2, &opts.solve.limits)?;
    let ddm = solve_feedback_finite(&spec, opts.d, &memory, &opts.solve)?.distortion;
    Ok((d0, ddm))
}

/// Bernoulli/BSC points where finite-memory lookahead coding beats `D(0)`.
/// Per-point solver errors are recorded, not propagated.
pub fn suboptimality_region(p_grid: &[f64], delta_grid: &[f64], opts: &RegionOptions) -> RegionReport {
    let nd = delta_grid.len();
    let points: Vec<RegionPoint> = map_range(p_grid.len() * nd, |i| {
        let (p, delta) = (p_grid[i / nd], delta_grid[i % nd]);
        match point(p, delta, opts) {
            Ok((d0, ddm)) => RegionPoint {
                p,
                delta,
                d0: Some(d0),
                ddm: Some(ddm),
                suboptimal: ddm < d0 - opts.margin,
                error: None,
            },
            Err(e) => RegionPoint { p, delta, d0: None, ddm: None, suboptimal: false, error: Some(e.to_string()) },
        }
    });
    let flagged: Vec<&RegionPoint> = points.iter().filter(|pt| pt.suboptimal).collect();
    let bounding_box = (!flagged.is_empty()).then(|| {
        flagged.iter().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |b, pt| {
            [b[0].min(pt.p), b[1].max(pt.p), b[2].min(pt.delta), b[3].max(pt.delta)]
        })
    });
    RegionReport {
        d: opts.d,
        m: opts.m,
        margin: opts.margin,
        count: flagged.len(),
        region_nonempty: !flagged.is_empty(),
        bounding_box,
        points,
    }
}
