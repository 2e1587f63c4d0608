//! Browser bindings. Every entry point takes and returns JSON text.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use rtc_core::bounds::RegionOptions;
use rtc_core::coding::{memory_last_m, solve_feedback_finite, SolveOptions};
use rtc_core::experiment::{grid_values, run_region, run_sweep, ExperimentRecord, Quantity, RegionSummary, SweepConfig};
use rtc_core::models::ProblemSpec;
use rtc_core::sim::{simulate as run_simulation, PolicyBundle, SimReport};

/// Largest grid or horizon accepted from the page, to keep the tab responsive.
const MAX_POINTS: usize = 441;
const MAX_HORIZON: u64 = 2_000_000;

#[derive(Deserialize)]
struct CurvesRequest {
    delta: f64,
    p_step: f64,
    d: usize,
    m: Vec<usize>,
}

#[derive(Serialize)]
struct Curve {
    label: String,
    p: Vec<f64>,
    value: Vec<f64>,
}

#[derive(Serialize)]
struct CurvesResponse {
    curves: Vec<Curve>,
    flags: Vec<String>,
}

#[derive(Deserialize)]
struct RegionRequest {
    step: f64,
    d: usize,
    m: usize,
    margin: f64,
}

#[derive(Serialize)]
struct RegionResponse {
    summary: RegionSummary,
    /// `[p, delta, flagged]` per point.
    points: Vec<(f64, f64, bool)>,
}

#[derive(Deserialize)]
struct SimulateRequest {
    p: f64,
    delta: f64,
    d: usize,
    m: usize,
    horizon: u64,
    replications: usize,
    seed: u64,
}

#[derive(Serialize)]
struct SimulateResponse {
    solved_distortion: f64,
    simulation: SimReport,
}

fn parse<T: for<'de> Deserialize<'de>>(json: &str) -> Result<T, JsError> {
    serde_json::from_str(json).map_err(|e| JsError::new(&format!("bad request: {e}")))
}

fn reply<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn core(e: rtc_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn check_points(n: usize) -> Result<(), JsError> {
    if n > MAX_POINTS {
        return Err(JsError::new(&format!("{n} grid points requested; the demo allows at most {MAX_POINTS}")));
    }
    Ok(())
}

/// D0, Dinf and D(d, m) against `p` at fixed `delta`.
#[wasm_bindgen]
pub fn curves(request: &str) -> Result<String, JsError> {
    let req: CurvesRequest = parse(request)?;
    let p = grid_values(0.0, 0.5, req.p_step).map_err(core)?;
    check_points(p.len())?;
    let points = p.iter().map(|&p| (p, req.delta)).collect();
    let cfg = SweepConfig::new(points, vec![Quantity::D0, Quantity::Dinf, Quantity::Ddm], vec![req.d], req.m.clone());
    let rows = run_sweep(&cfg).map_err(core)?;
    let series = |label: String, keep: &dyn Fn(&ExperimentRecord) -> bool| Curve {
        label,
        p: rows.iter().filter(|r| keep(r)).map(|r| r.p).collect(),
        value: rows.iter().filter(|r| keep(r)).map(|r| r.value).collect(),
    };
    let mut curves = vec![
        series("D(0)".into(), &|r| r.quantity == Quantity::D0),
        series("D(∞)".into(), &|r| r.quantity == Quantity::Dinf),
    ];
    for &m in &req.m {
        curves.push(series(format!("D({}, {m})", req.d), &|r| r.quantity == Quantity::Ddm && r.m == Some(m)));
    }
    let mut flags: Vec<String> = rows.iter().flat_map(|r| r.flags.iter().cloned()).collect();
    flags.sort();
    flags.dedup();
    reply(&CurvesResponse { curves, flags })
}

/// Points of the square `[0, 0.5]^2` where D(d, m) beats D0 by more than the margin.
#[wasm_bindgen]
pub fn region(request: &str) -> Result<String, JsError> {
    let req: RegionRequest = parse(request)?;
    let axis = grid_values(0.0, 0.5, req.step).map_err(core)?;
    check_points(axis.len() * axis.len())?;
    let mut opts = RegionOptions::new(req.d, req.m);
    opts.margin = req.margin;
    let (_, summary, report) = run_region(&axis, &axis, &opts);
    let points = report.points.iter().map(|pt| (pt.p, pt.delta, pt.suboptimal)).collect();
    reply(&RegionResponse { summary, points })
}

/// Solves D(d, m) and replays the optimal policy on a random source.
#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsError> {
    let req: SimulateRequest = parse(request)?;
    if req.horizon.saturating_mul(req.replications as u64) > MAX_HORIZON {
        return Err(JsError::new(&format!("horizon × replications is capped at {MAX_HORIZON} in the demo")));
    }
    let spec = ProblemSpec::binary(req.p, req.delta).map_err(core)?;
    let opts = SolveOptions::default();
    let memory = memory_last_m(req.m, 2, &opts.limits).map_err(core)?;
    let report = solve_feedback_finite(&spec, req.d, &memory, &opts).map_err(core)?;
    let bundle = PolicyBundle::from_report(&report, memory, None);
    let simulation =
        run_simulation(&bundle, &spec, req.d, req.horizon, req.replications, req.seed, &opts.limits).map_err(core)?;
    reply(&SimulateResponse { solved_distortion: report.distortion, simulation })
}
