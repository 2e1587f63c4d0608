//! Experiment records, CSV output, and the sweep and region runners behind the CLI.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bounds::{d0_distortion, shannon_limit, suboptimality_region, symbol_by_symbol_check, RegionOptions, RegionReport};
use crate::coding::report::FLAG_NONCONVERGED;
use crate::coding::{memory_last_m, simplex_grid, solve_feedback_finite, SolveOptions};
use crate::error::{Error, Result};
use crate::models::ProblemSpec;
use crate::par::map_range;

pub const CSV_HEADER: &str = "p,delta,d,m,quantity,value,flags";

/// Set on rows whose computation failed for a reason other than non-convergence.
pub const FLAG_ERROR: &str = "ERROR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    D0,
    Dinf,
    Ddm,
    Dvend,
    #[serde(rename = "region_flag")]
    RegionFlag,
    #[serde(rename = "s2s_check")]
    S2sCheck,
}

impl Quantity {
    pub const ALL: [Quantity; 6] =
        [Quantity::D0, Quantity::Dinf, Quantity::Ddm, Quantity::Dvend, Quantity::RegionFlag, Quantity::S2sCheck];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::D0 => "D0",
            Quantity::Dinf => "Dinf",
            Quantity::Ddm => "Ddm",
            Quantity::Dvend => "Dvend",
            Quantity::RegionFlag => "region_flag",
            Quantity::S2sCheck => "s2s_check",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown quantity {s:?}; expected one of D0, Dinf, Ddm, Dvend, region_flag, s2s_check")))
    }
}

/// Wall clock for row timing; reads zero where the platform has no clock (wasm32).
#[derive(Clone, Copy)]
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Stopwatch(std::time::Instant::now())
        }
        #[cfg(target_arch = "wasm32")]
        {
            Stopwatch()
        }
    }

    fn elapsed(self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.0.elapsed()
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub p: f64,
    pub delta: f64,
    pub d: Option<usize>,
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    pub quantity: Quantity,
    pub value: f64,
    pub flags: Vec<String>,
    /// Not written to CSV, so that output stays byte-stable.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExperimentRecord {
    fn new(p: f64, delta: f64, d: Option<usize>, m: Option<usize>, quantity: Quantity) -> Self {
        ExperimentRecord {
            p,
            delta,
            d,
            m,
            n: None,
            budget: None,
            quantity,
            value: f64::NAN,
            flags: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    fn fill(mut self, started: Stopwatch, outcome: Result<(f64, Vec<String>)>) -> Self {
        match outcome {
            Ok((value, flags)) => {
                self.value = value;
                self.flags = flags;
            }
            Err(e) if e.is_nonconvergence() => self.flags = vec![FLAG_NONCONVERGED.to_string()],
            Err(_) => self.flags = vec![FLAG_ERROR.to_string()],
        }
        self.wall_time = started.elapsed();
        self
    }

    pub fn is_nonconverged(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_NONCONVERGED)
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            fmt_sig(self.p),
            fmt_sig(self.delta),
            opt(self.d),
            opt(self.m),
            self.quantity,
            fmt_sig(self.value),
            self.flags.join(";")
        )
    }
}

/// `x` rounded to 12 significant digits, printed in shortest form.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

/// `lo, lo + step, ...` up to `hi` inclusive, each value rounded to 12 significant digits.
pub fn grid_values(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(Error::Config(format!("invalid range {lo}:{hi}:{step}")));
    }
    if hi < lo {
        return Ok(Vec::new());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| fmt_sig(lo + i as f64 * step).parse().expect("formatted float")).collect())
}

pub fn write_csv<W: Write>(out: &mut W, records: &[ExperimentRecord]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn to_csv(records: &[ExperimentRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// `(p, δ)` points, emitted in the given order.
    pub points: Vec<(f64, f64)>,
    pub quantities: Vec<Quantity>,
    pub d: Vec<usize>,
    pub m: Vec<usize>,
    /// Margin of the `region_flag` test.
    pub margin: f64,
    /// Tuple-belief grid resolution of `s2s_check`.
    pub grid_resolution: usize,
    pub solve: SolveOptions,
}

impl SweepConfig {
    pub fn new(points: Vec<(f64, f64)>, quantities: Vec<Quantity>, d: Vec<usize>, m: Vec<usize>) -> Self {
        SweepConfig { points, quantities, d, m, margin: 1e-6, grid_resolution: 10, solve: SolveOptions::default() }
    }
}

fn ddm(spec: &ProblemSpec, d: usize, m: usize, opts: &SolveOptions) -> Result<(f64, Vec<String>)> {
    let memory = memory_last_m(m, spec.output_size(), &opts.limits)?;
    let r = solve_feedback_finite(spec, d, &memory, opts)?;
    Ok((r.distortion, r.flags))
}

fn s2s(spec: &ProblemSpec, d: usize, resolution: usize, opts: &SolveOptions) -> Result<(f64, Vec<String>)> {
    if d == 0 {
        return Ok((1.0, Vec::new()));
    }
    let v = crate::limits::checked_pow(spec.source_size(), d + 1);
    opts.limits.check_states("lookahead tuple states |U|^(d+1)", v)?;
    let grid = simplex_grid(v as usize, resolution, &opts.limits)?;
    let r = symbol_by_symbol_check(spec, d, &grid, &opts.limits)?;
    Ok((if r.holds_on_grid { 1.0 } else { 0.0 }, Vec::new()))
}

fn sweep_point(p: f64, delta: f64, cfg: &SweepConfig) -> Vec<ExperimentRecord> {
    let wants = |q| cfg.quantities.contains(&q);
    let mut rows = Vec::new();
    let spec = ProblemSpec::binary(p, delta);
    let spec = match spec {
        Ok(s) => s,
        Err(_) => {
            let bad = |q, d, m| {
                let mut r = ExperimentRecord::new(p, delta, d, m, q);
                r.flags = vec![FLAG_ERROR.to_string()];
                r
            };
            for q in [Quantity::D0, Quantity::Dinf] {
                if wants(q) {
                    rows.push(bad(q, None, None));
                }
            }
            for &d in &cfg.d {
                if wants(Quantity::S2sCheck) {
                    rows.push(bad(Quantity::S2sCheck, Some(d), None));
                }
                for &m in &cfg.m {
                    for q in [Quantity::Ddm, Quantity::RegionFlag] {
                        if wants(q) {
                            rows.push(bad(q, Some(d), Some(m)));
                        }
                    }
                }
            }
            return rows;
        }
    };
    let t = Stopwatch::start();
    let d0 = d0_distortion(&spec, &cfg.solve.limits).map(|b| (b.value, Vec::new()));
    if wants(Quantity::D0) {
        rows.push(ExperimentRecord::new(p, delta, None, None, Quantity::D0).fill(t, d0.clone()));
    }
    if wants(Quantity::Dinf) {
        let t = Stopwatch::start();
        rows.push(ExperimentRecord::new(p, delta, None, None, Quantity::Dinf).fill(t, shannon_limit(&spec).map(|v| (v, Vec::new()))));
    }
    for &d in &cfg.d {
        if wants(Quantity::S2sCheck) {
            let t = Stopwatch::start();
            rows.push(
                ExperimentRecord::new(p, delta, Some(d), None, Quantity::S2sCheck)
                    .fill(t, s2s(&spec, d, cfg.grid_resolution, &cfg.solve)),
            );
        }
        for &m in &cfg.m {
            if !(wants(Quantity::Ddm) || wants(Quantity::RegionFlag)) {
                continue;
            }
            let t = Stopwatch::start();
            let value = ddm(&spec, d, m, &cfg.solve);
            if wants(Quantity::Ddm) {
                rows.push(ExperimentRecord::new(p, delta, Some(d), Some(m), Quantity::Ddm).fill(t, value.clone()));
            }
            if wants(Quantity::RegionFlag) {
                let flag = match (&d0, value) {
                    (Ok((base, _)), Ok((v, flags))) => Ok((if v < base - cfg.margin { 1.0 } else { 0.0 }, flags)),
                    (Err(e), _) => Err(e.clone()),
                    (_, Err(e)) => Err(e),
                };
                rows.push(ExperimentRecord::new(p, delta, Some(d), Some(m), Quantity::RegionFlag).fill(t, flag));
            }
        }
    }
    rows
}

/// Rows per point: `D0`, `Dinf`, then per `d`: `s2s_check`, then per `m`: `Ddm`, `region_flag`.
/// Points run in parallel; rows come back in point order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    if cfg.quantities.contains(&Quantity::Dvend) {
        return Err(Error::Config("Dvend needs a vending problem; use `solve --vending` instead of a sweep".into()));
    }
    let per_point = map_range(cfg.points.len(), |i| sweep_point(cfg.points[i].0, cfg.points[i].1, cfg));
    Ok(per_point.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub d: usize,
    pub m: usize,
    pub margin: f64,
    pub region_nonempty: bool,
    pub count: usize,
    pub bounding_box: Option<[f64; 4]>,
    pub errors: usize,
}

/// Region scan as `region_flag` rows plus a summary.
pub fn run_region(p_grid: &[f64], delta_grid: &[f64], opts: &RegionOptions) -> (Vec<ExperimentRecord>, RegionSummary, RegionReport) {
    let report = suboptimality_region(p_grid, delta_grid, opts);
    let rows = report
        .points
        .iter()
        .map(|pt| {
            let mut r = ExperimentRecord::new(pt.p, pt.delta, Some(opts.d), Some(opts.m), Quantity::RegionFlag);
            match &pt.error {
                None => r.value = if pt.suboptimal { 1.0 } else { 0.0 },
                Some(msg) if msg.contains("did not converge") => r.flags.push(FLAG_NONCONVERGED.to_string()),
                Some(_) => r.flags.push(FLAG_ERROR.to_string()),
            }
            r
        })
        .collect();
    let summary = RegionSummary {
        d: report.d,
        m: report.m,
        margin: report.margin,
        region_nonempty: report.region_nonempty,
        count: report.count,
        bounding_box: report.bounding_box,
        errors: report.points.iter().filter(|p| p.error.is_some()).count(),
    };
    (rows, summary, report)
}
