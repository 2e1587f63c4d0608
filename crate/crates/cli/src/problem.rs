//! Problem assembly from `--spec` files or shorthand flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rtc_core::coding::{memory_last_m, MemorySpec};
use rtc_core::models::{
    bernoulli_source, bsc, hamming, ProblemFile, ProblemSpec, VendingFile,
};
use rtc_core::Limits;

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// JSON problem file (`source`, `channel`, `distortion`, optional `vending`).
    #[arg(long, conflicts_with_all = ["source", "channel", "distortion"])]
    pub spec: Option<PathBuf>,
    /// `bernoulli:<p>` or a JSON array of probabilities.
    #[arg(long)]
    pub source: Option<String>,
    /// `bsc:<delta>`, `identity:<n>` or a JSON matrix.
    #[arg(long)]
    pub channel: Option<String>,
    /// `hamming`, `hamming:<n>` or a JSON matrix.
    #[arg(long, default_value = "hamming")]
    pub distortion: String,
    /// JSON vending machine (`kernel`, `costs`, `budget`); replaces the one in `--spec`.
    #[arg(long)]
    pub vending: Option<PathBuf>,
}

impl ProblemArgs {
    pub fn load(&self) -> Result<ProblemSpec> {
        let mut file = match &self.spec {
            Some(path) => read_json::<ProblemFile>(path)?,
            None => {
                let (Some(source), Some(channel)) = (&self.source, &self.channel) else {
                    bail!("give either --spec FILE or both --source and --channel");
                };
                let source = parse_source(source)?;
                let n = source.len();
                ProblemFile {
                    source,
                    channel: parse_channel(channel)?,
                    distortion: parse_distortion(&self.distortion, n)?,
                    vending: None,
                }
            }
        };
        if let Some(path) = &self.vending {
            file.vending = Some(read_json::<VendingFile>(path)?);
        }
        Ok(ProblemSpec::try_from(file)?)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn tagged<'a>(raw: &'a str, tag: &str) -> Option<&'a str> {
    raw.strip_prefix(tag).and_then(|r| r.strip_prefix(':'))
}

fn number(raw: &str, what: &str) -> Result<f64> {
    raw.trim().parse().with_context(|| format!("{what}: {raw:?} is not a number"))
}

fn parse_source(raw: &str) -> Result<Vec<f64>> {
    if let Some(p) = tagged(raw, "bernoulli") {
        return Ok(bernoulli_source(number(p, "bernoulli")?)?.into_vec());
    }
    serde_json::from_str(raw).with_context(|| format!("--source {raw:?}: expected bernoulli:<p> or a JSON array"))
}

fn parse_channel(raw: &str) -> Result<Vec<Vec<f64>>> {
    if let Some(delta) = tagged(raw, "bsc") {
        return Ok(bsc(number(delta, "bsc")?)?.rows());
    }
    if let Some(n) = tagged(raw, "identity") {
        let n: usize = n.parse().with_context(|| format!("identity size {n:?}"))?;
        return Ok((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect());
    }
    serde_json::from_str(raw)
        .with_context(|| format!("--channel {raw:?}: expected bsc:<delta>, identity:<n> or a JSON matrix"))
}

fn parse_distortion(raw: &str, sources: usize) -> Result<Vec<Vec<f64>>> {
    if raw == "hamming" {
        return Ok(hamming(sources)?.rows());
    }
    if let Some(n) = tagged(raw, "hamming") {
        let n: usize = n.parse().with_context(|| format!("hamming size {n:?}"))?;
        return Ok(hamming(n)?.rows());
    }
    serde_json::from_str(raw)
        .with_context(|| format!("--distortion {raw:?}: expected hamming, hamming:<n> or a JSON matrix"))
}

/// `last:<m>` or a JSON memory file (`size`, `inputs`, `table`).
pub fn parse_memory(raw: &str, inputs: usize, limits: &Limits) -> Result<MemorySpec> {
    if let Some(m) = tagged(raw, "last") {
        let m: usize = m.parse().with_context(|| format!("memory length {m:?}"))?;
        return Ok(memory_last_m(m, inputs, limits)?);
    }
    let mem: MemorySpec = read_json(Path::new(raw))?;
    if mem.inputs() != inputs {
        bail!("memory file {raw} is over {} symbols, expected {inputs}", mem.inputs());
    }
    Ok(mem)
}

/// `lo:hi:step`, or a single value.
pub fn parse_range(raw: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = raw.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![number(v, "value")?]),
        [lo, hi, step] => Ok(rtc_core::experiment::grid_values(
            number(lo, "range start")?,
            number(hi, "range end")?,
            number(step, "range step")?,
        )?),
        _ => bail!("range {raw:?}: expected lo:hi:step or a single value"),
    }
}

/// `name=range` for `p` or `delta`.
pub fn parse_assignment(raw: &str) -> Result<(String, Vec<f64>)> {
    let (name, range) = raw.split_once('=').with_context(|| format!("{raw:?}: expected name=value"))?;
    let name = name.trim();
    if name != "p" && name != "delta" {
        bail!("{raw:?}: only p and delta can be fixed or varied");
    }
    Ok((name.to_string(), parse_range(range)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands() {
        assert_eq!(parse_source("bernoulli:0.25").unwrap(), vec![0.75, 0.25]);
        assert_eq!(parse_source("[0.5,0.5]").unwrap(), vec![0.5, 0.5]);
        assert_eq!(parse_channel("identity:2").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(parse_distortion("hamming", 3).unwrap().len(), 3);
        assert!(parse_source("binomial:0.2").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:0.5:0.25").unwrap(), vec![0.0, 0.25, 0.5]);
        assert_eq!(parse_range("0.3").unwrap(), vec![0.3]);
        assert!(parse_range("0.5:0:0.1").unwrap().is_empty());
        assert!(parse_range("0:1").is_err());
        assert!(parse_assignment("q=0.1").is_err());
    }
}
