//! Alphabets, probability vectors, channels, loss and action-cost tables.
//!
//! Alphabets are dense `0..n` ranges. Every constructor validates its input and
//! renormalizes probability rows once, so downstream code can rely on rows summing
//! to one within [`SIMPLEX_TOL`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};

/// Tolerance for "sums to one".
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A finite probability distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accepts entries that already sum to one within [`SIMPLEX_TOL`].
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let mut report = ValidationReport::default();
        check_prob_row(&entries, "probability vector", &mut report);
        report.into_result()?;
        Ok(Self::renormalized(entries))
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("empty weight vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights sum to zero"));
        }
        Ok(Self::renormalized(weights))
    }

    pub fn point_mass(dim: usize, at: usize) -> Result<Self> {
        if at >= dim {
            return Err(Error::invalid(format!("point mass at {at} outside 0..{dim}")));
        }
        let mut v = vec![0.0; dim];
        v[at] = 1.0;
        Ok(ProbVector(v))
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("uniform distribution over an empty alphabet"));
        }
        Ok(ProbVector(vec![1.0 / dim as f64; dim]))
    }

    pub(crate) fn renormalized(mut v: Vec<f64>) -> Self {
        let total: f64 = v.iter().sum();
        if total != 1.0 {
            v.iter_mut().for_each(|x| *x /= total);
        }
        ProbVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

fn check_prob_row(row: &[f64], what: &str, report: &mut ValidationReport) -> bool {
    if row.is_empty() {
        report.push(format!("{what} is empty"));
        return false;
    }
    if let Some(bad) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
        report.push(format!("{what} has invalid entry {} at {bad}", row[bad]));
        return false;
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        report.push(format!("{what} sums to {total}"));
        return false;
    }
    true
}

/// Row-stochastic conditional law, rows indexed by the conditioning symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut report = ValidationReport::default();
        check_stochastic(&rows, "channel", &mut report);
        report.into_result()?;
        Ok(Self::from_checked(rows))
    }

    fn from_checked(rows: Vec<Vec<f64>>) -> Self {
        let inputs = rows.len();
        let outputs = rows[0].len();
        let mut data = Vec::with_capacity(inputs * outputs);
        for row in rows {
            data.extend(ProbVector::renormalized(row).0);
        }
        StochasticMatrix { inputs, outputs, data }
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("identity over an empty alphabet"));
        }
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self::from_checked(rows))
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    #[inline]
    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.data[input * self.outputs + output]
    }

    #[inline]
    pub fn row(&self, input: usize) -> &[f64] {
        &self.data[input * self.outputs..(input + 1) * self.outputs]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.outputs).map(<[f64]>::to_vec).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.inputs == self.outputs
            && (0..self.inputs).all(|i| (0..self.outputs).all(|j| self.get(i, j) == (i == j) as u8 as f64))
    }
}

fn check_stochastic(rows: &[Vec<f64>], what: &str, report: &mut ValidationReport) {
    if rows.is_empty() {
        report.push(format!("{what} has no rows"));
        return;
    }
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            report.push(format!("{what} row {i} has {} entries, expected {width}", row.len()));
            continue;
        }
        let mut row_report = ValidationReport::default();
        if !check_prob_row(row, "row", &mut row_report) {
            report.push(format!("{what}: non-stochastic row {i} ({row_report})"));
        }
    }
}

/// Nonnegative, bounded loss `Λ(u, û)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMatrix {
    sources: usize,
    reconstructions: usize,
    data: Vec<f64>,
    max: f64,
}

impl DistortionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut report = ValidationReport::default();
        check_loss(&rows, &mut report);
        report.into_result()?;
        let sources = rows.len();
        let reconstructions = rows[0].len();
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let max = data.iter().copied().fold(0.0, f64::max);
        Ok(DistortionMatrix { sources, reconstructions, data, max })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn reconstructions(&self) -> usize {
        self.reconstructions
    }

    /// `Λ_max`.
    pub fn max_loss(&self) -> f64 {
        self.max
    }

    #[inline]
    pub fn get(&self, u: usize, u_hat: usize) -> f64 {
        self.data[u * self.reconstructions + u_hat]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.reconstructions).map(<[f64]>::to_vec).collect()
    }
}

fn check_loss(rows: &[Vec<f64>], report: &mut ValidationReport) {
    if rows.is_empty() || rows[0].is_empty() {
        report.push("distortion matrix is empty");
        return;
    }
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            report.push(format!("distortion row {i} has {} entries, expected {width}", row.len()));
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                report.push(format!("non-finite loss at ({i},{j})"));
            } else if x < 0.0 {
                report.push(format!("negative loss at ({i},{j})"));
            }
        }
    }
}

/// Per-action vending cost `C(a)` and the budget `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCostVector {
    costs: Vec<f64>,
    budget: f64,
    max: f64,
}

impl ActionCostVector {
    /// Budgets above `Γ_max` are accepted; the constraint is then slack.
    pub fn new(costs: Vec<f64>, budget: f64) -> Result<Self> {
        let mut report = ValidationReport::default();
        check_costs(&costs, budget, &mut report);
        report.into_result()?;
        let max = costs.iter().copied().fold(0.0, f64::max);
        Ok(ActionCostVector { costs, budget, max })
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost(&self, action: usize) -> f64 {
        self.costs[action]
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `Γ_max`.
    pub fn max_cost(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        ActionCostVector::new(self.costs.clone(), budget)
    }

    /// Smallest strictly positive cost, if any action costs something.
    pub fn min_positive_cost(&self) -> Option<f64> {
        self.costs.iter().copied().filter(|&c| c > 0.0).reduce(f64::min)
    }
}

fn check_costs(costs: &[f64], budget: f64, report: &mut ValidationReport) {
    if costs.is_empty() {
        report.push("vending cost vector is empty");
        return;
    }
    if let Some(i) = costs.iter().position(|c| !c.is_finite() || *c < 0.0) {
        report.push(format!("invalid vending cost {} for action {i}", costs[i]));
    }
    if !costs.contains(&0.0) {
        report.push("no zero-cost action");
    }
    if !budget.is_finite() || budget < 0.0 {
        report.push(format!("invalid budget {budget}"));
    }
}

/// Side-information "vending machine": `P(y | u, a_v)` plus action costs.
#[derive(Debug, Clone, PartialEq)]
pub struct VendingSpec {
    /// Rows indexed by `u * |A_v| + a_v`.
    pub kernel: StochasticMatrix,
    pub costs: ActionCostVector,
}

impl VendingSpec {
    pub fn actions(&self) -> usize {
        self.costs.len()
    }

    pub fn side_outputs(&self) -> usize {
        self.kernel.outputs()
    }

    #[inline]
    pub fn prob(&self, y: usize, u: usize, action: usize) -> f64 {
        self.kernel.get(u * self.actions() + action, y)
    }

    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Ok(VendingSpec { kernel: self.kernel.clone(), costs: self.costs.with_budget(budget)? })
    }
}

/// The full coding problem: source, channel, loss and optional vending machine.
///
/// For vending problems the encoder output reaches the decoder unchanged, so the
/// channel must be the identity over `X`; `|X|` is read from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub source: ProbVector,
    pub channel: StochasticMatrix,
    pub distortion: DistortionMatrix,
    pub vending: Option<VendingSpec>,
}

impl ProblemSpec {
    pub fn new(source: ProbVector, channel: StochasticMatrix, distortion: DistortionMatrix) -> Result<Self> {
        let spec = ProblemSpec { source, channel, distortion, vending: None };
        validate(&spec.to_file())?;
        Ok(spec)
    }

    pub fn with_vending(mut self, vending: VendingSpec) -> Result<Self> {
        self.vending = Some(vending);
        validate(&self.to_file())?;
        Ok(self)
    }

    /// Bernoulli(p) source, BSC(δ), Hamming loss.
    pub fn binary(p: f64, delta: f64) -> Result<Self> {
        ProblemSpec::new(bernoulli_source(p)?, bsc(delta)?, hamming(2)?)
    }

    pub fn source_size(&self) -> usize {
        self.source.len()
    }

    pub fn input_size(&self) -> usize {
        self.channel.inputs()
    }

    pub fn output_size(&self) -> usize {
        self.channel.outputs()
    }

    pub fn reconstruction_size(&self) -> usize {
        self.distortion.reconstructions()
    }

    pub fn vending(&self) -> Result<&VendingSpec> {
        self.vending
            .as_ref()
            .ok_or_else(|| Error::Config("problem has no vending machine".into()))
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            source: self.source.as_slice().to_vec(),
            channel: self.channel.rows(),
            distortion: self.distortion.rows(),
            vending: self.vending.as_ref().map(|v| VendingFile {
                kernel: v.kernel.rows(),
                costs: v.costs.costs().to_vec(),
                budget: v.costs.budget(),
            }),
        }
    }
}

/// On-disk JSON problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub source: Vec<f64>,
    pub channel: Vec<Vec<f64>>,
    pub distortion: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vending: Option<VendingFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendingFile {
    /// Rows indexed by `u * |A_v| + a_v`, columns by side-information symbol.
    pub kernel: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub budget: f64,
}

impl TryFrom<ProblemFile> for ProblemSpec {
    type Error = Error;

    fn try_from(file: ProblemFile) -> Result<Self> {
        validate(&file)?;
        let vending = match file.vending {
            Some(v) => Some(VendingSpec {
                kernel: StochasticMatrix::from_checked(v.kernel),
                costs: ActionCostVector::new(v.costs, v.budget)?,
            }),
            None => None,
        };
        Ok(ProblemSpec {
            source: ProbVector::renormalized(file.source),
            channel: StochasticMatrix::from_checked(file.channel),
            distortion: DistortionMatrix::new(file.distortion)?,
            vending,
        })
    }
}

/// Checks every invariant of a problem description and lists each violation.
pub fn validate(file: &ProblemFile) -> Result<()> {
    let mut report = ValidationReport::default();
    check_prob_row(&file.source, "source", &mut report);
    check_stochastic(&file.channel, "channel", &mut report);
    check_loss(&file.distortion, &mut report);

    let u = file.source.len();
    if !file.distortion.is_empty() && file.distortion.len() != u {
        report.push(format!(
            "dimension mismatch: distortion has {} rows but the source has {u} symbols",
            file.distortion.len()
        ));
    }

    if let Some(v) = &file.vending {
        check_costs(&v.costs, v.budget, &mut report);
        let actions = v.costs.len();
        if v.kernel.len() != u * actions {
            report.push(format!(
                "dimension mismatch: vending kernel has {} rows, expected |U|*|A_v| = {}",
                v.kernel.len(),
                u * actions
            ));
        }
        check_stochastic(&v.kernel, "vending kernel", &mut report);
        let identity = !file.channel.is_empty()
            && file.channel.len() == file.channel[0].len()
            && file
                .channel
                .iter()
                .enumerate()
                .all(|(i, row)| row.iter().enumerate().all(|(j, &x)| x == (i == j) as u8 as f64));
        if !identity {
            report.push("vending problems need a noiseless encoder link (identity channel)");
        }
    }
    report.into_result()
}

pub fn bernoulli_source(p: f64) -> Result<ProbVector> {
    check_probability("p", p)?;
    ProbVector::new(vec![1.0 - p, p])
}

pub fn bsc(delta: f64) -> Result<StochasticMatrix> {
    check_probability("delta", delta)?;
    StochasticMatrix::new(vec![vec![1.0 - delta, delta], vec![delta, 1.0 - delta]])
}

pub fn hamming(n: usize) -> Result<DistortionMatrix> {
    if n == 0 {
        return Err(Error::invalid("hamming distortion needs n >= 1"));
    }
    DistortionMatrix::new(
        (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect(),
    )
}

fn check_probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {x} is not in [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli_source(0.3).unwrap().as_slice(), &[0.7, 0.3]);
        assert_eq!(bernoulli_source(0.0).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(bernoulli_source(0.5).unwrap().as_slice(), &[0.5, 0.5]);
        assert!(bernoulli_source(1.2).is_err());
        assert!(bernoulli_source(-0.1).is_err());
    }

    #[test]
    fn bsc_examples() {
        assert!(bsc(0.0).unwrap().is_identity());
        let useless = bsc(0.5).unwrap();
        assert!(useless.rows().iter().flatten().all(|&x| x == 0.5));
        assert_eq!(bsc(0.3).unwrap().rows(), vec![vec![0.7, 0.3], vec![0.3, 0.7]]);
        assert!(bsc(2.0).is_err());
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(2).unwrap().rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(hamming(1).unwrap().rows(), vec![vec![0.0]]);
        assert_eq!(hamming(3).unwrap().max_loss(), 1.0);
        assert!(hamming(0).is_err());
    }

    #[test]
    fn validate_accepts_binary_problem() {
        let spec = ProblemSpec::binary(0.3, 0.3).unwrap();
        validate(&spec.to_file()).unwrap();
    }

    #[test]
    fn validate_names_non_stochastic_row() {
        let mut file = ProblemSpec::binary(0.3, 0.3).unwrap().to_file();
        file.channel[0] = vec![0.6, 0.3];
        let Err(Error::Validation(report)) = validate(&file) else { panic!("expected failure") };
        assert!(report.contains("non-stochastic row 0"), "{report}");
    }

    #[test]
    fn validate_requires_zero_cost_action() {
        let mut file = ProblemSpec::binary(0.3, 0.0).unwrap().to_file();
        file.vending = Some(VendingFile {
            kernel: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            costs: vec![0.5, 1.0],
            budget: 0.5,
        });
        let Err(Error::Validation(report)) = validate(&file) else { panic!("expected failure") };
        assert!(report.contains("no zero-cost action"), "{report}");
    }

    #[test]
    fn validate_reports_every_issue() {
        let file = ProblemFile {
            source: vec![0.5, 0.6],
            channel: vec![vec![0.9, 0.0], vec![0.5, 0.5]],
            distortion: vec![vec![0.0, -1.0]],
            vending: None,
        };
        let Err(Error::Validation(report)) = validate(&file) else { panic!("expected failure") };
        assert!(report.contains("source"));
        assert!(report.contains("non-stochastic row 0"));
        assert!(report.contains("negative loss"));
        assert!(report.contains("dimension mismatch"));
    }

    #[test]
    fn problem_file_round_trips_through_json() {
        let spec = ProblemSpec::binary(0.25, 0.1).unwrap();
        let json = serde_json::to_string(&spec.to_file()).unwrap();
        let back: ProblemSpec = serde_json::from_str::<ProblemFile>(&json).unwrap().try_into().unwrap();
        assert_eq!(back, spec);
    }

    proptest! {
        #[test]
        fn hamming_is_symmetric_with_zero_diagonal(n in 1usize..=8) {
            let h = hamming(n).unwrap();
            for i in 0..n {
                prop_assert_eq!(h.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(h.get(i, j), h.get(j, i));
                }
            }
        }

        #[test]
        fn constructed_rows_are_stochastic(p in 0.0f64..=1.0, d in 0.0f64..=1.0) {
            let spec = ProblemSpec::binary(p, d).unwrap();
            validate(&spec.to_file()).unwrap();
            for i in 0..2 {
                let s: f64 = spec.channel.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() <= SIMPLEX_TOL);
            }
        }

        #[test]
        fn from_weights_normalizes(w in proptest::collection::vec(0.01f64..10.0, 1..6)) {
            let p = ProbVector::from_weights(w).unwrap();
            let s: f64 = p.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() <= SIMPLEX_TOL);
        }
    }
}
