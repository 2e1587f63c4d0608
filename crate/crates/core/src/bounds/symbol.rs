use serde::{Deserialize, Serialize};

use crate::bayes::respond;
use crate::coding::table_digits;
use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};
use crate::models::ProblemSpec;

/// A symbol map `U -> X`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolPolicy {
    pub map: Vec<usize>,
}

impl SymbolPolicy {
    pub fn new(map: Vec<usize>, inputs: usize) -> Result<Self> {
        if map.iter().any(|&x| x >= inputs) {
            return Err(Error::invalid("symbol map sends a source symbol outside the input alphabet"));
        }
        Ok(SymbolPolicy { map })
    }

    /// Identity embedding of `U` into `X`.
    pub fn uncoded(sources: usize, inputs: usize) -> Result<Self> {
        if inputs < sources {
            return Err(Error::invalid(format!(
                "uncoded transmission needs |X| >= |U| (have {inputs} < {sources})"
            )));
        }
        Ok(SymbolPolicy { map: (0..sources).collect() })
    }

    pub fn get(&self, u: usize) -> usize {
        self.map[u]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolBound {
    pub value: f64,
    pub policy: SymbolPolicy,
    /// Every map attaining the minimum (within `1e-12`), in enumeration order.
    pub minimizers: Vec<SymbolPolicy>,
}

/// Expected Bayes loss of a symbol map: `Σ_y min_û Σ_u P_U(u) P(y | μ(u)) Λ(u, û)`.
pub(crate) fn symbol_loss(spec: &ProblemSpec, map: &[usize]) -> f64 {
    let mut w = vec![0.0; spec.source_size()];
    (0..spec.output_size())
        .map(|y| {
            for (u, wu) in w.iter_mut().enumerate() {
                *wu = spec.source[u] * spec.channel.get(map[u], y);
            }
            respond(&w, &spec.distortion).1
        })
        .sum()
}

/// `D(0)`: best symbol map with Bayes decoding, by enumeration of `|X|^{|U|}` maps.
pub fn d0_distortion(spec: &ProblemSpec, limits: &Limits) -> Result<SymbolBound> {
    let (u_count, x_count) = (spec.source_size(), spec.input_size());
    let count = checked_pow(x_count, u_count);
    limits.check_actions("symbol maps |X|^|U|", count)?;
    let losses: Vec<f64> = (0..count as usize).map(|i| symbol_loss(spec, &table_digits(i, x_count, u_count))).collect();
    let value = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers: Vec<SymbolPolicy> = losses
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= value + 1e-12)
        .map(|(i, _)| SymbolPolicy { map: table_digits(i, x_count, u_count) })
        .collect();
    Ok(SymbolBound { value, policy: minimizers[0].clone(), minimizers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendingSymbolBound {
    pub value: f64,
    pub policy: SymbolPolicy,
    /// Vending action per encoder symbol.
    pub vending_map: Vec<usize>,
    pub avg_cost: f64,
}

/// Vending `D(0)`: best (symbol map, vending map) pair whose expected action cost
/// is within the budget; the decoder sees `(x, y)`.
pub fn d0_vending(spec: &ProblemSpec, limits: &Limits) -> Result<VendingSymbolBound> {
    let vending = spec.vending()?;
    if !spec.channel.is_identity() {
        return Err(Error::invalid("vending problems need a noiseless encoder link (identity channel)"));
    }
    let (u_count, x_count, a_count) = (spec.source_size(), spec.input_size(), vending.actions());
    let maps = checked_pow(x_count, u_count);
    let avs = checked_pow(a_count, x_count);
    limits.check_actions("symbol and vending map pairs |X|^|U|·|A_v|^|X|", maps.saturating_mul(avs))?;
    let budget = vending.costs.budget();
    let mut best: Option<VendingSymbolBound> = None;
    let mut w = vec![0.0; u_count];
    for i in 0..maps as usize {
        let map = table_digits(i, x_count, u_count);
        for j in 0..avs as usize {
            let av = table_digits(j, a_count, x_count);
            let avg_cost: f64 = (0..u_count).map(|u| spec.source[u] * vending.costs.cost(av[map[u]])).sum();
            if avg_cost > budget + 1e-12 {
                continue;
            }
            let mut value = 0.0;
            for (x, &act) in av.iter().enumerate() {
                for y in 0..vending.side_outputs() {
                    for (u, wu) in w.iter_mut().enumerate() {
                        *wu = if map[u] == x { spec.source[u] * vending.prob(y, u, act) } else { 0.0 };
                    }
                    value += respond(&w, &spec.distortion).1;
                }
            }
            if best.as_ref().is_none_or(|b| value < b.value - 1e-12) {
                best = Some(VendingSymbolBound { value, policy: SymbolPolicy { map: map.clone() }, vending_map: av, avg_cost });
            }
        }
    }
    best.ok_or_else(|| Error::Internal("no symbol and vending map pair meets the budget".into()))
}
