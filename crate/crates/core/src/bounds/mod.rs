//! Analytic endpoints `D(0)` and `D(∞)`, symbol-by-symbol optimality checks and
//! the region where lookahead with finite memory beats symbol-by-symbol coding.

pub mod region;
pub mod s2s;
pub mod shannon;
pub mod symbol;

pub use region::{suboptimality_region, RegionOptions, RegionPoint, RegionReport};
pub use s2s::{h_closed_form, symbol_by_symbol_check, uncoded_condition_check, CheckReport, Violation};
pub use shannon::{binary_entropy, binary_shannon_closed_form, channel_capacity, rate_distortion_at_slope, shannon_limit};
pub use symbol::{d0_distortion, d0_vending, SymbolBound, SymbolPolicy, VendingSymbolBound};
