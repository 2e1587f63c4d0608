use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{checked_pow, Limits};

/// Finite decoder memory with a time-invariant update `z' = f(z, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMemory")]
pub struct MemorySpec {
    size: usize,
    inputs: usize,
    /// `table[z * inputs + y]`.
    table: Vec<usize>,
}

#[derive(Deserialize)]
struct RawMemory {
    size: usize,
    inputs: usize,
    table: Vec<usize>,
}

impl TryFrom<RawMemory> for MemorySpec {
    type Error = Error;

    fn try_from(raw: RawMemory) -> Result<Self> {
        MemorySpec::new(raw.size, raw.inputs, raw.table)
    }
}

impl MemorySpec {
    pub fn new(size: usize, inputs: usize, table: Vec<usize>) -> Result<Self> {
        if size == 0 || inputs == 0 {
            return Err(Error::invalid("memory and input alphabets must be nonempty"));
        }
        if table.len() != size * inputs {
            return Err(Error::invalid(format!(
                "memory table has {} entries, expected {}",
                table.len(),
                size * inputs
            )));
        }
        if let Some(bad) = table.iter().position(|&z| z >= size) {
            return Err(Error::invalid(format!("memory update at {bad} leaves 0..{size}")));
        }
        Ok(MemorySpec { size, inputs, table })
    }

    /// Singleton memory over an alphabet of `inputs` symbols.
    pub fn trivial(inputs: usize) -> Result<Self> {
        MemorySpec::new(1, inputs, vec![0; inputs])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    pub fn update(&self, z: usize, y: usize) -> usize {
        self.table[z * self.inputs + y]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }
}

/// Shift register holding the last `m` symbols; `z` is their base-`|Y|` index, oldest first.
pub fn memory_last_m(m: usize, inputs: usize, limits: &Limits) -> Result<MemorySpec> {
    if inputs == 0 {
        return Err(Error::invalid("memory input alphabet is empty"));
    }
    let size = checked_pow(inputs, m);
    limits.check_states("memory states |Y|^m", size)?;
    let size = size as usize;
    let keep = size / inputs.max(1);
    let mut table = Vec::with_capacity(size * inputs);
    for z in 0..size {
        for y in 0..inputs {
            table.push(if m == 0 { 0 } else { (z % keep.max(1)) * inputs + y });
        }
    }
    MemorySpec::new(size, inputs, table)
}
