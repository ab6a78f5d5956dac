//! Flat gas schedule.
//!
//! Oracles need relative gas behavior (in particular the 2300 send stipend),
//! not mainnet-exact costs, so every opcode costs a flat default except the
//! handful with size- or storage-dependent pricing.

#[derive(Clone, Debug)]
pub struct GasSchedule {
    /// Cost of any opcode without a dedicated entry.
    pub default_cost: u64,
    pub sstore: u64,
    pub call: u64,
    pub sha3_base: u64,
    pub sha3_per_word: u64,
    pub exp_base: u64,
    pub exp_per_byte: u64,
    /// Gas added to the callee of a value-transferring CALL.
    pub stipend: u64,
    /// Memory ceiling per frame, in bytes.
    pub memory_limit: usize,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            default_cost: 3,
            sstore: 5000,
            call: 700,
            sha3_base: 30,
            sha3_per_word: 6,
            exp_base: 10,
            exp_per_byte: 50,
            stipend: 2300,
            memory_limit: 1 << 20,
        }
    }
}

impl GasSchedule {
    pub fn sha3_cost(&self, len: usize) -> u64 {
        self.sha3_base + self.sha3_per_word * (len as u64).div_ceil(32)
    }

    pub fn exp_cost(&self, exponent_bytes: u64) -> u64 {
        self.exp_base + self.exp_per_byte * exponent_bytes
    }
}
