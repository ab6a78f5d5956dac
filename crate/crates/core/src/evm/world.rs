//! Accounts and the per-campaign blockchain snapshot.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abi::keccak256;
use crate::evm::trace::Taint;
use crate::word::{self, Word};

/// A 20-byte account identifier.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    /// Address with the given low byte, e.g. `Address::low(0xf0)` is `0x00..f0`.
    pub fn low(byte: u8) -> Self {
        let mut a = [0u8; 20];
        a[19] = byte;
        Address(a)
    }

    pub fn to_word(self) -> Word {
        word::from_be_slice(&self.0)
    }

    /// Truncates a word to its low 20 bytes.
    pub fn from_word(w: Word) -> Self {
        let bytes = word::to_be_bytes(w);
        let mut a = [0u8; 20];
        a.copy_from_slice(&bytes[12..]);
        Address(a)
    }

    pub fn to_hex(self) -> String {
        let mut s = String::with_capacity(42);
        s.push_str("0x");
        for b in self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.len() != 40 {
            return None;
        }
        let mut a = [0u8; 20];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16)?;
            let lo = (chunk[1] as char).to_digit(16)?;
            a[i] = (hi * 16 + lo) as u8;
        }
        Some(Address(a))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// What an account is, which determines how calls into it behave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccountKind {
    /// Externally owned: no code, accepts any call.
    External,
    /// Deployed bytecode.
    Contract,
    /// Native attacker that throws whenever its fallback is called.
    AttackerNormal,
    /// Native attacker that re-enters its caller once, then succeeds.
    AttackerReentrancy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Account {
    pub kind: AccountKind,
    pub balance: Word,
    pub code: Vec<u8>,
    pub storage: BTreeMap<Word, Word>,
    /// Taint persisted by SSTORE and restored by SLOAD, keyed like storage.
    pub storage_taint: BTreeMap<Word, Taint>,
    pub nonce: u64,
}

impl Account {
    pub fn external(balance: Word) -> Self {
        Account {
            kind: AccountKind::External,
            balance,
            code: Vec::new(),
            storage: BTreeMap::new(),
            storage_taint: BTreeMap::new(),
            nonce: 0,
        }
    }

    pub fn contract(balance: Word, code: Vec<u8>) -> Self {
        Account {
            kind: AccountKind::Contract,
            balance,
            code,
            storage: BTreeMap::new(),
            storage_taint: BTreeMap::new(),
            nonce: 0,
        }
    }

    pub fn attacker(kind: AccountKind, balance: Word) -> Self {
        debug_assert!(matches!(
            kind,
            AccountKind::AttackerNormal | AccountKind::AttackerReentrancy
        ));
        Account {
            kind,
            balance,
            code: Vec::new(),
            storage: BTreeMap::new(),
            storage_taint: BTreeMap::new(),
            nonce: 0,
        }
    }
}

/// The mutable network state one test case executes against.
///
/// Confined to a single thread of control; cloned wholesale for frame
/// rollback, which is cheap at the account counts a campaign uses.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct World {
    pub accounts: BTreeMap<Address, Account>,
    pub block_number: Word,
    pub timestamp: Word,
}

impl World {
    pub fn account(&self, addr: &Address) -> Option<&Account> {
        self.accounts.get(addr)
    }

    pub fn account_mut(&mut self, addr: &Address) -> &mut Account {
        self.accounts
            .entry(*addr)
            .or_insert_with(|| Account::external(Word::zero()))
    }

    pub fn balance(&self, addr: &Address) -> Word {
        self.accounts
            .get(addr)
            .map(|a| a.balance)
            .unwrap_or_default()
    }

    /// Moves `value` wei; fails without mutating when the source is short.
    pub fn transfer(&mut self, from: &Address, to: &Address, value: Word) -> bool {
        if value.is_zero() {
            return true;
        }
        if self.balance(from) < value {
            return false;
        }
        self.account_mut(from).balance -= value;
        let credit = self.account_mut(to);
        credit.balance = credit.balance.overflowing_add(value).0;
        true
    }

    /// Deterministic fresh address from creator and its current nonce.
    pub fn derive_address(creator: &Address, nonce: u64) -> Address {
        let mut buf = Vec::with_capacity(28);
        buf.extend_from_slice(&creator.0);
        buf.extend_from_slice(&nonce.to_be_bytes());
        let digest = keccak256(&buf);
        let mut a = [0u8; 20];
        a.copy_from_slice(&digest[12..]);
        Address(a)
    }
}

impl Default for Account {
    fn default() -> Self {
        Account::external(Word::zero())
    }
}
