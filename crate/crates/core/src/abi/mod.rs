//! Contract ABI handling: selectors, function classification, and the
//! call-data codec.

pub mod codec;

use serde::{Deserialize, Serialize};
use tiny_keccak::{Hasher, Keccak};

/// Keccak-256 digest.
pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut hasher = Keccak::v256();
    hasher.update(data);
    hasher.finalize(&mut out);
    out
}

/// First 4 bytes of the keccak-256 of a canonical signature,
/// e.g. `transfer(address,uint256)`.
pub fn selector(signature: &str) -> [u8; 4] {
    let digest = keccak256(signature.as_bytes());
    [digest[0], digest[1], digest[2], digest[3]]
}

/// Upper bound on dynamic value lengths, matching the chromosome length byte.
pub const DYNAMIC_BOUND: usize = 255;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamType {
    /// `uint<N>`, N in 8..=256 stepping by 8.
    Uint(usize),
    /// `int<N>`.
    Int(usize),
    Address,
    Bool,
    /// `bytes<N>`, N in 1..=32.
    FixedBytes(usize),
    Bytes,
    String,
    /// Dynamic array of a static element type.
    Array(Box<ParamType>),
    /// Fixed-length array of a static element type.
    FixedArray(Box<ParamType>, usize),
}

impl ParamType {
    pub fn parse(s: &str) -> Option<ParamType> {
        if let Some(inner) = s.strip_suffix("[]") {
            let elem = ParamType::parse(inner)?;
            if elem.is_dynamic() {
                return None; // nested dynamic arrays unsupported
            }
            return Some(ParamType::Array(Box::new(elem)));
        }
        if let Some(open) = s.rfind('[') {
            if s.ends_with(']') {
                let n: usize = s[open + 1..s.len() - 1].parse().ok()?;
                let elem = ParamType::parse(&s[..open])?;
                if elem.is_dynamic() || n == 0 {
                    return None;
                }
                return Some(ParamType::FixedArray(Box::new(elem), n));
            }
        }
        match s {
            "address" => Some(ParamType::Address),
            "bool" => Some(ParamType::Bool),
            "bytes" => Some(ParamType::Bytes),
            "string" => Some(ParamType::String),
            "uint" => Some(ParamType::Uint(256)),
            "int" => Some(ParamType::Int(256)),
            _ => {
                if let Some(n) = s.strip_prefix("uint") {
                    let n: usize = n.parse().ok()?;
                    (n % 8 == 0 && (8..=256).contains(&n)).then_some(ParamType::Uint(n))
                } else if let Some(n) = s.strip_prefix("int") {
                    let n: usize = n.parse().ok()?;
                    (n % 8 == 0 && (8..=256).contains(&n)).then_some(ParamType::Int(n))
                } else if let Some(n) = s.strip_prefix("bytes") {
                    let n: usize = n.parse().ok()?;
                    (1..=32).contains(&n).then_some(ParamType::FixedBytes(n))
                } else {
                    None
                }
            }
        }
    }

    /// Canonical name used in signatures.
    pub fn canonical(&self) -> String {
        match self {
            ParamType::Uint(n) => format!("uint{n}"),
            ParamType::Int(n) => format!("int{n}"),
            ParamType::Address => "address".into(),
            ParamType::Bool => "bool".into(),
            ParamType::FixedBytes(n) => format!("bytes{n}"),
            ParamType::Bytes => "bytes".into(),
            ParamType::String => "string".into(),
            ParamType::Array(e) => format!("{}[]", e.canonical()),
            ParamType::FixedArray(e, n) => format!("{}[{n}]", e.canonical()),
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(
            self,
            ParamType::Bytes | ParamType::String | ParamType::Array(_)
        )
    }

    /// Encoded size of the static head slot, in bytes.
    pub fn head_size(&self) -> usize {
        match self {
            ParamType::FixedArray(e, n) => e.head_size() * n,
            _ => 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mutability {
    View,
    Pure,
    Constant,
    Payable,
    NonPayable,
}

/// One callable entry point of a contract.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    pub inputs: Vec<ParamType>,
    pub mutability: Mutability,
    pub is_constructor: bool,
    /// First 4 bytes of keccak-256 of the canonical signature; zero for the
    /// constructor, which is not dispatched by selector.
    pub selector: [u8; 4],
}

impl FunctionSpec {
    pub fn new(name: &str, inputs: Vec<ParamType>, mutability: Mutability) -> Self {
        let mut f = FunctionSpec {
            name: name.to_string(),
            inputs,
            mutability,
            is_constructor: false,
            selector: [0; 4],
        };
        f.selector = selector(&f.signature());
        f
    }

    pub fn constructor(inputs: Vec<ParamType>, mutability: Mutability) -> Self {
        FunctionSpec {
            name: String::new(),
            inputs,
            mutability,
            is_constructor: true,
            selector: [0; 4],
        }
    }

    pub fn signature(&self) -> String {
        let args: Vec<String> = self.inputs.iter().map(|p| p.canonical()).collect();
        format!("{}({})", self.name, args.join(","))
    }

    /// View, pure and constant functions are excluded from fuzzing.
    pub fn is_view(&self) -> bool {
        matches!(
            self.mutability,
            Mutability::View | Mutability::Pure | Mutability::Constant
        )
    }

    pub fn is_payable(&self) -> bool {
        self.mutability == Mutability::Payable
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AbiError {
    #[error("malformed ABI document at byte offset {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("ABI document is not a JSON array")]
    NotAnArray,
}

/// Result of parsing an ABI file: the mapped entries plus one warning per
/// skipped entry.
#[derive(Debug, Default)]
pub struct ParsedAbi {
    pub functions: Vec<FunctionSpec>,
    pub warnings: Vec<String>,
}

impl ParsedAbi {
    pub fn constructor(&self) -> Option<&FunctionSpec> {
        self.functions.iter().find(|f| f.is_constructor)
    }

    /// Functions eligible for fuzzing, in document order.
    pub fn fuzzable(&self) -> Vec<&FunctionSpec> {
        self.functions
            .iter()
            .filter(|f| !f.is_constructor && !f.is_view())
            .collect()
    }
}

/// Parses a standard Solidity ABI JSON array. Entries of type `function` and
/// `constructor` are mapped; entries with unsupported parameter kinds are
/// skipped with a warning.
pub fn parse_abi(document: &[u8]) -> Result<ParsedAbi, AbiError> {
    let value: serde_json::Value =
        serde_json::from_slice(document).map_err(|e| AbiError::Malformed {
            offset: offset_of(document, e.line(), e.column()),
            message: e.to_string(),
        })?;
    let entries = value.as_array().ok_or(AbiError::NotAnArray)?;

    let mut parsed = ParsedAbi::default();
    for entry in entries {
        let kind = entry.get("type").and_then(|t| t.as_str()).unwrap_or("function");
        if kind != "function" && kind != "constructor" {
            continue;
        }
        let name = entry.get("name").and_then(|n| n.as_str()).unwrap_or("");
        let mutability = match entry
            .get("stateMutability")
            .and_then(|m| m.as_str())
            .unwrap_or_else(|| {
                // Legacy documents use `constant`/`payable` booleans.
                if entry.get("payable").and_then(|p| p.as_bool()) == Some(true) {
                    "payable"
                } else if entry.get("constant").and_then(|c| c.as_bool()) == Some(true) {
                    "constant"
                } else {
                    "nonpayable"
                }
            }) {
            "view" => Mutability::View,
            "pure" => Mutability::Pure,
            "constant" => Mutability::Constant,
            "payable" => Mutability::Payable,
            _ => Mutability::NonPayable,
        };
        let mut inputs = Vec::new();
        let mut unsupported = None;
        for input in entry
            .get("inputs")
            .and_then(|i| i.as_array())
            .map(|v| v.as_slice())
            .unwrap_or(&[])
        {
            let ty = input.get("type").and_then(|t| t.as_str()).unwrap_or("");
            match ParamType::parse(ty) {
                Some(p) => inputs.push(p),
                None => {
                    unsupported = Some(ty.to_string());
                    break;
                }
            }
        }
        if let Some(ty) = unsupported {
            let label = if kind == "constructor" { "constructor" } else { name };
            parsed
                .warnings
                .push(format!("skipped `{label}`: unsupported parameter kind `{ty}`"));
            continue;
        }
        if kind == "constructor" {
            parsed
                .functions
                .push(FunctionSpec::constructor(inputs, mutability));
        } else {
            parsed
                .functions
                .push(FunctionSpec::new(name, inputs, mutability));
        }
    }
    Ok(parsed)
}

fn offset_of(document: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut remaining = line - 1;
    let mut offset = 0;
    for (i, b) in document.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if *b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    offset + column.saturating_sub(1)
}
