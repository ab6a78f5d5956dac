//! The bundled contract corpus: precompiled bytecode plus ABI documents.
//!
//! Every contract is assembled from source kept here, so the corpus needs no
//! external toolchain. The dispatcher follows the classic pattern: divide the
//! first calldata word by 2^224 and compare against each selector; anything
//! shorter than four bytes lands in a payable fallback.

use crate::evm::asm::{assemble, into_init_code};
use crate::oracle::OracleId;

/// What a corpus entry demonstrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    /// Walkthrough contracts.
    Demo,
    /// Triggers the oracle.
    OraclePositive(OracleId),
    /// The repaired twin: must stay silent for the same oracle.
    OraclePatched(OracleId),
    /// Reproduces a documented false-positive mode.
    KnownFalsePositive(OracleId),
    /// Strict-equality gauntlets for the adaptive strategy.
    Strict,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub kind: FixtureKind,
    pub init_code: Vec<u8>,
    pub abi_json: &'static str,
}

fn dispatcher(cases: &[(&str, &str)]) -> String {
    let mut s = String::from(
        "push1 0x04 calldatasize lt push @fallback jumpi\n\
         push1 0x00 calldataload\n\
         push29 0x0100000000000000000000000000000000000000000000000000000000\n\
         swap1 div\n",
    );
    for (selector, label) in cases {
        s.push_str(&format!("dup1 push4 0x{selector} eq push @{label} jumpi\n"));
    }
    s.push_str("pop\n:fallback\nstop\n");
    s
}

/// Copies dynamic argument `i` (string/bytes) to memory 0.. and leaves its
/// byte length on the stack.
fn copy_dynamic_arg(i: usize) -> String {
    format!(
        "push1 0x{:02x} calldataload\n\
         push1 0x04 add\n\
         dup1 calldataload\n\
         swap1 push1 0x20 add\n\
         dup2 dup2\n\
         push1 0x00\n\
         calldatacopy\n\
         pop\n",
        4 + 32 * i
    )
}

/// send(caller, <value already on stack>) with the 2300-gas stipend,
/// result left on the stack.
const SEND_STACK_VALUE: &str = "push1 0x00 push1 0x00 push1 0x00 push1 0x00\n\
     dup5 caller push1 0x00 call\n\
     swap1 pop\n";

fn build(name: &'static str, kind: FixtureKind, ctor: &str, body: String, abi: &'static str) -> Fixture {
    let ctor_code = if ctor.is_empty() {
        Vec::new()
    } else {
        assemble(ctor).unwrap_or_else(|e| panic!("{name} constructor: {e}"))
    };
    let runtime = assemble(&body).unwrap_or_else(|e| panic!("{name}: {e}"));
    Fixture {
        name,
        kind,
        init_code: into_init_code(&ctor_code, &runtime),
        abi_json: abi,
    }
}

/// The quiz game: a correct answer plus a fee of exactly 100 releases the
/// pot through an unchecked send.
pub fn quiz() -> Fixture {
    let mut body = dispatcher(&[
        ("3853682c", "try"),
        ("b96d64fb", "start_quiz_game"),
        ("f50ab247", "stop_game"),
        ("3e3ee859", "new_question"),
    ]);
    // Try(string _response) payable: the exact-fee gate first, then the
    // answer check, then the unchecked payout
    body.push_str(":try\njumpdest\n");
    body.push_str(
        "push1 0x64 callvalue eq\n\
         iszero push @try_end jumpi\n",
    );
    body.push_str(&copy_dynamic_arg(0));
    body.push_str(
        "push1 0x00 sha3\n\
         push1 0x00 sload\n\
         eq\n\
         iszero push @try_end jumpi\n\
         address balance\n",
    );
    body.push_str(SEND_STACK_VALUE);
    body.push_str(
        "pop pop\n\
         :try_end\njumpdest stop\n",
    );
    // start_quiz_game(string _question, string _answer) payable
    body.push_str(
        ":start_quiz_game\njumpdest\n\
         push1 0x00 sload push @sqg_end jumpi\n",
    );
    body.push_str(&copy_dynamic_arg(1));
    body.push_str(
        "push1 0x00 sha3\n\
         push1 0x00 sstore\n\
         caller push1 0x01 sstore\n\
         :sqg_end\njumpdest stop\n",
    );
    // StopGame() payable: pays the pot out, unchecked
    body.push_str(":stop_game\njumpdest\naddress balance\n");
    body.push_str(SEND_STACK_VALUE);
    body.push_str("pop pop\nstop\n");
    // NewQuestion(string, bytes32): view in the ABI; selector still answers
    body.push_str(":new_question\njumpdest stop\n");
    build(
        "quiz",
        FixtureKind::Demo,
        "",
        body,
        r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"Try","inputs":[{"name":"_response","type":"string"}],"stateMutability":"payable"},
  {"type":"function","name":"start_quiz_game","inputs":[{"name":"_question","type":"string"},{"name":"_answer","type":"string"}],"stateMutability":"payable"},
  {"type":"function","name":"StopGame","inputs":[],"stateMutability":"payable"},
  {"type":"function","name":"NewQuestion","inputs":[{"name":"_question","type":"string"},{"name":"_responseHash","type":"bytes32"}],"stateMutability":"view"}
]"#,
    )
}

/// Nonlinear arithmetic: y = x*x + 10 gated on y == 110 and y == 10010.
pub fn nonlinear() -> Fixture {
    let mut body = dispatcher(&[("b3de648b", "f")]);
    body.push_str(
        ":f\njumpdest\n\
         push1 0x04 calldataload\n\
         dup1 mul\n\
         push1 0x0a add\n\
         dup1 push1 0x6e eq\n\
         iszero push @skip1 jumpi\n\
         push1 0x01 push1 0x00 sstore\n\
         :skip1\njumpdest\n\
         push2 0x271a eq\n\
         iszero push @skip2 jumpi\n\
         push1 0x01 push1 0x01 sstore\n\
         :skip2\njumpdest stop\n",
    );
    build(
        "nonlinear",
        FixtureKind::Demo,
        "",
        body,
        r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"f","inputs":[{"name":"x","type":"uint256"}],"stateMutability":"nonpayable"}
]"#,
    )
}

fn gasless_send(patched: bool) -> Fixture {
    let mut body = dispatcher(&[("4e71d92d", "claim")]);
    body.push_str(
        ":claim\njumpdest\n\
         push1 0x02 callvalue div\n",
    );
    body.push_str(SEND_STACK_VALUE);
    if patched {
        body.push_str(
            "iszero push @fail jumpi\n\
             pop stop\n\
             :fail\njumpdest push1 0x00 push1 0x00 revert\n",
        );
    } else {
        body.push_str("pop pop stop\n");
    }
    let abi = r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"claim","inputs":[],"stateMutability":"payable"}
]"#;
    if patched {
        build(
            "gasless_send_patched",
            FixtureKind::OraclePatched(OracleId::GaslessSend),
            "",
            body,
            abi,
        )
    } else {
        build(
            "gasless_send",
            FixtureKind::OraclePositive(OracleId::GaslessSend),
            "",
            body,
            abi,
        )
    }
}

fn exception_disorder(patched: bool) -> Fixture {
    let mut body = dispatcher(&[("93e84cd9", "play")]);
    // forwards plenty of gas so the failure is not a gasless send
    body.push_str(
        ":play\njumpdest\n\
         push1 0x00 push1 0x00 push1 0x00 push1 0x00\n\
         push1 0x01 caller push3 0x01e848 call\n",
    );
    if patched {
        body.push_str(
            "iszero push @fail jumpi\n\
             stop\n\
             :fail\njumpdest push1 0x00 push1 0x00 revert\n",
        );
    } else {
        body.push_str("pop stop\n");
    }
    let abi = r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"play","inputs":[],"stateMutability":"payable"}
]"#;
    if patched {
        build(
            "exception_disorder_patched",
            FixtureKind::OraclePatched(OracleId::ExceptionDisorder),
            "",
            body,
            abi,
        )
    } else {
        build(
            "exception_disorder",
            FixtureKind::OraclePositive(OracleId::ExceptionDisorder),
            "",
            body,
            abi,
        )
    }
}

fn reentrancy(patched: bool) -> Fixture {
    let mut body = dispatcher(&[("d0e30db0", "deposit"), ("3ccfd60b", "withdraw")]);
    body.push_str(
        ":deposit\njumpdest\n\
         callvalue push1 0x00 sload add push1 0x00 sstore stop\n",
    );
    body.push_str(
        ":withdraw\njumpdest\n\
         push1 0x00 sload\n\
         dup1 iszero push @wend jumpi\n",
    );
    if patched {
        // effects before interaction
        body.push_str("push1 0x00 push1 0x00 sstore\n");
    }
    body.push_str(
        "push1 0x00 push1 0x00 push1 0x00 push1 0x00\n\
         dup5 caller gas call\n\
         pop\n",
    );
    if !patched {
        body.push_str("push1 0x00 push1 0x00 sstore\n");
    }
    body.push_str(":wend\njumpdest stop\n");
    let abi = r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"deposit","inputs":[],"stateMutability":"payable"},
  {"type":"function","name":"withdraw","inputs":[],"stateMutability":"nonpayable"}
]"#;
    if patched {
        build(
            "reentrancy_patched",
            FixtureKind::OraclePatched(OracleId::Reentrancy),
            "",
            body,
            abi,
        )
    } else {
        build(
            "reentrancy",
            FixtureKind::OraclePositive(OracleId::Reentrancy),
            "",
            body,
            abi,
        )
    }
}

/// Environment-dependency fixtures share one shape: branch on a source,
/// then send. `opcode_line` supplies the branch operand.
fn env_dependency(
    name: &'static str,
    kind: FixtureKind,
    cond_source: &str,
) -> Fixture {
    let mut body = dispatcher(&[("93e84cd9", "play")]);
    body.push_str(&format!(
        ":play\njumpdest\n\
         push1 0x02 {cond_source} mod\n\
         iszero iszero push @pend jumpi\n\
         push1 0x01\n"
    ));
    body.push_str(
        "push1 0x00 push1 0x00 push1 0x00 push1 0x00\n\
         dup5 caller gas call\n\
         pop pop\n\
         :pend\njumpdest stop\n",
    );
    build(
        name,
        kind,
        "",
        body,
        r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"play","inputs":[],"stateMutability":"payable"}
]"#,
    )
}

/// Stores the timestamp, branches on the stored copy, then sends
/// unconditionally: the branch is irrelevant to the transfer, yet the
/// dependency oracle still fires. This is the documented imprecision.
fn timestamp_false_positive() -> Fixture {
    let mut body = dispatcher(&[("266cf109", "record")]);
    body.push_str(
        ":record\njumpdest\n\
         timestamp push1 0x00 sstore\n\
         push1 0x00 sload iszero push @send jumpi\n\
         push1 0x01 sload push1 0x01 add push1 0x01 sstore\n\
         :send\njumpdest\n\
         push1 0x01\n",
    );
    body.push_str(
        "push1 0x00 push1 0x00 push1 0x00 push1 0x00\n\
         dup5 caller gas call\n\
         pop pop stop\n",
    );
    build(
        "timestamp_store_fp",
        FixtureKind::KnownFalsePositive(OracleId::TimestampDependency),
        "",
        body,
        r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"record","inputs":[],"stateMutability":"payable"}
]"#,
    )
}

fn delegate_call(patched: bool) -> Fixture {
    let mut body = dispatcher(&[("6bb6126e", "exec")]);
    body.push_str(":exec\njumpdest\n");
    body.push_str("push1 0x00 push1 0x00 push1 0x00 push1 0x00\n");
    if patched {
        body.push_str("push20 0x00000000000000000000000000000000000000e1\n");
    } else {
        body.push_str("push1 0x04 calldataload\n");
    }
    body.push_str("gas delegatecall pop stop\n");
    let abi = r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"exec","inputs":[{"name":"target","type":"address"}],"stateMutability":"nonpayable"}
]"#;
    if patched {
        build(
            "delegatecall_patched",
            FixtureKind::OraclePatched(OracleId::DangerousDelegateCall),
            "",
            body,
            abi,
        )
    } else {
        build(
            "delegatecall",
            FixtureKind::OraclePositive(OracleId::DangerousDelegateCall),
            "",
            body,
            abi,
        )
    }
}

fn overflow(patched: bool) -> Fixture {
    let mut body = dispatcher(&[("131e2f18", "mul")]);
    body.push_str(":mul\njumpdest\npush1 0x04 calldataload\n");
    if patched {
        // revert unless x < 2^128, so the product cannot wrap
        body.push_str(
            "dup1 push17 0x0100000000000000000000000000000000 swap1 lt\n\
             iszero push @fail jumpi\n",
        );
    }
    body.push_str(
        "push1 0x03 mul\n\
         push1 0x00 sstore stop\n",
    );
    if patched {
        body.push_str(":fail\njumpdest push1 0x00 push1 0x00 revert\n");
    }
    let abi = r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"mul","inputs":[{"name":"x","type":"uint256"}],"stateMutability":"nonpayable"}
]"#;
    if patched {
        build(
            "overflow_patched",
            FixtureKind::OraclePatched(OracleId::IntegerOverflow),
            "",
            body,
            abi,
        )
    } else {
        build(
            "overflow",
            FixtureKind::OraclePositive(OracleId::IntegerOverflow),
            "",
            body,
            abi,
        )
    }
}

fn underflow(patched: bool) -> Fixture {
    let mut body = dispatcher(&[("27ee58a6", "sub")]);
    body.push_str(":sub\njumpdest\npush1 0x04 calldataload\n");
    if patched {
        body.push_str(
            "dup1 push1 0x00 sload lt\n\
             push @fail jumpi\n",
        );
    }
    body.push_str(
        "push1 0x00 sload sub\n\
         push1 0x00 sstore stop\n",
    );
    if patched {
        body.push_str(":fail\njumpdest push1 0x00 push1 0x00 revert\n");
    }
    let abi = r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"sub","inputs":[{"name":"x","type":"uint256"}],"stateMutability":"nonpayable"}
]"#;
    let ctor = "push1 0x0a push1 0x00 sstore";
    if patched {
        build(
            "underflow_patched",
            FixtureKind::OraclePatched(OracleId::IntegerUnderflow),
            ctor,
            body,
            abi,
        )
    } else {
        build(
            "underflow",
            FixtureKind::OraclePositive(OracleId::IntegerUnderflow),
            ctor,
            body,
            abi,
        )
    }
}

fn freezing(patched: bool) -> Fixture {
    let mut cases = vec![("d0e30db0", "deposit")];
    if patched {
        cases.push(("3ccfd60b", "withdraw"));
    }
    let mut body = dispatcher(&cases);
    body.push_str(
        ":deposit\njumpdest\n\
         callvalue push1 0x00 sload add push1 0x00 sstore stop\n",
    );
    if patched {
        body.push_str(
            ":withdraw\njumpdest\n\
             push1 0x01\n\
             push1 0x00 push1 0x00 push1 0x00 push1 0x00\n\
             dup5 caller gas call\n\
             pop pop stop\n",
        );
    }
    if patched {
        build(
            "freezing_patched",
            FixtureKind::OraclePatched(OracleId::FreezingEther),
            "",
            body,
            r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"deposit","inputs":[],"stateMutability":"payable"},
  {"type":"function","name":"withdraw","inputs":[],"stateMutability":"nonpayable"}
]"#,
        )
    } else {
        build(
            "freezing",
            FixtureKind::OraclePositive(OracleId::FreezingEther),
            "",
            body,
            r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"deposit","inputs":[],"stateMutability":"payable"}
]"#,
        )
    }
}

/// Three-stage gauntlet: each stage guards a strict quadratic equality behind
/// the previous stage's flag. The comparison constants sit in the bytecode
/// (and thus the fuzzer's dictionary) but their solutions do not.
fn gauntlet(name: &'static str, consts: [(&str, &str); 3]) -> Fixture {
    let mut body = dispatcher(&[
        ("b3de648b", "s1"), // f(uint256)
        ("1cd65ae4", "s2"), // g(uint256,uint256) — second arg ignored
        ("db082440", "s3"), // probe(uint256)
    ]);
    let stages = [
        ("s1", "", consts[0]),
        ("s2", "push1 0x01 sload iszero push @s2_end jumpi\n", consts[1]),
        ("s3", "push1 0x02 sload iszero push @s3_end jumpi\n", consts[2]),
    ];
    for (i, (label, guard, (addend, target))) in stages.iter().enumerate() {
        body.push_str(&format!(":{label}\njumpdest\n"));
        body.push_str(guard);
        body.push_str(&format!(
            "push1 0x04 calldataload\n\
             dup1 mul\n\
             push1 {addend} add\n\
             push4 {target} eq\n\
             iszero push @{label}_end jumpi\n\
             push1 0x01 push1 0x{:02x} sstore\n\
             :{label}_end\njumpdest stop\n",
            i + 1
        ));
    }
    build(
        name,
        FixtureKind::Strict,
        "",
        body,
        r#"[
  {"type":"constructor","inputs":[]},
  {"type":"function","name":"f","inputs":[{"name":"a","type":"uint256"}],"stateMutability":"nonpayable"},
  {"type":"function","name":"g","inputs":[{"name":"b","type":"uint256"},{"name":"unused","type":"uint256"}],"stateMutability":"nonpayable"},
  {"type":"function","name":"probe","inputs":[{"name":"c","type":"uint256"}],"stateMutability":"nonpayable"}
]"#,
    )
}

/// The whole corpus, in a stable order.
pub fn all() -> Vec<Fixture> {
    vec![
        quiz(),
        nonlinear(),
        gasless_send(false),
        gasless_send(true),
        exception_disorder(false),
        exception_disorder(true),
        reentrancy(false),
        reentrancy(true),
        env_dependency(
            "timestamp",
            FixtureKind::OraclePositive(OracleId::TimestampDependency),
            "timestamp",
        ),
        env_dependency(
            "timestamp_patched",
            FixtureKind::OraclePatched(OracleId::TimestampDependency),
            "callvalue",
        ),
        timestamp_false_positive(),
        env_dependency(
            "blocknumber",
            FixtureKind::OraclePositive(OracleId::BlockNumberDependency),
            "number",
        ),
        env_dependency(
            "blocknumber_patched",
            FixtureKind::OraclePatched(OracleId::BlockNumberDependency),
            "callvalue",
        ),
        delegate_call(false),
        delegate_call(true),
        overflow(false),
        overflow(true),
        underflow(false),
        underflow(true),
        freezing(false),
        freezing(true),
        gauntlet("gauntlet_a", [("0x07", "0x0098a860"), ("0x0b", "0x03460eb4"), ("0x03", "0x328dba8c")]),
        gauntlet("gauntlet_b", [("0x0d", "0x01ae1396"), ("0x09", "0x0a05a8fa"), ("0x15", "0x64014016")]),
        gauntlet("gauntlet_c", [("0x05", "0x005d9eee"), ("0x11", "0x058758d2"), ("0x1d", "0x9c3e701e")]),
    ]
}

pub fn by_name(name: &str) -> Option<Fixture> {
    all().into_iter().find(|f| f.name == name)
}

/// The strict-condition sub-corpus used to track adaptive contribution.
pub fn strict_corpus() -> Vec<Fixture> {
    all()
        .into_iter()
        .filter(|f| f.kind == FixtureKind::Strict)
        .collect()
}
