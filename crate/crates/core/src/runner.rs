//! End-to-end campaign runner: provisions the test network, drives the
//! campaign with the oracle pipeline attached, and writes the suite,
//! vulnerability report and stats files.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::abi::{parse_abi, AbiError, FunctionSpec, Mutability, ParamType, ParsedAbi};
use crate::coverage::BranchRegistry;
use crate::evm::gas::GasSchedule;
use crate::evm::trace::ExecResult;
use crate::evm::world::{Account, AccountKind, Address, World};
use crate::fuzz::campaign::{
    run_campaign, CampaignInputs, CampaignObserver, CampaignOutput, CampaignSettings, GenStats,
    Provenance, SuiteEntry,
};
use crate::fuzz::chromosome::{default_balance, CampaignContext, TestCase};
use crate::oracle::{
    CallLog, Confidence, LogEntry, OracleContext, OracleEngine, OracleId, VulnerabilityReport,
    DEFAULT_BATCH_SIZE,
};
use crate::word;

/// The contract under test always lives here (`SA = {0xf0}`).
pub const CONTRACT_ADDRESS: Address = Address([
    0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xf0,
]);
/// Native attacker that throws on any incoming call.
pub const NORMAL_ATTACKER: Address = Address([
    0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xaa, 0x01,
]);
/// Native attacker that re-enters its caller once.
pub const REENTRANCY_ATTACKER: Address = Address([
    0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xaa, 0x02,
]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackerMode {
    Normal,
    Reentrancy,
    /// Two campaign halves, one per attacker.
    Alternate,
}

/// Runner knobs, mirroring the CLI flags.
#[derive(Clone, Debug)]
pub struct RunnerOptions {
    pub duration: Duration,
    pub rng_seed: u64,
    pub adaptive: bool,
    pub attacker: AttackerMode,
    /// Deterministic stop for reproducible output comparisons.
    pub max_generations: Option<u64>,
    pub generation_cap: usize,
    pub batch_size: usize,
    /// Overrides the address-parameter pool-size rule when set.
    pub pool_size: Option<usize>,
    pub max_calls: usize,
    pub tx_gas: u64,
}

impl Default for RunnerOptions {
    fn default() -> Self {
        RunnerOptions {
            duration: Duration::from_secs(120),
            rng_seed: 0,
            adaptive: true,
            attacker: AttackerMode::Normal,
            max_generations: None,
            generation_cap: 100,
            batch_size: DEFAULT_BATCH_SIZE,
            pool_size: None,
            max_calls: 5,
            tx_gas: 1_000_000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("abi: {0}")]
    Abi(#[from] AbiError),
    #[error("bytecode: {0}")]
    Bytecode(#[from] crate::evm::asm::AsmError),
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Number of address-type parameters across the fuzzable surface; the pool
/// never exceeds it, with a floor of one account.
pub fn address_parameter_count(abi: &ParsedAbi) -> usize {
    fn count(ty: &ParamType) -> usize {
        match ty {
            ParamType::Address => 1,
            ParamType::Array(e) => count(e),
            ParamType::FixedArray(e, n) => count(e) * n,
            _ => 0,
        }
    }
    abi.fuzzable()
        .iter()
        .chain(abi.constructor().iter())
        .flat_map(|f| f.inputs.iter())
        .map(count)
        .sum()
}

/// Provisions the template world and campaign context for one half:
/// the EOA pool, both attacker accounts (only one loaded as sender), and the
/// default configuration.
pub fn setup_world(
    abi: &ParsedAbi,
    opts: &RunnerOptions,
    attacker: AccountKind,
) -> (World, CampaignContext) {
    let pool_size = opts
        .pool_size
        .unwrap_or_else(|| address_parameter_count(abi))
        .max(1);
    let pool: Vec<Address> = (0..pool_size)
        .map(|i| {
            let mut a = [0u8; 20];
            a[18] = 0xe0;
            a[19] = (i + 1) as u8;
            Address(a)
        })
        .collect();

    let mut world = World::default();
    for p in &pool {
        world.accounts.insert(*p, Account::external(default_balance()));
    }
    let caller = match attacker {
        AccountKind::AttackerReentrancy => {
            world.accounts.insert(
                REENTRANCY_ATTACKER,
                Account::attacker(AccountKind::AttackerReentrancy, default_balance()),
            );
            REENTRANCY_ATTACKER
        }
        _ => {
            world.accounts.insert(
                NORMAL_ATTACKER,
                Account::attacker(AccountKind::AttackerNormal, default_balance()),
            );
            NORMAL_ATTACKER
        }
    };

    let constructor = abi
        .constructor()
        .cloned()
        .unwrap_or_else(|| FunctionSpec::constructor(vec![], Mutability::NonPayable));
    let functions: Vec<FunctionSpec> = abi.fuzzable().into_iter().cloned().collect();
    let ctx = CampaignContext {
        constructor,
        functions,
        pool,
        caller,
        caller_balance: default_balance(),
        max_calls: opts.max_calls,
    };
    (world, ctx)
}

/// Observer stack: feeds the oracle engine and consults an optional stop
/// predicate each generation.
pub struct RunObserver<'a> {
    pub engine: OracleEngine,
    #[allow(clippy::type_complexity)]
    pub stop: Option<
        Box<dyn FnMut(&GenStats, &BranchRegistry, &[SuiteEntry], &OracleEngine) -> bool + 'a>,
    >,
}

impl CampaignObserver for RunObserver<'_> {
    fn on_execution(&mut self, exec_id: u64, test: &TestCase, results: &[ExecResult]) {
        let calls = test
            .calls
            .iter()
            .zip(results)
            .map(|(call, result)| CallLog {
                value: call.value,
                result: result.clone(),
            })
            .collect();
        self.engine.observe(LogEntry {
            test_case_id: exec_id,
            calls,
        });
    }

    fn on_generation(
        &mut self,
        stats: &GenStats,
        registry: &BranchRegistry,
        suite: &[SuiteEntry],
    ) -> bool {
        match &mut self.stop {
            Some(f) => f(stats, registry, suite, &self.engine),
            None => true,
        }
    }
}

/// Outcome of a full run (both halves under `alternate`).
#[derive(Debug)]
pub struct RunOutcome {
    pub suite: Vec<SuiteEntry>,
    pub stats: Vec<GenStats>,
    pub reports: Vec<VulnerabilityReport>,
    pub registry: BranchRegistry,
    pub executions: u64,
    pub halves: usize,
}

/// Runs one campaign half with the given attacker and returns the campaign
/// output plus the finished oracle reports and freezing facts.
#[allow(clippy::type_complexity)]
fn run_half(
    init_code: &[u8],
    abi: &ParsedAbi,
    opts: &RunnerOptions,
    attacker: AccountKind,
    budget: Duration,
    seed: u64,
    stop: Option<
        Box<dyn FnMut(&GenStats, &BranchRegistry, &[SuiteEntry], &OracleEngine) -> bool + '_>,
    >,
) -> (CampaignOutput, Vec<VulnerabilityReport>) {
    let (world, ctx) = setup_world(abi, opts, attacker);
    let inputs = CampaignInputs {
        ctx,
        world_template: world,
        contract_address: CONTRACT_ADDRESS,
        init_code: init_code.to_vec(),
        gas_schedule: GasSchedule::default(),
    };
    let settings = CampaignSettings {
        budget,
        max_generations: opts.max_generations,
        rng_seed: seed,
        adaptive: opts.adaptive,
        generation_cap: opts.generation_cap,
        tx_gas: opts.tx_gas,
    };
    let mut observer = RunObserver {
        engine: OracleEngine::new(
            OracleContext {
                contract: CONTRACT_ADDRESS,
                reentrancy_loaded: attacker == AccountKind::AttackerReentrancy,
            },
            opts.batch_size,
        ),
        stop,
    };
    let output = run_campaign(&inputs, &settings, &mut observer);
    let reports = observer.engine.finish();
    (output, reports)
}

/// Runs the campaign (both halves under `alternate`) and merges results.
pub fn run_contract(
    init_code: &[u8],
    abi_doc: &[u8],
    opts: &RunnerOptions,
) -> Result<RunOutcome, RunnerError> {
    run_contract_with(init_code, abi_doc, opts, None)
}

/// `run_contract` with an early-stop predicate consulted every generation.
#[allow(clippy::type_complexity)]
pub fn run_contract_with(
    init_code: &[u8],
    abi_doc: &[u8],
    opts: &RunnerOptions,
    mut stop: Option<
        Box<dyn FnMut(&GenStats, &BranchRegistry, &[SuiteEntry], &OracleEngine) -> bool + '_>,
    >,
) -> Result<RunOutcome, RunnerError> {
    if opts.duration.is_zero() {
        return Err(RunnerError::ZeroDuration);
    }
    let abi = parse_abi(abi_doc)?;
    let halves: Vec<AccountKind> = match opts.attacker {
        AttackerMode::Normal => vec![AccountKind::AttackerNormal],
        AttackerMode::Reentrancy => vec![AccountKind::AttackerReentrancy],
        AttackerMode::Alternate => vec![
            AccountKind::AttackerNormal,
            AccountKind::AttackerReentrancy,
        ],
    };
    let per_half = opts.duration / halves.len() as u32;

    let mut suite = Vec::new();
    let mut stats: Vec<GenStats> = Vec::new();
    let mut reports: Vec<VulnerabilityReport> = Vec::new();
    let mut registry = BranchRegistry::default();
    let mut executions = 0u64;
    let n_halves = halves.len();

    for (i, attacker) in halves.into_iter().enumerate() {
        let (output, half_reports) = run_half(
            init_code,
            &abi,
            opts,
            attacker,
            per_half,
            opts.rng_seed.wrapping_add(i as u64),
            stop.take(),
        );
        let id_base = executions;
        let gen_base = stats.len() as u64;
        let elapsed_base = stats.last().map(|s| s.elapsed_secs).unwrap_or(0.0);
        suite.extend(output.suite.into_iter().map(|mut e| {
            e.exec_id += id_base;
            e
        }));
        stats.extend(output.stats.into_iter().map(|mut s| {
            s.generation += gen_base;
            s.elapsed_secs += elapsed_base;
            s.execs += id_base;
            s
        }));
        reports.extend(half_reports.into_iter().map(|mut r| {
            r.test_case_id += id_base;
            r
        }));
        executions += output.executions;
        if i == n_halves - 1 {
            registry = output.registry;
        }
    }

    // Freezing Ether is campaign-level: under `alternate` it stands only if
    // no half ever saw an escape, i.e. every half that flagged it agrees.
    if n_halves > 1 {
        let freezing: Vec<&VulnerabilityReport> = reports
            .iter()
            .filter(|r| r.oracle == OracleId::FreezingEther)
            .collect();
        if freezing.len() < n_halves {
            reports.retain(|r| r.oracle != OracleId::FreezingEther);
        }
    }
    // one report per oracle id, earliest test case, occurrences summed
    reports.sort_by_key(|r| (r.oracle, r.test_case_id));
    let mut merged: Vec<VulnerabilityReport> = Vec::new();
    for r in reports {
        match merged.last_mut() {
            Some(last) if last.oracle == r.oracle => last.occurrences += r.occurrences,
            _ => merged.push(r),
        }
    }

    Ok(RunOutcome {
        suite,
        stats,
        reports: merged,
        registry,
        executions,
        halves: n_halves,
    })
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AccountJson {
    address: String,
    balance: String,
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    block_number: String,
    timestamp: String,
    accounts: Vec<AccountJson>,
    contract_addresses: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CallJson {
    function: String,
    constructor: bool,
    args: Vec<String>,
    value: String,
    caller: String,
}

#[derive(Serialize, Deserialize)]
struct BranchJson {
    contract: String,
    phase: String,
    source_pc: u32,
    dest_pc: u32,
}

#[derive(Serialize, Deserialize)]
struct SuiteEntryJson {
    id: u64,
    provenance: Provenance,
    config: ConfigJson,
    calls: Vec<CallJson>,
    covered: Vec<BranchJson>,
}

fn suite_entry_json(entry: &SuiteEntry) -> SuiteEntryJson {
    SuiteEntryJson {
        id: entry.exec_id,
        provenance: entry.provenance,
        config: ConfigJson {
            block_number: word::to_hex(entry.test.config.block_number),
            timestamp: word::to_hex(entry.test.config.timestamp),
            accounts: entry
                .test
                .config
                .accounts
                .iter()
                .map(|(a, b)| AccountJson {
                    address: a.to_hex(),
                    balance: word::to_hex(*b),
                })
                .collect(),
            contract_addresses: entry
                .test
                .config
                .contract_addresses
                .iter()
                .map(|a| a.to_hex())
                .collect(),
        },
        calls: entry
            .test
            .calls
            .iter()
            .map(|c| CallJson {
                function: c.func.name.clone(),
                constructor: c.func.is_constructor,
                args: c.args.iter().map(|a| a.to_hex_string()).collect(),
                value: word::to_hex(c.value),
                caller: c.caller.to_hex(),
            })
            .collect(),
        covered: entry
            .covered
            .iter()
            .map(|b| BranchJson {
                contract: b.contract.to_hex(),
                phase: match b.phase {
                    crate::evm::trace::CodePhase::Init => "init".into(),
                    crate::evm::trace::CodePhase::Runtime => "runtime".into(),
                },
                source_pc: b.source_pc,
                dest_pc: b.dest_pc,
            })
            .collect(),
    }
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    oracle: String,
    confidence: Confidence,
    test_case_id: u64,
    call_index: usize,
    evidence_start: usize,
    evidence_end: usize,
    occurrences: u64,
    /// Hex-encoded reproduction data: the triggering test case.
    reproduction: Option<SuiteEntryJson>,
}

/// Writes suite documents, the vulnerability report and the stats CSV into
/// `dir`. Returns the number of files written.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<usize, RunnerError> {
    std::fs::create_dir_all(dir.join("suite"))?;
    let mut files = 0;

    for (i, entry) in outcome.suite.iter().enumerate() {
        let path = dir.join("suite").join(format!("tc-{i:05}.json"));
        let json = serde_json::to_string_pretty(&suite_entry_json(entry)).expect("serialize");
        std::fs::write(path, json)?;
        files += 1;
    }

    let by_id: std::collections::BTreeMap<u64, &SuiteEntry> =
        outcome.suite.iter().map(|e| (e.exec_id, e)).collect();
    let reports: Vec<ReportJson> = outcome
        .reports
        .iter()
        .map(|r| ReportJson {
            oracle: r.oracle.name().to_string(),
            confidence: r.confidence,
            test_case_id: r.test_case_id,
            call_index: r.call_index,
            evidence_start: r.evidence.start,
            evidence_end: r.evidence.end,
            occurrences: r.occurrences,
            reproduction: by_id.get(&r.test_case_id).map(|e| suite_entry_json(e)),
        })
        .collect();
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&reports).expect("serialize"),
    )?;
    files += 1;

    let mut csv = String::from(
        "generation,elapsed_secs,execs,execs_per_sec,branches_known,branches_covered,just_missed,adaptive_pct,afl_selected,adaptive_selected\n",
    );
    for s in &outcome.stats {
        csv.push_str(&format!(
            "{},{:.6},{},{:.3},{},{},{},{:.2},{},{}\n",
            s.generation,
            s.elapsed_secs,
            s.execs,
            s.execs_per_sec,
            s.branches_known,
            s.branches_covered,
            s.just_missed,
            s.adaptive_pct,
            s.afl_selected,
            s.adaptive_selected
        ));
    }
    std::fs::write(dir.join("stats.csv"), csv)?;
    files += 1;

    Ok(files)
}

/// Writes the discovered CFG as DOT.
pub fn write_cfg_dump(outcome: &RunOutcome, dir: &Path) -> Result<(), RunnerError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("cfg.dot"), outcome.registry.to_dot())?;
    Ok(())
}

/// Re-executes every suite member and dumps its trace, one tab-separated
/// line per event.
pub fn write_trace_dumps(
    outcome: &RunOutcome,
    init_code: &[u8],
    abi_doc: &[u8],
    opts: &RunnerOptions,
    dir: &Path,
) -> Result<(), RunnerError> {
    let abi = parse_abi(abi_doc)?;
    let attacker = match opts.attacker {
        AttackerMode::Reentrancy => AccountKind::AttackerReentrancy,
        _ => AccountKind::AttackerNormal,
    };
    let (world, ctx) = setup_world(&abi, opts, attacker);
    let inputs = CampaignInputs {
        ctx,
        world_template: world,
        contract_address: CONTRACT_ADDRESS,
        init_code: init_code.to_vec(),
        gas_schedule: GasSchedule::default(),
    };
    let settings = CampaignSettings {
        tx_gas: opts.tx_gas,
        ..Default::default()
    };
    let traces_dir = dir.join("traces");
    std::fs::create_dir_all(&traces_dir)?;
    let mut registry = BranchRegistry::default();
    for (i, entry) in outcome.suite.iter().enumerate() {
        let (results, _, _) =
            crate::fuzz::campaign::execute_test_case(&inputs, &settings, &mut registry, &entry.test);
        let mut file = std::fs::File::create(traces_dir.join(format!("tc-{i:05}.trace")))?;
        for (call_idx, res) in results.iter().enumerate() {
            writeln!(file, "# call {call_idx}")?;
            for ev in &res.trace {
                writeln!(file, "{}", ev.dump_line())?;
            }
        }
    }
    Ok(())
}
