//! The test-generation loop: execute seeds, keep new-branch finders in the
//! suite, select survivors, breed the next generation by crossover and
//! mutation, until the budget runs out.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::abi::codec::encode_call;
use crate::coverage::{Branch, BranchRegistry, CoverageHook, DistanceReport};
use crate::evm::gas::GasSchedule;
use crate::evm::interp::{deploy_at, execute_message, Message};
use crate::evm::trace::ExecResult;
use crate::evm::world::{Address, World};
use crate::fuzz::chromosome::{decode, encode, CampaignContext, Chromosome, TestCase};
use crate::fuzz::generate::init_population;
use crate::fuzz::mutation::{mutate, pick_op, Dictionary, MutationOp};
use crate::fuzz::select::{fit_to_survive, ExecutedSeed, SeedBank, SelectionReason};

/// Knobs of one campaign.
#[derive(Clone, Debug)]
pub struct CampaignSettings {
    /// Wall-clock budget.
    pub budget: Duration,
    /// Deterministic stop after this many generations, when set.
    pub max_generations: Option<u64>,
    pub rng_seed: u64,
    /// Distance-guided seed selection on or off (off = AFL strategy only).
    pub adaptive: bool,
    /// Offspring per generation.
    pub generation_cap: usize,
    /// Gas per transaction.
    pub tx_gas: u64,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        CampaignSettings {
            budget: Duration::from_secs(120),
            max_generations: None,
            rng_seed: 0,
            adaptive: true,
            generation_cap: 100,
            tx_gas: 1_000_000,
        }
    }
}

/// Which selection strategy produced a suite member's parent seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Afl,
    Adaptive,
}

/// One member of the generated test suite.
#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub exec_id: u64,
    pub test: TestCase,
    pub provenance: Provenance,
    /// Branches this member covered first.
    pub covered: Vec<Branch>,
}

/// One stats row per generation.
#[derive(Clone, Debug)]
pub struct GenStats {
    pub generation: u64,
    pub elapsed_secs: f64,
    pub execs: u64,
    pub execs_per_sec: f64,
    pub branches_known: usize,
    pub branches_covered: usize,
    pub just_missed: usize,
    /// Percentage of suite members descended from adaptive-selected seeds.
    pub adaptive_pct: f64,
    pub afl_selected: usize,
    pub adaptive_selected: usize,
}

/// One operator application, for the mutation log.
#[derive(Clone, Debug)]
pub struct MutationLogEntry {
    pub generation: u64,
    pub seed_id: u64,
    pub op: &'static str,
    pub emitted: usize,
    pub skipped_blocks: Vec<u32>,
}

/// Campaign-side callbacks: the oracle pipeline consumes executions, and a
/// generation callback may stop the campaign early.
pub trait CampaignObserver {
    fn on_execution(&mut self, _exec_id: u64, _test: &TestCase, _results: &[ExecResult]) {}
    /// Return false to stop the campaign.
    fn on_generation(
        &mut self,
        _stats: &GenStats,
        _registry: &BranchRegistry,
        _suite: &[SuiteEntry],
    ) -> bool {
        true
    }
}

/// Observer that does nothing.
pub struct NoopObserver;

impl CampaignObserver for NoopObserver {}

/// Static inputs of a campaign: the contract and the prepared network.
#[derive(Clone, Debug)]
pub struct CampaignInputs {
    pub ctx: CampaignContext,
    /// Accounts (pool, attacker) already provisioned; the contract under
    /// test is deployed per test case.
    pub world_template: World,
    pub contract_address: Address,
    pub init_code: Vec<u8>,
    pub gas_schedule: GasSchedule,
}

#[derive(Debug)]
pub struct CampaignOutput {
    pub suite: Vec<SuiteEntry>,
    pub stats: Vec<GenStats>,
    pub registry: BranchRegistry,
    pub executions: u64,
    pub mutation_log: Vec<MutationLogEntry>,
}

struct Candidate {
    chromo: Chromosome,
    provenance: Provenance,
    parent: Option<u64>,
    /// 32-byte block the mutation touched, for effector learning.
    block: Option<u32>,
    /// Whether this offspring came from the single-walking-byte probe stage.
    probe: bool,
}

/// Per-seed mutation state: the effector map learned for this lineage.
#[derive(Default)]
struct MutationCursor {
    effector: BTreeSet<u32>,
}

/// Runs one fuzzing campaign. Deterministic given the rng seed and a
/// deterministic stop (generation bound or observer decision).
pub fn run_campaign(
    inputs: &CampaignInputs,
    settings: &CampaignSettings,
    observer: &mut dyn CampaignObserver,
) -> CampaignOutput {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(settings.rng_seed);
    let mut registry = BranchRegistry::default();
    let mut bank = SeedBank::default();
    let mut suite: Vec<SuiteEntry> = Vec::new();
    let mut stats: Vec<GenStats> = Vec::new();
    let mut mutation_log: Vec<MutationLogEntry> = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut cursors: BTreeMap<u64, MutationCursor> = BTreeMap::new();
    let mut exec_counter: u64 = 0;

    let dict = Dictionary::build(
        &[&inputs.init_code],
        &inputs
            .ctx
            .pool
            .iter()
            .map(|a| (*a, crate::fuzz::chromosome::default_balance()))
            .collect::<Vec<_>>(),
    );

    let mut candidates: Vec<Candidate> = init_population(&inputs.ctx, &mut rng)
        .iter()
        .map(|t| Candidate {
            chromo: encode(&inputs.ctx, t),
            provenance: Provenance::Afl,
            parent: None,
            block: None,
            probe: false,
        })
        .collect();
    // blocks fully probed by the walking-byte stage, per parent seed
    let mut pending_probe: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
    // round-robin cursor over the suite for queue cycling
    let mut queue_cursor: usize = 0;

    let mut generation: u64 = 0;
    loop {
        let mut executed: Vec<ExecutedSeed> = Vec::new();
        let mut new_branch_blocks: BTreeMap<u64, BTreeSet<u32>> = BTreeMap::new();
        for cand in candidates.drain(..) {
            if !seen.insert(chromo_hash(&cand.chromo)) {
                continue;
            }
            let Ok(test) = decode(&inputs.ctx, &cand.chromo) else {
                continue;
            };
            let id = exec_counter;
            exec_counter += 1;
            let (results, newly_covered, report) =
                execute_test_case(inputs, settings, &mut registry, &test);
            observer.on_execution(id, &test, &results);
            if !newly_covered.is_empty() {
                if let (Some(parent), Some(block), true) = (cand.parent, cand.block, cand.probe) {
                    new_branch_blocks.entry(parent).or_default().insert(block);
                }
                suite.push(SuiteEntry {
                    exec_id: id,
                    test: test.clone(),
                    provenance: cand.provenance,
                    covered: newly_covered.clone(),
                });
            }
            executed.push(ExecutedSeed {
                id,
                test,
                chromo: cand.chromo,
                newly_covered,
                report,
            });
        }

        // effector learning: a fully probed block that produced no
        // new-branch offspring is skipped by later value stages
        for (parent, full_blocks) in pending_probe.iter() {
            let found = new_branch_blocks.get(parent);
            let cursor = cursors.entry(*parent).or_default();
            for b in full_blocks {
                if found.is_none_or(|s| !s.contains(b)) {
                    cursor.effector.insert(*b);
                }
            }
        }
        pending_probe.clear();

        for seed in &executed {
            bank.insert(seed.id, seed.test.clone(), seed.chromo.clone());
        }
        let pool = fit_to_survive(&executed, &mut registry, &bank, settings.adaptive);
        bank.retain_referenced(&registry);

        let elapsed = start.elapsed().as_secs_f64();
        let adaptive_members = suite
            .iter()
            .filter(|s| s.provenance == Provenance::Adaptive)
            .count();
        let row = GenStats {
            generation,
            elapsed_secs: elapsed,
            execs: exec_counter,
            execs_per_sec: if elapsed > 0.0 {
                exec_counter as f64 / elapsed
            } else {
                0.0
            },
            branches_known: registry.known_count(),
            branches_covered: registry.covered_count(),
            just_missed: registry.just_missed().len(),
            adaptive_pct: if suite.is_empty() {
                0.0
            } else {
                100.0 * adaptive_members as f64 / suite.len() as f64
            },
            afl_selected: pool.afl.len(),
            adaptive_selected: pool.adaptive.len(),
        };
        let keep_going = observer.on_generation(&row, &registry, &suite);
        stats.push(row);
        generation += 1;

        if !keep_going
            || start.elapsed() >= settings.budget
            || settings.max_generations.is_some_and(|m| generation >= m)
        {
            break;
        }

        // ------- breed the next generation -------
        let mut pool = pool;
        if pool.afl.is_empty() && !suite.is_empty() {
            // AFL queue cycling: with no fresh finders this generation, keep
            // mutating suite members round-robin so the pool never goes stale
            for _ in 0..2.min(suite.len()) {
                let entry = &suite[queue_cursor % suite.len()];
                queue_cursor += 1;
                pool.afl.push(crate::fuzz::select::SelectedSeed {
                    id: entry.exec_id,
                    test: entry.test.clone(),
                    chromo: encode(&inputs.ctx, &entry.test),
                    reason: SelectionReason::NewBranch,
                });
            }
        }
        if pool.is_empty() {
            // nothing survived and nothing covered yet: fresh random restart
            candidates = init_population(&inputs.ctx, &mut rng)
                .iter()
                .map(|t| Candidate {
                    chromo: encode(&inputs.ctx, t),
                    provenance: Provenance::Afl,
                    parent: None,
                    block: None,
                    probe: false,
                })
                .collect();
            continue;
        }

        let cap = settings.generation_cap;
        let mut budget_left = cap;

        // crossover on random pool pairs, a tenth of the budget
        if pool.len() >= 2 {
            let entries: Vec<_> = pool.iter().collect();
            let share = (cap / 10).max(1);
            let mut produced = 0;
            let mut attempts = 0;
            while produced < share && attempts < share * 3 {
                attempts += 1;
                let i = rng.gen_range(0..entries.len());
                let mut j = rng.gen_range(0..entries.len());
                if i == j {
                    j = (j + 1) % entries.len();
                }
                let (a, b) = (entries[i], entries[j]);
                for child in crossover_chromosomes(&inputs.ctx, &a.chromo, &b.chromo, &mut rng) {
                    let provenance = match a.reason {
                        SelectionReason::NewBranch => Provenance::Afl,
                        SelectionReason::MinDistance(_) => Provenance::Adaptive,
                    };
                    candidates.push(Candidate {
                        chromo: child,
                        provenance,
                        parent: Some(a.id),
                        block: None,
                        probe: false,
                    });
                    produced += 1;
                }
            }
            budget_left = budget_left.saturating_sub(produced);
        }

        // mutation: the remaining budget split evenly across the pool;
        // three fifths go to one scheduled stage, the rest to havoc-style
        // stacked mutations so the offspring space never exhausts
        let per_seed = (budget_left / pool.len()).max(1);
        for entry in pool.iter() {
            let cursor = cursors.entry(entry.id).or_default();
            let op = pick_op(&mut rng);
            let effector = cursor.effector.clone();
            let single_budget = (per_seed * 3 / 5).max(1);
            let batch = mutate(
                &inputs.ctx,
                &entry.chromo,
                op,
                &mut rng,
                &dict,
                &effector,
                single_budget,
            );
            mutation_log.push(MutationLogEntry {
                generation,
                seed_id: entry.id,
                op: op.name(),
                emitted: batch.offspring.len(),
                skipped_blocks: batch.skipped_blocks.clone(),
            });
            if op == MutationOp::SingleWalkingByte {
                pending_probe.insert(entry.id, fully_probed_blocks(&batch.blocks, &entry.chromo));
            }
            let provenance = match entry.reason {
                SelectionReason::NewBranch => Provenance::Afl,
                SelectionReason::MinDistance(_) => Provenance::Adaptive,
            };
            for (child, block) in batch.offspring.into_iter().zip(batch.blocks) {
                candidates.push(Candidate {
                    chromo: child,
                    provenance,
                    parent: Some(entry.id),
                    block,
                    probe: op == MutationOp::SingleWalkingByte,
                });
            }
            for _ in single_budget..per_seed {
                if let Some(child) = havoc(&inputs.ctx, &entry.chromo, &mut rng, &dict, &effector)
                {
                    candidates.push(Candidate {
                        chromo: child,
                        provenance,
                        parent: Some(entry.id),
                        block: None,
                        probe: false,
                    });
                }
            }
        }
    }

    CampaignOutput {
        suite,
        stats,
        registry,
        executions: exec_counter,
        mutation_log,
    }
}

/// Blocks in which every byte of the chromosome was probed by this batch.
fn fully_probed_blocks(blocks: &[Option<u32>], chromo: &Chromosome) -> Vec<u32> {
    let mut per_block: BTreeMap<u32, usize> = BTreeMap::new();
    for b in blocks.iter().flatten() {
        *per_block.entry(*b).or_default() += 1;
    }
    per_block
        .into_iter()
        .filter(|(b, probes)| {
            let block_bytes = chromo
                .bytes
                .len()
                .saturating_sub(*b as usize * 32)
                .min(32);
            *probes >= block_bytes
        })
        .map(|(b, _)| b)
        .collect()
}

/// Stacks two to four random operators on a chromosome, keeping one
/// offspring per step.
fn havoc<R: rand::Rng>(
    ctx: &CampaignContext,
    seed: &Chromosome,
    rng: &mut R,
    dict: &Dictionary,
    effector: &BTreeSet<u32>,
) -> Option<Chromosome> {
    let steps = rng.gen_range(2..=4usize);
    let mut current = seed.clone();
    let mut changed = false;
    for _ in 0..steps {
        let op = pick_op(rng);
        let batch = mutate(ctx, &current, op, rng, dict, effector, 1);
        if let Some(child) = batch.offspring.into_iter().next() {
            current = child;
            changed = true;
        }
    }
    changed.then_some(current)
}

fn chromo_hash(c: &Chromosome) -> u64 {
    let mut h = DefaultHasher::new();
    c.bytes.hash(&mut h);
    h.finish()
}

/// Single-point crossover: swap suffixes at a random bit, keep the offspring
/// that decode to valid test cases and differ from both parents.
pub fn crossover_chromosomes<R: Rng>(
    ctx: &CampaignContext,
    a: &Chromosome,
    b: &Chromosome,
    rng: &mut R,
) -> Vec<Chromosome> {
    let max_cut = a.bit_len().min(b.bit_len());
    let cut = if max_cut == 0 {
        0
    } else {
        rng.gen_range(0..=max_cut)
    };
    let (x, y) = Chromosome::splice(a, b, cut);
    [x, y]
        .into_iter()
        .filter(|c| c != a && c != b)
        .filter(|c| decode(ctx, c).is_ok())
        .collect()
}

/// The crossover operation over test cases: encode, splice, decode; invalid
/// offspring are discarded, as are copies of the parents.
pub fn crossover<R: Rng>(
    ctx: &CampaignContext,
    a: &TestCase,
    b: &TestCase,
    rng: &mut R,
) -> Vec<TestCase> {
    let ca = encode(ctx, a);
    let cb = encode(ctx, b);
    crossover_chromosomes(ctx, &ca, &cb, rng)
        .iter()
        .filter_map(|c| decode(ctx, c).ok())
        .collect()
}

/// Runs one test case against a fresh world: deploy, then the calls in order.
/// Returns per-call results, the branches newly covered, and the distance
/// report folded over the whole sequence.
pub fn execute_test_case(
    inputs: &CampaignInputs,
    settings: &CampaignSettings,
    registry: &mut BranchRegistry,
    test: &TestCase,
) -> (Vec<ExecResult>, Vec<Branch>, DistanceReport) {
    let mut world = inputs.world_template.clone();
    world.block_number = test.config.block_number;
    world.timestamp = test.config.timestamp;
    for (addr, balance) in &test.config.accounts {
        world.account_mut(addr).balance = *balance;
    }

    let mut newly = Vec::new();
    let mut report = DistanceReport::default();
    let mut results = Vec::new();

    let ctor = &test.calls[0];
    let mut init = inputs.init_code.clone();
    if !ctor.args.is_empty() {
        if let Ok(encoded) = encode_call(&ctor.func, &ctor.args) {
            init.extend(encoded);
        }
    }
    let deployed = {
        let mut hook = CoverageHook::new(registry, &mut report, &mut newly);
        deploy_at(
            &mut world,
            ctor.caller,
            inputs.contract_address,
            &init,
            ctor.value,
            &inputs.gas_schedule,
            &mut hook,
        )
    };
    let deployed = match deployed {
        Ok(out) => out,
        Err(_) => return (results, newly, report),
    };
    let constructed = deployed.address.is_some();
    results.push(deployed.result);

    if constructed {
        for call in &test.calls[1..] {
            let Ok(data) = encode_call(&call.func, &call.args) else {
                continue;
            };
            let msg = Message {
                caller: call.caller,
                callee: inputs.contract_address,
                value: call.value,
                data,
                gas: settings.tx_gas,
                depth: 0,
                is_delegate: false,
            };
            let mut hook = CoverageHook::new(registry, &mut report, &mut newly);
            match execute_message(&mut world, &msg, &inputs.gas_schedule, &mut hook) {
                Ok(res) => results.push(res),
                Err(_) => break,
            }
        }
    }
    (results, newly, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abi::{FunctionSpec, Mutability, ParamType};
    use crate::evm::asm::{assemble, into_init_code};
    use crate::evm::world::{Account, AccountKind};
    use crate::fuzz::chromosome::default_balance;
    use crate::word::Word;

    /// Contract with two functions:
    ///   set(uint256): stores arg at slot 0
    ///   check(uint256): if (arg == 0x1122334455) { sstore(1, 1) }
    fn gated_contract() -> Vec<u8> {
        let src = "
            push1 0x04 calldatasize lt push @fallback jumpi
            push1 0x00 calldataload
            push29 0x0100000000000000000000000000000000000000000000000000000000
            swap1 div
            push4 0xffffffff and
            dup1 push4 0x60fe47b1 eq push @set jumpi
            dup1 push4 0x5f72f450 eq push @check jumpi
            pop
            :fallback
            stop
            :set
            jumpdest
            push1 0x04 calldataload push1 0x00 sstore
            stop
            :check
            jumpdest
            push1 0x04 calldataload
            push5 0x1122334455
            eq
            iszero push @done jumpi
            push1 0x01 push1 0x01 sstore
            :done
            jumpdest
            stop
        ";
        into_init_code(&[], &assemble(src).unwrap())
    }

    fn inputs() -> CampaignInputs {
        let caller = Address::low(0xa1);
        let pool = vec![Address::low(0xe1)];
        let mut world = World::default();
        world
            .accounts
            .insert(caller, Account::attacker(AccountKind::AttackerNormal, default_balance()));
        for p in &pool {
            world.accounts.insert(*p, Account::external(default_balance()));
        }
        CampaignInputs {
            ctx: CampaignContext {
                constructor: FunctionSpec::constructor(vec![], Mutability::NonPayable),
                functions: vec![
                    FunctionSpec::new("set", vec![ParamType::Uint(256)], Mutability::NonPayable),
                    FunctionSpec::new("check", vec![ParamType::Uint(256)], Mutability::NonPayable),
                ],
                pool,
                caller,
                caller_balance: default_balance(),
                max_calls: 5,
            },
            world_template: world,
            contract_address: Address::low(0xf0),
            init_code: gated_contract(),
            gas_schedule: GasSchedule::default(),
        }
    }

    fn settings(generations: u64, seed: u64, adaptive: bool) -> CampaignSettings {
        CampaignSettings {
            budget: Duration::from_secs(3600),
            max_generations: Some(generations),
            rng_seed: seed,
            adaptive,
            generation_cap: 60,
            tx_gas: 1_000_000,
        }
    }

    #[test]
    fn fixed_seed_campaigns_are_identical() {
        let inputs = inputs();
        let a = run_campaign(&inputs, &settings(8, 42, true), &mut NoopObserver);
        let b = run_campaign(&inputs, &settings(8, 42, true), &mut NoopObserver);
        assert_eq!(a.executions, b.executions);
        assert_eq!(a.suite.len(), b.suite.len());
        for (x, y) in a.suite.iter().zip(&b.suite) {
            assert_eq!(x.exec_id, y.exec_id);
            assert_eq!(x.test, y.test);
            assert_eq!(x.provenance, y.provenance);
            assert_eq!(x.covered, y.covered);
        }
        assert_eq!(a.registry.covered_count(), b.registry.covered_count());
    }

    #[test]
    fn different_seeds_diverge() {
        let inputs = inputs();
        let a = run_campaign(&inputs, &settings(6, 1, true), &mut NoopObserver);
        let b = run_campaign(&inputs, &settings(6, 2, true), &mut NoopObserver);
        // executions may match by chance; suites almost surely differ
        let same = a.suite.len() == b.suite.len()
            && a.suite.iter().zip(&b.suite).all(|(x, y)| x.test == y.test);
        assert!(!same || a.executions != b.executions);
    }

    #[test]
    fn suite_members_cover_branches_no_earlier_member_covered() {
        let inputs = inputs();
        let out = run_campaign(&inputs, &settings(12, 7, true), &mut NoopObserver);
        let mut seen: BTreeSet<Branch> = BTreeSet::new();
        for entry in &out.suite {
            assert!(
                entry.covered.iter().any(|b| !seen.contains(b)),
                "suite member without a fresh branch"
            );
            seen.extend(entry.covered.iter().copied());
        }
        assert!(!out.suite.is_empty());
    }

    #[test]
    fn adaptive_walk_reaches_a_strict_equality() {
        // the check(x == 0x1122334455) then-branch is a 1-in-2^256 shot for
        // blind generation; the distance walk should land it
        let inputs = inputs();
        let mut cfg = settings(2500, 5, true);
        cfg.generation_cap = 100;
        let target = Word::from(0x1122334455u64);
        struct StopOnHit(Word, bool);
        impl CampaignObserver for StopOnHit {
            fn on_generation(
                &mut self,
                _stats: &GenStats,
                _r: &BranchRegistry,
                suite: &[SuiteEntry],
            ) -> bool {
                self.1 = suite.iter().any(|e| {
                    e.test.calls.iter().any(|c| {
                        c.args.iter().any(
                            |a| matches!(a, crate::abi::codec::TypedValue::Uint(v, _) if *v == self.0),
                        )
                    })
                });
                !self.1
            }
        }
        let mut stop = StopOnHit(target, false);
        run_campaign(&inputs, &cfg, &mut stop);
        assert!(stop.1, "distance-guided walk failed to satisfy the equality");
    }

    #[test]
    fn afl_only_mode_selects_no_adaptive_seeds() {
        let inputs = inputs();
        let out = run_campaign(&inputs, &settings(12, 3, false), &mut NoopObserver);
        for row in &out.stats {
            assert_eq!(row.adaptive_selected, 0);
        }
        assert!(out
            .suite
            .iter()
            .all(|e| e.provenance == Provenance::Afl));
    }

    #[test]
    fn stats_rows_match_generations_and_count_execs() {
        let inputs = inputs();
        let out = run_campaign(&inputs, &settings(9, 11, true), &mut NoopObserver);
        assert_eq!(out.stats.len(), 9);
        assert_eq!(out.stats.last().unwrap().execs, out.executions);
        for w in out.stats.windows(2) {
            assert!(w[1].execs >= w[0].execs);
            assert!(w[1].branches_covered >= w[0].branches_covered);
        }
    }

    #[test]
    fn observer_can_stop_the_campaign() {
        struct StopAfter(u64);
        impl CampaignObserver for StopAfter {
            fn on_generation(
                &mut self,
                stats: &GenStats,
                _r: &BranchRegistry,
                _s: &[SuiteEntry],
            ) -> bool {
                stats.generation + 1 < self.0
            }
        }
        let inputs = inputs();
        let out = run_campaign(&inputs, &settings(100, 1, true), &mut StopAfter(3));
        assert_eq!(out.stats.len(), 3);
    }

    #[test]
    fn crossover_discards_parent_copies_at_cut_zero() {
        let inputs = inputs();
        let ctx = &inputs.ctx;
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let pop = init_population(ctx, &mut rng);
        let (a, b) = (&pop[0], &pop[1]);
        let ca = encode(ctx, a);
        let cb = encode(ctx, b);
        let (x, y) = Chromosome::splice(&ca, &cb, 0);
        assert_eq!(x, cb);
        assert_eq!(y, ca);
        let kept: Vec<Chromosome> = [x, y]
            .into_iter()
            .filter(|c| c != &ca && c != &cb)
            .collect();
        assert!(kept.is_empty());
    }

    #[test]
    fn crossover_cut_enumeration_with_the_decoder_as_oracle() {
        // same-shape parents: every cut keeps the layout parseable
        let inputs = inputs();
        let ctx = &inputs.ctx;
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let pop = init_population(ctx, &mut rng);
        let ca = encode(ctx, &pop[0]);
        let cb = encode(ctx, &pop[1]);
        assert_eq!(ca.bytes.len(), cb.bytes.len());
        for cut in 0..=ca.bit_len() {
            let (x, y) = Chromosome::splice(&ca, &cb, cut);
            assert!(decode(ctx, &x).is_ok());
            assert!(decode(ctx, &y).is_ok());
        }

        // parents whose string lengths differ: cuts splitting a length
        // prefix from its payload shear the layout and must be discarded
        let string_ctx = CampaignContext {
            constructor: FunctionSpec::constructor(vec![], Mutability::NonPayable),
            functions: vec![FunctionSpec::new(
                "g",
                vec![ParamType::String],
                Mutability::Payable,
            )],
            pool: vec![Address::low(0xe1)],
            caller: Address::low(0xa1),
            caller_balance: default_balance(),
            max_calls: 5,
        };
        let mk = |len: usize, fill: u8| {
            let mut t = TestCase {
                config: crate::fuzz::chromosome::NetworkConfig::default_with_pool(
                    &string_ctx.pool,
                ),
                calls: vec![
                    crate::fuzz::chromosome::Call {
                        func_index: None,
                        func: string_ctx.constructor.clone(),
                        args: vec![],
                        value: Word::zero(),
                        caller: string_ctx.caller,
                    },
                    crate::fuzz::chromosome::Call {
                        func_index: Some(0),
                        func: string_ctx.functions[0].clone(),
                        args: vec![crate::abi::codec::TypedValue::Str(vec![fill; len])],
                        value: Word::zero(),
                        caller: string_ctx.caller,
                    },
                ],
            };
            t.calls[1].args[0] = crate::abi::codec::TypedValue::Str(vec![fill; len]);
            encode(&string_ctx, &t)
        };
        let short = mk(3, 0xaa);
        let long = mk(200, 0xbb);
        let (mut valid, mut invalid) = (0usize, 0usize);
        for cut in 0..=short.bit_len().min(long.bit_len()) {
            let (x, y) = Chromosome::splice(&short, &long, cut);
            for c in [x, y] {
                if decode(&string_ctx, &c).is_ok() {
                    valid += 1;
                } else {
                    invalid += 1;
                }
            }
        }
        assert!(valid > 0, "some cuts must stay valid");
        assert!(invalid > 0, "length-splitting cuts must be rejected");
    }
}

#[cfg(test)]
mod diag {
    use super::*;
    use crate::abi::{FunctionSpec, Mutability, ParamType};
    use crate::evm::asm::{assemble, into_init_code};
    use crate::evm::world::{Account, AccountKind};
    use crate::fuzz::chromosome::default_balance;

    #[test]
    #[ignore]
    fn walk_trajectory() {
        let src = "
            push1 0x04 calldatasize lt push @fallback jumpi
            push1 0x00 calldataload
            push29 0x0100000000000000000000000000000000000000000000000000000000
            swap1 div
            push4 0xffffffff and
            dup1 push4 0x60fe47b1 eq push @set jumpi
            dup1 push4 0x5f72f450 eq push @check jumpi
            pop
            :fallback
            stop
            :set
            jumpdest
            push1 0x04 calldataload push1 0x00 sstore
            stop
            :check
            jumpdest
            push1 0x04 calldataload
            push5 0x1122334455
            eq
            iszero push @done jumpi
            push1 0x01 push1 0x01 sstore
            :done
            jumpdest
            stop
        ";
        let init = into_init_code(&[], &assemble(src).unwrap());
        let caller = Address::low(0xa1);
        let pool = vec![Address::low(0xe1)];
        let mut world = World::default();
        world.accounts.insert(caller, Account::attacker(AccountKind::AttackerNormal, default_balance()));
        for p in &pool { world.accounts.insert(*p, Account::external(default_balance())); }
        let inputs = CampaignInputs {
            ctx: CampaignContext {
                constructor: FunctionSpec::constructor(vec![], Mutability::NonPayable),
                functions: vec![
                    FunctionSpec::new("set", vec![ParamType::Uint(256)], Mutability::NonPayable),
                    FunctionSpec::new("check", vec![ParamType::Uint(256)], Mutability::NonPayable),
                ],
                pool, caller, caller_balance: default_balance(), max_calls: 5,
            },
            world_template: world,
            contract_address: Address::low(0xf0),
            init_code: init,
            gas_schedule: GasSchedule::default(),
        };
        struct Traj;
        impl CampaignObserver for Traj {
            fn on_generation(&mut self, stats: &GenStats, reg: &BranchRegistry, _s: &[SuiteEntry]) -> bool {
                if stats.generation % 20 == 0 {
                    let bests: Vec<String> = reg.just_missed().iter()
                        .filter_map(|b| reg.best(b).map(|(d, id)| format!("{}->{}: d={} (seed {})", b.source_pc, b.dest_pc, d, id)))
                        .collect();
                    eprintln!("gen {:4} execs {:6} known {} covered {} jm {} | {}",
                        stats.generation, stats.execs, stats.branches_known,
                        stats.branches_covered, stats.just_missed, bests.join("  "));
                }
                true
            }
        }
        let settings = CampaignSettings {
            budget: Duration::from_secs(3600),
            max_generations: Some(400),
            rng_seed: 5,
            adaptive: true,
            generation_cap: 60,
            tx_gas: 1_000_000,
        };
        let out = run_campaign(&inputs, &settings, &mut Traj);
        eprintln!("final covered {} / known {}", out.registry.covered_count(), out.registry.known_count());
    }
}
