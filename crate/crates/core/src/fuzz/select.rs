//! Seed selection: new-branch finders survive, and every just-missed branch
//! keeps exactly one seed, the closest one seen so far.

use std::collections::BTreeMap;

use crate::coverage::{Branch, BranchRegistry, DistanceReport};
use crate::fuzz::chromosome::{Chromosome, TestCase};

/// How a test case earned its place in the next generation's seed pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionReason {
    /// Covered a branch new to the suite.
    NewBranch,
    /// Minimum distance to this just-missed branch.
    MinDistance(Branch),
}

/// One executed test case of the current generation, with its feedback.
#[derive(Clone, Debug)]
pub struct ExecutedSeed {
    pub id: u64,
    pub test: TestCase,
    pub chromo: Chromosome,
    pub newly_covered: Vec<Branch>,
    pub report: DistanceReport,
}

#[derive(Clone, Debug)]
pub struct SelectedSeed {
    pub id: u64,
    pub test: TestCase,
    pub chromo: Chromosome,
    pub reason: SelectionReason,
}

/// Seeds feeding crossover and mutation: the AFL picks plus at most one
/// adaptive pick per just-missed branch.
#[derive(Clone, Debug, Default)]
pub struct SeedPool {
    pub afl: Vec<SelectedSeed>,
    pub adaptive: Vec<SelectedSeed>,
}

impl SeedPool {
    pub fn len(&self) -> usize {
        self.afl.len() + self.adaptive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &SelectedSeed> {
        self.afl.iter().chain(self.adaptive.iter())
    }
}

/// Historical seeds still referenced as best-for-some-branch.
#[derive(Clone, Debug, Default)]
pub struct SeedBank {
    entries: BTreeMap<u64, (TestCase, Chromosome)>,
}

impl SeedBank {
    pub fn insert(&mut self, id: u64, test: TestCase, chromo: Chromosome) {
        self.entries.insert(id, (test, chromo));
    }

    pub fn get(&self, id: u64) -> Option<&(TestCase, Chromosome)> {
        self.entries.get(&id)
    }

    /// Drops entries no longer referenced by the registry's best map.
    pub fn retain_referenced(&mut self, registry: &BranchRegistry) {
        let referenced: std::collections::BTreeSet<u64> = registry
            .just_missed()
            .iter()
            .filter_map(|b| registry.best(b).map(|(_, id)| id))
            .collect();
        self.entries.retain(|id, _| referenced.contains(id));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Selects the surviving seeds: every executed seed that covered a new
/// branch, plus — per just-missed branch — the seed with the campaign-best
/// distance (ties resolved to the earliest-executed seed by the registry's
/// strict-improvement rule). With `adaptive` off only the first criterion
/// applies.
pub fn fit_to_survive(
    executed: &[ExecutedSeed],
    registry: &mut BranchRegistry,
    bank: &SeedBank,
    adaptive: bool,
) -> SeedPool {
    let mut pool = SeedPool::default();
    for seed in executed {
        for (branch, d) in seed.report.iter() {
            registry.offer_best(*branch, *d, seed.id);
        }
        if !seed.newly_covered.is_empty() {
            pool.afl.push(SelectedSeed {
                id: seed.id,
                test: seed.test.clone(),
                chromo: seed.chromo.clone(),
                reason: SelectionReason::NewBranch,
            });
        }
    }
    if !adaptive {
        return pool;
    }
    for branch in registry.just_missed() {
        let Some((_, seed_id)) = registry.best(&branch) else {
            continue;
        };
        // the current generation first, then the bank
        let found = executed
            .iter()
            .find(|s| s.id == seed_id)
            .map(|s| (s.test.clone(), s.chromo.clone()))
            .or_else(|| bank.get(seed_id).cloned());
        if let Some((test, chromo)) = found {
            pool.adaptive.push(SelectedSeed {
                id: seed_id,
                test,
                chromo,
                reason: SelectionReason::MinDistance(branch),
            });
        }
    }
    pool
}
