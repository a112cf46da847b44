//! Shared execution context: memoized machine runs, per-pool program traces,
//! and deduplicated output-prefix indexes over canonical program sweeps.
//!
//! Every cache here is semantically transparent: results are keyed by the
//! complete inputs of the computation they stand for, so warm and cold
//! contexts produce bit-identical answers. The [`Lab`] exists because several
//! predictors re-run the same program pools at the same budgets thousands of
//! times per experiment.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::bits::BitString;
use crate::enumerate::{self, DescriptorKind};
use crate::dsl::PredictorDesc;
use crate::harness::cache::{CacheKey, CacheRecord, DiskCache};
use crate::vm::{self, Program, RunResult, RunStatus};

/// Pools with more instruction slots than this are out of desk range; the
/// time-bounded enumeration predictor never enumerates past it (92 million
/// programs at five slots is the practical ceiling).
pub const SPEED_MAX_SLOTS: u32 = 5;

/// Runs whose step count reaches this threshold are worth persisting in the
/// on-disk cache.
pub const PERSIST_STEPS_THRESHOLD: u64 = 2048;

/// Fuel-exhausted runs at least this long also persist a resumable snapshot,
/// provided the work tape stayed small.
pub const SNAPSHOT_STEPS_THRESHOLD: u64 = 65_536;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RunKey {
    code: BitString,
    input: BitString,
    fuel: u64,
    max_out: u64,
}

/// Everything one fuel-bounded run of one pool program produced.
#[derive(Debug, Clone)]
pub struct ProgramTrace {
    pub result: RunResult,
    /// `profile[i]` = steps when output symbol `i + 1` appeared.
    pub profile: Vec<u64>,
}

/// Traces for every canonical program of at most `n_bits`, in enumeration
/// order, all run on empty input at the same fuel and output cap.
#[derive(Debug)]
pub struct PoolTraces {
    pub n_bits: u32,
    pub fuel: u64,
    pub max_out: u64,
    pub traces: Vec<ProgramTrace>,
}

impl PoolTraces {
    /// Number of programs that emitted at least `probe` symbols within fuel.
    pub fn productive_count(&self, probe: u64) -> u64 {
        self.traces
            .iter()
            .filter(|t| t.profile.len() as u64 >= probe)
            .count() as u64
    }
}

/// One deduplicated output in a sweep index: the capped output string and the
/// enumeration rank of the first program producing exactly that output.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub bits: BitString,
    pub rank: u64,
}

/// Deduplicated outputs of every canonical program with exactly `slots`
/// slots, run on empty input for `budget` steps with output cap `cap`.
/// Entries are sorted lexicographically (prefixes first) so that all outputs
/// extending a given observation form a contiguous range.
#[derive(Debug)]
pub struct SweepIndex {
    pub slots: u32,
    pub budget: u64,
    pub cap: u64,
    pub entries: Vec<SweepEntry>,
}

/// Lexicographic comparison where a proper prefix sorts before its
/// extensions. This is the index sort order, not the length-lex order.
fn prefix_lex_cmp(a: &BitString, b: &BitString) -> std::cmp::Ordering {
    let n = a.len().min(b.len());
    for i in 0..n {
        match a.get(i).cmp(&b.get(i)) {
            std::cmp::Ordering::Equal => {}
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

impl SweepIndex {
    /// Minimal-rank entry whose output is at least `x.len() + 1` symbols and
    /// starts with `x`; returns the rank and the predicted next symbol.
    pub fn first_consistent(&self, x: &BitString) -> Option<(u64, u8)> {
        let lo = self
            .entries
            .partition_point(|e| prefix_lex_cmp(&e.bits, x) == std::cmp::Ordering::Less);
        let hi = lo
            + self.entries[lo..]
                .partition_point(|e| e.bits.starts_with(x) || e.bits == *x);
        let mut best: Option<(u64, u8)> = None;
        for e in &self.entries[lo..hi] {
            if e.bits.len() > x.len() {
                let cand = (e.rank, e.bits.get(x.len()));
                if best.is_none_or(|b| cand.0 < b.0) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

type MetaCandidates = Arc<Vec<(BitString, PredictorDesc)>>;

/// Longest diagonal prefix plus the positions whose inner prediction was
/// defaulted on a budget error.
type DiagPrefix = (BitString, Vec<u64>);

/// The shared execution context. Cheap to create; all methods take `&self`
/// and are safe to call from parallel workers.
pub struct Lab {
    run_memo: Mutex<HashMap<RunKey, RunResult>>,
    pools: Mutex<HashMap<(u32, u64), Arc<PoolTraces>>>,
    sweeps: Mutex<HashMap<(u32, u64, u64), Arc<SweepIndex>>>,
    meta_candidates: Mutex<HashMap<u32, MetaCandidates>>,
    /// Memoized candidate predictions inside the meta-predictor, keyed by
    /// (candidate code, fuel) then observation.
    pred_memo: Mutex<HashMap<(BitString, u64), HashMap<BitString, u8>>>,
    /// Longest diagonal prefix computed per (predictor code, fuel).
    /// Diagonal sequences are prefix-stable, so extensions resume from here.
    diag_memo: Mutex<HashMap<(BitString, u64), DiagPrefix>>,
    disk: Option<DiskCache>,
}

impl Default for Lab {
    fn default() -> Self {
        Self::new()
    }
}

impl Lab {
    pub fn new() -> Self {
        Lab {
            run_memo: Mutex::new(HashMap::new()),
            pools: Mutex::new(HashMap::new()),
            sweeps: Mutex::new(HashMap::new()),
            meta_candidates: Mutex::new(HashMap::new()),
            pred_memo: Mutex::new(HashMap::new()),
            diag_memo: Mutex::new(HashMap::new()),
            disk: None,
        }
    }

    /// A lab whose expensive runs persist into (and warm from) a disk cache.
    pub fn with_disk_cache(cache: DiskCache) -> Self {
        let mut lab = Lab::new();
        lab.disk = Some(cache);
        lab
    }

    pub fn disk_cache(&self) -> Option<&DiskCache> {
        self.disk.as_ref()
    }

    /// Memoized fuel-bounded run.
    pub fn run(&self, program: &Program, input: &BitString, fuel: u64, max_out: u64) -> RunResult {
        let key = RunKey {
            code: program.code().clone(),
            input: input.clone(),
            fuel,
            max_out,
        };
        if let Some(hit) = self.run_memo.lock().unwrap().get(&key) {
            return hit.clone();
        }
        if let Some(disk) = &self.disk {
            let dkey = CacheKey::new(program.code(), input, fuel, max_out);
            if let Ok(Some(record)) = disk.get(&dkey) {
                let result = record.to_run_result();
                self.run_memo.lock().unwrap().insert(key, result.clone());
                return result;
            }
        }
        let result = vm::run(program, input, fuel, max_out);
        if let Some(disk) = &self.disk {
            if result.steps_used >= PERSIST_STEPS_THRESHOLD {
                let dkey = CacheKey::new(program.code(), input, fuel, max_out);
                let snapshot = if result.status == RunStatus::FuelExhausted
                    && result.steps_used >= SNAPSHOT_STEPS_THRESHOLD
                {
                    resumable_snapshot(program, input, fuel, max_out)
                } else {
                    None
                };
                let record = CacheRecord::new(dkey, &result, snapshot);
                let _ = disk.put(&record);
            }
        }
        self.run_memo.lock().unwrap().insert(key, result.clone());
        result
    }

    /// Traces of every canonical program of at most `n_bits` at `fuel` with
    /// at least `min_cap` output symbols of room. Built once per (pool, fuel)
    /// and regrown when a caller needs a larger cap.
    pub fn pool_traces(&self, n_bits: u32, fuel: u64, min_cap: u64) -> Arc<PoolTraces> {
        let key = (n_bits, fuel);
        if let Some(existing) = self.pools.lock().unwrap().get(&key) {
            if existing.max_out >= min_cap {
                return Arc::clone(existing);
            }
        }
        let cap = min_cap.max(520).next_power_of_two();
        let slots = n_bits / 8;
        let programs: Vec<Program> = enumerate::canonical_programs(slots).collect();
        let traces: Vec<ProgramTrace> = programs
            .par_iter()
            .map(|p| {
                let t = vm::run_traced(p, &BitString::new(), fuel, cap, true);
                ProgramTrace {
                    result: t.result,
                    profile: t.profile,
                }
            })
            .collect();
        let built = Arc::new(PoolTraces {
            n_bits,
            fuel,
            max_out: cap,
            traces,
        });
        self.pools
            .lock()
            .unwrap()
            .insert(key, Arc::clone(&built));
        built
    }

    /// The deduplicated sweep index for exactly `slots` slots at `budget`,
    /// with room for observations up to `min_cap` symbols.
    pub fn sweep_index(&self, slots: u32, budget: u64, min_cap: u64) -> Arc<SweepIndex> {
        let cap = min_cap.max(520).min(budget.max(1));
        let key = (slots, budget, cap);
        if let Some(existing) = self.sweeps.lock().unwrap().get(&key) {
            return Arc::clone(existing);
        }
        let built = Arc::new(build_sweep_index(slots, budget, cap));
        self.sweeps
            .lock()
            .unwrap()
            .insert(key, Arc::clone(&built));
        built
    }

    /// Candidate universe of the meta-predictor: every predictor descriptor
    /// strictly shorter than `n` bits containing neither DIAG nor META.
    pub fn meta_candidates(&self, n: u32) -> MetaCandidates {
        if let Some(existing) = self.meta_candidates.lock().unwrap().get(&n) {
            return Arc::clone(existing);
        }
        let mut list = Vec::new();
        for (code, value) in enumerate::descriptor_space(DescriptorKind::Predictor, n - 1) {
            if let enumerate::DescriptorValue::Predictor(p) = value {
                if !p.contains_diag() && !p.contains_meta() {
                    list.push((code, p));
                }
            }
        }
        let built = Arc::new(list);
        self.meta_candidates
            .lock()
            .unwrap()
            .insert(n, Arc::clone(&built));
        built
    }

    pub(crate) fn memo_prediction(
        &self,
        code: &BitString,
        obs: &BitString,
        fuel: u64,
    ) -> Option<u8> {
        self.pred_memo
            .lock()
            .unwrap()
            .get(&(code.clone(), fuel))?
            .get(obs)
            .copied()
    }

    pub(crate) fn store_prediction(&self, code: &BitString, obs: &BitString, fuel: u64, bit: u8) {
        self.pred_memo
            .lock()
            .unwrap()
            .entry((code.clone(), fuel))
            .or_default()
            .insert(obs.clone(), bit);
    }

    /// Longest cached diagonal prefix for a predictor code, with its
    /// defaulted positions.
    pub(crate) fn diag_memo_get(&self, code: &BitString, fuel: u64) -> (BitString, Vec<u64>) {
        self.diag_memo
            .lock()
            .unwrap()
            .get(&(code.clone(), fuel))
            .cloned()
            .unwrap_or_default()
    }

    pub(crate) fn diag_memo_store(
        &self,
        code: &BitString,
        fuel: u64,
        prefix: &BitString,
        defaulted: &[u64],
    ) {
        let mut memo = self.diag_memo.lock().unwrap();
        let entry = memo.entry((code.clone(), fuel)).or_default();
        if prefix.len() > entry.0.len() {
            *entry = (prefix.clone(), defaulted.to_vec());
        }
    }
}

fn resumable_snapshot(
    program: &Program,
    input: &BitString,
    fuel: u64,
    max_out: u64,
) -> Option<String> {
    // Re-derive the final state with the reference stepper; only worth it for
    // small tapes.
    let mut state = vm::VMState::fresh(program, input.clone());
    let (_, final_state) = vm::run_incremental(&state, program, fuel, max_out).ok()?;
    state = final_state;
    if state.tape.len() > 1024 {
        return None;
    }
    serde_json::to_string(&state).ok()
}

fn build_sweep_index(slots: u32, budget: u64, cap: u64) -> SweepIndex {
    let total = enumerate::canonical_count(slots);
    let chunk: u64 = 1 << 14;
    let chunks: Vec<u64> = (0..total.div_ceil(chunk)).collect();
    let maps: Vec<HashMap<BitString, u64>> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(total);
            let mut local: HashMap<BitString, u64> = HashMap::new();
            for rank in lo..hi {
                let p = enumerate::canonical_program(slots, rank);
                let t = vm::run_traced(&p, &BitString::new(), budget, cap, false);
                if !t.result.output.is_empty() {
                    local.entry(t.result.output).or_insert(rank);
                }
            }
            local
        })
        .collect();
    let mut merged: HashMap<BitString, u64> = HashMap::new();
    for map in maps {
        for (bits, rank) in map {
            merged
                .entry(bits)
                .and_modify(|r| *r = (*r).min(rank))
                .or_insert(rank);
        }
    }
    let mut entries: Vec<SweepEntry> = merged
        .into_iter()
        .map(|(bits, rank)| SweepEntry { bits, rank })
        .collect();
    entries.sort_by(|a, b| prefix_lex_cmp(&a.bits, &b.bits));
    SweepIndex {
        slots,
        budget,
        cap,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn run_memo_is_transparent() {
        let lab = Lab::new();
        let p = Program::new(bs("0010000000000000"));
        let a = lab.run(&p, &BitString::new(), 10, 10);
        let b = lab.run(&p, &BitString::new(), 10, 10);
        assert_eq!(a, b);
        assert_eq!(a, vm::run(&p, &BitString::new(), 10, 10));
    }

    #[test]
    fn pool_traces_one_slot() {
        let lab = Lab::new();
        let pool = lab.pool_traces(8, 1000, 64);
        assert_eq!(pool.traces.len(), 39);
        // Exactly OUT0 and OUT1 keep emitting.
        assert_eq!(pool.productive_count(32), 2);
        assert_eq!(pool.traces[0].result.output.prefix(4), bs("0000"));
        assert_eq!(pool.traces[1].result.output.prefix(4), bs("1111"));
    }

    #[test]
    fn sweep_index_one_slot() {
        let idx = build_sweep_index(1, 256, 64);
        // Distinct nonempty outputs of single instructions: 0^64 and 1^64.
        assert_eq!(idx.entries.len(), 2);
        let (rank, bit) = idx.first_consistent(&bs("00")).unwrap();
        assert_eq!((rank, bit), (0, 0));
        let (rank, bit) = idx.first_consistent(&bs("1")).unwrap();
        assert_eq!((rank, bit), (1, 1));
        assert!(idx.first_consistent(&bs("01")).is_none());
        // Empty observation: minimum rank overall.
        let (rank, bit) = idx.first_consistent(&BitString::new()).unwrap();
        assert_eq!((rank, bit), (0, 0));
    }

    #[test]
    fn sweep_index_two_slots_has_alternators() {
        let idx = build_sweep_index(2, 256, 64);
        let (_, bit) = idx.first_consistent(&bs("10")).unwrap();
        assert_eq!(bit, 1); // (10)* continues with 1
        let (_, bit) = idx.first_consistent(&bs("01")).unwrap();
        assert_eq!(bit, 0);
    }

    #[test]
    fn meta_candidates_small() {
        let lab = Lab::new();
        let cands = lab.meta_candidates(4);
        // Descriptors of <= 3 bits: COPYLAST, SPEED, LZ78.
        let names: Vec<String> = cands.iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(names, vec!["001", "110", "111"]);
    }
}
