//! Length-lexicographic enumeration, canonical program enumeration, and the
//! fair dovetailing scheduler.
//!
//! Canonical programs have a whole number of 8-bit slots and zeroed non-`JZ`
//! operands, giving 39 distinct values per slot (7 zero-operand opcodes plus
//! 32 `JZ` variants). Enumeration order is (slot count, numeric code value),
//! which coincides with the length-lexicographic order of the code strings.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dsl::{self, GeneratorDesc, PredictorDesc};
use crate::vm::{self, Program, RunStatus, VMState};

/// Position in the length-lexicographic order of all bit strings:
/// 0 ↔ λ, 1 ↔ "0", 2 ↔ "1", 3 ↔ "00", ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LexIndex(pub u64);

/// The `i`-th string in length-lexicographic order: write `i + 1` in binary
/// and drop the leading 1.
pub fn lex_string(i: LexIndex) -> BitString {
    let v = i.0 + 1;
    let bits = 64 - v.leading_zeros() as u64;
    let mut out = BitString::with_capacity(bits as usize - 1);
    for b in (0..bits - 1).rev() {
        out.push((v >> b) & 1 == 1);
    }
    out
}

/// Inverse of [`lex_string`].
pub fn lex_index(s: &BitString) -> LexIndex {
    let mut v: u64 = 1;
    for b in s.iter() {
        v = (v << 1) | b as u64;
    }
    LexIndex(v - 1)
}

/// The 39 canonical slot byte values in ascending numeric order.
pub fn canonical_slot_values() -> &'static [u8; 39] {
    const VALUES: [u8; 39] = {
        let mut v = [0u8; 39];
        v[0] = 0x00; // OUT0
        v[1] = 0x20; // OUT1
        v[2] = 0x40; // LEFT
        v[3] = 0x60; // RIGHT
        v[4] = 0x80; // FLIP
        let mut i = 0;
        while i < 32 {
            v[5 + i] = 0xa0 + i as u8; // JZ 0..31
            i += 1;
        }
        v[37] = 0xc0; // READ
        v[38] = 0xe0; // HALT
        v
    };
    &VALUES
}

/// Number of canonical programs with exactly `slots` instruction slots.
pub fn canonical_count(slots: u32) -> u64 {
    39u64.pow(slots)
}

/// The `rank`-th canonical program with exactly `slots` slots, in numeric
/// order of the code value (rank is a base-39 numeral, most significant slot
/// first).
pub fn canonical_program(slots: u32, rank: u64) -> Program {
    debug_assert!(rank < canonical_count(slots));
    let values = canonical_slot_values();
    let mut digits = vec![0usize; slots as usize];
    let mut r = rank;
    for d in (0..slots as usize).rev() {
        digits[d] = (r % 39) as usize;
        r /= 39;
    }
    let mut bytes = Vec::with_capacity(slots as usize);
    for d in digits {
        bytes.push(values[d]);
    }
    program_from_bytes(&bytes)
}

pub fn program_from_bytes(bytes: &[u8]) -> Program {
    let mut code = BitString::with_capacity(bytes.len() * 8);
    for &byte in bytes {
        for i in (0..8).rev() {
            code.push((byte >> i) & 1 == 1);
        }
    }
    Program::new(code)
}

/// Global canonical-enumeration rank of a canonical program: programs with
/// fewer slots come first, then numeric order. Used for deterministic
/// tie-breaking everywhere.
pub fn canonical_rank(p: &Program) -> Option<u64> {
    if !p.is_canonical() {
        return None;
    }
    let slots = p.instr_count() as u32;
    let values = canonical_slot_values();
    let mut rank: u64 = 0;
    for i in 0..slots as usize {
        let byte = p.instruction(i).ok()?.canonical_byte();
        let digit = values.iter().position(|&v| v == byte)? as u64;
        rank = rank * 39 + digit;
    }
    let mut base = 0u64;
    for k in 1..slots {
        base += canonical_count(k);
    }
    Some(base + rank)
}

/// Inverse of [`canonical_rank`]: the program at a global enumeration rank.
pub fn canonical_program_by_global_rank(rank: u64) -> Program {
    let mut slots = 1u32;
    let mut remaining = rank;
    loop {
        let count = canonical_count(slots);
        if remaining < count {
            return canonical_program(slots, remaining);
        }
        remaining -= count;
        slots += 1;
    }
}

/// Every canonical program with 1..=`max_instr` slots, in enumeration order.
pub fn canonical_programs(max_instr: u32) -> impl Iterator<Item = Program> {
    (1..=max_instr).flat_map(|slots| {
        (0..canonical_count(slots)).map(move |rank| canonical_program(slots, rank))
    })
}

/// One scheduler entry: a program, its resumable snapshot, and bookkeeping.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub program: Program,
    pub state: VMState,
    pub live: bool,
    pub total_steps: u64,
}

/// Fair round-robin dovetailing over a fixed set of programs. Entry order is
/// enumeration order and never changes; every live entry receives exactly
/// `quantum` steps per round.
#[derive(Debug, Clone)]
pub struct DovetailPool {
    pub entries: Vec<PoolEntry>,
    pub quantum: u64,
    pub round: u64,
    pub max_out: u64,
}

/// What one entry did during a round, reported in entry order.
#[derive(Debug, Clone)]
pub struct DovetailEvent {
    pub entry: usize,
    pub new_bits: BitString,
    pub terminal: Option<RunStatus>,
}

impl DovetailPool {
    pub fn new(programs: Vec<Program>, quantum: u64, max_out: u64) -> Self {
        let entries = programs
            .into_iter()
            .map(|program| {
                let state = VMState::fresh(&program, BitString::new());
                let live = state.terminal.is_none();
                PoolEntry {
                    program,
                    state,
                    live,
                    total_steps: 0,
                }
            })
            .collect();
        DovetailPool {
            entries,
            quantum,
            round: 0,
            max_out,
        }
    }

    /// Advances every live entry by exactly one quantum. Events follow entry
    /// order, never completion order.
    pub fn dovetail_round(&mut self) -> Vec<DovetailEvent> {
        let mut events = Vec::new();
        for (i, entry) in self.entries.iter_mut().enumerate() {
            if !entry.live {
                continue;
            }
            let before = entry.state.output.len();
            let (result, next) =
                vm::run_incremental(&entry.state, &entry.program, self.quantum, self.max_out)
                    .expect("pool snapshots always match their programs");
            let consumed = next.steps - entry.state.steps;
            entry.total_steps += consumed;
            entry.state = next;
            let mut terminal = None;
            if result.status != RunStatus::FuelExhausted {
                // Halted, input-exhausted, or stuck at the output cap: no
                // further progress is possible.
                entry.live = false;
                terminal = Some(result.status);
            } else {
                // A live entry consumed its whole quantum.
                debug_assert_eq!(consumed, self.quantum);
            }
            let new_bits = entry.state.output.slice(before, entry.state.output.len());
            if !new_bits.is_empty() || terminal.is_some() {
                events.push(DovetailEvent {
                    entry: i,
                    new_bits,
                    terminal,
                });
            }
        }
        self.round += 1;
        events
    }

    pub fn live_count(&self) -> usize {
        self.entries.iter().filter(|e| e.live).count()
    }
}

/// Which descriptor language a space enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DescriptorKind {
    Generator,
    Predictor,
}

/// Decodes every bit string of length 1..=`max_bits` in (length, numeric)
/// order and yields the ones that parse as a descriptor consuming the whole
/// string. Each descriptor appears exactly once because the codes are
/// prefix-free.
pub fn descriptor_space(
    kind: DescriptorKind,
    max_bits: u32,
) -> impl Iterator<Item = (BitString, DescriptorValue)> {
    (1..=max_bits).flat_map(move |len| {
        (0u64..(1u64 << len)).filter_map(move |value| {
            let mut code = BitString::with_capacity(len as usize);
            for b in (0..len).rev() {
                code.push((value >> b) & 1 == 1);
            }
            let parsed = match kind {
                DescriptorKind::Generator => dsl::parse_gen(&code)
                    .ok()
                    .filter(|(_, rest)| rest.is_empty())
                    .map(|(g, _)| DescriptorValue::Generator(g)),
                DescriptorKind::Predictor => dsl::parse_pred(&code)
                    .ok()
                    .filter(|(_, rest)| rest.is_empty())
                    .map(|(p, _)| DescriptorValue::Predictor(p)),
            };
            parsed.map(|d| (code, d))
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescriptorValue {
    Generator(GeneratorDesc),
    Predictor(PredictorDesc),
}
