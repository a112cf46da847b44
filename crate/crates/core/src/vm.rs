//! The reference machine: a fixed-width toy monotone machine.
//!
//! Instructions are 8 bits: a 3-bit opcode followed by a 5-bit operand that
//! only `JZ` interprets. The machine has one unidirectional input tape (read
//! via `READ`), one append-only output tape (`OUT0`/`OUT1`), and a single
//! bidirectional binary work tape initially filled with zeros. The
//! instruction pointer wraps around the end of the program, which is the
//! loop mechanism; `JZ d` jumps backward by `d + 1` instructions (mod the
//! program length) when the work-tape cell under the head is zero.
//!
//! Execution is total by construction: every run carries a fuel budget (one
//! unit per executed instruction) and an output cap, and every outcome is a
//! [`RunStatus`], never a hang.
//!
//! [`step`] is the reference semantics, one instruction at a time over a
//! plain-value [`VMState`]. [`run`] is an accelerated evaluator (cycle
//! detection on the all-zero work tape, stationary-loop detection after the
//! first write) that is bit-identical to iterating [`step`]; the test suite
//! enforces the equivalence exhaustively for short programs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Instruction width in bits.
pub const INSTR_BITS: usize = 8;
/// Distinct canonical slot values: 7 zero-operand opcodes plus 32 `JZ` forms.
pub const CANONICAL_SLOT_VALUES: usize = 39;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opcode {
    Out0 = 0,
    Out1 = 1,
    Left = 2,
    Right = 3,
    Flip = 4,
    Jz = 5,
    Read = 6,
    Halt = 7,
}

impl Opcode {
    pub fn from_bits(v: u8) -> Opcode {
        match v & 7 {
            0 => Opcode::Out0,
            1 => Opcode::Out1,
            2 => Opcode::Left,
            3 => Opcode::Right,
            4 => Opcode::Flip,
            5 => Opcode::Jz,
            6 => Opcode::Read,
            _ => Opcode::Halt,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Out0 => "OUT0",
            Opcode::Out1 => "OUT1",
            Opcode::Left => "LEFT",
            Opcode::Right => "RIGHT",
            Opcode::Flip => "FLIP",
            Opcode::Jz => "JZ",
            Opcode::Read => "READ",
            Opcode::Halt => "HALT",
        }
    }
}

/// A decoded instruction. The operand is meaningful for `JZ` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub opcode: Opcode,
    pub operand: u8,
}

impl Instruction {
    /// The canonical byte value: non-`JZ` operands are zero.
    pub fn canonical_byte(self) -> u8 {
        let op = (self.opcode as u8) << 5;
        if self.opcode == Opcode::Jz {
            op | (self.operand & 0x1f)
        } else {
            op
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.opcode == Opcode::Jz {
            write!(f, "{} {}", self.opcode.name(), self.operand)
        } else {
            write!(f, "{} 0", self.opcode.name())
        }
    }
}

/// A machine program: a bit string interpreted in 8-bit instruction slots.
/// Trailing bits beyond the last full slot are inert.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Program {
    code: BitString,
}

impl Program {
    pub fn new(code: BitString) -> Self {
        Self { code }
    }

    pub fn empty() -> Self {
        Self {
            code: BitString::new(),
        }
    }

    pub fn from_instructions(instrs: &[Instruction]) -> Self {
        let mut code = BitString::with_capacity(instrs.len() * INSTR_BITS);
        for ins in instrs {
            let byte = ins.canonical_byte();
            for i in (0..8).rev() {
                code.push((byte >> i) & 1 == 1);
            }
        }
        Self { code }
    }

    pub fn code(&self) -> &BitString {
        &self.code
    }

    /// Program length in bits, including any inert trailing bits.
    pub fn bit_len(&self) -> usize {
        self.code.len()
    }

    /// Number of full instruction slots.
    pub fn instr_count(&self) -> usize {
        self.code.len() / INSTR_BITS
    }

    pub fn is_empty(&self) -> bool {
        self.instr_count() == 0
    }

    /// Decodes the instruction in slot `i`.
    pub fn instruction(&self, i: usize) -> Result<Instruction> {
        if i >= self.instr_count() {
            return Err(Error::InvalidArgument(format!(
                "instruction index {i} out of range (program has {} slots)",
                self.instr_count()
            )));
        }
        let mut byte = 0u8;
        for b in 0..8 {
            byte = (byte << 1) | self.code.get(i * INSTR_BITS + b);
        }
        Ok(Instruction {
            opcode: Opcode::from_bits(byte >> 5),
            operand: byte & 0x1f,
        })
    }

    pub fn instructions(&self) -> Result<Vec<Instruction>> {
        (0..self.instr_count()).map(|i| self.instruction(i)).collect()
    }

    /// True iff the length is a whole number of slots and every non-`JZ`
    /// operand is zero.
    pub fn is_canonical(&self) -> bool {
        if !self.code.len().is_multiple_of(INSTR_BITS) {
            return false;
        }
        (0..self.instr_count()).all(|i| {
            let ins = self.instruction(i).expect("in range");
            ins.canonical_byte()
                == (0..8).fold(0u8, |acc, b| (acc << 1) | self.code.get(i * INSTR_BITS + b))
        })
    }

    /// The canonical equivalent: inert trailing bits dropped, non-`JZ`
    /// operands zeroed. Behavior on every input is unchanged.
    pub fn canonicalize(&self) -> Program {
        let instrs: Vec<Instruction> = (0..self.instr_count())
            .map(|i| self.instruction(i).expect("in range"))
            .collect();
        Program::from_instructions(&instrs)
    }

    /// One instruction per line: `IDX OPCODE OPERAND`.
    pub fn disassemble(&self) -> String {
        let mut out = String::new();
        for i in 0..self.instr_count() {
            let ins = self.instruction(i).expect("in range");
            out.push_str(&format!("{i} {ins}\n"));
        }
        out
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RunStatus {
    /// A `HALT` instruction executed.
    Halted,
    /// The step budget ran out.
    FuelExhausted,
    /// The output cap was reached.
    OutputLimitReached,
    /// `READ` executed with no input left.
    InputExhausted,
    /// The program has no full instruction slot.
    EmptyProgram,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RunStatus::Halted => "halted",
            RunStatus::FuelExhausted => "fuel-exhausted",
            RunStatus::OutputLimitReached => "output-limit",
            RunStatus::InputExhausted => "input-exhausted",
            RunStatus::EmptyProgram => "empty-program",
        };
        write!(f, "{s}")
    }
}

impl RunStatus {
    pub fn parse(s: &str) -> Result<RunStatus> {
        Ok(match s {
            "halted" => RunStatus::Halted,
            "fuel-exhausted" => RunStatus::FuelExhausted,
            "output-limit" => RunStatus::OutputLimitReached,
            "input-exhausted" => RunStatus::InputExhausted,
            "empty-program" => RunStatus::EmptyProgram,
            other => return Err(Error::Decode(format!("unknown run status {other:?}"))),
        })
    }

    /// Statuses that no amount of extra fuel or output budget can change.
    pub fn is_absorbing(self) -> bool {
        matches!(
            self,
            RunStatus::Halted | RunStatus::InputExhausted | RunStatus::EmptyProgram
        )
    }
}

/// Outcome of a fuel-bounded run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub status: RunStatus,
    pub output: BitString,
    pub steps_used: u64,
}

/// Step counts at which each output symbol appeared: `per_symbol_steps[i]` is
/// the number of executed instructions when symbol `i + 1` was written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeProfile {
    pub per_symbol_steps: Vec<u64>,
}

impl TimeProfile {
    pub fn len(&self) -> usize {
        self.per_symbol_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_symbol_steps.is_empty()
    }

    /// True iff `t(k) < 2^k` for every recorded `k > from`.
    pub fn below_power_curve(&self, from: usize) -> bool {
        self.per_symbol_steps.iter().enumerate().all(|(i, &t)| {
            let k = i as u32 + 1;
            k as usize <= from || (k < 63 && t < 1u64 << k) || k >= 63
        })
    }
}

/// A machine configuration between steps. Plain value, cheap to snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VMState {
    pub instr_index: usize,
    /// Sparse work tape; absent cells are zero.
    pub tape: BTreeMap<i64, u8>,
    pub head: i64,
    pub input: BitString,
    pub cursor: usize,
    pub output: BitString,
    pub steps: u64,
    pub terminal: Option<RunStatus>,
    /// Fingerprint of the program this state belongs to, for mismatch checks.
    pub program_fp: u64,
}

pub(crate) fn program_fingerprint(p: &Program) -> u64 {
    // FNV-1a over the packed code plus the bit length.
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in p.code().packed_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^= p.code().len() as u64;
    h.wrapping_mul(0x100000001b3)
}

impl VMState {
    pub fn fresh(program: &Program, input: BitString) -> Self {
        let terminal = if program.is_empty() {
            Some(RunStatus::EmptyProgram)
        } else {
            None
        };
        VMState {
            instr_index: 0,
            tape: BTreeMap::new(),
            head: 0,
            input,
            cursor: 0,
            output: BitString::new(),
            steps: 0,
            terminal,
            program_fp: program_fingerprint(program),
        }
    }

    fn tape_get(&self, i: i64) -> u8 {
        self.tape.get(&i).copied().unwrap_or(0)
    }

    fn tape_set(&mut self, i: i64, v: u8) {
        if v == 0 {
            self.tape.remove(&i);
        } else {
            self.tape.insert(i, v);
        }
    }
}

/// Result of one [`step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Running,
    Terminal(RunStatus),
}

/// Executes one instruction. Terminal states are absorbing. This is the
/// reference semantics; [`run`] must agree with it bit for bit.
pub fn step(state: &mut VMState, program: &Program) -> StepOutcome {
    if let Some(status) = state.terminal {
        return StepOutcome::Terminal(status);
    }
    let n = program.instr_count();
    debug_assert!(n > 0, "fresh() marks empty programs terminal");
    let ins = program
        .instruction(state.instr_index)
        .expect("instr_index in range");
    state.steps += 1;
    let mut next = (state.instr_index + 1) % n;
    match ins.opcode {
        Opcode::Out0 => state.output.push(false),
        Opcode::Out1 => state.output.push(true),
        Opcode::Left => state.head -= 1,
        Opcode::Right => state.head += 1,
        Opcode::Flip => {
            let v = state.tape_get(state.head) ^ 1;
            state.tape_set(state.head, v);
        }
        Opcode::Jz => {
            if state.tape_get(state.head) == 0 {
                let back = (ins.operand as usize + 1) % n;
                next = (state.instr_index + n - back) % n;
            }
        }
        Opcode::Read => {
            if state.cursor < state.input.len() {
                let b = state.input.get(state.cursor);
                state.cursor += 1;
                state.tape_set(state.head, b);
            } else {
                state.terminal = Some(RunStatus::InputExhausted);
                return StepOutcome::Terminal(RunStatus::InputExhausted);
            }
        }
        Opcode::Halt => {
            state.terminal = Some(RunStatus::Halted);
            return StepOutcome::Terminal(RunStatus::Halted);
        }
    }
    state.instr_index = next;
    StepOutcome::Running
}

fn result_from_state(state: &VMState, status: RunStatus) -> RunResult {
    RunResult {
        status,
        output: state.output.clone(),
        steps_used: state.steps,
    }
}

/// Reference run loop over [`step`]: iterate until terminal, fuel exhaustion,
/// or the output cap. The output cap is checked before the fuel check.
pub fn run_reference(program: &Program, input: &BitString, fuel: u64, max_out: u64) -> RunResult {
    let mut state = VMState::fresh(program, input.clone());
    let (result, _) = continue_run(&mut state, program, fuel, max_out);
    result
}

fn continue_run(
    state: &mut VMState,
    program: &Program,
    fuel_limit: u64,
    max_out: u64,
) -> (RunResult, bool) {
    if let Some(status) = state.terminal {
        return (result_from_state(state, status), true);
    }
    loop {
        if state.output.len() as u64 >= max_out {
            return (result_from_state(state, RunStatus::OutputLimitReached), false);
        }
        if state.steps >= fuel_limit {
            return (result_from_state(state, RunStatus::FuelExhausted), false);
        }
        if let StepOutcome::Terminal(status) = step(state, program) {
            return (result_from_state(state, status), true);
        }
    }
}

/// Continues a snapshot for `extra_fuel` more steps. Continuing is bit-exact
/// with a single run of summed fuel; terminal snapshots are absorbing.
pub fn run_incremental(
    snapshot: &VMState,
    program: &Program,
    extra_fuel: u64,
    max_out: u64,
) -> Result<(RunResult, VMState)> {
    if snapshot.program_fp != program_fingerprint(program) {
        return Err(Error::InvalidArgument(
            "snapshot does not belong to this program".into(),
        ));
    }
    let mut state = snapshot.clone();
    let limit = snapshot.steps.saturating_add(extra_fuel);
    let (result, _) = continue_run(&mut state, program, limit, max_out);
    Ok((result, state))
}

/// Fuel-bounded execution on `input`. Equivalent to [`run_reference`] but
/// accelerated; see the module docs.
pub fn run(program: &Program, input: &BitString, fuel: u64, max_out: u64) -> RunResult {
    run_traced(program, input, fuel, max_out, false).result
}

/// A run plus the per-symbol step counts of everything it emitted.
pub fn run_with_profile(
    program: &Program,
    input: &BitString,
    fuel: u64,
    max_out: u64,
) -> (RunResult, TimeProfile) {
    let t = run_traced(program, input, fuel, max_out, true);
    (
        t.result,
        TimeProfile {
            per_symbol_steps: t.profile,
        },
    )
}

/// Per-symbol step counts for the first `k` output symbols, shorter when the
/// fuel runs out first. Generators run with empty input.
pub fn time_profile(program: &Program, k: u64, fuel: u64) -> TimeProfile {
    let (_, profile) = run_with_profile(program, &BitString::new(), fuel, k);
    profile
}

#[derive(Debug, Clone)]
pub(crate) struct RunTrace {
    pub result: RunResult,
    pub profile: Vec<u64>,
}

/// Phase-A walk outcome: machine dynamics while the work tape is untouched
/// depend only on the instruction index, so the walk either terminates, hits
/// the first tape-writing instruction, or closes a cycle within one pass over
/// the program.
enum ZeroTapeWalk {
    /// `HALT` at step `t` (1-based), having emitted `emits`.
    Halts { t: u64, emits: Vec<(u64, u8)> },
    /// `READ` executes as step `t`; with empty input this is terminal.
    Reads {
        t: u64,
        emits: Vec<(u64, u8)>,
        head: i64,
        instr: usize,
    },
    /// `FLIP` executes as step `t`: transition to the general stepper.
    Flips {
        t: u64,
        emits: Vec<(u64, u8)>,
        head: i64,
        instr: usize,
    },
    /// Pure cycle: `prefix_steps` steps then a loop of `cycle_steps` steps
    /// emitting `cycle_emits` per pass, forever.
    Cycles {
        prefix_steps: u64,
        prefix_emits: Vec<(u64, u8)>,
        cycle_steps: u64,
        cycle_emits: Vec<(u64, u8)>, // offsets 1..=cycle_steps from cycle start
    },
}

fn zero_tape_walk(instrs: &[Instruction]) -> ZeroTapeWalk {
    let n = instrs.len();
    let mut seen_at: Vec<u64> = vec![u64::MAX; n];
    let mut emits: Vec<(u64, u8)> = Vec::new();
    let mut head: i64 = 0;
    let mut idx = 0usize;
    let mut t: u64 = 0; // steps completed
    loop {
        if seen_at[idx] != u64::MAX {
            let s = seen_at[idx];
            let split = emits.partition_point(|&(st, _)| st <= s);
            let prefix_emits = emits[..split].to_vec();
            let cycle_emits = emits[split..].iter().map(|&(st, b)| (st - s, b)).collect();
            return ZeroTapeWalk::Cycles {
                prefix_steps: s,
                prefix_emits,
                cycle_steps: t - s,
                cycle_emits,
            };
        }
        seen_at[idx] = t;
        let ins = instrs[idx];
        match ins.opcode {
            Opcode::Halt => return ZeroTapeWalk::Halts { t: t + 1, emits },
            Opcode::Read => {
                return ZeroTapeWalk::Reads {
                    t: t + 1,
                    emits,
                    head,
                    instr: idx,
                }
            }
            Opcode::Flip => {
                return ZeroTapeWalk::Flips {
                    t: t + 1,
                    emits,
                    head,
                    instr: idx,
                }
            }
            Opcode::Out0 => {
                t += 1;
                emits.push((t, 0));
                idx = (idx + 1) % n;
            }
            Opcode::Out1 => {
                t += 1;
                emits.push((t, 1));
                idx = (idx + 1) % n;
            }
            Opcode::Left => {
                t += 1;
                head -= 1;
                idx = (idx + 1) % n;
            }
            Opcode::Right => {
                t += 1;
                head += 1;
                idx = (idx + 1) % n;
            }
            Opcode::Jz => {
                t += 1;
                let back = (ins.operand as usize + 1) % n;
                idx = (idx + n - back) % n;
            }
        }
    }
}

/// Step at which the `count`-th emission happens, given a prefix schedule and
/// a repeating cycle schedule. `None` when it never happens.
fn emission_step(
    count: u64,
    prefix_emits: &[(u64, u8)],
    prefix_steps: u64,
    cycle_emits: &[(u64, u8)],
    cycle_steps: u64,
) -> Option<u64> {
    debug_assert!(count >= 1);
    if count <= prefix_emits.len() as u64 {
        return Some(prefix_emits[count as usize - 1].0);
    }
    let e = cycle_emits.len() as u64;
    if e == 0 {
        return None;
    }
    let more = count - prefix_emits.len() as u64;
    let full = (more - 1) / e;
    let within = (more - 1) % e;
    Some(prefix_steps + full * cycle_steps + cycle_emits[within as usize].0)
}

/// Materializes the outcome of a schedule-described run under the standard
/// check order (output cap, then fuel, then terminal step events).
#[allow(clippy::too_many_arguments)]
fn finish_from_schedule(
    fuel: u64,
    max_out: u64,
    prefix_emits: &[(u64, u8)],
    prefix_steps: u64,
    cycle_emits: &[(u64, u8)],
    cycle_steps: u64,
    terminal_at: Option<(u64, RunStatus)>, // step (1-based) and status
    want_profile: bool,
) -> RunTrace {
    let out_at = if max_out == 0 {
        Some(0)
    } else {
        emission_step(max_out, prefix_emits, prefix_steps, cycle_emits, cycle_steps)
    };

    // The earliest applicable stop decides the status. An output-cap stop at
    // step s means the cap check fired at the top of the iteration after s.
    let mut stop_step = fuel;
    let mut status = RunStatus::FuelExhausted;
    if let Some((t, st)) = terminal_at {
        if t <= stop_step {
            stop_step = t;
            status = st;
        }
    }
    if let Some(s) = out_at {
        // Output check precedes the fuel check and step execution, so a cap
        // reached at step s wins over fuel at s and terminals after s.
        if s <= stop_step {
            stop_step = s;
            status = RunStatus::OutputLimitReached;
        }
    }

    // Bits emitted within stop_step steps, capped at max_out.
    let mut bits = BitString::new();
    let mut profile = Vec::new();
    let mut push = |step: u64, bit: u8| {
        if step <= stop_step && (bits.len() as u64) < max_out {
            bits.push_bit(bit);
            if want_profile {
                profile.push(step);
            }
            true
        } else {
            false
        }
    };
    'outer: {
        for &(s, b) in prefix_emits {
            if !push(s, b) {
                break 'outer;
            }
        }
        if !cycle_emits.is_empty() {
            let mut base = prefix_steps;
            loop {
                for &(off, b) in cycle_emits {
                    if !push(base + off, b) {
                        break 'outer;
                    }
                }
                base += cycle_steps;
            }
        }
    }

    RunTrace {
        result: RunResult {
            status,
            output: bits,
            steps_used: stop_step,
        },
        profile,
    }
}

pub(crate) fn run_traced(
    program: &Program,
    input: &BitString,
    fuel: u64,
    max_out: u64,
    want_profile: bool,
) -> RunTrace {
    let n = program.instr_count();
    if n == 0 {
        return RunTrace {
            result: RunResult {
                status: RunStatus::EmptyProgram,
                output: BitString::new(),
                steps_used: 0,
            },
            profile: Vec::new(),
        };
    }
    let instrs = program.instructions().expect("full slots");
    match zero_tape_walk(&instrs) {
        ZeroTapeWalk::Halts { t, emits } => finish_from_schedule(
            fuel,
            max_out,
            &emits,
            t,
            &[],
            0,
            Some((t, RunStatus::Halted)),
            want_profile,
        ),
        ZeroTapeWalk::Cycles {
            prefix_steps,
            prefix_emits,
            cycle_steps,
            cycle_emits,
        } => finish_from_schedule(
            fuel,
            max_out,
            &prefix_emits,
            prefix_steps,
            &cycle_emits,
            cycle_steps,
            None,
            want_profile,
        ),
        ZeroTapeWalk::Reads {
            t,
            emits,
            head,
            instr,
        } => {
            if input.is_empty() {
                finish_from_schedule(
                    fuel,
                    max_out,
                    &emits,
                    t,
                    &[],
                    0,
                    Some((t, RunStatus::InputExhausted)),
                    want_profile,
                )
            } else {
                general_from(
                    &instrs, input, fuel, max_out, t - 1, instr, head, &emits, want_profile,
                )
            }
        }
        ZeroTapeWalk::Flips {
            t,
            emits,
            head,
            instr,
        } => general_from(
            &instrs, input, fuel, max_out, t - 1, instr, head, &emits, want_profile,
        ),
    }
}

/// Growable work tape with O(1) epoch-based reset, reused across runs on the
/// same thread.
struct TapeBuf {
    cells: Vec<u8>,
    stamps: Vec<u32>,
    epoch: u32,
    origin: i64,
}

impl TapeBuf {
    fn new() -> Self {
        let cap = 256;
        TapeBuf {
            cells: vec![0; cap],
            stamps: vec![0; cap],
            epoch: 1,
            origin: cap as i64 / 2,
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.fill(0);
            self.epoch = 1;
        }
    }

    #[inline]
    fn index(&mut self, pos: i64) -> usize {
        let mut i = pos + self.origin;
        while i < 0 || i as usize >= self.cells.len() {
            self.grow();
            i = pos + self.origin;
        }
        i as usize
    }

    fn grow(&mut self) {
        let old = self.cells.len();
        let add = old / 2 + 64;
        let mut cells = vec![0; old + 2 * add];
        let mut stamps = vec![0; old + 2 * add];
        cells[add..add + old].copy_from_slice(&self.cells);
        stamps[add..add + old].copy_from_slice(&self.stamps);
        self.cells = cells;
        self.stamps = stamps;
        self.origin += add as i64;
    }

    #[inline]
    fn get(&mut self, pos: i64) -> u8 {
        let i = self.index(pos);
        if self.stamps[i] == self.epoch {
            self.cells[i]
        } else {
            0
        }
    }

    #[inline]
    fn set(&mut self, pos: i64, v: u8) {
        let i = self.index(pos);
        self.stamps[i] = self.epoch;
        self.cells[i] = v;
    }
}

thread_local! {
    static TAPE_BUF: std::cell::RefCell<TapeBuf> = std::cell::RefCell::new(TapeBuf::new());
}

/// General stepper from a mid-run zero-tape configuration. Detects stationary
/// write-free silent loops (identical instruction index, head, cursor, output
/// length, and write count imply an identical configuration) and fast-forwards
/// them to fuel exhaustion, which is exactly what full simulation would yield.
#[allow(clippy::too_many_arguments)]
fn general_from(
    instrs: &[Instruction],
    input: &BitString,
    fuel: u64,
    max_out: u64,
    steps_done: u64,
    instr_index: usize,
    head0: i64,
    emits: &[(u64, u8)],
    want_profile: bool,
) -> RunTrace {
    let n = instrs.len();

    // The prefix may already decide the run.
    let prefix_trace = finish_from_schedule(
        fuel,
        max_out,
        emits,
        steps_done,
        &[],
        0,
        None,
        want_profile,
    );
    if prefix_trace.result.steps_used < steps_done
        || prefix_trace.result.status == RunStatus::OutputLimitReached
    {
        return prefix_trace;
    }
    if fuel <= steps_done {
        return prefix_trace; // FuelExhausted within the prefix
    }

    TAPE_BUF.with(|buf| {
        let mut tape = buf.borrow_mut();
        tape.reset();

        let mut output = BitString::new();
        let mut profile: Vec<u64> = Vec::new();
        for &(s, b) in emits {
            output.push_bit(b);
            if want_profile {
                profile.push(s);
            }
        }

        let mut steps = steps_done;
        let mut idx = instr_index;
        let mut head = head0;
        let mut cursor = 0usize;
        let mut writes: u64 = 0;

        // Brent-style stationary-loop detection.
        let mut mark = (idx, head, cursor, output.len(), writes);
        let mut next_checkpoint = steps + 1;

        let status = loop {
            if output.len() as u64 >= max_out {
                break RunStatus::OutputLimitReached;
            }
            if steps >= fuel {
                break RunStatus::FuelExhausted;
            }
            let ins = instrs[idx];
            steps += 1;
            let mut next = idx + 1;
            if next == n {
                next = 0;
            }
            match ins.opcode {
                Opcode::Out0 => {
                    output.push(false);
                    if want_profile {
                        profile.push(steps);
                    }
                }
                Opcode::Out1 => {
                    output.push(true);
                    if want_profile {
                        profile.push(steps);
                    }
                }
                Opcode::Left => head -= 1,
                Opcode::Right => head += 1,
                Opcode::Flip => {
                    let v = tape.get(head) ^ 1;
                    tape.set(head, v);
                    writes += 1;
                }
                Opcode::Jz => {
                    if tape.get(head) == 0 {
                        let back = (ins.operand as usize + 1) % n;
                        next = (idx + n - back) % n;
                    }
                }
                Opcode::Read => {
                    if cursor < input.len() {
                        let b = input.get(cursor);
                        cursor += 1;
                        tape.set(head, b);
                        writes += 1;
                    } else {
                        break RunStatus::InputExhausted;
                    }
                }
                Opcode::Halt => break RunStatus::Halted,
            }
            idx = next;

            let fp = (idx, head, cursor, output.len(), writes);
            if fp == mark {
                // Identical configuration with no intervening writes or
                // output: the machine loops silently forever.
                break RunStatus::FuelExhausted;
            }
            if steps == next_checkpoint {
                mark = fp;
                next_checkpoint = steps + (steps - steps_done).max(1);
            }
        };

        let steps_used = if status == RunStatus::FuelExhausted {
            fuel
        } else {
            steps
        };
        RunTrace {
            result: RunResult {
                status,
                output,
                steps_used,
            },
            profile,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prog(bits: &str) -> Program {
        Program::new(bits.parse().unwrap())
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn decode_fixed_instructions() {
        let p = prog("00100000");
        assert_eq!(
            p.instruction(0).unwrap(),
            Instruction {
                opcode: Opcode::Out1,
                operand: 0
            }
        );
        let p = prog("10100011");
        assert_eq!(
            p.instruction(0).unwrap(),
            Instruction {
                opcode: Opcode::Jz,
                operand: 3
            }
        );
        let p = prog("11100000");
        assert_eq!(p.instruction(0).unwrap().opcode, Opcode::Halt);
        assert!(p.instruction(1).is_err());
    }

    #[test]
    fn out1_wrap_emits_ones() {
        let p = prog("00100000");
        let r = run(&p, &BitString::new(), 100, 5);
        assert_eq!(r.status, RunStatus::OutputLimitReached);
        assert_eq!(r.output, bs("11111"));
        assert_eq!(r.steps_used, 5);
    }

    #[test]
    fn jz_zero_self_loops_silently() {
        let p = prog("10100000"); // JZ 0 on a zero tape jumps to itself
        let r = run(&p, &BitString::new(), 500, 10);
        assert_eq!(r.status, RunStatus::FuelExhausted);
        assert_eq!(r.steps_used, 500);
        assert!(r.output.is_empty());
    }

    #[test]
    fn read_on_empty_input_terminates() {
        let p = prog("11000000");
        let r = run(&p, &BitString::new(), 100, 10);
        assert_eq!(r.status, RunStatus::InputExhausted);
        assert_eq!(r.steps_used, 1);
    }

    #[test]
    fn out1_out0_alternates() {
        let p = prog("0010000000000000"); // OUT1, OUT0
        let r = run(&p, &BitString::new(), 6, 6);
        assert_eq!(r.output, bs("101010"));
        assert_eq!(r.status, RunStatus::OutputLimitReached);
    }

    #[test]
    fn out1_halt_example() {
        let p = prog("0010000011100000");
        let r = run(&p, &BitString::new(), 100, 100);
        assert_eq!(r.status, RunStatus::Halted);
        assert_eq!(r.output, bs("1"));
        assert_eq!(r.steps_used, 2);
    }

    #[test]
    fn empty_program_convention() {
        let r = run(&Program::empty(), &BitString::new(), 100, 100);
        assert_eq!(r.status, RunStatus::EmptyProgram);
        assert!(r.output.is_empty());
        assert_eq!(r.steps_used, 0);
    }

    #[test]
    fn profiles_match_spec_examples() {
        // OUT1, OUT0 wrap: one symbol per step.
        let p = prog("0010000000000000");
        let tp = time_profile(&p, 6, 1000);
        assert_eq!(tp.per_symbol_steps, vec![1, 2, 3, 4, 5, 6]);
        // OUT1, RIGHT wrap: t(n) = 2n - 1.
        let p = prog("0010000001100000");
        let tp = time_profile(&p, 4, 1000);
        assert_eq!(tp.per_symbol_steps, vec![1, 3, 5, 7]);
    }

    #[test]
    fn incremental_matches_single_run() {
        let p = prog("0010000000000000");
        let mut state = VMState::fresh(&p, BitString::new());
        let (r1, s1) = run_incremental(&state, &p, 3, 100).unwrap();
        assert_eq!(r1.output, bs("101"));
        state = s1;
        let (r2, _) = run_incremental(&state, &p, 3, 100).unwrap();
        let full = run(&p, &BitString::new(), 6, 100);
        assert_eq!(r2.output, full.output);
        assert_eq!(r2.steps_used, full.steps_used);
        assert_eq!(r2.status, full.status);
    }

    #[test]
    fn incremental_rejects_wrong_program() {
        let p = prog("0010000000000000");
        let q = prog("00100000");
        let state = VMState::fresh(&p, BitString::new());
        assert!(run_incremental(&state, &q, 10, 10).is_err());
    }

    #[test]
    fn terminal_snapshots_absorb() {
        let p = prog("11100000");
        let state = VMState::fresh(&p, BitString::new());
        let (r1, s1) = run_incremental(&state, &p, 10, 10).unwrap();
        assert_eq!(r1.status, RunStatus::Halted);
        let (r2, _) = run_incremental(&s1, &p, 50, 50).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn canonicalization_is_sound_for_short_programs() {
        // Zeroing inert operand bits must not change behavior; exhaustive for
        // one instruction slot over all 256 raw bytes, on two inputs.
        for byte in 0u8..=255 {
            let mut code = BitString::new();
            for i in (0..8).rev() {
                code.push((byte >> i) & 1 == 1);
            }
            let p = Program::new(code);
            let c = p.canonicalize();
            for input in [BitString::new(), bs("101")] {
                let rp = run(&p, &input, 64, 16);
                let rc = run(&c, &input, 64, 16);
                assert_eq!(rp, rc, "byte {byte:#04x}");
            }
        }
    }

    #[test]
    fn effective_length_ignores_trailing_bits() {
        let p = prog("00100000110"); // OUT1 plus three inert bits
        let q = prog("00100000");
        let rp = run(&p, &BitString::new(), 16, 4);
        let rq = run(&q, &BitString::new(), 16, 4);
        assert_eq!(rp, rq);
    }

    /// The accelerated evaluator must be bit-identical to the reference
    /// stepper. Exhaustive over all canonical two-slot programs at several
    /// budgets and inputs.
    #[test]
    fn fast_engine_matches_reference_two_slot_exhaustive() {
        let slots = crate::enumerate::canonical_slot_values();
        let inputs = [BitString::new(), bs("1"), bs("0110")];
        for &a in slots {
            for &b in slots {
                let p = Program::from_instructions(&[
                    decode_slot(a),
                    decode_slot(b),
                ]);
                for input in &inputs {
                    for (fuel, max_out) in [(0, 4), (1, 4), (7, 3), (64, 8), (300, 64)] {
                        let fast = run(&p, input, fuel, max_out);
                        let slow = run_reference(&p, input, fuel, max_out);
                        assert_eq!(fast, slow, "program {p} input {input} fuel {fuel}");
                    }
                }
            }
        }
    }

    fn decode_slot(byte: u8) -> Instruction {
        Instruction {
            opcode: Opcode::from_bits(byte >> 5),
            operand: byte & 0x1f,
        }
    }

    #[test]
    fn fast_engine_matches_reference_sampled_long() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let slots = crate::enumerate::canonical_slot_values();
        for _ in 0..4000 {
            let k = rng.gen_range(3..=5);
            let instrs: Vec<Instruction> = (0..k)
                .map(|_| decode_slot(slots[rng.gen_range(0..slots.len())]))
                .collect();
            let p = Program::from_instructions(&instrs);
            let input = if rng.gen_bool(0.3) { bs("1101") } else { BitString::new() };
            let fuel = rng.gen_range(0..400);
            let max_out = rng.gen_range(0..40);
            let fast = run(&p, &input, fuel, max_out);
            let slow = run_reference(&p, &input, fuel, max_out);
            assert_eq!(fast, slow, "program {p} fuel {fuel} max_out {max_out}");
        }
    }

    #[test]
    fn disassembly_format() {
        let p = prog("0010000010100011");
        assert_eq!(p.disassemble(), "0 OUT1 0\n1 JZ 3\n");
    }
}
