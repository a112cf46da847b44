//! Prediction semantics for every predictor descriptor and the empirical
//! learning verdicts (error positions, convergence step, horizon-relative
//! membership).
//!
//! All predictions are total: every variant returns a bit for every
//! observation, with documented defaults where the underlying procedure has
//! nothing better (a machine predictor that emits nothing in time predicts 0;
//! the consistent-set predictor gives up with 0; the enumeration predictor
//! answers 1 when no generated string qualifies). The single exception is the
//! consistent-set predictor's budget error, raised when fewer programs are
//! fuel-productive than its built-in count demands — that is an error, not a
//! prediction.

use serde::{Deserialize, Serialize};

use crate::bits::{encode_predictor_input, BitString};
use crate::dsl::{self, GeneratorDesc, PredictorDesc};
use crate::error::{Error, Result};
use crate::exec::{Lab, SPEED_MAX_SLOTS};
use crate::{enumerate, vm};

/// Predicts the next symbol after observation `x` under the given step
/// budget. Depends only on its arguments.
pub fn predict(lab: &Lab, p: &PredictorDesc, x: &BitString, fuel: u64) -> Result<u8> {
    match p {
        PredictorDesc::Const(b) => Ok(*b),
        PredictorDesc::CopyLast => Ok(if x.is_empty() { 0 } else { x.get(x.len() - 1) }),
        PredictorDesc::Replay(g) => Ok(replay_predict(lab, g, x, fuel)),
        PredictorDesc::VmPred(q) => {
            let r = lab.run(q, &encode_predictor_input(x), fuel, 1);
            Ok(if r.output.is_empty() { 0 } else { r.output.get(0) })
        }
        PredictorDesc::Consist { n, h } => consist_predict(lab, *n, *h, x, fuel),
        PredictorDesc::Meta { n, fuel: f } => Ok(meta_predict(lab, *n, *f, x)),
        PredictorDesc::Speed => Ok(speed_predict(lab, x, fuel)),
        PredictorDesc::Lz78 => Ok(lz78_predict(x)),
    }
}

/// [`predict`] with budget errors defaulted to 0, the totalization DIAG uses.
pub fn predict_or_default(lab: &Lab, p: &PredictorDesc, x: &BitString, fuel: u64) -> u8 {
    predict(lab, p, x, fuel).unwrap_or(0)
}

fn replay_predict(lab: &Lab, g: &GeneratorDesc, x: &BitString, fuel: u64) -> u8 {
    let want = x.len() as u64 + 1;
    let eval = dsl::eval_gen(lab, g, want, fuel);
    if (eval.prefix.len() as u64) < want || !eval.prefix.starts_with(x) {
        return 0;
    }
    eval.prefix.get(x.len())
}

/// Consistent-set prediction: dovetail every canonical program of at most
/// `n` bits (one step per entry per round) until `h` of them have produced
/// `k + 1` output symbols, keep the produced strings consistent with the
/// observation, and predict the continuation of the one whose program comes
/// first in enumeration order. No consistent string means giving up with a
/// fixed 0. Fuel bounds each entry's execution; when fewer than `h` entries
/// can ever produce enough symbols within it, the procedure fails with a
/// budget error.
fn consist_predict(lab: &Lab, n: u32, h: u64, x: &BitString, fuel: u64) -> Result<u8> {
    if h == 0 {
        // The dovetail stops before any entry produces output.
        return Ok(0);
    }
    let k = x.len();
    let pool = lab.pool_traces(n, fuel, k as u64 + 2);
    // Completion times for k + 1 symbols; entries that never get there within
    // fuel have none.
    let mut times: Vec<u64> = pool
        .traces
        .iter()
        .filter_map(|t| t.profile.get(k).copied())
        .collect();
    if (times.len() as u64) < h {
        return Err(Error::BudgetExceeded(format!(
            "consistent-set predictor needs {h} productive programs at {} symbols \
             but only {} reach that within fuel {fuel}",
            k + 1,
            times.len()
        )));
    }
    times.sort_unstable();
    let t_star = times[h as usize - 1];
    for trace in &pool.traces {
        if let Some(&t) = trace.profile.get(k) {
            if t <= t_star && trace.result.output.starts_with(x) {
                return Ok(trace.result.output.get(k));
            }
        }
    }
    Ok(0)
}

/// Meta-prediction: enumerate every predictor descriptor shorter than `n`
/// bits (excluding DIAG- and META-containing ones), drop candidates that fail
/// to produce a bit within `f` steps on some input no longer than the
/// observation, and answer with the surviving candidate of minimal error
/// count on the observed prefixes, ties broken by serialization order.
fn meta_predict(lab: &Lab, n: u32, f: u64, x: &BitString) -> u8 {
    let k = x.len();
    let candidates = lab.meta_candidates(n);
    let prefixes: Vec<BitString> = (1..k.max(1)).map(|i| x.prefix(i)).collect();
    let mut best: Option<(u64, usize)> = None;
    for (pos, (code, desc)) in candidates.iter().enumerate() {
        if !meta_candidate_valid(lab, desc, k, f) {
            continue;
        }
        // d^k: prediction errors on the proper prefixes observed so far.
        let mut errors: u64 = 0;
        for (i, obs) in prefixes.iter().enumerate() {
            let predicted = meta_candidate_prediction(lab, code, desc, obs, f);
            if predicted != x.get(i + 1) {
                errors += 1;
            }
        }
        if best.is_none_or(|(d, _)| errors < d) {
            best = Some((errors, pos));
        }
    }
    match best {
        Some((_, pos)) => {
            let (code, desc) = &candidates[pos];
            meta_candidate_prediction(lab, code, desc, x, f)
        }
        None => 0,
    }
}

fn meta_candidate_prediction(
    lab: &Lab,
    code: &BitString,
    desc: &PredictorDesc,
    obs: &BitString,
    f: u64,
) -> u8 {
    if let Some(bit) = lab.memo_prediction(code, obs, f) {
        return bit;
    }
    let bit = predict_or_default(lab, desc, obs, f);
    lab.store_prediction(code, obs, f, bit);
    bit
}

/// A candidate is valid at observation length `k` when it produces a bit
/// within `f` steps on every input of length at most `k`. The structurally
/// total constructors qualify outright; machine predictors are exercised on
/// every input (an empty program can never answer); consistent-set candidates
/// reduce to a productivity count that only depends on the input length.
fn meta_candidate_valid(lab: &Lab, desc: &PredictorDesc, k: usize, f: u64) -> bool {
    match desc {
        PredictorDesc::Const(_)
        | PredictorDesc::CopyLast
        | PredictorDesc::Replay(_)
        | PredictorDesc::Speed
        | PredictorDesc::Lz78 => true,
        PredictorDesc::VmPred(q) => {
            if q.instr_count() == 0 {
                return false;
            }
            for len in 0..=k {
                let count = 1u64.checked_shl(len as u32).unwrap_or(u64::MAX);
                for v in 0..count {
                    let mut input = BitString::with_capacity(len);
                    for b in (0..len).rev() {
                        input.push((v >> b) & 1 == 1);
                    }
                    let r = lab.run(q, &encode_predictor_input(&input), f, 1);
                    if r.output.is_empty() {
                        return false;
                    }
                }
            }
            true
        }
        PredictorDesc::Consist { n, h } => {
            if *h == 0 {
                return true;
            }
            // Productivity is monotone in the required symbol count, so the
            // longest tested input is the binding one.
            let pool = lab.pool_traces(*n, f, k as u64 + 2);
            pool.productive_count(k as u64 + 1) >= *h
        }
        PredictorDesc::Meta { .. } => false, // excluded from the universe
    }
}

/// Time-bounded enumeration prediction: run all canonical programs of at most
/// `k = |x|` bits (capped at [`SPEED_MAX_SLOTS`] slots), each for
/// `min(2^(k+1), fuel)` steps, collect the generated strings at least `k + 1`
/// symbols long whose first `k` symbols match the observation, and predict
/// the continuation of the one with the enumeration-first generating program.
/// An empty collection answers 1.
fn speed_predict(lab: &Lab, x: &BitString, fuel: u64) -> u8 {
    let k = x.len() as u64;
    let exp_budget = if k + 1 >= 63 {
        u64::MAX
    } else {
        1u64 << (k + 1)
    };
    let budget = exp_budget.min(fuel);
    let max_slots = ((k / 8) as u32).min(SPEED_MAX_SLOTS);
    for slots in 1..=max_slots {
        if slots == 1 {
            // Too small to be worth an index, and the budget varies with k
            // down here.
            for rank in 0..enumerate::canonical_count(1) {
                let p = enumerate::canonical_program(1, rank);
                let r = vm::run(&p, &BitString::new(), budget, k + 1);
                if r.output.len() as u64 == k + 1 && r.output.starts_with(x) {
                    return r.output.get(k as usize);
                }
            }
        } else {
            let index = lab.sweep_index(slots, budget, k + 1);
            if let Some((_, bit)) = index.first_consistent(x) {
                return bit;
            }
        }
    }
    1
}

/// Incremental-parsing baseline: parse the observation into phrases, then
/// predict the majority continuation of the longest phrase-trie suffix match.
/// Ties and a cold trie predict 0.
fn lz78_predict(x: &BitString) -> u8 {
    #[derive(Clone)]
    struct Node {
        children: [usize; 2], // 0 = none
        count: u64,
    }
    let mut nodes = vec![Node {
        children: [0, 0],
        count: 0,
    }];
    let mut cur = 0usize;
    for b in x.iter() {
        let c = nodes[cur].children[b as usize];
        if c != 0 {
            nodes[c].count += 1;
            cur = c;
        } else {
            nodes.push(Node {
                children: [0, 0],
                count: 1,
            });
            let idx = nodes.len() - 1;
            nodes[cur].children[b as usize] = idx;
            cur = 0;
        }
    }
    for start in 0..=x.len() {
        let mut node = 0usize;
        let mut ok = true;
        for i in start..x.len() {
            let c = nodes[node].children[x.get(i) as usize];
            if c == 0 {
                ok = false;
                break;
            }
            node = c;
        }
        if !ok {
            continue;
        }
        let c0 = nodes[node].children[0];
        let c1 = nodes[node].children[1];
        let w0 = if c0 != 0 { nodes[c0].count } else { 0 };
        let w1 = if c1 != 0 { nodes[c1].count } else { 0 };
        if w0 + w1 > 0 {
            return if w1 > w0 { 1 } else { 0 };
        }
    }
    0
}

/// Empirical realization of "can learn to predict": the positions where the
/// predictor got the next symbol wrong, within a finite horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnVerdict {
    /// Positions `n` (0-based observation lengths) with a wrong prediction.
    pub error_positions: Vec<u64>,
    /// Subset of positions where the prediction itself failed with a budget
    /// error and was counted as wrong.
    pub budget_error_positions: Vec<u64>,
    /// Least `m` with no errors at any `n >= m` within the horizon; 0 when
    /// error-free.
    pub convergence_step: u64,
    pub horizon: u64,
    pub burn_in: u64,
    /// No errors in the final `horizon - burn_in` positions and the sequence
    /// was fully available. Horizon-relative: a larger horizon may flip it.
    pub learned_at_horizon: bool,
    /// The generator could not produce `horizon + 1` symbols within fuel.
    pub partial: bool,
    pub evaluated_positions: u64,
    pub fuel: u64,
}

fn evaluate_learning(
    lab: &Lab,
    p: &PredictorDesc,
    g: &GeneratorDesc,
    burn_in: u64,
    horizon: u64,
    fuel: u64,
) -> LearnVerdict {
    let eval = dsl::eval_gen(lab, g, horizon + 1, fuel);
    let sequence = eval.prefix;
    let evaluated = horizon.min(sequence.len() as u64);
    let mut error_positions = Vec::new();
    let mut budget_error_positions = Vec::new();
    for n in 0..evaluated {
        let obs = sequence.prefix(n as usize);
        let actual = sequence.get(n as usize);
        match predict(lab, p, &obs, fuel) {
            Ok(b) if b == actual => {}
            Ok(_) => error_positions.push(n),
            Err(_) => {
                error_positions.push(n);
                budget_error_positions.push(n);
            }
        }
    }
    let convergence_step = error_positions.last().map_or(0, |&m| m + 1);
    let partial = eval.truncated;
    let learned_at_horizon = !partial && error_positions.iter().all(|&n| n < burn_in);
    LearnVerdict {
        error_positions,
        budget_error_positions,
        convergence_step,
        horizon,
        burn_in,
        learned_at_horizon,
        partial,
        evaluated_positions: evaluated,
        fuel,
    }
}

/// Error positions of `p` along the sequence described by `g`, horizon-bounded.
pub fn errors(
    lab: &Lab,
    p: &PredictorDesc,
    g: &GeneratorDesc,
    horizon: u64,
    fuel: u64,
) -> LearnVerdict {
    evaluate_learning(lab, p, g, 0, horizon, fuel)
}

/// Horizon-relative learning verdict: learned iff no errors at or after
/// `burn_in`. Requires `burn_in < horizon`.
pub fn learns(
    lab: &Lab,
    p: &PredictorDesc,
    g: &GeneratorDesc,
    burn_in: u64,
    horizon: u64,
    fuel: u64,
) -> Result<LearnVerdict> {
    if burn_in >= horizon {
        return Err(Error::InvalidArgument(format!(
            "burn_in {burn_in} must be smaller than horizon {horizon}"
        )));
    }
    Ok(evaluate_learning(lab, p, g, burn_in, horizon, fuel))
}

/// Number of canonical programs of at most `n_bits` that emit at least
/// `probe` symbols within `fuel` steps each. A fuel-bounded surrogate for
/// "generates an infinite sequence": exact for this machine at this budget,
/// nonincreasing in `probe` and nondecreasing in `fuel`.
pub fn compute_h(lab: &Lab, n_bits: u32, fuel: u64, probe: u64) -> u64 {
    if n_bits < 8 {
        return 0;
    }
    lab.pool_traces(n_bits, fuel, probe).productive_count(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{GeneratorDesc as G, PredictorDesc as P};

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn prog(bits: &str) -> vm::Program {
        vm::Program::new(bs(bits))
    }

    #[test]
    fn const_and_copylast() {
        let lab = Lab::new();
        assert_eq!(predict(&lab, &P::Const(0), &bs("1101"), 10).unwrap(), 0);
        assert_eq!(predict(&lab, &P::CopyLast, &BitString::new(), 10).unwrap(), 0);
        assert_eq!(predict(&lab, &P::CopyLast, &bs("01"), 10).unwrap(), 1);
    }

    #[test]
    fn replay_predicts_third_symbol() {
        let lab = Lab::new();
        let p = P::Replay(Box::new(G::Repeat(bs("10"))));
        assert_eq!(predict(&lab, &p, &bs("10"), 100).unwrap(), 1);
        // Disagreeing observation falls back to 0.
        assert_eq!(predict(&lab, &p, &bs("11"), 100).unwrap(), 0);
    }

    #[test]
    fn vmpred_runs_the_machine() {
        let lab = Lab::new();
        // OUT1 as first instruction: predicts 1 everywhere.
        let p = P::VmPred(prog("00100000"));
        assert_eq!(predict(&lab, &p, &bs("000"), 100).unwrap(), 1);
        // Empty program emits nothing: default 0.
        let p = P::VmPred(vm::Program::empty());
        assert_eq!(predict(&lab, &p, &bs("1"), 100).unwrap(), 0);
    }

    #[test]
    fn compute_h_fixed_values() {
        let lab = Lab::new();
        assert_eq!(compute_h(&lab, 8, 10_000, 32), 2);
        assert_eq!(compute_h(&lab, 0, 10_000, 32), 0);
        // Regression constant from the exhaustive two-slot run.
        assert_eq!(compute_h(&lab, 16, 10_000, 32), 82);
    }

    #[test]
    fn consist_example_on_one_symbol() {
        let lab = Lab::new();
        let h8 = compute_h(&lab, 8, 10_000, 32);
        let p = P::Consist { n: 8, h: h8 };
        // Only OUT0's stream is consistent with "0".
        assert_eq!(predict(&lab, &p, &bs("0"), 10_000).unwrap(), 0);
        assert_eq!(predict(&lab, &p, &bs("1"), 10_000).unwrap(), 1);
    }

    #[test]
    fn consist_gives_up_with_zero() {
        let lab = Lab::new();
        let h8 = compute_h(&lab, 8, 10_000, 32);
        let p = P::Consist { n: 8, h: h8 };
        // No one-instruction stream starts with "10".
        assert_eq!(predict(&lab, &p, &bs("10"), 10_000).unwrap(), 0);
    }

    #[test]
    fn consist_budget_error_is_distinct() {
        let lab = Lab::new();
        let p = P::Consist { n: 8, h: 10 };
        // Only two one-slot programs are ever productive.
        assert!(matches!(
            predict(&lab, &p, &bs("0"), 10_000),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn consist_h_zero_always_gives_up() {
        let lab = Lab::new();
        let p = P::Consist { n: 8, h: 0 };
        assert_eq!(predict(&lab, &p, &bs("111"), 100).unwrap(), 0);
    }

    #[test]
    fn speed_empty_pool_predicts_one() {
        let lab = Lab::new();
        assert_eq!(predict(&lab, &P::Speed, &BitString::new(), 4096).unwrap(), 1);
        assert_eq!(predict(&lab, &P::Speed, &bs("0101"), 4096).unwrap(), 1);
    }

    #[test]
    fn speed_follows_one_slot_streams() {
        let lab = Lab::new();
        let x = bs("00000000");
        assert_eq!(predict(&lab, &P::Speed, &x, 4096).unwrap(), 0);
        let x = bs("11111111");
        assert_eq!(predict(&lab, &P::Speed, &x, 4096).unwrap(), 1);
    }

    #[test]
    fn lz78_is_total_and_deterministic() {
        let lab = Lab::new();
        assert_eq!(predict(&lab, &P::Lz78, &BitString::new(), 10).unwrap(), 0);
        let x = bs("010101010101");
        let a = predict(&lab, &P::Lz78, &x, 10).unwrap();
        let b = predict(&lab, &P::Lz78, &x, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors_on_prefix_repeat_example() {
        let lab = Lab::new();
        let g = GeneratorDesc::prefix_of("111", G::Repeat(bs("0")));
        let v = errors(&lab, &P::Const(0), &g, 64, 1000);
        assert_eq!(v.error_positions, vec![0, 1, 2]);
        assert_eq!(v.convergence_step, 3);
        assert!(!v.partial);
    }

    #[test]
    fn replay_has_zero_errors_on_its_generator() {
        let lab = Lab::new();
        for g in [
            G::Repeat(bs("10")),
            G::prefix_of("0110", G::Repeat(bs("1"))),
            G::Prog(prog("0010000000000000")),
        ] {
            let p = P::Replay(Box::new(g.clone()));
            let v = errors(&lab, &p, &g, 128, 4096);
            assert!(v.error_positions.is_empty(), "replay failed on {g}");
            assert_eq!(v.convergence_step, 0);
        }
    }

    #[test]
    fn diagonal_defeats_every_builtin_small_horizon() {
        let lab = Lab::new();
        let h8 = compute_h(&lab, 8, 4096, 32);
        let predictors = vec![
            P::Const(0),
            P::Const(1),
            P::CopyLast,
            P::Lz78,
            P::Speed,
            P::Consist { n: 8, h: h8 },
            P::Meta { n: 4, fuel: 256 },
            P::VmPred(prog("00100000")),
        ];
        // Horizon 31 keeps the enumeration pools at three slots; the
        // acceptance suite duels at 512.
        for p in predictors {
            let g = G::Diag(Box::new(p.clone()));
            let v = errors(&lab, &p, &g, 31, 4096);
            assert_eq!(
                v.error_positions,
                (0..31).collect::<Vec<u64>>(),
                "diagonal did not defeat {p}"
            );
        }
    }

    #[test]
    fn learns_respects_burn_in() {
        let lab = Lab::new();
        let v = learns(&lab, &P::Const(0), &G::Repeat(bs("0")), 0, 64, 100).unwrap();
        assert!(v.learned_at_horizon);
        assert_eq!(v.convergence_step, 0);

        let g = G::Diag(Box::new(P::Const(0)));
        let v = learns(&lab, &P::Const(0), &g, 8, 64, 100).unwrap();
        assert!(!v.learned_at_horizon);

        assert!(learns(&lab, &P::Const(0), &G::Repeat(bs("0")), 64, 64, 100).is_err());
    }

    #[test]
    fn speed_learns_the_alternator() {
        let lab = Lab::new();
        let g = G::Prog(prog("0010000000000000")); // OUT1, OUT0
        let v = learns(&lab, &P::Speed, &g, 16, 31, 4096).unwrap();
        assert!(v.learned_at_horizon, "errors at {:?}", v.error_positions);
    }

    #[test]
    fn meta_is_total_and_deterministic() {
        let lab = Lab::new();
        let p = P::Meta { n: 12, fuel: 256 };
        for x in ["", "1", "1010", "111000111"] {
            let x = bs(x);
            let a = predict(&lab, &p, &x, 256).unwrap();
            let b = predict(&lab, &p, &x, 256).unwrap();
            assert_eq!(a, b);
            assert!(a <= 1);
        }
    }

    #[test]
    fn meta_tracks_a_constant_sequence() {
        let lab = Lab::new();
        let p = P::Meta { n: 12, fuel: 256 };
        // After enough 1s, the best candidate predicts 1.
        let v = errors(&lab, &p, &G::Repeat(bs("1")), 32, 256);
        assert!(
            v.error_positions.iter().all(|&n| n < 8),
            "late errors: {:?}",
            v.error_positions
        );
    }

    #[test]
    fn prediction_is_pure() {
        let lab1 = Lab::new();
        let lab2 = Lab::new();
        let p = P::Consist { n: 16, h: 2 };
        let x = bs("1010");
        assert_eq!(
            predict(&lab1, &p, &x, 4096).unwrap(),
            predict(&lab2, &p, &x, 4096).unwrap()
        );
    }
}
