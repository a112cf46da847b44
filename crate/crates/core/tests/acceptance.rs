//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance and budget is pinned here as a constant. The suite shares
//! one lab so the five-slot program sweep (the dominant cost, built once) is
//! reused across criteria.

use std::sync::OnceLock;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use monolab::adversary;
use monolab::bits::{self, BitString};
use monolab::complexity::{self, IncompressibleMode, PredictorUniverse};
use monolab::dsl::{self, GeneratorDesc, PredictorDesc};
use monolab::enumerate::{self, DescriptorKind, DescriptorValue};
use monolab::harness::{self, ExperimentConfig};
use monolab::predictors;
use monolab::vm::{self, Program};
use monolab::Lab;

/// Prediction and evaluation step budget for the whole suite.
const FUEL: u64 = 4096;
/// Productivity budget for the consistent-set pool and the catalog.
const POOL_FUEL: u64 = 100_000;
/// Catalog probe length: one symbol beyond the coverage horizon.
const PROBE: u64 = 65;
/// Duel length for the adversary criteria.
const DUEL_HORIZON: u64 = 512;
/// Candidate-evaluation budget of the meta-predictor under test.
const META_FUEL: u64 = 4096;

/// Frozen oracle value: number of canonical programs of at most 16 bits that
/// emit at least 65 symbols within 100000 steps.
const V16: u64 = 82;
/// Frozen regression string: the 16-symbol diagonal against the
/// time-bounded enumeration predictor at fuel 4096. Its first symbol is 0
/// analytically (an empty pool predicts 1; the diagonal flips it).
const SPEED_DIAG_16: &str = "0000000010000000";

fn lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    LAB.get_or_init(Lab::new)
}

fn bs(s: &str) -> BitString {
    s.parse().unwrap()
}

fn consist16() -> PredictorDesc {
    PredictorDesc::Consist { n: 16, h: V16 }
}

fn meta12() -> PredictorDesc {
    PredictorDesc::Meta {
        n: 12,
        fuel: META_FUEL,
    }
}

/// The built-in duel roster plus 20 deterministically sampled machine
/// predictors over canonical programs of one to three slots.
fn duel_roster() -> Vec<PredictorDesc> {
    let mut roster = vec![
        PredictorDesc::Const(0),
        PredictorDesc::Const(1),
        PredictorDesc::CopyLast,
        PredictorDesc::Lz78,
        PredictorDesc::Speed,
        consist16(),
        meta12(),
    ];
    let total: u64 = (1..=3).map(enumerate::canonical_count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(1729);
    let mut seen = std::collections::HashSet::new();
    while seen.len() < 20 {
        let rank = rng.gen_range(0..total);
        if seen.insert(rank) {
            roster.push(PredictorDesc::VmPred(
                enumerate::canonical_program_by_global_rank(rank),
            ));
        }
    }
    roster
}

fn criterion(name: &str, pass: bool, detail: &str) {
    let mark = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {name}: {mark} — {detail}");
    assert!(pass, "{name} failed: {detail}");
}

#[test]
fn criterion_01_diagonal_defeat_exact() {
    let lab = lab();
    let mut worst = String::new();
    let mut all = true;
    for p in duel_roster() {
        let report = adversary::verify_defeat(lab, &p, DUEL_HORIZON, FUEL);
        if !report.all_wrong {
            all = false;
            worst = format!(
                "{} wrong only {}/{}",
                report.predictor, report.wrong_positions, DUEL_HORIZON
            );
            break;
        }
    }
    criterion(
        "C1 diagonal-defeat",
        all,
        &if all {
            format!("27 predictors, every one of {DUEL_HORIZON} positions wrong")
        } else {
            worst
        },
    );
}

#[test]
fn criterion_02_diagonal_constant_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ok = true;
    for _ in 0..1000 {
        let p = dsl::random_predictor(&mut rng, 3);
        let diag = GeneratorDesc::Diag(Box::new(p.clone()));
        if dsl::serialize_gen(&diag).len() != dsl::serialize_pred(&p).len() + 2 {
            ok = false;
            break;
        }
    }
    criterion(
        "C2 diagonal-constant",
        ok,
        "|DIAG(p)| - |p| = 2 on 1000 random descriptor trees",
    );
}

#[test]
fn criterion_03_replay_exact() {
    let lab = lab();
    let catalog = complexity::build_catalog(lab, 16, POOL_FUEL, PROBE);
    let mut generators: Vec<GeneratorDesc> = catalog
        .entries
        .iter()
        .map(|e| GeneratorDesc::Prog(e.program.clone()))
        .collect();
    for p in [
        PredictorDesc::Const(0),
        PredictorDesc::CopyLast,
        PredictorDesc::Speed,
        PredictorDesc::Lz78,
        consist16(),
    ] {
        generators.push(GeneratorDesc::Diag(Box::new(p)));
    }
    let mut zero_errors = true;
    for g in &generators {
        let replay = PredictorDesc::Replay(Box::new(g.clone()));
        let verdict = predictors::errors(lab, &replay, g, DUEL_HORIZON, FUEL);
        if !verdict.error_positions.is_empty() {
            zero_errors = false;
            break;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut constant_ok = true;
    for _ in 0..1000 {
        let g = dsl::random_generator(&mut rng, 3);
        let replay = PredictorDesc::Replay(Box::new(g.clone()));
        if dsl::serialize_pred(&replay).len() != dsl::serialize_gen(&g).len() + 3 {
            constant_ok = false;
            break;
        }
    }
    criterion(
        "C3 replay",
        zero_errors && constant_ok,
        &format!(
            "zero errors on {} generators from step 0; |REPLAY(g)| - |g| = 3 on 1000 trees",
            generators.len()
        ),
    );
}

/// The incompressibility oracle here runs in monotone mode: on this machine
/// almost nothing halts, so halting-incompressibility is vacuous (the
/// all-zero string qualifies) and the criterion's growth claim about the
/// monotone estimate would be unfalsifiable. Monotone mode produces strings
/// whose certified monotone lower bound actually grows with the length.
#[test]
fn criterion_04_simple_predictor_complex_sequence() {
    let lab = lab();
    let y16 = complexity::find_incompressible(lab, 16, POOL_FUEL, IncompressibleMode::Monotone)
        .unwrap();
    let y24 = complexity::find_incompressible(lab, 24, POOL_FUEL, IncompressibleMode::Monotone)
        .unwrap();
    assert_eq!(y16, bs("0000000000000001"), "frozen oracle string changed");
    assert_eq!(y24, bs("000000000000000000000001"));

    let mut kdots = Vec::new();
    let mut convergence_ok = true;
    for y in [&y16, &y24] {
        let g = GeneratorDesc::Prefix(y.clone(), Box::new(GeneratorDesc::Repeat(bs("0"))));
        let verdict =
            predictors::learns(lab, &PredictorDesc::Const(0), &g, y.len() as u64 + 1, 128, FUEL)
                .unwrap();
        convergence_ok &=
            verdict.learned_at_horizon && verdict.convergence_step <= y.len() as u64;
        let estimate =
            complexity::kdot_hat(lab, &g, 8, 32, 128, FUEL, PredictorUniverse::All).unwrap();
        kdots.push(estimate.value_bits);
    }
    let kdot_identical = kdots[0].is_some() && kdots[0] == kdots[1];

    // Certified monotone lower bounds: no program of fewer bits than the
    // string extends it, so the bound grows 16 -> 24 while the predictor
    // size stays put.
    let lower16 = complexity::khat_monotone(&y16, 16, 2 * POOL_FUEL);
    let lower24 = complexity::khat_monotone(&y24, 24, 2 * POOL_FUEL);
    let bound_grows = lower16.value_bits.is_none() && lower24.value_bits.is_none();

    criterion(
        "C4 simple-predictor-complex-sequence",
        convergence_ok && kdot_identical && bound_grows,
        &format!(
            "CONST(0) converges within |y|; kdot_hat = {:?} for both lengths; \
             monotone complexity certified > 16 and > 24",
            kdots[0]
        ),
    );
}

#[test]
fn criterion_05_consist_coverage() {
    let lab = lab();
    let h = predictors::compute_h(lab, 16, POOL_FUEL, PROBE);
    assert_eq!(h, V16, "frozen productivity count changed");
    let catalog = complexity::build_catalog(lab, 16, POOL_FUEL, PROBE);
    assert_eq!(catalog.entries.len(), 4, "frozen catalog shape changed");

    let predictor = PredictorDesc::Consist { n: 16, h };
    let mut all = true;
    let mut max_convergence = 0;
    for entry in &catalog.entries {
        let g = GeneratorDesc::Prog(entry.program.clone());
        let verdict = predictors::learns(lab, &predictor, &g, 16, 64, FUEL).unwrap();
        all &= verdict.learned_at_horizon;
        max_convergence = max_convergence.max(verdict.convergence_step);
    }
    let size = dsl::serialize_pred(&predictor).len() as f64;
    let size_ok = size <= 16.0 + 2.0 * 16f64.log2() + 12.0;
    criterion(
        "C5 consist-coverage",
        all && size_ok,
        &format!(
            "h = {h}; 4/4 catalog sequences learned within horizon 64, max convergence {max_convergence}; \
             |CONSIST(16, {h})| = {size} <= 16 + 2 log2 16 + 12"
        ),
    );
}

#[test]
fn criterion_06_speed_coverage() {
    let lab = lab();
    let catalog = complexity::build_catalog(lab, 16, POOL_FUEL, PROBE);
    let mut qualifying = 0;
    let mut learned = 0;
    for entry in &catalog.entries {
        if !entry.profile.below_power_curve(4) {
            continue;
        }
        qualifying += 1;
        let g = GeneratorDesc::Prog(entry.program.clone());
        let verdict = predictors::learns(lab, &PredictorDesc::Speed, &g, 16, 48, FUEL).unwrap();
        if verdict.learned_at_horizon {
            learned += 1;
        }
    }
    // The empty-candidate default answers 1, exactly.
    let default_one = predictors::predict(lab, &PredictorDesc::Speed, &BitString::new(), FUEL)
        .unwrap()
        == 1
        && predictors::predict(lab, &PredictorDesc::Speed, &bs("0101"), FUEL).unwrap() == 1;
    // Regression string for the diagonal against the 3-bit descriptor.
    let diag = adversary::diag_sequence(lab, &PredictorDesc::Speed, 16, FUEL);
    let frozen_ok = diag == bs(SPEED_DIAG_16);
    criterion(
        "C6 speed-coverage",
        qualifying == catalog.entries.len()
            && learned == qualifying
            && default_one
            && frozen_ok,
        &format!(
            "{learned}/{qualifying} fast sequences learned at horizon 48 (3-bit descriptor); \
             empty-candidate default is 1; diagonal regression string intact"
        ),
    );
}

/// Parts (a) and (b) hold exactly. Part (c) is implemented faithfully as
/// specified — an exhaustive sweep of every restricted descriptor of at most
/// 12 bits — and fails on this machine: the diagonal against the
/// consistent-set predictor goes eventually constant (the predictor runs out
/// of consistent machine streams, gives up with its fixed symbol, and the
/// diagonal then emits the opposite forever), so several 3- and 4-bit
/// predictors learn it. The supplement below shows the intended chain holds
/// when the diagonal is taken against the meta-predictor instead.
#[test]
fn criterion_07_theorem2_chain() {
    let lab = lab();
    let base = consist16();
    let omega = GeneratorDesc::Diag(Box::new(base.clone()));

    let defeat = adversary::verify_defeat(lab, &base, DUEL_HORIZON, FUEL);
    criterion(
        "C7a generating-predictor-errs-everywhere",
        defeat.all_wrong,
        &format!("{}/{} wrong", defeat.wrong_positions, DUEL_HORIZON),
    );

    let base_bits = dsl::serialize_pred(&base).len();
    let omega_bits = dsl::serialize_gen(&omega).len();
    criterion(
        "C7b dl-upper-bound-arithmetic",
        omega_bits == base_bits + 2,
        &format!("|DIAG(base)| = {omega_bits} = |base| + 2 = {}", base_bits + 2),
    );

    let learners = restricted_learners(lab, &omega, 12);
    criterion(
        "C7c no-short-predictor-learns",
        learners.is_empty(),
        &if learners.is_empty() {
            "no restricted descriptor of <= 12 bits learns the diagonal".to_string()
        } else {
            format!(
                "diagonal against the consistent-set predictor is eventually constant; \
                 learned by {}",
                learners.join(", ")
            )
        },
    );
}

/// Exhaustive sweep: every DIAG/META-free predictor descriptor of at most
/// `max_bits` bits that learns the sequence (burn-in 64, horizon 512).
fn restricted_learners(lab: &Lab, omega: &GeneratorDesc, max_bits: u32) -> Vec<String> {
    let mut learners = Vec::new();
    for (code, value) in enumerate::descriptor_space(DescriptorKind::Predictor, max_bits) {
        let DescriptorValue::Predictor(p) = value else {
            continue;
        };
        if !PredictorUniverse::NoDiagNoMeta.admits(&p) {
            continue;
        }
        let verdict = predictors::learns(lab, &p, omega, 64, DUEL_HORIZON, FUEL).unwrap();
        if verdict.learned_at_horizon {
            learners.push(format!("{p} ({} bits)", code.len()));
        }
    }
    learners
}

/// Supplement to criterion 7: the same three-link chain built on the
/// diagonal against the meta-predictor, whose candidate pool keeps adapting,
/// so the sequence never settles and the exhaustive sweep comes up empty.
#[test]
fn criterion_07_supplement_meta_diagonal_resists_short_predictors() {
    let lab = lab();
    let base = meta12();
    let omega = GeneratorDesc::Diag(Box::new(base.clone()));

    let defeat = adversary::verify_defeat(lab, &base, DUEL_HORIZON, FUEL);
    let arithmetic =
        dsl::serialize_gen(&omega).len() == dsl::serialize_pred(&base).len() + 2;
    let learners = restricted_learners(lab, &omega, 12);
    criterion(
        "C7-supplement meta-diagonal-chain",
        defeat.all_wrong && arithmetic && learners.is_empty(),
        &format!(
            "base errs {}/{}; constant exact; restricted sweep at 12 bits found {} learners",
            defeat.wrong_positions,
            DUEL_HORIZON,
            learners.len()
        ),
    );
}

#[test]
fn criterion_08_codec_bounds() {
    // Prefix-freeness, exhaustive for n <= 4096.
    let words: Vec<BitString> = (1..=4096u64)
        .map(|n| bits::encode_nat(n).unwrap())
        .collect();
    let mut prefix_free = true;
    'outer: for (i, a) in words.iter().enumerate() {
        for (j, b) in words.iter().enumerate() {
            if i != j && b.starts_with(a) {
                prefix_free = false;
                break 'outer;
            }
        }
    }
    // Length bound, exhaustive for n <= 10^6.
    let mut bound_ok = true;
    for n in 1..=1_000_000u64 {
        if bits::encode_nat(n).unwrap().len() as f64 > bits::nat_code_length_bound(n) {
            bound_ok = false;
            break;
        }
    }
    criterion(
        "C8 codec-bounds",
        prefix_free && bound_ok,
        "prefix-free for n <= 4096 (exhaustive); |code(n)| <= log2 n + 2 log2 log2 (n+2) + 2 for n <= 10^6",
    );
}

#[test]
fn criterion_09_machine_determinism_and_cache() {
    // Canonicalization soundness: exhaustive over all raw 16-bit programs.
    let inputs = [BitString::new(), bs("101")];
    let mut canonical_ok = true;
    'canon: for value in 0u32..=0xffff {
        let mut code = BitString::with_capacity(16);
        for i in (0..16).rev() {
            code.push((value >> i) & 1 == 1);
        }
        let p = Program::new(code);
        let c = p.canonicalize();
        for input in &inputs {
            if vm::run(&p, input, 64, 16) != vm::run(&c, input, 64, 16) {
                canonical_ok = false;
                break 'canon;
            }
        }
    }
    // Sampled three-slot raw programs.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5000 {
        let mut code = BitString::with_capacity(24);
        for _ in 0..24 {
            code.push(rng.gen_bool(0.5));
        }
        let p = Program::new(code);
        let c = p.canonicalize();
        for input in &inputs {
            canonical_ok &= vm::run(&p, input, 128, 16) == vm::run(&c, input, 128, 16);
        }
    }

    // Output prefix-monotonicity in fuel, all canonical two-slot programs.
    let mut monotone_ok = true;
    for p in enumerate::canonical_programs(2) {
        let short = vm::run(&p, &BitString::new(), 48, 1 << 30);
        let long = vm::run(&p, &BitString::new(), 400, 1 << 30);
        if !long.output.starts_with(&short.output) {
            monotone_ok = false;
            break;
        }
    }

    // Determinism across worker counts and cache warmth at the report level:
    // the same duel suite, run with one worker cold, two workers warm, must
    // be byte-identical.
    let dir = tempfile::tempdir().unwrap();
    let cache_dir = dir.path().join("cache");
    let toml = format!(
        "version = 1\nkind = \"duel-suite\"\nworkers = 1\n\n[budgets]\nfuel = {FUEL}\nhorizon = 96\n\n\
         [descriptors]\npredictors = [\"0000\", \"0001\", \"(copylast)\", \"(lz78)\", \"(vmpred 10100000)\"]\n\n\
         [output]\ndir = \"{}\"\n\n[cache]\ndir = \"{}\"\n",
        dir.path().join("out").display(),
        cache_dir.display()
    );
    let mut cfg = ExperimentConfig::from_toml(&toml).unwrap();
    let cold = harness::run_experiment(&cfg).unwrap();
    cfg.workers = 2;
    let warm = harness::run_experiment(&cfg).unwrap();
    let strip_meta = |s: &str| {
        s.lines()
            .filter(|l| !l.contains("\"record\":\"meta\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let reports_identical = strip_meta(&cold.to_jsonl()) == strip_meta(&warm.to_jsonl())
        && cold.to_csv().unwrap() == warm.to_csv().unwrap();

    // Cache cross-check: every persisted record must reproduce under a
    // cache-bypassing rerun. The key stores hashes, so rerun a seeded sample
    // of expensive programs directly and compare against cached gets.
    let cache = harness::cache::DiskCache::open(&cache_dir).unwrap();
    let stats = cache.verify().unwrap();
    let mut bypass_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let rank = rng.gen_range(0..enumerate::canonical_count(2));
        let p = enumerate::canonical_program(2, rank);
        let direct = vm::run(&p, &BitString::new(), FUEL, 64);
        let key = harness::cache::CacheKey::new(p.code(), &BitString::new(), FUEL, 64);
        if let Some(record) = cache.get(&key).unwrap() {
            bypass_ok &= record.to_run_result() == direct;
        }
    }

    criterion(
        "C9 machine-determinism-and-cache",
        canonical_ok && monotone_ok && reports_identical && bypass_ok,
        &format!(
            "canonicalization sound (65536 exhaustive + 5000 sampled); fuel-monotone output; \
             warm two-worker report equals cold one-worker report byte for byte; \
             {} cache records verified",
            stats.records
        ),
    );
}

#[test]
fn criterion_10_estimator_sanity() {
    let targets: Vec<BitString> = (1..=100).map(|i| enumerate::lex_string(enumerate::LexIndex(i))).collect();
    let fuels = [256u64, FUEL];
    let mut ok = true;
    let mut detail = String::new();
    for x in &targets {
        let mut previous: [Option<Option<u64>>; 2] = [None, None];
        for &fuel in &fuels {
            let halting = complexity::khat_halting(x, 24, fuel);
            let monotone = complexity::khat_monotone(x, 24, fuel);
            // Monotone never exceeds halting (None is the infinity marker).
            let pair_ok = match (monotone.value_bits, halting.value_bits) {
                (Some(m), Some(h)) => m <= h,
                (None, Some(_)) => false,
                _ => true,
            };
            // Witnesses re-verify under the recorded budgets.
            let mut witness_ok = true;
            if let Some(complexity::Witness::Machine(p)) = &halting.witness {
                let r = vm::run(p, &BitString::new(), fuel, x.len() as u64 + 1);
                witness_ok &= r.status == vm::RunStatus::Halted && r.output == *x;
            }
            if let Some(complexity::Witness::Machine(p)) = &monotone.witness {
                let r = vm::run(p, &BitString::new(), fuel, x.len() as u64);
                witness_ok &= r.output == *x;
            }
            // Values are nonincreasing in fuel.
            let fuel_ok = [halting.value_bits, monotone.value_bits]
                .iter()
                .zip(previous.iter())
                .all(|(now, before)| match before {
                    Some(Some(b)) => now.is_some_and(|n| n <= *b),
                    _ => true,
                });
            previous = [Some(halting.value_bits), Some(monotone.value_bits)];
            if !(pair_ok && witness_ok && fuel_ok) {
                ok = false;
                detail = format!("target {x} at fuel {fuel}");
                break;
            }
        }
    }
    criterion(
        "C10 estimator-sanity",
        ok,
        &if ok {
            "100 targets at two fuels: witnesses re-verify, values nonincreasing in fuel, monotone <= halting".into()
        } else {
            detail
        },
    );
}
