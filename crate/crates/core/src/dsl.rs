//! The description language: tagged generator and predictor descriptors with
//! bit-exact prefix-free serialization.
//!
//! Serialized length is the complexity currency of the whole lab. Each
//! constructor has a fixed tag cost, so wrapping constructions carry exact
//! additive constants instead of asymptotic ones:
//!
//! - `|DIAG(p)| = |p| + 2` — the diagonal adversary against a predictor,
//! - `|REPLAY(g)| = |g| + 3` — the predictor that replays a generator.
//!
//! Generator wire format (2-bit tag):
//! `00` PROG ++ len-str(q) · `01` REPEAT ++ len-str(x) ·
//! `10` PREFIX ++ len-str(x) ++ gen · `11` DIAG ++ pred
//!
//! Predictor wire format (3-bit tag):
//! `000` CONST ++ b · `001` COPYLAST · `010` REPLAY ++ gen ·
//! `011` VMPRED ++ len-str(q) · `100` CONSIST ++ nat(n+1) ++ nat(h+1) ·
//! `101` META ++ nat(n+1) ++ nat(F+1) · `110` SPEED · `111` LZ78
//!
//! Both forms double as the on-disk and CLI format; a readable s-expression
//! form is accepted as input alongside the raw bits.

use std::fmt;

use crate::bits::{self, BitReader, BitString};
use crate::error::{Error, Result};
use crate::exec::Lab;
use crate::predictors;
use crate::vm::Program;

/// A finite description of an infinite binary sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GeneratorDesc {
    /// The output stream of a machine program run on empty input.
    Prog(Program),
    /// Periodic repetition of a nonempty string.
    Repeat(BitString),
    /// A literal prefix followed by another generator.
    Prefix(BitString, Box<GeneratorDesc>),
    /// The diagonal sequence against a predictor: every next symbol is the
    /// opposite of the predictor's prediction on the prefix so far.
    Diag(Box<PredictorDesc>),
}

/// A finite description of a next-bit predictor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PredictorDesc {
    /// Always predicts the given bit.
    Const(u8),
    /// Predicts the last observed symbol, 0 on the empty observation.
    CopyLast,
    /// Replays a generator and predicts its next symbol.
    Replay(Box<GeneratorDesc>),
    /// Runs a machine program on the encoded observation; its first output
    /// bit is the prediction, defaulting to 0 when none appears in time.
    VmPred(Program),
    /// Consistent-set predictor over all canonical programs of at most `n`
    /// bits, parameterized by the count `h` of fuel-productive programs.
    Consist { n: u32, h: u64 },
    /// Meta-predictor over every shorter descriptor: tracks candidate error
    /// counts and predicts with the current best. `fuel` is the per-candidate
    /// step budget standing in for undecidable halting detection.
    Meta { n: u32, fuel: u64 },
    /// Time-bounded enumeration predictor: runs short programs for
    /// exponentially many steps and predicts from the first consistent
    /// output, 1 when none qualifies.
    Speed,
    /// Incremental-parsing baseline predictor.
    Lz78,
}

impl GeneratorDesc {
    pub fn prefix_of(x: &str, inner: GeneratorDesc) -> GeneratorDesc {
        GeneratorDesc::Prefix(x.parse().expect("valid bits"), Box::new(inner))
    }

    pub fn contains_diag(&self) -> bool {
        match self {
            GeneratorDesc::Prog(_) | GeneratorDesc::Repeat(_) => false,
            GeneratorDesc::Prefix(_, g) => g.contains_diag(),
            GeneratorDesc::Diag(_) => true,
        }
    }

    pub fn contains_meta(&self) -> bool {
        match self {
            GeneratorDesc::Prog(_) | GeneratorDesc::Repeat(_) => false,
            GeneratorDesc::Prefix(_, g) => g.contains_meta(),
            GeneratorDesc::Diag(p) => p.contains_meta(),
        }
    }
}

impl PredictorDesc {
    /// True iff a DIAG constructor occurs anywhere in the tree.
    pub fn contains_diag(&self) -> bool {
        match self {
            PredictorDesc::Replay(g) => g.contains_diag(),
            _ => false,
        }
    }

    /// True iff a META constructor occurs anywhere in the tree.
    pub fn contains_meta(&self) -> bool {
        match self {
            PredictorDesc::Meta { .. } => true,
            PredictorDesc::Replay(g) => g.contains_meta(),
            _ => false,
        }
    }
}

pub fn serialize_gen(g: &GeneratorDesc) -> BitString {
    let mut out = BitString::new();
    write_gen(g, &mut out);
    out
}

fn write_gen(g: &GeneratorDesc, out: &mut BitString) {
    match g {
        GeneratorDesc::Prog(q) => {
            out.push(false);
            out.push(false);
            out.extend_from(&bits::encode_len_str(q.code()));
        }
        GeneratorDesc::Repeat(x) => {
            debug_assert!(!x.is_empty());
            out.push(false);
            out.push(true);
            out.extend_from(&bits::encode_len_str(x));
        }
        GeneratorDesc::Prefix(x, inner) => {
            out.push(true);
            out.push(false);
            out.extend_from(&bits::encode_len_str(x));
            write_gen(inner, out);
        }
        GeneratorDesc::Diag(p) => {
            out.push(true);
            out.push(true);
            write_pred(p, out);
        }
    }
}

pub fn serialize_pred(p: &PredictorDesc) -> BitString {
    let mut out = BitString::new();
    write_pred(p, &mut out);
    out
}

fn write_tag3(out: &mut BitString, tag: u8) {
    out.push(tag & 4 != 0);
    out.push(tag & 2 != 0);
    out.push(tag & 1 != 0);
}

fn write_pred(p: &PredictorDesc, out: &mut BitString) {
    match p {
        PredictorDesc::Const(b) => {
            write_tag3(out, 0);
            out.push(*b != 0);
        }
        PredictorDesc::CopyLast => write_tag3(out, 1),
        PredictorDesc::Replay(g) => {
            write_tag3(out, 2);
            write_gen(g, out);
        }
        PredictorDesc::VmPred(q) => {
            write_tag3(out, 3);
            out.extend_from(&bits::encode_len_str(q.code()));
        }
        PredictorDesc::Consist { n, h } => {
            write_tag3(out, 4);
            out.extend_from(&bits::encode_nat(*n as u64 + 1).expect("n + 1 >= 1"));
            out.extend_from(&bits::encode_nat(*h + 1).expect("h + 1 >= 1"));
        }
        PredictorDesc::Meta { n, fuel } => {
            write_tag3(out, 5);
            out.extend_from(&bits::encode_nat(*n as u64 + 1).expect("n + 1 >= 1"));
            out.extend_from(&bits::encode_nat(*fuel + 1).expect("F + 1 >= 1"));
        }
        PredictorDesc::Speed => write_tag3(out, 6),
        PredictorDesc::Lz78 => write_tag3(out, 7),
    }
}

pub fn parse_gen(bits_in: &BitString) -> Result<(GeneratorDesc, BitString)> {
    let mut r = BitReader::new(bits_in);
    let g = read_gen(&mut r)?;
    Ok((g, r.rest()))
}

fn read_gen(r: &mut BitReader<'_>) -> Result<GeneratorDesc> {
    let tag = (r.read_bit()? << 1) | r.read_bit()?;
    match tag {
        0 => Ok(GeneratorDesc::Prog(Program::new(bits::read_len_str(r)?))),
        1 => {
            let x = bits::read_len_str(r)?;
            if x.is_empty() {
                return Err(Error::Parse("REPEAT payload must be nonempty".into()));
            }
            Ok(GeneratorDesc::Repeat(x))
        }
        2 => {
            let x = bits::read_len_str(r)?;
            let inner = read_gen(r)?;
            Ok(GeneratorDesc::Prefix(x, Box::new(inner)))
        }
        _ => Ok(GeneratorDesc::Diag(Box::new(read_pred(r)?))),
    }
}

pub fn parse_pred(bits_in: &BitString) -> Result<(PredictorDesc, BitString)> {
    let mut r = BitReader::new(bits_in);
    let p = read_pred(&mut r)?;
    Ok((p, r.rest()))
}

fn read_pred(r: &mut BitReader<'_>) -> Result<PredictorDesc> {
    let tag = (r.read_bit()? << 2) | (r.read_bit()? << 1) | r.read_bit()?;
    match tag {
        0 => Ok(PredictorDesc::Const(r.read_bit()?)),
        1 => Ok(PredictorDesc::CopyLast),
        2 => Ok(PredictorDesc::Replay(Box::new(read_gen(r)?))),
        3 => Ok(PredictorDesc::VmPred(Program::new(bits::read_len_str(r)?))),
        4 => {
            let n = bits::read_nat(r)? - 1;
            let h = bits::read_nat(r)? - 1;
            if n < 8 {
                return Err(Error::Parse(format!("CONSIST requires n >= 8, got {n}")));
            }
            Ok(PredictorDesc::Consist { n: n as u32, h })
        }
        5 => {
            let n = bits::read_nat(r)? - 1;
            let fuel = bits::read_nat(r)? - 1;
            if n < 4 {
                return Err(Error::Parse(format!("META requires n >= 4, got {n}")));
            }
            if fuel < 1 {
                return Err(Error::Parse("META requires F >= 1".into()));
            }
            Ok(PredictorDesc::Meta { n: n as u32, fuel })
        }
        6 => Ok(PredictorDesc::Speed),
        _ => Ok(PredictorDesc::Lz78),
    }
}

/// Outcome of evaluating a generator to a requested length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOutcome {
    pub prefix: BitString,
    /// The generator could not produce the requested length within fuel
    /// (machine programs only; the other constructors are total).
    pub truncated: bool,
    /// Number of DIAG steps whose inner prediction failed with a budget error
    /// and was defaulted to 0.
    pub defaulted_predictions: u64,
}

/// First `k` symbols of the sequence a generator describes.
///
/// `PROG` runs the program on empty input under `fuel`; `DIAG` builds the
/// sequence one symbol at a time, asking the wrapped predictor for each next
/// bit and emitting the opposite. A predictor budget error defaults the
/// prediction to 0 (and is counted), keeping DIAG total.
pub fn eval_gen(lab: &Lab, g: &GeneratorDesc, k: u64, fuel: u64) -> EvalOutcome {
    match g {
        GeneratorDesc::Prog(q) => {
            let result = lab.run(q, &BitString::new(), fuel, k);
            let truncated = (result.output.len() as u64) < k;
            EvalOutcome {
                prefix: result.output,
                truncated,
                defaulted_predictions: 0,
            }
        }
        GeneratorDesc::Repeat(x) => EvalOutcome {
            prefix: x.cycle_to(k as usize),
            truncated: false,
            defaulted_predictions: 0,
        },
        GeneratorDesc::Prefix(x, inner) => {
            if k <= x.len() as u64 {
                return EvalOutcome {
                    prefix: x.prefix(k as usize),
                    truncated: false,
                    defaulted_predictions: 0,
                };
            }
            let rest = eval_gen(lab, inner, k - x.len() as u64, fuel);
            EvalOutcome {
                prefix: x.concat(&rest.prefix),
                truncated: rest.truncated,
                defaulted_predictions: rest.defaulted_predictions,
            }
        }
        GeneratorDesc::Diag(p) => {
            // Diagonal sequences are prefix-stable, so the lab keeps the
            // longest prefix computed so far and extensions resume from it.
            let code = serialize_pred(p);
            let (mut prefix, mut defaulted_at) = lab.diag_memo_get(&code, fuel);
            if (prefix.len() as u64) < k {
                while (prefix.len() as u64) < k {
                    let prediction = match predictors::predict(lab, p, &prefix, fuel) {
                        Ok(b) => b,
                        Err(_) => {
                            defaulted_at.push(prefix.len() as u64);
                            0
                        }
                    };
                    prefix.push_bit(1 - prediction);
                }
                lab.diag_memo_store(&code, fuel, &prefix, &defaulted_at);
            }
            let defaulted = defaulted_at.iter().filter(|&&i| i < k).count() as u64;
            EvalOutcome {
                prefix: prefix.prefix(k as usize),
                truncated: false,
                defaulted_predictions: defaulted,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Readable s-expression form
// ---------------------------------------------------------------------------

pub fn gen_to_sexpr(g: &GeneratorDesc) -> String {
    match g {
        GeneratorDesc::Prog(q) => {
            if q.code().is_empty() {
                "(prog)".into()
            } else {
                format!("(prog {})", q.code())
            }
        }
        GeneratorDesc::Repeat(x) => format!("(repeat {x})"),
        GeneratorDesc::Prefix(x, inner) => {
            let xs = if x.is_empty() { "-".into() } else { x.to_string() };
            format!("(prefix {xs} {})", gen_to_sexpr(inner))
        }
        GeneratorDesc::Diag(p) => format!("(diag {})", pred_to_sexpr(p)),
    }
}

pub fn pred_to_sexpr(p: &PredictorDesc) -> String {
    match p {
        PredictorDesc::Const(b) => format!("(const {b})"),
        PredictorDesc::CopyLast => "(copylast)".into(),
        PredictorDesc::Replay(g) => format!("(replay {})", gen_to_sexpr(g)),
        PredictorDesc::VmPred(q) => {
            if q.code().is_empty() {
                "(vmpred)".into()
            } else {
                format!("(vmpred {})", q.code())
            }
        }
        PredictorDesc::Consist { n, h } => format!("(consist {n} {h})"),
        PredictorDesc::Meta { n, fuel } => format!("(meta {n} {fuel})"),
        PredictorDesc::Speed => "(speed)".into(),
        PredictorDesc::Lz78 => "(lz78)".into(),
    }
}

impl fmt::Display for GeneratorDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", gen_to_sexpr(self))
    }
}

impl fmt::Display for PredictorDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pred_to_sexpr(self))
    }
}

fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

struct SexprParser {
    tokens: Vec<String>,
    pos: usize,
}

impl SexprParser {
    fn next(&mut self) -> Result<&str> {
        let t = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| Error::Parse("unexpected end of s-expression".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|s| s.as_str())
    }

    fn expect(&mut self, t: &str) -> Result<()> {
        let got = self.next()?;
        if got == t {
            Ok(())
        } else {
            Err(Error::Parse(format!("expected {t:?}, got {got:?}")))
        }
    }

    fn bits_token(&mut self) -> Result<BitString> {
        match self.peek() {
            Some(")") => Ok(BitString::new()),
            _ => {
                let t = self.next()?.to_owned();
                if t == "-" || t == "λ" {
                    Ok(BitString::new())
                } else {
                    t.parse()
                }
            }
        }
    }

    fn number(&mut self) -> Result<u64> {
        let t = self.next()?;
        t.parse::<u64>()
            .map_err(|_| Error::Parse(format!("expected a number, got {t:?}")))
    }

    fn gen(&mut self) -> Result<GeneratorDesc> {
        self.expect("(")?;
        let head = self.next()?.to_owned();
        let g = match head.as_str() {
            "prog" => GeneratorDesc::Prog(Program::new(self.bits_token()?)),
            "repeat" => {
                let x = self.bits_token()?;
                if x.is_empty() {
                    return Err(Error::Parse("repeat needs a nonempty string".into()));
                }
                GeneratorDesc::Repeat(x)
            }
            "prefix" => {
                let x = self.bits_token()?;
                let inner = self.gen()?;
                GeneratorDesc::Prefix(x, Box::new(inner))
            }
            "diag" => GeneratorDesc::Diag(Box::new(self.pred()?)),
            other => return Err(Error::Parse(format!("unknown generator form {other:?}"))),
        };
        self.expect(")")?;
        Ok(g)
    }

    fn pred(&mut self) -> Result<PredictorDesc> {
        self.expect("(")?;
        let head = self.next()?.to_owned();
        let p = match head.as_str() {
            "const" => {
                let b = self.number()?;
                if b > 1 {
                    return Err(Error::Parse("const takes a bit".into()));
                }
                PredictorDesc::Const(b as u8)
            }
            "copylast" => PredictorDesc::CopyLast,
            "replay" => PredictorDesc::Replay(Box::new(self.gen()?)),
            "vmpred" => PredictorDesc::VmPred(Program::new(self.bits_token()?)),
            "consist" => {
                let n = self.number()?;
                let h = self.number()?;
                if n < 8 {
                    return Err(Error::Parse("consist requires n >= 8".into()));
                }
                PredictorDesc::Consist { n: n as u32, h }
            }
            "meta" => {
                let n = self.number()?;
                let fuel = self.number()?;
                if n < 4 || fuel < 1 {
                    return Err(Error::Parse("meta requires n >= 4 and F >= 1".into()));
                }
                PredictorDesc::Meta { n: n as u32, fuel }
            }
            "speed" => PredictorDesc::Speed,
            "lz78" => PredictorDesc::Lz78,
            other => return Err(Error::Parse(format!("unknown predictor form {other:?}"))),
        };
        self.expect(")")?;
        Ok(p)
    }
}

/// Accepts either the serialized bit form or the s-expression form.
pub fn generator_from_str(s: &str) -> Result<GeneratorDesc> {
    let s = s.trim();
    if s.starts_with('(') {
        let mut p = SexprParser {
            tokens: tokenize(s),
            pos: 0,
        };
        let g = p.gen()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse("trailing tokens after generator".into()));
        }
        Ok(g)
    } else {
        let bits: BitString = s.parse()?;
        let (g, rest) = parse_gen(&bits)?;
        if !rest.is_empty() {
            return Err(Error::Parse("trailing bits after generator".into()));
        }
        Ok(g)
    }
}

/// Accepts either the serialized bit form or the s-expression form.
pub fn predictor_from_str(s: &str) -> Result<PredictorDesc> {
    let s = s.trim();
    if s.starts_with('(') {
        let mut p = SexprParser {
            tokens: tokenize(s),
            pos: 0,
        };
        let d = p.pred()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse("trailing tokens after predictor".into()));
        }
        Ok(d)
    } else {
        let bits: BitString = s.parse()?;
        let (d, rest) = parse_pred(&bits)?;
        if !rest.is_empty() {
            return Err(Error::Parse("trailing bits after predictor".into()));
        }
        Ok(d)
    }
}

// ---------------------------------------------------------------------------
// Random descriptor trees (for round-trip and constant-arithmetic tests)
// ---------------------------------------------------------------------------

/// Uniform-ish random generator tree of bounded depth; used by tests and the
/// constant-arithmetic suites.
pub fn random_generator<R: rand::Rng>(rng: &mut R, depth: u32) -> GeneratorDesc {
    let leaf_only = depth == 0;
    match if leaf_only {
        rng.gen_range(0..2)
    } else {
        rng.gen_range(0..4)
    } {
        0 => {
            let slots = rng.gen_range(0..3);
            let mut bits = BitString::new();
            for _ in 0..slots * 8 {
                bits.push(rng.gen_bool(0.5));
            }
            GeneratorDesc::Prog(Program::new(bits))
        }
        1 => {
            let len = rng.gen_range(1..6);
            let mut x = BitString::new();
            for _ in 0..len {
                x.push(rng.gen_bool(0.5));
            }
            GeneratorDesc::Repeat(x)
        }
        2 => {
            let len = rng.gen_range(0..5);
            let mut x = BitString::new();
            for _ in 0..len {
                x.push(rng.gen_bool(0.5));
            }
            GeneratorDesc::Prefix(x, Box::new(random_generator(rng, depth - 1)))
        }
        _ => GeneratorDesc::Diag(Box::new(random_predictor(rng, depth - 1))),
    }
}

/// Uniform-ish random predictor tree of bounded depth.
pub fn random_predictor<R: rand::Rng>(rng: &mut R, depth: u32) -> PredictorDesc {
    let choices = if depth == 0 { 7 } else { 8 };
    match rng.gen_range(0..choices) {
        0 => PredictorDesc::Const(rng.gen_range(0..2)),
        1 => PredictorDesc::CopyLast,
        2 => PredictorDesc::Speed,
        3 => PredictorDesc::Lz78,
        4 => {
            let slots = rng.gen_range(0..3);
            let mut bits = BitString::new();
            for _ in 0..slots * 8 {
                bits.push(rng.gen_bool(0.5));
            }
            PredictorDesc::VmPred(Program::new(bits))
        }
        5 => PredictorDesc::Consist {
            n: rng.gen_range(8..32),
            h: rng.gen_range(0..512),
        },
        6 => PredictorDesc::Meta {
            n: rng.gen_range(4..24),
            fuel: rng.gen_range(1..10_000),
        },
        _ => PredictorDesc::Replay(Box::new(random_generator(rng, depth - 1))),
    }
}
