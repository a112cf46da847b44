//! Command-line surface of the lab: machine runs, sequence evaluation,
//! predictions, duels, complexity estimates, catalogs, experiment suites, and
//! cache maintenance. Exit codes: 0 success, 1 failed claim, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use monolab::adversary;
use monolab::bits::BitString;
use monolab::complexity::{self, IncompressibleMode, PredictorUniverse};
use monolab::dsl;
use monolab::harness::{self, cache::DiskCache, ExperimentConfig, CACHE_DIR_ENV};
use monolab::predictors;
use monolab::vm::{self, Program};
use monolab::{Error, Lab};

#[derive(Parser)]
#[command(name = "monolab", version, about = "Toy monotone machine laboratory")]
struct Cli {
    /// Emit machine-readable line-delimited JSON instead of text.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Worker threads (0 = library default). Output content is identical for
    /// any value.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Machine execution and disassembly.
    Vm {
        #[command(subcommand)]
        command: VmCommand,
    },
    /// Evaluate a generator descriptor to a prefix.
    Seq {
        #[command(subcommand)]
        command: SeqCommand,
    },
    /// Predict the next symbol after an observation.
    Predict {
        /// Predictor descriptor (bits or s-expression).
        #[arg(long)]
        pred: String,
        /// Observed bit string.
        #[arg(long, default_value = "")]
        obs: String,
        #[arg(long)]
        fuel: u64,
    },
    /// Learning verdict of a predictor on a generator's sequence.
    Learns {
        #[arg(long)]
        pred: String,
        #[arg(long)]
        gen: String,
        #[arg(long)]
        burn_in: u64,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        fuel: u64,
    },
    /// Duel a predictor against its own diagonal sequence.
    Duel {
        #[arg(long)]
        pred: String,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        fuel: u64,
    },
    /// Program-length and descriptor-length complexity upper bounds.
    Khat {
        #[command(subcommand)]
        command: KhatCommand,
    },
    /// Smallest-predictor estimate for a generator's sequence.
    Kdot {
        #[arg(long)]
        gen: String,
        #[arg(long)]
        max_bits: u64,
        #[arg(long)]
        burn_in: u64,
        #[arg(long)]
        horizon: u64,
        #[arg(long)]
        fuel: u64,
        #[arg(long, value_enum, default_value_t = UniverseArg::All)]
        universe: UniverseArg,
    },
    /// First string of a given length with no short generating program.
    Incompressible {
        #[arg(long)]
        len: u32,
        #[arg(long)]
        fuel: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Halting)]
        mode: ModeArg,
    },
    /// Build the bounded-complexity sequence catalog.
    Catalog {
        #[arg(long)]
        n_bits: u32,
        #[arg(long)]
        fuel: u64,
        #[arg(long)]
        horizon: u64,
    },
    /// Run a configured experiment suite.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
    /// Execution-cache maintenance.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Subcommand)]
enum VmCommand {
    /// Execute a program under explicit budgets.
    Run {
        /// Program bits, or `hex:<digits>:<bitlen>`.
        #[arg(long)]
        program: String,
        #[arg(long, default_value = "")]
        input: String,
        #[arg(long)]
        fuel: u64,
        #[arg(long)]
        max_out: u64,
    },
    /// One instruction per line: `IDX OPCODE OPERAND`.
    Disasm {
        #[arg(long)]
        program: String,
    },
}

#[derive(Subcommand)]
enum SeqCommand {
    Eval {
        /// Generator descriptor (bits or s-expression).
        #[arg(long)]
        desc: String,
        #[arg(long)]
        len: u64,
        #[arg(long)]
        fuel: u64,
    },
}

#[derive(Subcommand)]
enum KhatCommand {
    Halting(KhatArgs),
    Monotone(KhatArgs),
    Dl(KhatArgs),
}

#[derive(Args)]
struct KhatArgs {
    #[arg(long)]
    target: String,
    /// Cap in bits on program (or descriptor) length.
    #[arg(long)]
    max_len: u64,
    #[arg(long)]
    fuel: u64,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum CacheCommand {
    Stats {
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    Verify {
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum UniverseArg {
    All,
    Restricted,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Halting,
    Monotone,
}

/// Program literals: ASCII bits, or hex with explicit bit length.
fn parse_program(s: &str) -> Result<Program, Error> {
    if let Some(rest) = s.strip_prefix("hex:") {
        let (digits, len) = rest
            .rsplit_once(':')
            .ok_or_else(|| Error::Decode("hex program needs hex:<digits>:<bitlen>".into()))?;
        let len: usize = len
            .parse()
            .map_err(|_| Error::Decode("bad bit length".into()))?;
        let bytes = harness::cache::from_hex(digits)?;
        Ok(Program::new(BitString::from_packed(bytes, len)?))
    } else {
        Ok(Program::new(s.parse()?))
    }
}

fn emit(format: Format, value: serde_json::Value, text: String) {
    match format {
        Format::Jsonl => println!("{value}"),
        Format::Text => println!("{text}"),
    }
}

fn cache_dir_from(dir: Option<PathBuf>) -> Result<PathBuf, Error> {
    if let Some(dir) = dir {
        return Ok(dir);
    }
    match std::env::var(CACHE_DIR_ENV) {
        Ok(d) if !d.is_empty() => Ok(PathBuf::from(d)),
        _ => Err(Error::Config(format!(
            "no cache directory: pass --dir or set {CACHE_DIR_ENV}"
        ))),
    }
}

fn make_lab() -> Lab {
    match std::env::var(CACHE_DIR_ENV) {
        Ok(d) if !d.is_empty() => match DiskCache::open(std::path::Path::new(&d)) {
            Ok(cache) => Lab::with_disk_cache(cache),
            Err(_) => Lab::new(),
        },
        _ => Lab::new(),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let format = cli.format;
    match cli.command {
        Command::Vm { command } => match command {
            VmCommand::Run {
                program,
                input,
                fuel,
                max_out,
            } => {
                let p = parse_program(&program)?;
                let input: BitString = input.parse()?;
                let r = vm::run(&p, &input, fuel, max_out);
                emit(
                    format,
                    serde_json::json!({
                        "record": "vm-run",
                        "program": p.to_string(),
                        "input": input.to_string(),
                        "fuel": fuel,
                        "max_out": max_out,
                        "status": r.status.to_string(),
                        "steps_used": r.steps_used,
                        "output": r.output.to_string(),
                    }),
                    format!(
                        "status: {}\nsteps:  {}\noutput: {}",
                        r.status, r.steps_used, r.output
                    ),
                );
                Ok(0)
            }
            VmCommand::Disasm { program } => {
                let p = parse_program(&program)?;
                let listing = p.disassemble();
                emit(
                    format,
                    serde_json::json!({
                        "record": "vm-disasm",
                        "program": p.to_string(),
                        "listing": listing,
                    }),
                    listing.trim_end().to_string(),
                );
                Ok(0)
            }
        },
        Command::Seq { command } => match command {
            SeqCommand::Eval { desc, len, fuel } => {
                let g = dsl::generator_from_str(&desc)?;
                let lab = make_lab();
                let eval = dsl::eval_gen(&lab, &g, len, fuel);
                emit(
                    format,
                    serde_json::json!({
                        "record": "seq-eval",
                        "descriptor": dsl::gen_to_sexpr(&g),
                        "code": dsl::serialize_gen(&g).to_string(),
                        "len": len,
                        "fuel": fuel,
                        "prefix": eval.prefix.to_string(),
                        "truncated": eval.truncated,
                        "defaulted_predictions": eval.defaulted_predictions,
                    }),
                    eval.prefix.to_string(),
                );
                Ok(0)
            }
        },
        Command::Predict { pred, obs, fuel } => {
            let p = dsl::predictor_from_str(&pred)?;
            let obs: BitString = obs.parse()?;
            let lab = make_lab();
            let bit = predictors::predict(&lab, &p, &obs, fuel)?;
            emit(
                format,
                serde_json::json!({
                    "record": "predict",
                    "predictor": dsl::pred_to_sexpr(&p),
                    "code": dsl::serialize_pred(&p).to_string(),
                    "obs": obs.to_string(),
                    "fuel": fuel,
                    "prediction": bit,
                }),
                bit.to_string(),
            );
            Ok(0)
        }
        Command::Learns {
            pred,
            gen,
            burn_in,
            horizon,
            fuel,
        } => {
            let p = dsl::predictor_from_str(&pred)?;
            let g = dsl::generator_from_str(&gen)?;
            let lab = make_lab();
            let v = predictors::learns(&lab, &p, &g, burn_in, horizon, fuel)?;
            emit(
                format,
                serde_json::json!({
                    "record": "learns",
                    "predictor": dsl::pred_to_sexpr(&p),
                    "generator": dsl::gen_to_sexpr(&g),
                    "verdict": v,
                }),
                format!(
                    "learned: {}\nerrors: {}\nconvergence_step: {}\npartial: {}",
                    v.learned_at_horizon,
                    v.error_positions.len(),
                    v.convergence_step,
                    v.partial
                ),
            );
            Ok(0)
        }
        Command::Duel {
            pred,
            horizon,
            fuel,
        } => {
            let p = dsl::predictor_from_str(&pred)?;
            let lab = make_lab();
            let report = adversary::verify_defeat(&lab, &p, horizon, fuel);
            emit(
                format,
                serde_json::json!({ "record": "duel", "report": report }),
                format!(
                    "predictor: {}\nwrong: {}/{}\nall_wrong: {}\ncodes: predictor {} bits, diagonal {} bits",
                    report.predictor,
                    report.wrong_positions,
                    report.horizon,
                    report.all_wrong,
                    report.pred_code_bits,
                    report.diag_code_bits
                ),
            );
            Ok(if report.all_wrong { 0 } else { 1 })
        }
        Command::Khat { command } => {
            let lab = make_lab();
            let (variant, args) = match &command {
                KhatCommand::Halting(a) => ("halting", a),
                KhatCommand::Monotone(a) => ("monotone", a),
                KhatCommand::Dl(a) => ("dl", a),
            };
            let x: BitString = args.target.parse()?;
            let estimate = match command {
                KhatCommand::Halting(_) => complexity::khat_halting(&x, args.max_len, args.fuel),
                KhatCommand::Monotone(_) => complexity::khat_monotone(&x, args.max_len, args.fuel),
                KhatCommand::Dl(_) => complexity::khat_dl(&lab, &x, args.max_len, args.fuel),
            };
            let value = match estimate.value_bits {
                Some(v) => v.to_string(),
                None => format!("> {} (no witness at cap)", args.max_len),
            };
            let witness = match &estimate.witness {
                Some(complexity::Witness::Machine(p)) => p.to_string(),
                Some(complexity::Witness::Generator(s)) => s.clone(),
                Some(complexity::Witness::Predictor(s)) => s.clone(),
                None => "-".into(),
            };
            emit(
                format,
                serde_json::json!({
                    "record": "khat",
                    "variant": variant,
                    "target": x.to_string(),
                    "estimate": estimate,
                }),
                format!("khat_{variant}: {value}\nwitness: {witness}"),
            );
            Ok(0)
        }
        Command::Kdot {
            gen,
            max_bits,
            burn_in,
            horizon,
            fuel,
            universe,
        } => {
            let g = dsl::generator_from_str(&gen)?;
            let lab = make_lab();
            let universe = match universe {
                UniverseArg::All => PredictorUniverse::All,
                UniverseArg::Restricted => PredictorUniverse::NoDiagNoMeta,
            };
            let estimate =
                complexity::kdot_hat(&lab, &g, max_bits, burn_in, horizon, fuel, universe)?;
            let value = match estimate.value_bits {
                Some(v) => v.to_string(),
                None => format!("> {max_bits} (no witness at cap)"),
            };
            let witness = match &estimate.witness {
                Some(complexity::Witness::Predictor(s)) => s.clone(),
                _ => "-".into(),
            };
            emit(
                format,
                serde_json::json!({
                    "record": "kdot",
                    "generator": dsl::gen_to_sexpr(&g),
                    "estimate": estimate,
                }),
                format!("kdot_hat: {value}\nwitness: {witness}"),
            );
            Ok(0)
        }
        Command::Incompressible { len, fuel, mode } => {
            let lab = make_lab();
            let mode = match mode {
                ModeArg::Halting => IncompressibleMode::Halting,
                ModeArg::Monotone => IncompressibleMode::Monotone,
            };
            let x = complexity::find_incompressible(&lab, len, fuel, mode)?;
            emit(
                format,
                serde_json::json!({
                    "record": "incompressible",
                    "len": len,
                    "fuel": fuel,
                    "mode": match mode {
                        IncompressibleMode::Halting => "halting",
                        IncompressibleMode::Monotone => "monotone",
                    },
                    "string": x.to_string(),
                }),
                x.to_string(),
            );
            Ok(0)
        }
        Command::Catalog {
            n_bits,
            fuel,
            horizon,
        } => {
            let lab = make_lab();
            let catalog = complexity::build_catalog(&lab, n_bits, fuel, horizon);
            match format {
                Format::Jsonl => {
                    for e in &catalog.entries {
                        println!(
                            "{}",
                            serde_json::json!({
                                "record": "catalog-entry",
                                "program": e.program.to_string(),
                                "rank": e.rank,
                                "prefix": e.prefix.to_string(),
                                "k_hat_bits": e.k_hat_bits,
                                "t": e.profile.per_symbol_steps,
                            })
                        );
                    }
                    println!(
                        "{}",
                        serde_json::json!({
                            "record": "catalog-summary",
                            "n_bits": n_bits, "fuel": fuel, "horizon": horizon,
                            "entries": catalog.entries.len(), "h": catalog.h,
                        })
                    );
                }
                Format::Text => {
                    for e in &catalog.entries {
                        println!(
                            "{}  {}  ({} bits)",
                            e.program,
                            e.prefix.prefix(32),
                            e.k_hat_bits
                        );
                    }
                    println!("entries: {}  h: {}", catalog.entries.len(), catalog.h);
                }
            }
            Ok(0)
        }
        Command::Experiment { command } => match command {
            ExperimentCommand::Run { config } => {
                let cfg = ExperimentConfig::load(&config)?;
                let (report, paths) = harness::run_and_write(&cfg)?;
                match format {
                    Format::Jsonl => print!("{}", report.to_jsonl()),
                    Format::Text => {
                        print!("{}", report.to_text());
                        for p in paths {
                            println!("wrote {}", p.display());
                        }
                    }
                }
                Ok(if report.all_pass() { 0 } else { 1 })
            }
        },
        Command::Cache { command } => {
            let (dir, verify) = match command {
                CacheCommand::Stats { dir } => (dir, false),
                CacheCommand::Verify { dir } => (dir, true),
            };
            let cache = DiskCache::open(&cache_dir_from(dir)?)?;
            let stats = if verify { cache.verify()? } else { cache.stats()? };
            emit(
                format,
                serde_json::json!({
                    "record": if verify { "cache-verify" } else { "cache-stats" },
                    "stats": stats,
                }),
                format!(
                    "shards: {}  records: {}  bytes: {}  corrupt: {}",
                    stats.shards, stats.records, stats.bytes, stats.corrupt_lines
                ),
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers;
    let body = move || match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    };
    if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(body),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        }
    } else {
        body()
    }
}
