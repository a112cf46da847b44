//! Experiment configuration, execution, caching, and report generation for
//! the replication suites.
//!
//! Configurations are versioned TOML (see [`ExperimentConfig`]); every budget
//! an experiment uses must be stated explicitly, and the resolved
//! configuration is echoed into every report so no default is silent.
//! Reports are deterministic for a given configuration and code version,
//! regardless of worker count or cache warmth.

pub mod cache;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary;
use crate::bits::BitString;
use crate::complexity::{self, PredictorUniverse};
use crate::dsl::{self, GeneratorDesc, PredictorDesc};
use crate::enumerate::{self, DescriptorKind, DescriptorValue};
use crate::error::{Error, Result};
use crate::exec::Lab;
use crate::predictors;
use crate::vm;
use cache::DiskCache;
use report::{Claim, Report, Row};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the cache directory from the config.
pub const CACHE_DIR_ENV: &str = "MONOLAB_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DuelSuite,
    ConsistCoverage,
    SpeedCoverage,
    Theorem2Chain,
    KhatSweep,
    KdotSweep,
    CatalogBuild,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DuelSuite => "duel-suite",
            ExperimentKind::ConsistCoverage => "consist-coverage",
            ExperimentKind::SpeedCoverage => "speed-coverage",
            ExperimentKind::Theorem2Chain => "theorem2-chain",
            ExperimentKind::KhatSweep => "khat-sweep",
            ExperimentKind::KdotSweep => "kdot-sweep",
            ExperimentKind::CatalogBuild => "catalog-build",
        }
    }
}

/// Machine budgets. Each experiment kind validates that the budgets it needs
/// are present; nothing is defaulted silently.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Budgets {
    /// Step budget for predictions and generator evaluation.
    pub fuel: Option<u64>,
    /// Step budget for pool sweeps (productivity counts, catalog builds).
    pub pool_fuel: Option<u64>,
    pub horizon: Option<u64>,
    pub burn_in: Option<u64>,
    /// Program-length cap for the consistent-set pool and catalogs, in bits.
    pub n_bits: Option<u32>,
    /// Descriptor-length cap for sweeps, in bits.
    pub max_bits: Option<u64>,
    /// Symbol count defining pool productivity.
    pub probe: Option<u64>,
    /// Dovetail quantum, echoed for reproducibility.
    pub quantum: Option<u64>,
    /// Predictor universe for descriptor sweeps: "all" or "restricted".
    pub universe: Option<String>,
}

impl Budgets {
    fn need(&self, field: &str) -> Result<u64> {
        let v = match field {
            "fuel" => self.fuel,
            "pool_fuel" => self.pool_fuel,
            "horizon" => self.horizon,
            "burn_in" => self.burn_in,
            "max_bits" => self.max_bits,
            "probe" => self.probe,
            _ => None,
        };
        v.ok_or_else(|| Error::Config(format!("budgets.{field} is required and has no default")))
    }

    fn need_n_bits(&self) -> Result<u32> {
        self.n_bits
            .ok_or_else(|| Error::Config("budgets.n_bits is required and has no default".into()))
    }

    fn universe(&self) -> Result<PredictorUniverse> {
        match self.universe.as_deref() {
            Some("all") => Ok(PredictorUniverse::All),
            Some("restricted") => Ok(PredictorUniverse::NoDiagNoMeta),
            Some(other) => Err(Error::Config(format!(
                "budgets.universe must be \"all\" or \"restricted\", got {other:?}"
            ))),
            None => Err(Error::Config(
                "budgets.universe is required and has no default".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Descriptors {
    /// Predictor descriptors: raw bits or s-expressions.
    #[serde(default)]
    pub predictors: Vec<String>,
    /// Generator descriptors: raw bits or s-expressions.
    #[serde(default)]
    pub generators: Vec<String>,
    /// Target bit strings for complexity sweeps.
    #[serde(default)]
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputCfg {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CacheCfg {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: ExperimentKind,
    /// 0 means the default thread pool.
    #[serde(default)]
    pub workers: usize,
    pub budgets: Budgets,
    #[serde(default)]
    pub descriptors: Descriptors,
    pub output: OutputCfg,
    #[serde(default)]
    pub cache: CacheCfg,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config version {} not supported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Cache directory after applying the environment override.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
            if !dir.is_empty() {
                return Some(PathBuf::from(dir));
            }
        }
        self.cache.dir.clone()
    }
}

fn parse_predictors(specs: &[String]) -> Result<Vec<PredictorDesc>> {
    specs.iter().map(|s| dsl::predictor_from_str(s)).collect()
}

fn parse_generators(specs: &[String]) -> Result<Vec<GeneratorDesc>> {
    specs.iter().map(|s| dsl::generator_from_str(s)).collect()
}

fn make_lab(cfg: &ExperimentConfig) -> Result<Lab> {
    match cfg.resolved_cache_dir() {
        Some(dir) => Ok(Lab::with_disk_cache(DiskCache::open(&dir)?)),
        None => Ok(Lab::new()),
    }
}

/// Runs the configured experiment and produces its report. Deterministic
/// given the configuration; the worker count changes wall time only.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let run = || -> Result<Report> {
        let lab = make_lab(cfg)?;
        match cfg.kind {
            ExperimentKind::DuelSuite => duel_suite(&lab, cfg),
            ExperimentKind::ConsistCoverage => consist_coverage(&lab, cfg),
            ExperimentKind::SpeedCoverage => speed_coverage(&lab, cfg),
            ExperimentKind::Theorem2Chain => theorem2_chain(&lab, cfg),
            ExperimentKind::KhatSweep => khat_sweep(&lab, cfg),
            ExperimentKind::KdotSweep => kdot_sweep(&lab, cfg),
            ExperimentKind::CatalogBuild => catalog_build(&lab, cfg),
        }
    };
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(run)
    } else {
        run()
    }
}

/// Runs the experiment and writes `<kind>.{jsonl,csv,txt}` into the output
/// directory. Returns the report and the written paths.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<(Report, Vec<PathBuf>)> {
    let report = run_experiment(cfg)?;
    let paths = report.write(&cfg.output.dir, cfg.kind.name())?;
    Ok((report, paths))
}

fn base_report(cfg: &ExperimentConfig) -> Report {
    Report {
        kind: cfg.kind.name().into(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        rows: Vec::new(),
        claims: Vec::new(),
    }
}

fn row(pairs: &[(&str, String)]) -> Row {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect::<BTreeMap<_, _>>()
}

fn duel_suite(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let fuel = cfg.budgets.need("fuel")?;
    let horizon = cfg.budgets.need("horizon")?;
    let predictors = parse_predictors(&cfg.descriptors.predictors)?;
    if predictors.is_empty() {
        return Err(Error::Config("duel-suite needs descriptors.predictors".into()));
    }
    let mut report = base_report(cfg);
    let mut all = true;
    for p in &predictors {
        let defeat = adversary::verify_defeat(lab, p, horizon, fuel);
        all &= defeat.all_wrong;
        report.rows.push(row(&[
            ("predictor", defeat.predictor.clone()),
            ("code", defeat.predictor_code.to_string()),
            ("horizon", defeat.horizon.to_string()),
            ("fuel", defeat.fuel.to_string()),
            ("wrong_positions", defeat.wrong_positions.to_string()),
            ("all_wrong", defeat.all_wrong.to_string()),
            ("pred_code_bits", defeat.pred_code_bits.to_string()),
            ("diag_code_bits", defeat.diag_code_bits.to_string()),
            ("defaulted", defeat.defaulted_predictions.to_string()),
        ]));
    }
    report.claims.push(Claim {
        name: "diagonal-defeats-every-predictor".into(),
        pass: all,
        detail: format!("{} duels at horizon {horizon}", report.rows.len()),
    });
    let constant_ok = report
        .rows
        .iter()
        .all(|r| r["diag_code_bits"].parse::<u64>().unwrap() == r["pred_code_bits"].parse::<u64>().unwrap() + 2);
    report.claims.push(Claim {
        name: "diagonal-constant-is-two-bits".into(),
        pass: constant_ok,
        detail: "|DIAG(p)| = |p| + 2 on every row".into(),
    });
    Ok(report)
}

fn consist_coverage(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let n_bits = cfg.budgets.need_n_bits()?;
    let pool_fuel = cfg.budgets.need("pool_fuel")?;
    let probe = cfg.budgets.need("probe")?;
    let fuel = cfg.budgets.need("fuel")?;
    let burn_in = cfg.budgets.need("burn_in")?;
    let horizon = cfg.budgets.need("horizon")?;
    let h = predictors::compute_h(lab, n_bits, pool_fuel, probe);
    let catalog = complexity::build_catalog(lab, n_bits, pool_fuel, probe);
    let predictor = PredictorDesc::Consist { n: n_bits, h };
    let mut report = base_report(cfg);
    let mut all = true;
    let mut max_convergence = 0u64;
    for entry in &catalog.entries {
        let g = GeneratorDesc::Prog(entry.program.clone());
        let verdict = predictors::learns(lab, &predictor, &g, burn_in, horizon, fuel)?;
        all &= verdict.learned_at_horizon;
        max_convergence = max_convergence.max(verdict.convergence_step);
        report.rows.push(row(&[
            ("program", entry.program.to_string()),
            ("prefix", entry.prefix.prefix(32).to_string()),
            ("learned", verdict.learned_at_horizon.to_string()),
            ("convergence_step", verdict.convergence_step.to_string()),
            ("errors", verdict.error_positions.len().to_string()),
        ]));
    }
    report.claims.push(Claim {
        name: "consist-learns-whole-catalog".into(),
        pass: all,
        detail: format!(
            "h = {h}, {} sequences, max convergence step {max_convergence}",
            catalog.entries.len()
        ),
    });
    let size = dsl::serialize_pred(&predictor).len() as f64;
    let bound_base = n_bits as f64 + 2.0 * (n_bits as f64).log2();
    report.claims.push(Claim {
        name: "consist-size-within-log-bound".into(),
        pass: size <= bound_base + 12.0,
        detail: format!(
            "|CONSIST({n_bits}, {h})| = {size} bits vs {n_bits} + 2 log2 {n_bits} + 12 = {:.1}",
            bound_base + 12.0
        ),
    });
    Ok(report)
}

fn speed_coverage(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let n_bits = cfg.budgets.need_n_bits()?;
    let pool_fuel = cfg.budgets.need("pool_fuel")?;
    let probe = cfg.budgets.need("probe")?;
    let fuel = cfg.budgets.need("fuel")?;
    let burn_in = cfg.budgets.need("burn_in")?;
    let horizon = cfg.budgets.need("horizon")?;
    let catalog = complexity::build_catalog(lab, n_bits, pool_fuel, probe);
    let mut report = base_report(cfg);
    let mut all = true;
    for entry in &catalog.entries {
        let fast = entry.profile.below_power_curve(4);
        let g = GeneratorDesc::Prog(entry.program.clone());
        let verdict = predictors::learns(lab, &PredictorDesc::Speed, &g, burn_in, horizon, fuel)?;
        if fast {
            all &= verdict.learned_at_horizon;
        }
        report.rows.push(row(&[
            ("program", entry.program.to_string()),
            ("prefix", entry.prefix.prefix(32).to_string()),
            ("fast", fast.to_string()),
            ("learned", verdict.learned_at_horizon.to_string()),
            ("convergence_step", verdict.convergence_step.to_string()),
        ]));
    }
    report.claims.push(Claim {
        name: "speed-learns-every-fast-sequence".into(),
        pass: all,
        detail: format!("{} catalog sequences at horizon {horizon}", report.rows.len()),
    });
    Ok(report)
}

fn theorem2_chain(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let n_bits = cfg.budgets.need_n_bits()?;
    let pool_fuel = cfg.budgets.need("pool_fuel")?;
    let probe = cfg.budgets.need("probe")?;
    let fuel = cfg.budgets.need("fuel")?;
    let burn_in = cfg.budgets.need("burn_in")?;
    let horizon = cfg.budgets.need("horizon")?;
    let max_bits = cfg.budgets.need("max_bits")?;
    let universe = cfg.budgets.universe()?;

    let h = predictors::compute_h(lab, n_bits, pool_fuel, probe);
    let base = PredictorDesc::Consist { n: n_bits, h };
    let omega = GeneratorDesc::Diag(Box::new(base.clone()));

    let mut report = base_report(cfg);

    // (a) the generating predictor errs everywhere on its own diagonal.
    let defeat = adversary::verify_defeat(lab, &base, horizon, fuel);
    report.claims.push(Claim {
        name: "chain-a-generating-predictor-errs-everywhere".into(),
        pass: defeat.all_wrong,
        detail: format!(
            "{}/{} wrong for {}",
            defeat.wrong_positions, horizon, defeat.predictor
        ),
    });

    // (b) the description-language upper bound is the predictor size plus 2.
    let base_bits = dsl::serialize_pred(&base).len() as u64;
    let omega_bits = dsl::serialize_gen(&omega).len() as u64;
    report.claims.push(Claim {
        name: "chain-b-dl-upper-bound-is-base-plus-two".into(),
        pass: omega_bits == base_bits + 2,
        detail: format!("|DIAG(base)| = {omega_bits}, |base| = {base_bits}"),
    });

    // (c) exhaustive sweep over the restricted short-descriptor universe.
    let mut learners = Vec::new();
    for (code, value) in enumerate::descriptor_space(DescriptorKind::Predictor, max_bits as u32) {
        let DescriptorValue::Predictor(p) = value else {
            continue;
        };
        if !universe.admits(&p) {
            continue;
        }
        let verdict = predictors::learns(lab, &p, &omega, burn_in, horizon, fuel)?;
        if verdict.learned_at_horizon {
            learners.push(p.to_string());
        }
        report.rows.push(row(&[
            ("candidate", p.to_string()),
            ("code", code.to_string()),
            ("bits", code.len().to_string()),
            ("learned", verdict.learned_at_horizon.to_string()),
            ("errors", verdict.error_positions.len().to_string()),
            ("convergence_step", verdict.convergence_step.to_string()),
        ]));
    }
    report.claims.push(Claim {
        name: "chain-c-no-short-predictor-learns-the-diagonal".into(),
        pass: learners.is_empty(),
        detail: if learners.is_empty() {
            format!("no descriptor of <= {max_bits} bits learned the diagonal")
        } else {
            format!("learned by: {}", learners.join(", "))
        },
    });
    Ok(report)
}

fn khat_sweep(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let fuel = cfg.budgets.need("fuel")?;
    let max_bits = cfg.budgets.need("max_bits")?;
    if cfg.descriptors.targets.is_empty() {
        return Err(Error::Config("khat-sweep needs descriptors.targets".into()));
    }
    let mut report = base_report(cfg);
    let mut witnesses_ok = true;
    let mut ordering_ok = true;
    for target in &cfg.descriptors.targets {
        let x: BitString = target.parse()?;
        let halting = complexity::khat_halting(&x, max_bits, fuel);
        let monotone = complexity::khat_monotone(&x, max_bits, fuel);
        let dl = complexity::khat_dl(lab, &x, max_bits.min(20), fuel);
        if let (Some(m), Some(h)) = (monotone.value_bits, halting.value_bits) {
            ordering_ok &= m <= h;
        }
        if halting.value_bits.is_some() && monotone.value_bits.is_none() {
            ordering_ok = false;
        }
        for est in [&halting, &monotone] {
            if let Some(complexity::Witness::Machine(p)) = &est.witness {
                let r = vm::run(p, &BitString::new(), fuel, x.len() as u64 + 1);
                witnesses_ok &= r.output.starts_with(&x) || r.output == x;
            }
        }
        let fmt = |e: &complexity::ComplexityEstimate| match e.value_bits {
            Some(v) => v.to_string(),
            None => format!(">{max_bits}"),
        };
        report.rows.push(row(&[
            ("target", x.to_string()),
            ("khat_halting", fmt(&halting)),
            ("khat_monotone", fmt(&monotone)),
            ("khat_dl", fmt(&dl)),
            (
                "witness_monotone",
                match &monotone.witness {
                    Some(complexity::Witness::Machine(p)) => p.to_string(),
                    _ => "-".into(),
                },
            ),
        ]));
    }
    report.claims.push(Claim {
        name: "khat-witnesses-reverify".into(),
        pass: witnesses_ok,
        detail: "every witness reproduces its target under the recorded budgets".into(),
    });
    report.claims.push(Claim {
        name: "khat-monotone-at-most-halting".into(),
        pass: ordering_ok,
        detail: "a halting witness is also a prefix witness".into(),
    });
    Ok(report)
}

fn kdot_sweep(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let fuel = cfg.budgets.need("fuel")?;
    let max_bits = cfg.budgets.need("max_bits")?;
    let burn_in = cfg.budgets.need("burn_in")?;
    let horizon = cfg.budgets.need("horizon")?;
    let universe = cfg.budgets.universe()?;
    let generators = parse_generators(&cfg.descriptors.generators)?;
    if generators.is_empty() {
        return Err(Error::Config("kdot-sweep needs descriptors.generators".into()));
    }
    let mut report = base_report(cfg);
    let mut witnesses_ok = true;
    for g in &generators {
        let estimate = complexity::kdot_hat(lab, g, max_bits, burn_in, horizon, fuel, universe)?;
        if let Some(complexity::Witness::Predictor(sexpr)) = &estimate.witness {
            let p = dsl::predictor_from_str(sexpr)?;
            let verdict = predictors::learns(lab, &p, g, burn_in, horizon, fuel)?;
            witnesses_ok &= verdict.learned_at_horizon;
        }
        report.rows.push(row(&[
            ("generator", dsl::gen_to_sexpr(g)),
            (
                "kdot_hat",
                match estimate.value_bits {
                    Some(v) => v.to_string(),
                    None => format!(">{max_bits}"),
                },
            ),
            (
                "witness",
                match &estimate.witness {
                    Some(complexity::Witness::Predictor(s)) => s.clone(),
                    _ => "-".into(),
                },
            ),
            ("exhausted", estimate.exhausted.to_string()),
        ]));
    }
    report.claims.push(Claim {
        name: "kdot-witnesses-reverify".into(),
        pass: witnesses_ok,
        detail: "every witness learns its sequence under the recorded budgets".into(),
    });
    Ok(report)
}

fn catalog_build(lab: &Lab, cfg: &ExperimentConfig) -> Result<Report> {
    let n_bits = cfg.budgets.need_n_bits()?;
    let pool_fuel = cfg.budgets.need("pool_fuel")?;
    let horizon = cfg.budgets.need("horizon")?;
    let catalog = complexity::build_catalog(lab, n_bits, pool_fuel, horizon);
    let mut report = base_report(cfg);
    let mut verify_ok = true;
    for entry in &catalog.entries {
        let r = vm::run(&entry.program, &BitString::new(), pool_fuel, horizon);
        verify_ok &= r.output == entry.prefix;
        report.rows.push(row(&[
            ("program", entry.program.to_string()),
            ("rank", entry.rank.to_string()),
            ("prefix", entry.prefix.prefix(48).to_string()),
            ("k_hat_bits", entry.k_hat_bits.to_string()),
            (
                "t_last",
                entry
                    .profile
                    .per_symbol_steps
                    .last()
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "-".into()),
            ),
        ]));
    }
    report.claims.push(Claim {
        name: "catalog-entries-reverify".into(),
        pass: verify_ok,
        detail: format!("{} entries, h = {}", catalog.entries.len(), catalog.h),
    });
    let h = predictors::compute_h(lab, n_bits, pool_fuel, horizon);
    report.claims.push(Claim {
        name: "catalog-h-matches-productivity-count".into(),
        pass: h == catalog.h,
        detail: format!("h = {} both ways", catalog.h),
    });
    Ok(report)
}
