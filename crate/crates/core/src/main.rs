use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mechcheck::checker::{self, CheckConfig, GeneralGrid, Mode, TruthGrid, Verdict};
use mechcheck::document::{self, GridSpec, ReportFile};
use mechcheck::ratio;
use mechcheck::rsm::Rsm;
use mechcheck::vcg::PaymentRule;
use mechcheck::{Error, Scenario};

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "mechcheck", version, about = "Exact checks for VCG and replica-surrogate matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one property check.
    #[command(after_help = "A pass certifies the property only for the scenarios or grid supplied.")]
    Check {
        property: Property,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        run: RunOpts,
        /// Payment rule inside the mechanism; `first-price` is a negative control.
        #[arg(long, value_enum, default_value_t = Payment::Vcg)]
        payment: Payment,
    },
    /// Evaluate a quantity on a scenario.
    Eval {
        #[command(subcommand)]
        what: EvalCommand,
    },
    /// Parse and validate a scenario or grid document.
    Validate {
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Expected RSM utility of an agent with type `--true-type` bidding `--bid`.
    Util {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long = "true-type")]
        true_type: String,
        #[arg(long)]
        bid: String,
        /// 1-based agent position.
        #[arg(long, default_value_t = 1)]
        agent: usize,
        #[command(flatten)]
        run: RunOpts,
    },
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Grid document for the VCG checks.
    #[arg(long, conflicts_with = "scenario")]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct RunOpts {
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; MECHCHECK_JOBS overrides this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Output::Text)]
    output: Output,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum distribution entries exact mode may materialize.
    #[arg(long, default_value_t = checker::DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    VcgTruth,
    VcgPerm,
    DistPreserve,
    StageChain,
    Bic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Payment {
    Vcg,
    FirstPrice,
}

impl Payment {
    fn rule(self) -> PaymentRule {
        match self {
            Payment::Vcg => PaymentRule::Clarke,
            Payment::FirstPrice => PaymentRule::FirstPrice,
        }
    }
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::BudgetExceeded { .. } => EXIT_BUDGET,
                _ => EXIT_USAGE,
            })
        }
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Check {
            property,
            input,
            run,
            payment,
        } => check(property, &input, &run, payment.rule()),
        Command::Eval {
            what:
                EvalCommand::Util {
                    scenario,
                    true_type,
                    bid,
                    agent,
                    run,
                },
        } => eval_util(&scenario, &true_type, &bid, agent, &run),
        Command::Validate { input } => validate(&input),
    }
}

fn config(run: &RunOpts) -> Result<CheckConfig, Failure> {
    let jobs = match std::env::var("MECHCHECK_JOBS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("MECHCHECK_JOBS must be a positive integer, got {v:?}")))?,
        Err(_) => run.jobs,
    };
    let cfg = CheckConfig {
        mode: match run.mode {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Mc => Mode::MonteCarlo,
        },
        samples: run.samples,
        seed: run.seed,
        jobs,
        budget: run.budget,
        ..CheckConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<(Scenario, Vec<u8>), Failure> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Lib(Error::Parse { key: "$".into(), msg: "file is not UTF-8".into() }))?;
    Ok((document::parse_scenario_str(&text)?, bytes))
}

fn load_grid(path: &Path) -> Result<(GridSpec, PaymentRule, Vec<u8>), Failure> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Lib(Error::Parse { key: "$".into(), msg: "file is not UTF-8".into() }))?;
    let (grid, rule) = document::parse_grid_str(&text)?;
    Ok((grid, rule, bytes))
}

fn emit(run: &RunOpts, text: &str) -> Result<(), Failure> {
    match &run.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_scenario(input: &Input) -> Result<(Scenario, Vec<u8>), Failure> {
    match &input.scenario {
        Some(p) => load_scenario(p),
        None => Err(Failure::Usage("this check needs --scenario".into())),
    }
}

fn check(property: Property, input: &Input, run: &RunOpts, payment: PaymentRule) -> Outcome {
    let cfg = config(run)?;
    let scenario_only = matches!(property, Property::DistPreserve | Property::StageChain | Property::Bic);
    if scenario_only && input.grid.is_some() {
        return Err(Failure::Usage("this check takes --scenario, not --grid".into()));
    }
    let vcg_check = matches!(property, Property::VcgTruth | Property::VcgPerm);
    if vcg_check && cfg.mode == Mode::MonteCarlo {
        return Err(Failure::Usage("VCG checks run in exact mode only".into()));
    }
    if payment != PaymentRule::Clarke && !matches!(property, Property::VcgTruth | Property::Bic) {
        return Err(Failure::Usage("--payment applies to vcg-truth and bic only".into()));
    }
    let (report, bytes, rule) = match property {
        Property::VcgTruth => {
            let (grid, rule, bytes) = match (&input.grid, &input.scenario) {
                (Some(g), _) => {
                    let (spec, file_rule, bytes) = load_grid(g)?;
                    let rule = if payment == PaymentRule::Clarke { file_rule } else { payment };
                    let grid = match spec.truth_grid() {
                        TruthGrid::General(mut g) => {
                            g.rule = rule;
                            TruthGrid::General(g)
                        }
                        _ if rule != PaymentRule::Clarke => {
                            return Err(Failure::Usage("first-price payments apply to single-item grids only".into()))
                        }
                        other => other,
                    };
                    (grid, rule, bytes)
                }
                (None, Some(s)) => {
                    let (sc, bytes) = load_scenario(s)?;
                    (TruthGrid::General(GeneralGrid::from_scenario(&sc, payment)), payment, bytes)
                }
                (None, None) => return Err(Failure::Usage("vcg-truth needs --grid or --scenario".into())),
            };
            (checker::check_vcg_truth(&grid, &cfg), bytes, rule)
        }
        Property::VcgPerm => {
            let Some(g) = &input.grid else {
                return Err(Failure::Usage("vcg-perm needs --grid".into()));
            };
            let (spec, _, bytes) = load_grid(g)?;
            let Some(ms) = spec.matrices() else {
                return Err(Failure::Usage("vcg-perm needs a matching, matrices or random grid".into()));
            };
            (checker::check_vcg_perm(&ms, &cfg), bytes, PaymentRule::Clarke)
        }
        Property::DistPreserve => {
            let (sc, bytes) = require_scenario(input)?;
            (checker::check_dist_preservation(&sc, &cfg)?, bytes, PaymentRule::Clarke)
        }
        Property::StageChain => {
            let (sc, bytes) = require_scenario(input)?;
            (checker::check_stage_chain(&sc, &cfg)?, bytes, PaymentRule::Clarke)
        }
        Property::Bic => {
            let (sc, bytes) = require_scenario(input)?;
            (checker::check_bic_with(&sc, &cfg, payment)?, bytes, payment)
        }
    };
    let code = if report.verdict == Verdict::Fail { EXIT_VIOLATION } else { 0 };
    let text = match run.output {
        Output::Text => report.to_text(),
        Output::Json => {
            let mut file = ReportFile::new(report, &bytes);
            file.settings.insert("mode".into(), mode_name(&cfg).into());
            if cfg.mode == Mode::MonteCarlo {
                file.settings.insert("samples".into(), cfg.samples.to_string());
                file.settings.insert("seed".into(), cfg.seed.to_string());
            }
            if rule != PaymentRule::Clarke {
                file.settings.insert("payment".into(), rule.name().into());
            }
            file.to_json()
        }
    };
    emit(run, &text)?;
    Ok(code)
}

fn mode_name(cfg: &CheckConfig) -> &'static str {
    match cfg.mode {
        Mode::Exact => "exact",
        Mode::MonteCarlo => "mc",
    }
}

fn eval_util(path: &Path, true_type: &str, bid: &str, agent: usize, run: &RunOpts) -> Outcome {
    let cfg = config(run)?;
    let (sc, bytes) = load_scenario(path)?;
    let lookup = |label: &str, key: &str| {
        sc.type_by_label(label)
            .ok_or_else(|| Failure::Usage(format!("{key}: unknown type {label:?}")))
    };
    let t = lookup(true_type, "--true-type")?;
    let b = lookup(bid, "--bid")?;
    if agent == 0 || agent > sc.n {
        return Err(Failure::Usage(format!("--agent must lie in 1..={}", sc.n)));
    }
    let rotated = sc.rotate_to_front(agent)?;
    let (value, radius) = match cfg.mode {
        Mode::Exact => {
            checker::check_budget(checker::dist_cost(&sc) * sc.n as u128, &cfg)?;
            (Rsm::new(rotated).my_util(t, b)?, None)
        }
        Mode::MonteCarlo => {
            let est = checker::estimate_utility(&rotated, t, b, &cfg)?;
            (est.estimate, Some(est.radius))
        }
    };
    let text = match run.output {
        Output::Text => {
            let mut s = format!(
                "my_util(agent={agent}, true_type={true_type}, bid={bid}) = {}",
                ratio::format(&value)
            );
            if let Some(r) = &radius {
                s += &format!(" +/- {}", ratio::format(r));
            }
            s + "\n"
        }
        Output::Json => {
            let mut v = json!({
                "tool": "mechcheck",
                "version": document::TOOL_VERSION,
                "input_digest": document::digest(&bytes),
                "mode": mode_name(&cfg),
                "agent": agent,
                "true_type": true_type,
                "bid": bid,
                "value": ratio::format(&value),
            });
            if let Some(r) = &radius {
                v["radius"] = json!(ratio::format(r));
                v["samples"] = json!(cfg.samples);
                v["seed"] = json!(cfg.seed);
            }
            serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
        }
    };
    emit(run, &text)?;
    Ok(0)
}

fn validate(input: &Input) -> Outcome {
    match (&input.scenario, &input.grid) {
        (Some(p), _) => {
            let (sc, _) = load_scenario(p)?;
            println!(
                "ok: {} agents, {} replicas, {} types, {} outcomes, {} algorithm",
                sc.n,
                sc.m,
                sc.num_types(),
                sc.outcomes.len(),
                sc.algorithm.kind()
            );
        }
        (None, Some(p)) => {
            load_grid(p)?;
            println!("ok: grid");
        }
        (None, None) => return Err(Failure::Usage("validate needs --scenario or --grid".into())),
    }
    Ok(0)
}
