use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use posthoc::admiss::{
    certify_c_admissible_binary, certify_c_admissible_randomized, certify_g_admissible, certify_u_admissible,
    improve, CertifyOptions, Strategy,
};
use posthoc::bayes::{bayes_posthoc_decision, bayes_risk, bayes_type1_risk, lambda_calibrated_decision, BayesProblem};
use posthoc::doc::{label_text, parse_problem};
use posthoc::evar::EVariable;
use posthoc::experiments::{self, Experiment, ExperimentConfig, ProblemSource};
use posthoc::problem::TestingProblem;
use posthoc::risk::{constant_adversary, power_curve, type1_risk, type2_risk};
use posthoc::table::{Cell, Format, Table};
use posthoc::testfam::{binary_from_evariable, canonical_from_evariable, decision_curve, Mode, TestFamily};
use posthoc::{Error, Result};

const EXIT_INVALID: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "posthoc", version, about = "Post-hoc hypothesis testing with data-dependent levels")]
struct Cli {
    /// Seed for Monte Carlo experiments.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Randomized,
    Binary,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Randomized => Mode::Randomized,
            ModeArg::Binary => Mode::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GammaArg {
    U,
    C,
    G,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Canonicalize,
    Sharpen,
    Compatibilize,
    RaoBlackwell,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    RovingAlpha,
    NpRecovery,
    LrReport,
    RbGain,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::RovingAlpha => Experiment::RovingAlpha,
            ExperimentArg::NpRecovery => Experiment::NpRecovery,
            ExperimentArg::LrReport => Experiment::LrReport,
            ExperimentArg::RbGain => Experiment::RbGain,
        }
    }
}

/// The test family to evaluate: an explicit family, the canonical family of
/// an e-variable, or by default the canonical likelihood-ratio family.
#[derive(clap::Args)]
struct FamilyArgs {
    /// Problem document (discrete or continuous).
    problem: PathBuf,
    /// Test family document `{"mode", "matrix"}`.
    #[arg(long, conflicts_with = "evariable")]
    family: Option<PathBuf>,
    /// E-variable as a JSON array aligned with the support.
    #[arg(long)]
    evariable: Option<PathBuf>,
    /// Canonical representation built from the e-variable.
    #[arg(long, value_enum, default_value = "randomized")]
    mode: ModeArg,
}

impl FamilyArgs {
    fn load(&self) -> Result<(TestingProblem, TestFamily)> {
        let p = parse_problem(&read(&self.problem)?)?;
        let t = match (&self.family, &self.evariable) {
            (Some(path), _) => serde_json::from_str(&read(path)?)?,
            (None, e) => {
                let e = match e {
                    Some(path) => serde_json::from_str::<EVariable>(&read(path)?)?,
                    None => EVariable::likelihood_ratio(&p),
                };
                match Mode::from(self.mode) {
                    Mode::Randomized => canonical_from_evariable(&e, &p)?,
                    Mode::Binary => binary_from_evariable(&e, &p)?,
                }
            }
        };
        t.check_shape(&p)?;
        Ok((p, t))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Type-I risk with per-point contributions and the witness scenario.
    Risk(FamilyArgs),
    /// Power and type-II risk at every constant scenario.
    Power(FamilyArgs),
    /// Likelihood-ratio thresholds of a monotone binary family.
    Curve(FamilyArgs),
    /// Admissibility certificate as JSON.
    Check {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum)]
        gamma: GammaArg,
        /// Include the strictly preferable competitor, if one was found.
        #[arg(long)]
        emit_counterexample: bool,
    },
    /// Apply an improvement and print the resulting family as JSON.
    Improve {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Statistic labels (JSON array) for Rao-Blackwellization.
        #[arg(long, required_if_eq("strategy", "rao-blackwell"))]
        statistic: Option<PathBuf>,
    },
    /// Bayes post-hoc decisions at every constant scenario.
    Bayes {
        /// Bayes problem document.
        problem: PathBuf,
        /// Tilt the type-I losses until the Bayesian type-I risk is at most one.
        #[arg(long)]
        lambda_calibrate: bool,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Run an experiment.
    Simulate {
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        /// Experiment configuration file; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Problem document; a normal-shift grid is used when absent.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        cells: Option<usize>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json_text<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn risk_table(p: &TestingProblem, t: &TestFamily) -> Result<(Table, String)> {
    let report = type1_risk(t, p)?;
    let mut table = Table::new(&["point", "P", "Q", "Lambda", "contribution", "witness_b"]);
    for x in 0..p.len() {
        table.push(vec![
            p.labels()[x].clone().into(),
            p.null().mass()[x].into(),
            p.alt().mass()[x].into(),
            p.lr()[x].into(),
            report.per_point_contribution[x].into(),
            p.losses().scenarios()[report.witness.choice[x]].into(),
        ]);
    }
    Ok((table, json_text(&report)?))
}

fn power_table(p: &TestingProblem, t: &TestFamily) -> Result<Table> {
    let powers = power_curve(t, p.alt())?;
    let mut table = Table::new(&["b", "type1_loss", "power", "type2_risk"]);
    for (i, &b) in p.losses().scenarios().iter().enumerate() {
        let adv = constant_adversary(p.losses(), b, p.len())?;
        table.push(vec![
            b.into(),
            p.losses().type1()[i].into(),
            powers[i].into(),
            type2_risk(t, &adv, p.alt(), p.losses())?.into(),
        ]);
    }
    Ok(table)
}

fn bayes_table(bp: &BayesProblem, calibrate: bool, tol: f64) -> Result<Table> {
    let n = bp.n_points();
    let mut table = Table::new(&["b", "lambda", "decisions", "bayes_risk", "bayes_type1_risk"]);
    let (lambda, family) = if calibrate {
        lambda_calibrated_decision(bp, tol)?
    } else {
        let columns = (0..bp.losses.len())
            .map(|i| bayes_posthoc_decision(bp, &constant_adversary(&bp.losses, bp.losses.scenarios()[i], n)?))
            .collect::<Result<Vec<_>>>()?;
        let matrix = (0..n).map(|x| columns.iter().map(|c| c[x]).collect()).collect();
        (0.0, TestFamily::new(Mode::Binary, matrix)?)
    };
    let s = bayes_type1_risk(bp, &family)?;
    for (i, &b) in bp.losses.scenarios().iter().enumerate() {
        let column = family.column(i);
        let adv = constant_adversary(&bp.losses, b, n)?;
        let decisions: Vec<String> = column.iter().map(|d| format!("{d}")).collect();
        table.push(vec![
            b.into(),
            lambda.into(),
            decisions.join(";").into(),
            bayes_risk(bp, &column, &adv)?.into(),
            s.into(),
        ]);
    }
    Ok(table)
}

enum Outcome {
    Done,
    ChecksFailed,
}

fn run(cli: Cli) -> Result<Outcome> {
    let format = cli.format.map(Format::from);
    let out = cli.out.as_deref();
    let table_format = format.unwrap_or_default();
    match cli.command {
        Command::Risk(args) => {
            let (p, t) = args.load()?;
            let (table, json) = risk_table(&p, &t)?;
            match table_format {
                Format::Csv => emit(&table.to_csv()?, out)?,
                Format::Json => emit(&json, out)?,
            }
        }
        Command::Power(args) => {
            let (p, t) = args.load()?;
            emit(&power_table(&p, &t)?.render(table_format)?, out)?;
        }
        Command::Curve(args) => {
            let (p, t) = args.load()?;
            let curve = decision_curve(&t, &p)?;
            let mut table = Table::new(&["b", "threshold"]);
            for (b, th) in p.losses().scenarios().iter().zip(&curve.thresholds) {
                table.push(vec![Cell::Real(*b), Cell::Real(*th)]);
            }
            emit(&table.render(table_format)?, out)?;
        }
        Command::Check { family, gamma, emit_counterexample } => {
            let (p, t) = family.load()?;
            let opts = CertifyOptions::default();
            let mut cert = match gamma {
                GammaArg::U => certify_u_admissible(&t, &p, opts)?,
                GammaArg::C if t.is_binary() => certify_c_admissible_binary(&t, &p, opts)?,
                GammaArg::C => certify_c_admissible_randomized(&t, &p, opts)?,
                GammaArg::G => certify_g_admissible(&t, &p, opts)?,
            };
            if !emit_counterexample {
                cert.counterexample = None;
            }
            emit(&json_text(&cert)?, out)?;
        }
        Command::Improve { family, strategy, statistic } => {
            let (p, t) = family.load()?;
            let strategy = match strategy {
                StrategyArg::Canonicalize => Strategy::Canonicalize,
                StrategyArg::Sharpen => Strategy::Sharpen,
                StrategyArg::Compatibilize => Strategy::Compatibilize,
                StrategyArg::RaoBlackwell => {
                    let path = statistic.ok_or_else(|| Error::InvalidConfig("--statistic is required".into()))?;
                    let labels: Vec<serde_json::Value> = serde_json::from_str(&read(&path)?)?;
                    Strategy::RaoBlackwell(labels.iter().map(label_text).collect())
                }
            };
            emit(&json_text(&improve(&t, &p, &strategy)?)?, out)?;
        }
        Command::Bayes { problem, lambda_calibrate, tol } => {
            let bp: BayesProblem = serde_json::from_str(&read(&problem)?)?;
            emit(&bayes_table(&bp, lambda_calibrate, tol)?.render(table_format)?, out)?;
        }
        Command::Simulate { experiment, config, problem, replications, alpha_max, alpha, cells } => {
            let mut cfg = match &config {
                Some(path) => serde_json::from_str::<ExperimentConfig>(&read(path)?)?,
                None => ExperimentConfig::new(experiment.into()),
            };
            cfg.experiment = experiment.into();
            if let Some(path) = problem {
                cfg.problem = Some(ProblemSource::Path(path));
            }
            if let (Some(ProblemSource::Path(rel)), Some(base)) = (&cfg.problem, config.as_deref().and_then(Path::parent)) {
                if rel.is_relative() && !rel.exists() {
                    cfg.problem = Some(ProblemSource::Path(base.join(rel)));
                }
            }
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.replications = replications.unwrap_or(cfg.replications);
            cfg.alpha_max = alpha_max.or(cfg.alpha_max);
            cfg.alpha = alpha.or(cfg.alpha);
            cfg.cells = cells.or(cfg.cells);
            cfg.format = format.unwrap_or(cfg.format);
            let target = cli.out.clone().or(cfg.out.clone());
            let output = experiments::run(&cfg)?;
            emit(&output.table.render(cfg.format)?, target.as_deref())?;
            if !output.all_hold() {
                for c in output.failed() {
                    eprintln!("check failed: {}: {}", c.name, c.detail);
                }
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
