//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iblab_core::data::{
    balanced_multiclass_labels, derive_seed, gen_diagonal_gram, gen_orthogonal, gen_subgaussian, power_law_spectrum,
    Dataset, EntryDist, Labels,
};
use iblab_core::dual::{ce_candidate, solve_multiclass_general, solve_relaxed, DualSolution, NewtonOptions};
use iblab_core::gd::{
    binary_smoothness, default_schedule, multiclass_smoothness, train_binary, train_multiclass, Schedule, StopRule,
    TrainOptions,
};
use iblab_core::interp::{gram_summary, mni, svp_check, GramSummary, SvpReport};
use iblab_core::loss::{make_loss, EncodingScheme, Formulation, Loss, MulticlassEncoding};
use serde::{Deserialize, Serialize};

use crate::config::{overlay, List, Seeds};
use crate::error::{exit, HarnessError, HarnessResult};
use crate::harness::{
    converse_demo, iw_demo, multiclass_demo, scaling_sweep, AlphaChoice, ConverseConfig, Design, IwDemoConfig,
    MulticlassDemoConfig, SweepConfig, TRIAL_COLUMNS,
};
use crate::io::{config_hash, read_dataset, write_csv_text, write_dataset, write_json, write_table, Envelope};
use crate::verify::{self, Suite};

#[derive(Debug, Parser)]
#[command(name = "iblab", version, about = "Implicit-bias experiments for overparameterized linear classifiers")]
pub struct Cli {
    /// JSON file whose keys override the subcommand flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset and write `<out>.csv` plus `<out>.meta.json`.
    GenData(GenDataArgs),
    /// Solve the relaxed dual program on a stored dataset.
    SolveDual(SolveDualArgs),
    /// Minimum-norm interpolation, Gram summary and SVP check.
    Mni(MniArgs),
    /// Run normalized gradient descent on a stored dataset.
    Train(TrainArgs),
    /// Distance to the MNI direction across a dimension sweep.
    ScalingSweep(SweepArgs),
    /// Label adjustment on a diagonal Gram.
    ConverseDemo(ConverseArgs),
    /// Margin tilt from importance weighting.
    IwDemo(IwArgs),
    /// Multiclass training against per-class MNI directions.
    MulticlassDemo(MulticlassArgs),
    /// Run the invariant suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossName {
    Exp,
    Logistic,
    Poly,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value = "logistic")]
    pub loss: LossName,
    /// Degree of the polynomial loss.
    #[arg(long)]
    pub m: Option<f64>,
}

impl LossArgs {
    fn build(&self) -> HarnessResult<Loss> {
        let name = match self.loss {
            LossName::Exp => "exp",
            LossName::Logistic => "logistic",
            LossName::Poly => "poly",
        };
        Ok(make_loss(name, self.m)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleName {
    Subgaussian,
    Orthogonal,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumName {
    Iso,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryName {
    Gaussian,
    Rademacher,
}

impl From<EntryName> for EntryDist {
    fn from(e: EntryName) -> Self {
        match e {
            EntryName::Gaussian => EntryDist::Gaussian,
            EntryName::Rademacher => EntryDist::Rademacher,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationName {
    Adaboost,
    CrossEntropy,
}

impl From<FormulationName> for Formulation {
    fn from(f: FormulationName) -> Self {
        match f {
            FormulationName::Adaboost => Formulation::AdaBoostStyle,
            FormulationName::CrossEntropy => Formulation::CrossEntropy,
        }
    }
}

fn scheme_for(f: Formulation) -> EncodingScheme {
    match f {
        Formulation::AdaBoostStyle => EncodingScheme::EqualAssignment,
        Formulation::CrossEntropy => EncodingScheme::Simplex,
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenDataArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value = "subgaussian")]
    pub ensemble: EnsembleName,
    #[arg(long, value_enum, default_value = "iso")]
    pub spectrum: SpectrumName,
    /// Decay exponent of the power-law spectrum.
    #[arg(long, default_value_t = 1.0)]
    pub exponent: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub entry: EntryName,
    /// Gram scale of the orthogonal ensemble.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Diagonal of the Gram for the diagonal ensemble.
    #[arg(long)]
    pub dvec: Option<List<f64>>,
    /// Draw balanced labels over this many classes instead of binary labels.
    #[arg(long)]
    pub k: Option<usize>,
    /// Rescale so the largest row norm equals this bound.
    #[arg(long)]
    pub max_row_norm: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SolveDualArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub loss: LossArgs,
    /// Multiclass program to solve when the dataset has class labels.
    #[arg(long, value_enum, default_value = "adaboost")]
    pub formulation: FormulationName,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MniArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Reference scale for `G ≈ αI`; defaults to `tr(G)/n`.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleName {
    Auto,
    Constant,
    Geometric,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub loss: LossArgs,
    #[arg(long, value_enum, default_value = "adaboost")]
    pub formulation: FormulationName,
    #[arg(long, value_enum, default_value = "auto")]
    pub schedule: ScheduleName,
    /// Normalized step for the constant schedule; defaults to `1/β`.
    #[arg(long)]
    pub eta_hat: Option<f64>,
    /// Growth factor of the geometric schedule.
    #[arg(long, default_value_t = 0.1)]
    pub rate: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub risk_threshold: f64,
    /// Stop on `ln R` instead, for risks below the double range.
    #[arg(long, allow_hyphen_values = true)]
    pub ln_risk_threshold: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10_000)]
    pub patience: usize,
    /// JSON summary.
    #[arg(long)]
    pub out: PathBuf,
    /// Snapshot table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value = "100,200,400,800,1600,3200")]
    pub d_list: List<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub loss: LossArgs,
    /// `a,b,c` or `a..b`.
    #[arg(long, default_value = "0..20")]
    pub seeds: Seeds,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub entry: EntryName,
    /// Use `‖λ‖₁·rescale²` instead of `tr(G)/n` as the reference scale.
    #[arg(long)]
    pub alpha_from_spectrum: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-trial table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ConverseArgs {
    #[arg(long, default_value = "1,8")]
    pub dvec: List<f64>,
    #[arg(long, default_value = "1,-1", allow_hyphen_values = true)]
    pub y: List<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub loss: LossArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IwArgs {
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Importance weight on the up-weighted subset.
    #[arg(long, default_value_t = 8.0)]
    pub q: f64,
    /// Degree of the polynomial loss.
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    /// Size of the up-weighted subset (the first rows).
    #[arg(long, default_value_t = 8)]
    pub s_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub risk_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignName {
    Orthogonal,
    Isotropic,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MulticlassArgs {
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 300)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub loss: LossArgs,
    #[arg(long, value_enum, default_value = "cross-entropy")]
    pub formulation: FormulationName,
    #[arg(long, value_enum, default_value = "isotropic")]
    pub design: DesignName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub risk_threshold: f64,
    /// Stop on `ln R` instead, for risks below the double range.
    #[arg(long, allow_hyphen_values = true)]
    pub ln_risk_threshold: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Machine-readable report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::INVALID_CONFIG } else { exit::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match execute(cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> HarnessResult<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::GenData(a) => gen_data(overlay(a, config)?),
        Command::SolveDual(a) => solve_dual(overlay(a, config)?),
        Command::Mni(a) => mni_cmd(overlay(a, config)?),
        Command::Train(a) => train(overlay(a, config)?),
        Command::ScalingSweep(a) => sweep(overlay(a, config)?),
        Command::ConverseDemo(a) => converse(overlay(a, config)?),
        Command::IwDemo(a) => iw(overlay(a, config)?),
        Command::MulticlassDemo(a) => multiclass(overlay(a, config)?),
        Command::Verify(a) => verify_cmd(overlay(a, config)?),
    }
}

fn generate(a: &GenDataArgs) -> HarnessResult<Dataset> {
    let mut ds = match a.ensemble {
        EnsembleName::Subgaussian => {
            let lambda = match a.spectrum {
                SpectrumName::Iso => vec![1.0; a.d],
                SpectrumName::Power => power_law_spectrum(a.d, a.exponent),
            };
            gen_subgaussian(a.n, a.d, &lambda, a.entry.into(), a.seed)?
        }
        EnsembleName::Orthogonal => gen_orthogonal(a.n, a.d, a.alpha, a.seed)?,
        EnsembleName::Diagonal => {
            let dvec = a.dvec.as_ref().ok_or_else(|| HarnessError::Config("--dvec is required for the diagonal ensemble".into()))?;
            gen_diagonal_gram(a.n, a.d, &dvec.0, a.seed)?
        }
    };
    if let Some(k) = a.k {
        ds = ds.with_labels(balanced_multiclass_labels(a.n, k, derive_seed(a.seed, 1))?)?;
    }
    if let Some(bound) = a.max_row_norm {
        ds = ds.with_max_row_norm(bound)?;
    }
    Ok(ds)
}

fn gen_data(a: GenDataArgs) -> HarnessResult<()> {
    if a.n > a.d {
        log::warn!("n = {} exceeds d = {}; downstream solvers need d ≥ n", a.n, a.d);
    }
    let ds = generate(&a)?;
    let (csv, meta) = write_dataset(&a.out, &ds, Some(config_hash(&a)))?;
    log::info!("wrote {} and {}", csv.display(), meta.display());
    Ok(())
}

fn class_labels(ds: &Dataset) -> Option<(Vec<usize>, usize)> {
    match &ds.labels {
        Labels::Multiclass { classes, k } => Some((classes.clone(), *k)),
        Labels::Binary { .. } => None,
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DualResult {
    Binary {
        solution: DualSolution,
    },
    PerClass {
        classes: Vec<DualSolution>,
    },
    CrossEntropyCandidate {
        classes: Vec<DualSolution>,
        mu: f64,
        balance_residual: f64,
        mass_gap: f64,
    },
}

fn solve_dual(a: SolveDualArgs) -> HarnessResult<()> {
    let loss = a.loss.build()?;
    let ds = read_dataset(&a.data)?;
    let g = ds.gram();
    let opts = NewtonOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        ..NewtonOptions::default()
    };
    let result = match class_labels(&ds) {
        None => DualResult::Binary {
            solution: solve_relaxed(&g, &ds.binary_labels().expect("binary labels"), &loss, &opts)?,
        },
        Some((classes, k)) => {
            let formulation: Formulation = a.formulation.into();
            let enc = MulticlassEncoding::new(&classes, scheme_for(formulation), k)?;
            match formulation {
                Formulation::AdaBoostStyle => DualResult::PerClass {
                    classes: solve_multiclass_general(&g, &enc, &loss, &opts)?.into_iter().collect::<Result<_, _>>()?,
                },
                Formulation::CrossEntropy => {
                    let c = ce_candidate(&g, &enc)?;
                    DualResult::CrossEntropyCandidate {
                        classes: c.classes,
                        mu: c.mu,
                        balance_residual: c.balance_residual,
                        mass_gap: c.mass_gap,
                    }
                }
            }
        }
    };
    write_json(&a.out, &Envelope::new("solve-dual", &a, Some(ds.seed), result))
}

#[derive(Debug, Serialize)]
struct MniResult {
    gram: GramSummary,
    /// One interpolant per target vector (a single one for binary labels).
    w: Vec<Vec<f64>>,
    condition_number: f64,
    residual: f64,
    svp: SvpReport,
}

fn targets_of(ds: &Dataset) -> HarnessResult<Vec<nalgebra::DVector<f64>>> {
    Ok(match class_labels(ds) {
        None => vec![ds.binary_labels().expect("binary labels")],
        Some((classes, k)) => {
            let enc = MulticlassEncoding::new(&classes, EncodingScheme::EqualAssignment, k)?;
            (0..k).map(|c| enc.class_vector(c)).collect()
        }
    })
}

fn mni_cmd(a: MniArgs) -> HarnessResult<()> {
    let ds = read_dataset(&a.data)?;
    let targets = targets_of(&ds)?;
    let mut w = Vec::new();
    let mut condition_number: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for t in &targets {
        let sol = mni(&ds.x, t)?;
        condition_number = condition_number.max(sol.condition_number);
        residual = residual.max(sol.residual);
        w.push(sol.w.as_slice().to_vec());
    }
    let result = MniResult {
        gram: gram_summary(&ds.x, a.alpha),
        w,
        condition_number,
        residual,
        svp: svp_check(&ds.gram(), &targets)?,
    };
    write_json(&a.out, &Envelope::new("mni", &a, Some(ds.seed), result))
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    termination: iblab_core::gd::Termination,
    iterations: usize,
    final_risk: f64,
    beta: f64,
    schedule: Schedule,
    final_w: Vec<Vec<f64>>,
    final_q: Vec<Vec<f64>>,
    dist_mni: Vec<Option<f64>>,
}

fn train(a: TrainArgs) -> HarnessResult<()> {
    let loss = a.loss.build()?;
    let ds = read_dataset(&a.data)?;
    let stop = StopRule {
        risk_threshold: a.risk_threshold,
        ln_risk_threshold: a.ln_risk_threshold,
        max_iters: a.max_iters,
        patience: a.patience,
    };
    let formulation: Formulation = a.formulation.into();
    let smoothness = match class_labels(&ds) {
        None => binary_smoothness(&loss, ds.n()),
        Some((_, k)) => multiclass_smoothness(&loss, formulation, ds.n(), k),
    };
    let schedule = match a.schedule {
        ScheduleName::Auto => default_schedule(&loss, smoothness),
        ScheduleName::Constant => Schedule::Constant {
            eta_hat: a.eta_hat.unwrap_or(1.0 / smoothness.beta),
        },
        ScheduleName::Geometric => Schedule::Geometric {
            rate: a.rate,
            floor: a.eta_hat.unwrap_or(1.0 / smoothness.beta),
        },
    };
    let hash = config_hash(&a);
    let (summary, csv) = match class_labels(&ds) {
        None => {
            let t = train_binary(&ds, &loss, &schedule, &stop, &TrainOptions::default())?;
            let summary = TrainSummary {
                termination: t.termination,
                iterations: t.iterations,
                final_risk: t.final_risk,
                beta: smoothness.beta,
                schedule,
                final_w: vec![t.final_w.clone()],
                final_q: vec![t.final_q.clone()],
                dist_mni: vec![t.last().dist_mni],
            };
            (summary, t.to_csv())
        }
        Some((_, k)) => {
            let t = train_multiclass(&ds, scheme_for(formulation), &loss, formulation, &schedule, &stop)?;
            let summary = TrainSummary {
                termination: t.termination,
                iterations: t.iterations,
                final_risk: t.final_risk,
                beta: smoothness.beta,
                schedule,
                final_w: (0..k).map(|c| t.class_weights(c).as_slice().to_vec()).collect(),
                final_q: t.final_q.clone(),
                dist_mni: t.last().dist_mni.clone(),
            };
            (summary, t.to_csv())
        }
    };
    if let Some(path) = &a.csv {
        write_csv_text(path, &csv, "train", &hash, Some(ds.seed))?;
    }
    write_json(&a.out, &Envelope::new("train", &a, Some(ds.seed), summary))
}

fn sweep(a: SweepArgs) -> HarnessResult<()> {
    let config = SweepConfig {
        n: a.n,
        d_list: a.d_list.0.clone(),
        loss: a.loss.build()?,
        seeds: a.seeds.0.clone(),
        alpha: if a.alpha_from_spectrum { AlphaChoice::Spectrum } else { AlphaChoice::MeanEigenvalue },
        entry: a.entry.into(),
    };
    let table = scaling_sweep(&config)?;
    let hash = config_hash(&a);
    if let Some(path) = &a.csv {
        write_table(path, &TRIAL_COLUMNS, &table.rows(), "scaling-sweep", &hash, None)?;
    }
    for s in &table.per_d {
        log::info!("d = {}: median primal distance {:.4e} ({} failed)", s.d, s.median_primal, s.failed);
    }
    write_json(&a.out, &Envelope::new("scaling-sweep", &a, None, table))
}

fn converse(a: ConverseArgs) -> HarnessResult<()> {
    let config = ConverseConfig {
        dvec: a.dvec.0.clone(),
        y: a.y.0.clone(),
        loss: a.loss.build()?,
    };
    let report = converse_demo(&config)?;
    if let Some(note) = &report.note {
        println!("{note}");
    }
    println!("spread {:.6e}", report.spread);
    println!("adjusted labels {:?}", report.tilde_y);
    write_json(&a.out, &Envelope::new("converse-demo", &a, None, report))
}

fn iw(a: IwArgs) -> HarnessResult<()> {
    let config = IwDemoConfig {
        n: a.n,
        d: a.d,
        alpha: a.alpha,
        q: a.q,
        m: a.m,
        s_size: a.s_size,
        seed: a.seed,
        risk_threshold: a.risk_threshold,
    };
    let (report, traj) = iw_demo(&config)?;
    let hash = config_hash(&a);
    if let Some(path) = &a.csv {
        write_csv_text(path, &traj.to_csv(), "iw-demo", &hash, Some(a.seed))?;
    }
    println!(
        "margin ratio {:.6} (predicted {:.6}, relative error {:.3e})",
        report.margins.ratio, report.margins.predicted_ratio, report.relative_error
    );
    write_json(&a.out, &Envelope::new("iw-demo", &a, Some(a.seed), report))
}

fn multiclass(a: MulticlassArgs) -> HarnessResult<()> {
    let config = MulticlassDemoConfig {
        n: a.n,
        d: a.d,
        k: a.k,
        loss: a.loss.build()?,
        formulation: a.formulation.into(),
        design: match a.design {
            DesignName::Orthogonal => Design::Orthogonal,
            DesignName::Isotropic => Design::Isotropic,
        },
        seed: a.seed,
        risk_threshold: a.risk_threshold,
        ln_risk_threshold: a.ln_risk_threshold,
    };
    let (report, traj) = multiclass_demo(&config)?;
    let hash = config_hash(&a);
    if let Some(path) = &a.csv {
        write_csv_text(path, &traj.to_csv(), "multiclass-demo", &hash, Some(a.seed))?;
    }
    write_json(&a.out, &Envelope::new("multiclass-demo", &a, Some(a.seed), report))
}

fn verify_cmd(a: VerifyArgs) -> HarnessResult<()> {
    let report = verify::run(a.suite, a.seed);
    for c in &report.checks {
        println!("{} {}::{} {}", if c.passed { "ok  " } else { "FAIL" }, c.suite, c.name, c.detail);
    }
    println!("{} of {} checks passed", report.total - report.failed, report.total);
    if let Some(path) = &a.out {
        write_json(path, &Envelope::new("verify", &a, Some(a.seed), &report))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(HarnessError::ChecksFailed {
            failed: report.failed,
            total: report.total,
        })
    }
}
