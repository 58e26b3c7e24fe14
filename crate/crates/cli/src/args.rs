use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use frailty_core::ingest::{DEFAULT_MAX_MISSING, DEFAULT_MIN_AGE, DEFAULT_OUTCOME_COL};
use frailty_core::rotate::DEFAULT_SALIENCE;

#[derive(Debug, Parser)]
#[command(name = "frailty", version, about = "Frailty index and deficit subdimension analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and filter a cohort, reporting exclusions
    Ingest(InputArgs),
    /// Frailty index per participant and per-deficit criteria
    Fi(InputArgs),
    /// Pairwise phi correlations and factorability diagnostics
    Corr(InputArgs),
    /// Scree data and Horn's parallel analysis
    Pa(PaCommand),
    /// Minres extraction and oblimin rotation
    Efa(FactorCommand),
    /// Regression factor scores and their correlations with the index
    Scores(FactorCommand),
    /// Index model vs factor-score model for the outcome
    Regress(FactorCommand),
    /// Write a synthetic cohort with a planted factor structure
    Synth(SynthArgs),
    /// Run every stage and write the full output set
    Report(FactorCommand),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Cohort CSV, one row per participant
    #[arg(long)]
    pub input: PathBuf,
    /// Deficit catalog JSON
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long, default_value = DEFAULT_OUTCOME_COL)]
    pub outcome_col: String,
    #[arg(long, default_value_t = DEFAULT_MIN_AGE)]
    pub min_age: u32,
    /// Participants missing more deficits than this are excluded
    #[arg(long, default_value_t = DEFAULT_MAX_MISSING)]
    pub max_missing: usize,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    #[arg(long, default_value = "age")]
    pub age_col: String,
    #[arg(long, default_value = "sex")]
    pub sex_col: String,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NullKind {
    /// Independent standard normal columns
    Normal,
    /// Independent Bernoulli columns at the observed prevalences
    Binary,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PaArgs {
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    pub quantile: f64,
    #[arg(long, value_enum, default_value_t = NullKind::Normal)]
    pub pa_null: NullKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PaCommand {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pa: PaArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct FactorCount {
    /// Number of factors to extract
    #[arg(long)]
    pub nfactors: Option<usize>,
    /// Take the number of factors from parallel analysis
    #[arg(long)]
    pub auto_nfactors: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FactorCommand {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pa: PaArgs,
    #[command(flatten)]
    pub count: FactorCount,
    /// Pattern coefficients strictly above this magnitude are salient
    #[arg(long, default_value_t = DEFAULT_SALIENCE)]
    pub salience: f64,
    /// Random starts for the rotation in addition to the identity
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 58 deficits and four subdimensions modelled on the ELSA index
    Elsa,
    /// Four blocks of equally loading deficits
    Simple,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// JSON synthetic spec; overrides --preset
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Elsa)]
    pub preset: Preset,
    #[arg(long, default_value_t = 4971)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = DEFAULT_OUTCOME_COL)]
    pub outcome_col: String,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}
