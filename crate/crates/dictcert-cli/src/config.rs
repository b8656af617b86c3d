//! Command-line arguments. The same structs double as the JSON run
//! configuration, so a run can be saved with `--print-config` and replayed
//! with `--run-config`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dictcert::model::DictKind;
use dictcert::tangent::Backend;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "dictcert", version, about = "Local-correctness checks for l1 dictionary learning")]
pub struct Cli {
    /// Worker threads. Outputs do not depend on this.
    #[arg(long, env = "DICTCERT_JOBS", global = true)]
    pub jobs: Option<usize>,

    /// Read the subcommand and its parameters from a JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub run_config: Option<PathBuf>,

    /// Print the effective run configuration as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
}

#[derive(Subcommand, Serialize, Deserialize, Debug, Clone)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Generate an instance directory (A.mat, X.mat, Y.mat, instance.json).
    Gen(GenArgs),
    /// Build the golfing certificate and check its three conditions.
    Certify(CertifyArgs),
    /// Restricted smallest singular value, α and the decomposition terms.
    Balance(BalanceArgs),
    /// Linearized ℓ¹ problem and the local-minimum verdict.
    Solve(SolveArgs),
    /// Recovery phase-transition grid for the alternating learner.
    Phase(PhaseArgs),
    /// Monte Carlo checks of the probabilistic lemmas.
    Lemmas(LemmasArgs),
}

/// Where the instance comes from: an existing directory or fresh draws.
#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct Source {
    /// Instance directory written by `gen`.
    #[arg(long, value_name = "DIR")]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Defaults to n.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Defaults to round(5n ln n).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "gaussian_unit")]
    pub kind: DictKind,
    /// Redraw the dictionary until kμ(A) is below this value.
    #[arg(long, value_name = "B")]
    pub coherence_below: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "cert.json")]
    pub out: PathBuf,
    /// Per-step CSV; defaults to the JSON path with a .csv extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Λ as DLMAT1; defaults to the JSON path with a .lambda.mat extension.
    #[arg(long)]
    pub lambda: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    pub zeta_scale: f64,
    /// Exit 3 unless all three certificate conditions hold.
    #[arg(long = "assert")]
    pub assert_ok: bool,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub source: Source,
    /// JSON report path, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    /// Skip the decomposition terms.
    #[arg(long)]
    pub no_terms: bool,
    /// Cross-check ξ and the Ψ norms against dense Kronecker assembly.
    #[arg(long)]
    pub dense_check: bool,
    /// Exit 3 if ξ vanishes, a bound check fails or the dense check disagrees.
    #[arg(long = "assert")]
    pub assert_ok: bool,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "pd")]
    pub backend: Backend,
    /// Duality-gap tolerance of the primal-dual backend.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Exit 3 unless the verdict is certified_yes.
    #[arg(long = "assert")]
    pub assert_ok: bool,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct PhaseArgs {
    /// Grid description (n_list, ratio_list, k_list, trials, seed, ...).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    #[arg(long, default_value = "grid.csv")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct LemmasArgs {
    /// eig, supports, rows, psi, decouple, khintchine, chernoff, qscale, trunc or all.
    #[arg(long, default_value = "all")]
    pub which: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One CSV row per check.
    #[arg(long, default_value = "lemmas.csv")]
    pub csv: PathBuf,
    /// JSON summary, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Exit 3 unless every check passes.
    #[arg(long = "assert")]
    pub assert_ok: bool,
}
