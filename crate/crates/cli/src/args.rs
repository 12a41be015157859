//! Command-line flags. Every field is optional so that a config file can
//! supply it; defaults are applied after merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use droplab::model::critical_point;
use droplab::{Boundary, Error, RcParams, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "droplab", version, about = "Conditioned random-cluster droplets on the square lattice")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct Global {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Master seed [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: 1].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Record wall-clock time in the manifest (makes it run-dependent).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw unconditioned configurations with heat-bath sweeps.
    Sample(SampleArgs),
    /// Exact law of a small box by enumeration, with the duality check.
    ExactEnum(ExactArgs),
    /// Run constrained chains conditioned on a large trapped area.
    Condition(ConditionArgs),
    /// Droplet statistics of snapshot files.
    Measure(MeasureArgs),
    /// Estimate the inverse correlation length and the Wulff shape.
    WulffEstimate(WulffArgs),
    /// Apply a storage-replacement operation to a snapshot.
    Surgery(SurgeryArgs),
    /// Conditioned runs over a list of droplet sizes.
    Scan(ScanArgs),
    /// Scaling fits of scan output.
    Fit(FitArgs),
    /// Fits, EXC tail and regeneration summaries of scan output.
    Report(ReportArgs),
}

impl Command {
    pub const NAMES: [&'static str; 9] =
        ["sample", "exact-enum", "condition", "measure", "wulff-estimate", "surgery", "scan", "fit", "report"];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::ExactEnum(_) => "exact-enum",
            Command::Condition(_) => "condition",
            Command::Measure(_) => "measure",
            Command::WulffEstimate(_) => "wulff-estimate",
            Command::Surgery(_) => "surgery",
            Command::Scan(_) => "scan",
            Command::Fit(_) => "fit",
            Command::Report(_) => "report",
        }
    }
}

/// Model parameters shared by the simulating subcommands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelArgs {
    /// Edge parameter [default: 0.7 p_c(q)].
    #[arg(long, conflicts_with = "beta")]
    pub p: Option<f64>,
    /// Inverse temperature, `p = 1 - exp(-2 beta)`.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Cluster weight [default: 1].
    #[arg(long)]
    pub q: Option<f64>,
    /// Boundary condition, free or wired [default: free].
    #[arg(long)]
    pub bc: Option<Boundary>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<RcParams> {
        let q = self.q.unwrap_or(1.0);
        let bc = self.bc.unwrap_or(Boundary::Free);
        match (self.p, self.beta) {
            (Some(_), Some(_)) => Err(Error::input("give either p or beta, not both")),
            (None, Some(b)) => RcParams::from_beta(b, q, bc),
            (p, None) => RcParams::new(p.unwrap_or(0.7 * critical_point(q).0), q, bc),
        }
    }
}

/// Where the Wulff shape comes from: a file, or an estimate.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct WulffSource {
    /// Wulff JSON written by `wulff-estimate`.
    #[arg(long)]
    pub wulff: Option<PathBuf>,
    /// Connection samples when estimating the shape [default: 200000].
    #[arg(long)]
    pub wulff_samples: Option<u64>,
    /// Directory caching estimated shapes.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Box half-width [default: 4].
    #[arg(long)]
    pub half_width: Option<u32>,
    /// Heat-bath sweeps per draw [default: 1000].
    #[arg(long)]
    pub sweeps: Option<u32>,
    /// Number of draws [default: 1].
    #[arg(long)]
    pub count: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ExactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Box half-width [default: 1].
    #[arg(long)]
    pub half_width: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub wulff: WulffSource,
    /// Droplet size: the circuit must trap at least n^2 faces.
    #[arg(long)]
    pub n: Option<u32>,
    /// Constraint, `area_ge` (`area_eq` is not supported).
    #[arg(long)]
    pub constraint: Option<String>,
    /// Box half-width [default: ceil(2.5 n)].
    #[arg(long)]
    pub half_width: Option<u32>,
    /// Burn-in sweeps [default: 100].
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Sweeps after burn-in [default: 1000].
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Keep every thin-th sweep [default: 10].
    #[arg(long)]
    pub thin: Option<u64>,
    /// Independent chains [default: 1].
    #[arg(long)]
    pub chains: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub wulff: WulffSource,
    /// Snapshot files.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub input: Option<Vec<PathBuf>>,
    /// Droplet size used for EXC and the normalizations.
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct WulffArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Directions on the angular grid [default: 16].
    #[arg(long)]
    pub dirs: Option<usize>,
    /// Largest distance in the decay fit [default: 16].
    #[arg(long)]
    pub kmax: Option<u32>,
    /// Connection samples [default: 200000].
    #[arg(long)]
    pub samples: Option<u64>,
    /// Inner annulus constant c1 [default: 0.4].
    #[arg(long)]
    pub c1: Option<f64>,
    /// Outer annulus constant C1 [default: 1.2].
    #[arg(long = "big-c1")]
    pub big_c1: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SurgeryArgs {
    /// Input snapshot.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Operation, `sector` or `shift`.
    #[arg(long)]
    pub op: Option<String>,
    /// Sector start `x,y` [default: x' of the input].
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Sector end `x,y` [default: y' of the input].
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Kept rectangle `x0,y0:x1,y1` of the shift operation.
    #[arg(long = "F", allow_hyphen_values = true)]
    #[serde(rename = "F")]
    pub f: Option<String>,
    /// Moved rectangle `x0,y0:x1,y1` of the shift operation.
    #[arg(long = "G", allow_hyphen_values = true)]
    #[serde(rename = "G")]
    pub g: Option<String>,
    /// Translation `dx,dy` applied to G.
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<String>,
    /// GAC tolerance [default: 0.1].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Droplet size of the SAT analogue [default: floor(sqrt(area))].
    #[arg(long)]
    pub n: Option<u32>,
    /// Scale t of the SAT analogue [default: 1].
    #[arg(long)]
    pub t: Option<f64>,
    /// Regeneration constant q0 (overrides the Wulff file).
    #[arg(long)]
    pub q0: Option<f64>,
    /// Regeneration constant c0 (overrides the Wulff file).
    #[arg(long)]
    pub c0: Option<f64>,
    /// Wulff JSON supplying q0, c0 and the annulus [default: disc].
    #[arg(long)]
    pub wulff: Option<PathBuf>,
    /// Heat-bath sweeps of the resampling at q > 1 [default: 200].
    #[arg(long)]
    pub sweeps: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub wulff: WulffSource,
    /// Droplet sizes [default: 12,16,24,32].
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub n_list: Option<Vec<u32>>,
    /// Box half-width over n [default: 2.5].
    #[arg(long)]
    pub margin: Option<f64>,
    /// Burn-in sweeps [default: 100].
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Sweeps after burn-in per chain [default: 1000].
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Keep every thin-th sweep [default: 10].
    #[arg(long)]
    pub thin: Option<u64>,
    /// Chains per n [default: 4].
    #[arg(long)]
    pub chains: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    /// Scan CSV files or directories holding them [default: the output directory].
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub input: Option<Vec<PathBuf>>,
    /// Statistics to fit [default: mlr,mfl].
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub stat: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportArgs {
    /// Scan CSV files or directories holding them [default: the output directory].
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub input: Option<Vec<PathBuf>>,
    /// Droplet size of the EXC tail [default: 24 if present, else the largest].
    #[arg(long)]
    pub tail_n: Option<u32>,
    /// Survival bins [default: 20].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Wulff JSON for the MPRG bound [default: wulff.json beside the input].
    #[arg(long)]
    pub wulff: Option<PathBuf>,
}
