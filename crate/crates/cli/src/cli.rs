//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dldl_core::model::HeadKind;
use dldl_core::GridSpec;

#[derive(Debug, Parser)]
#[command(name = "dldl", version, about = "Joint label-distribution learning and expectation regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the label distribution, c.d.f. and ranking encodings of one target.
    Encode(EncodeArgs),
    /// Train one model and write checkpoint, log and report.
    Train(RunArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Train several heads over several seeds and tabulate medians.
    Compare(RunArgs),
    /// Finite-difference check of every head's analytic gradients.
    Gradcheck(GradcheckArgs),
    /// Export score maps or occlusion sensitivity matrices.
    Interpret(InterpretArgs),
}

fn parse_head(s: &str) -> Result<HeadKind, String> {
    s.parse().map_err(|e: dldl_core::Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: dldl_core::Error| e.to_string())
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(h)?, p(w)?))
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub y: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Label grid as min:step:max.
    #[arg(long, value_parser = parse_grid, default_value = "0:1:100")]
    pub grid: GridSpec,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Flags that override fields of the JSON run configuration.
#[derive(Debug, Args, Default, Clone)]
pub struct Overrides {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_head)]
    pub head: Option<HeadKind>,
    /// Comma-separated heads for `compare`.
    #[arg(long, value_parser = parse_head, value_delimiter = ',')]
    pub heads: Option<Vec<HeadKind>>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Replaces the seed list with this single seed.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Training data as CSV (`f0,...,y[,sigma]`), replacing the configured source.
    #[arg(long)]
    pub data_csv: Option<PathBuf>,
    /// Held-out CSV; without it the training CSV is split.
    #[arg(long, requires = "data_csv")]
    pub test_csv: Option<PathBuf>,
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Leave σ = 0 samples out of the ε-error instead of failing.
    #[arg(long)]
    pub skip_zero_sigma: bool,
    /// Output directory (the CSV matrix file for `interpret`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitSide {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitSide,
    /// Report path; printed to standard output when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    FlipErSign,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random configurations per head.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    #[arg(long, value_parser = parse_head, value_delimiter = ',')]
    pub heads: Option<Vec<HeadKind>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt the analytic gradient on purpose (self-test of the checker).
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpretMode {
    Scoremap,
    Occlusion,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum)]
    pub mode: InterpretMode,
    /// Feature maps as JSON `{channels, height, width, values}` (scoremap mode).
    #[arg(long, required_if_eq("mode", "scoremap"))]
    pub maps: Option<PathBuf>,
    /// Row-major input grid shape HxW (occlusion mode); must multiply to the input width.
    #[arg(long, value_parser = parse_shape, required_if_eq("mode", "occlusion"))]
    pub grid_shape: Option<(usize, usize)>,
    /// Occluder shape HxW.
    #[arg(long, value_parser = parse_shape, default_value = "32x32")]
    pub mask: (usize, usize),
    #[arg(long, default_value_t = 32)]
    pub stride: usize,
    #[command(flatten)]
    pub overrides: Overrides,
}
