//! Command-line surface.

use std::path::PathBuf;
use std::str::FromStr;

use circpack::analysis::SweepSettings;
use circpack::engine::{PolicyMode, DEFAULT_TAX_MAX};
use circpack::model::UpperObjective;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rust_decimal::Decimal;

use crate::error::CliError;

/// Bilevel tax/subsidy design for packaging end-of-life pathways.
#[derive(Debug, Clone, Parser)]
#[command(name = "circpack", version)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario file; the bundled coffee case when omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "CIRCPACK_OUT", default_value = "out")]
    pub out: PathBuf,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Also write SVG charts.
    #[arg(long, global = true)]
    pub svg: bool,

    #[command(flatten)]
    pub pso: PsoOverrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PsoOverrides {
    #[arg(long, global = true)]
    pub swarm_size: Option<usize>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Upper bound of the tax search interval.
    #[arg(long, global = true)]
    pub tax_max: Option<Decimal>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Optimize one budget level.
    Run {
        #[arg(long, default_value = "min-ghg")]
        objective: UpperObjective,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        budget: Decimal,
        #[arg(long, default_value = "combined")]
        mode: PolicyMode,
    },
    /// Optimize a grid of budgets.
    Sweep {
        #[arg(long, default_value = "min-ghg")]
        objective: UpperObjective,
        #[arg(long, default_value = "combined")]
        mode: PolicyMode,
        /// `lo:hi:step` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0:100:10", allow_hyphen_values = true)]
        budgets: BudgetGrid,
    },
    /// Combined-policy sweeps across glass-washing distances or losses.
    Sensitivity {
        #[arg(long, value_enum)]
        parameter: Parameter,
        /// Comma-separated parameter values (miles, or loss fractions).
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<Decimal>,
        #[arg(long, default_value = "min-ghg")]
        objective: UpperObjective,
        #[arg(long, default_value = "-60:100:10", allow_hyphen_values = true)]
        budgets: BudgetGrid,
    },
    /// Cross-check the follower solvers against enumeration.
    Verify {
        #[arg(long, default_value_t = 10)]
        demand: u64,
        #[arg(long, default_value_t = 8)]
        max_routes: usize,
        /// Pure-linear instances.
        #[arg(long, default_value_t = 200)]
        linear: usize,
        /// Instances with activation costs and capacities.
        #[arg(long, default_value_t = 20)]
        general: usize,
    },
    /// Rebuild the calibrated case and report anchor residuals.
    Calibrate {
        /// Where to write the scenario; `<out>/coffee_case.scenario` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Parameter {
    Distance,
    Loss,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Distance => "distance",
            Parameter::Loss => "loss",
        }
    }
}

/// Non-empty ordered list of budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetGrid(pub Vec<Decimal>);

/// Guards against typos like `0:100:0.0001`.
const MAX_GRID: usize = 100_000;

impl FromStr for BudgetGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| Decimal::from_str(t.trim()).map_err(|e| format!("'{}': {e}", t.trim()));
        let parts: Vec<&str> = s.split(':').collect();
        let grid = match parts.as_slice() {
            [lo, hi, step] => {
                let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
                if step <= Decimal::ZERO {
                    return Err("step must be positive".into());
                }
                if hi < lo {
                    return Err(format!("upper end {hi} is below lower end {lo}"));
                }
                let mut v = Vec::new();
                let mut b = lo;
                while b <= hi {
                    if v.len() == MAX_GRID {
                        return Err(format!("grid has more than {MAX_GRID} points"));
                    }
                    v.push(b);
                    b += step;
                }
                v
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
            _ => return Err("expected lo:hi:step or a comma-separated list".into()),
        };
        if grid.is_empty() {
            return Err("budget grid is empty".into());
        }
        Ok(BudgetGrid(grid))
    }
}

impl RunConfig {
    pub fn settings(&self) -> SweepSettings {
        let d = SweepSettings::default();
        SweepSettings {
            swarm_size: self.pso.swarm_size.unwrap_or(d.swarm_size),
            iterations: self.pso.iterations.unwrap_or(d.iterations),
            restarts: self.pso.restarts.unwrap_or(d.restarts),
            seed: self.seed,
            tax_max: self.pso.tax_max.unwrap_or(DEFAULT_TAX_MAX),
        }
    }

    /// Parses arguments; `--help` and `--version` come back as `Ok(Err(text))`.
    pub fn parse_args<I, T>(args: I) -> Result<Result<RunConfig, String>, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        match RunConfig::try_parse_from(args) {
            Ok(c) => Ok(Ok(c)),
            Err(e) => match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => Ok(Err(e.to_string())),
                _ => Err(CliError::validation(e.to_string().trim_end().to_string(), Vec::new())),
            },
        }
    }
}
