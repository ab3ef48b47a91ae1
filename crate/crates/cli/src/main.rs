use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mgdesign::harness::{self, CaseId, DesignReport, PartitionSpec, RunOptions, SweepAxes};
use mgdesign::model::{load_scenario, ScenarioConfig};
use mgdesign::solver::Backend;
use mgdesign::synthetic;

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "design", version, about = "Microgrid investment design with islanding and reliability")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// MILP backend: highs or bnb.
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Relative MIP gap.
    #[arg(long, global = true)]
    gap: Option<f64>,
    /// Relative bound gap at which the decomposition stops.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Number of top-ranked islanding events seeded into the master.
    #[arg(long, global = true)]
    n0: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one design case.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "full")]
        case: String,
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration bound log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Per-bus reliability table (CSV).
        #[arg(long)]
        reliability_csv: Option<PathBuf>,
    },
    /// Re-optimize across a grid of sensitivity points.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Axes such as "duration=6,12;rg=0.5,1,2;storage=1,0.6".
        #[arg(long)]
        axes: String,
        #[arg(long, default_value = "full")]
        case: String,
        /// Table output (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Table and trend summary (JSON).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Design each microgrid of a feeder partition independently.
    Partition {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the scenario named in the spec.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "full")]
        case: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic reliability indices of a design with a simulation.
    McValidate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        years: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comparison table (CSV); printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one of the built-in scenarios as JSON.
    Scenario {
        /// toy, chain or storage-heavy.
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.global.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<mgdesign::Error>()) {
        Some(err) if err.is_input_error() => EXIT_VALIDATION,
        Some(_) => EXIT_SOLVER,
        None if e.chain().any(|c| c.downcast_ref::<mgdesign::solver::SolverError>().is_some()) => EXIT_SOLVER,
        None => EXIT_VALIDATION,
    }
}

fn options(cfg: &ScenarioConfig, g: &GlobalOpts) -> Result<RunOptions> {
    let mut o = RunOptions::from_cfg(cfg);
    if let Some(s) = &g.solver {
        o.solve.backend = s
            .parse::<Backend>()
            .map_err(|e| mgdesign::Error::InvalidArgument(e.to_string()))?;
    }
    if let Some(gap) = g.gap {
        check_fraction("--gap", gap)?;
        o.solve.mip_gap = gap;
    }
    if let Some(eps) = g.eps {
        check_fraction("--eps", eps)?;
        o.eps = eps;
    }
    if let Some(n0) = g.n0 {
        if n0 == 0 {
            return Err(mgdesign::Error::InvalidArgument("--n0 must be at least 1".into()).into());
        }
        o.n0 = n0;
    }
    if let Some(t) = g.threads {
        o.threads = t.max(1);
        o.solve.threads = t.max(1);
    }
    Ok(o)
}

fn check_fraction(flag: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(mgdesign::Error::InvalidArgument(format!("{flag} must lie in (0, 1), got {v}")).into())
    }
}

fn case(s: &str) -> Result<CaseId> {
    Ok(s.parse::<CaseId>()?)
}

/// Writes through a sibling temporary file so readers never see partial output.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| mgdesign::Error::Io {
        path: tmp.clone(),
        source: e,
    })?;
    fs::rename(&tmp, path).map_err(|e| mgdesign::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path).map_err(|e| mgdesign::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?)
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Run {
            scenario,
            case: c,
            out,
            log,
            reliability_csv,
        } => {
            let id = case(&c)?;
            let cfg = load_scenario(&scenario)?;
            let opts = options(&cfg, g)?;
            let run = harness::run_case(&cfg, id, &opts).with_context(|| format!("case {id} on {}", scenario.display()))?;
            write_atomic(&out, &run.report.to_json())?;
            if let (Some(path), Some(state)) = (log, &run.ccg) {
                write_atomic(&path, &state.log_csv())?;
            }
            if let Some(path) = reliability_csv {
                write_atomic(&path, &run.report.reliability.to_csv())?;
            }
            let r = &run.report;
            println!(
                "{} {}: total {:.2} $/y ({:.3} c/kWh), {} DER units, {} events not islandable",
                r.scenario,
                id,
                r.costs.total,
                r.costs_cents_per_kwh.total,
                r.installed_der.len(),
                r.infeasible_events.len()
            );
        }
        Command::Sweep {
            scenario,
            axes,
            case: c,
            out,
            json,
        } => {
            let id = case(&c)?;
            let axes = SweepAxes::parse(&axes)?;
            let cfg = load_scenario(&scenario)?;
            let opts = options(&cfg, g)?;
            let table = harness::sweep(&cfg, &axes, id, &opts)?;
            write_atomic(&out, &table.to_csv())?;
            if let Some(path) = json {
                write_atomic(&path, &(serde_json::to_string_pretty(&table)? + "\n"))?;
            }
            let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} sweep points, {failed} failed", table.rows.len());
            for t in &table.trends {
                println!("trend along {}: dg {:+}, storage {:+}", t.axis, t.dg_sign, t.storage_sign);
            }
        }
        Command::Partition {
            spec,
            scenario,
            case: c,
            out,
        } => {
            let id = case(&c)?;
            let text = read_text(&spec)?;
            let pspec: PartitionSpec = serde_json::from_str(&text).map_err(|e| mgdesign::Error::Parse {
                origin: spec.display().to_string(),
                message: e.to_string(),
            })?;
            let path = match (scenario, &pspec.scenario) {
                (Some(p), _) => p,
                (None, Some(rel)) => spec.parent().unwrap_or_else(|| Path::new(".")).join(rel),
                (None, None) => {
                    return Err(mgdesign::Error::InvalidArgument("partition spec names no scenario; pass --scenario".into()).into())
                }
            };
            let cfg = load_scenario(&path)?;
            let opts = options(&cfg, g)?;
            let report = harness::partition(&cfg, &pspec.partitions, id, &opts)?;
            write_atomic(&out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            let a = &report.aggregate;
            println!(
                "{} microgrids: total {:.2} $/y, investment {:.2} $/y, EENS {:.3} kWh/y",
                report.partitions.len(),
                a.costs.total,
                a.costs.investment,
                a.eens_kwh
            );
        }
        Command::McValidate {
            scenario,
            design,
            years,
            seed,
            out,
        } => {
            let cfg = load_scenario(&scenario)?;
            let report = DesignReport::from_json(&read_text(&design)?, &design.display().to_string())?;
            let opts = options(&cfg, g)?;
            let cmp = harness::mc_validate(&cfg, &report, years, seed, &opts)?;
            match out {
                Some(path) => write_atomic(&path, &cmp.to_csv())?,
                None => print!("{}", cmp.to_csv()),
            }
            println!("overall: {}", if cmp.pass { "PASS" } else { "FAIL" });
        }
        Command::Scenario { builtin, out } => {
            let cfg = match builtin.as_str() {
                "toy" => synthetic::toy_feeder(),
                "chain" => synthetic::three_bus_chain(),
                "storage-heavy" => synthetic::storage_heavy(),
                other => {
                    return Err(mgdesign::Error::InvalidArgument(format!(
                        "unknown built-in scenario '{other}' (expected toy, chain or storage-heavy)"
                    ))
                    .into())
                }
            };
            write_atomic(&out, &(cfg.to_json() + "\n"))?;
        }
    }
    Ok(())
}
