use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_rational::Ratio;

use flowstitch::bench::{self, GenSpec, SolverSpec};
use flowstitch::scalar::parse_rational;
use flowstitch::stitch::{self, StitchConfig, WindowParams, DEFAULT_GAMMA};
use flowstitch::{
    prune_light_jobs, reinsert_pruned, schedule_cost, solver_by_name, validate_schedule,
    Availability, BigInt, Instance, Schedule,
};

#[derive(Parser)]
#[command(name = "flowstitch", version, about = "Weighted flow-time scheduling on one machine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StitchKind {
    None,
    Standard,
    Windowed,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and write the schedule.
    Solve {
        /// Window solver: exact, unitslot or hdf.
        #[arg(long, default_value = "hdf")]
        alg: String,
        #[arg(long, value_enum, default_value = "standard")]
        stitch: StitchKind,
        /// Accuracy for the windowed variant, e.g. 1/4 or 0.3.
        #[arg(long, default_value = "1/4")]
        eps: String,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: u32,
        /// Window size b for the windowed variant (overrides eps/gamma).
        #[arg(long)]
        window: Option<usize>,
        /// Drop jobs lighter than eps/(n^2 spread) * max weight before
        /// solving; they are run in the leftover idle time.
        #[arg(long)]
        prune_eps: Option<String>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-step ledger as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for the per-step rectangle cover instances.
        #[arg(long)]
        r2c_dir: Option<PathBuf>,
    },
    /// Generate a random multi-class instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        weight_max: u64,
        /// Release span as a fraction of the total size, e.g. 1/2.
        #[arg(long, default_value = "1/2")]
        density: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a schedule against its instance and print its cost.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Run solvers over a directory of instances.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated: hdf, exact, standard:hdf, windowed:exact:2, ...
        #[arg(long, value_delimiter = ',')]
        algs: Vec<String>,
        #[arg(long)]
        csv: PathBuf,
    },
}

fn read_instance(path: &PathBuf) -> Result<Instance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn solve(
    alg: &str,
    kind: StitchKind,
    eps: &str,
    gamma: u32,
    window: Option<usize>,
    prune_eps: Option<&str>,
    input: &PathBuf,
    out: &PathBuf,
    report: Option<&PathBuf>,
    r2c_dir: Option<&PathBuf>,
) -> Result<()> {
    let inst = read_instance(input)?;
    let solver = solver_by_name::<BigInt>(alg)?;
    let (core, pruned) = match prune_eps {
        Some(e) => {
            let e = parse_rational(e).ok_or_else(|| anyhow!("bad --prune-eps {e:?}"))?;
            prune_light_jobs(&inst, &e)
        }
        None => (inst.clone(), Vec::new()),
    };
    let config = match kind {
        StitchKind::None => None,
        StitchKind::Standard => Some(StitchConfig::standard()),
        StitchKind::Windowed => {
            let eps = parse_rational(eps).ok_or_else(|| anyhow!("bad --eps {eps:?}"))?;
            Some(StitchConfig::windowed(WindowParams {
                eps,
                gamma,
                width: window,
            }))
        }
    };
    let sched = match config {
        None => solver.solve(&core)?,
        Some(mut config) => {
            config.trace = r2c_dir.is_some();
            let (s, rep) = stitch::run(&core, solver.as_ref(), &config)?;
            eprint!("{}", rep.summary());
            if let Some(path) = report {
                std::fs::write(path, rep.to_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(dir) = r2c_dir {
                std::fs::create_dir_all(dir)?;
                for t in &rep.traces {
                    let path = dir.join(format!("step_{:03}.r2c", t.k));
                    std::fs::write(&path, t.r2c.to_text())
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
            s
        }
    };
    let sched = reinsert_pruned(&sched, &pruned);
    if let Err(v) = validate_schedule(&sched, &inst, &Availability::full()) {
        bail!("produced schedule is invalid: {v}");
    }
    std::fs::write(out, sched.to_text()).with_context(|| format!("writing {}", out.display()))?;
    println!("wF = {}", schedule_cost(&sched, &inst));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            alg,
            stitch,
            eps,
            gamma,
            window,
            prune_eps,
            input,
            out,
            report,
            r2c_dir,
        } => solve(
            &alg,
            stitch,
            &eps,
            gamma,
            window,
            prune_eps.as_deref(),
            &input,
            &out,
            report.as_ref(),
            r2c_dir.as_ref(),
        ),
        Command::Gen {
            n,
            classes,
            seed,
            weight_max,
            density,
            out,
        } => {
            let density: Ratio<u64> = parse_rational::<i64>(&density)
                .filter(|d| *d.numer() >= 0)
                .map(|d| Ratio::new(*d.numer() as u64, *d.denom() as u64))
                .ok_or_else(|| anyhow!("bad --density {density:?}"))?;
            let spec = GenSpec {
                n,
                classes,
                weight_max,
                density,
                seed,
            };
            let inst: Instance = bench::gen_random(&spec)?;
            std::fs::write(&out, inst.to_text())
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Verify { input, schedule } => {
            let inst = read_instance(&input)?;
            let text = std::fs::read_to_string(&schedule)
                .with_context(|| format!("reading {}", schedule.display()))?;
            let sched = Schedule::parse(&text)?;
            validate_schedule(&sched, &inst, &Availability::full())
                .map_err(|v| anyhow!("invalid schedule: {v}"))?;
            println!("ok wF = {}", schedule_cost(&sched, &inst));
            Ok(())
        }
        Command::Bench { corpus, algs, csv } => {
            let insts = bench::load_corpus::<BigInt>(&corpus)?;
            let solvers = algs
                .iter()
                .map(|a| a.parse::<SolverSpec>())
                .collect::<Result<Vec<_>, _>>()?;
            let rows = bench::run_bench_default(&insts, &solvers);
            std::fs::write(&csv, bench::rows_to_csv(&rows))
                .with_context(|| format!("writing {}", csv.display()))?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            for s in &solvers {
                let name = s.to_string();
                let ratios: Vec<_> = rows
                    .iter()
                    .filter(|r| r.solver == name)
                    .filter_map(|r| r.ratio.clone())
                    .collect();
                if let Some(st) = bench::ratio_stats(&ratios) {
                    println!("{name}: {st}");
                }
            }
            if failed > 0 {
                bail!("{failed} of {} runs failed", rows.len());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
