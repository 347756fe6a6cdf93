use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use eigencast::analytics::{mc_integral_oracle, moment_catalogue, SamplingMode};
use eigencast::engine_statevector::cross_check_variant;
use eigencast::engine_eigen::Variant;
use eigencast::harness::emit::{
    fmt_float, write_csv_file, write_jsonl_file, write_table_csv, write_table_csv_file,
};
use eigencast::harness::reproduce::{
    self, fig2b_rows, fig3b_rows, fig4_rows, FIG2B_HEADER, FIG3B_HEADER, FIG4_HEADER,
};
use eigencast::harness::{estimate_suppression, run_trajectories, ExperimentConfig};
use eigencast::spectral::{
    build_zzxz, detect_spectral_symmetry, diagonalize, Boundary, SpinChainSpec,
};
use eigencast::adiabatic::{run_qaa, Schedule, SweepConfig};
use eigencast::Error;

#[derive(Parser)]
#[command(name = "eigencast", version, about = "Eigenstate cooling and broadcasting simulator")]
struct Cli {
    /// Override the master RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the trajectory count.
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for trajectory dumps.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker thread count; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Open,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Open => Boundary::Open,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Linear,
    Smoothstep,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Linear => Schedule::Linear,
            ScheduleArg::Smoothstep => Schedule::Smoothstep,
        }
    }
}

#[derive(clap::Args)]
struct ChainArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    zz_coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    x_field: f64,
    #[arg(long, default_value_t = 1.0)]
    z_field: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Periodic)]
    boundary: BoundaryArg,
}

impl ChainArgs {
    fn spec(&self) -> SpinChainSpec {
        SpinChainSpec {
            n: self.n,
            zz_coupling: self.zz_coupling,
            x_field: self.x_field,
            z_field: self.z_field,
            boundary: self.boundary.into(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Diagonalize a ZZXZ chain and list its spectrum.
    Spectrum {
        #[command(flatten)]
        chain: ChainArgs,
        /// Constant energy offset added before diagonalization.
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        /// Tolerance for the spectral symmetry report.
        #[arg(long, default_value_t = 1e-9)]
        symmetry_tol: f64,
    },
    /// Run a trajectory experiment from a TOML config.
    Run {
        /// Experiment config file.
        config: PathBuf,
        /// Also write aggregate statistics to this JSON file.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Run an experiment over a grid of initial ground overlaps.
    Sweep {
        config: PathBuf,
        /// Comma-separated gamma^2 grid.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
    },
    /// Adiabatic sweeps over a grid of total times.
    Qaa {
        #[command(flatten)]
        chain: ChainArgs,
        /// Comma-separated sweep times.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128")]
        times: Vec<f64>,
        /// Trotter-style discretization steps per unit time.
        #[arg(long, default_value_t = 4.0)]
        steps_per_unit: f64,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Smoothstep)]
        schedule: ScheduleArg,
    },
    /// Cross-check the population engine against the statevector engine.
    Validate {
        /// Largest chain size checked (statevector cost grows quickly).
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Check every closed-form moment against the Monte Carlo oracle.
    ValidateMoments {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Regenerate figure-style datasets.
    Reproduce {
        #[arg(value_enum)]
        target: ReproduceTarget,
        /// Chain size for the fig4 comparison.
        #[arg(long, default_value_t = 5)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReproduceTarget {
    Fig2b,
    Fig3b,
    Fig4,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit_table(
    out: Option<&PathBuf>,
    header: &[&str],
    rows: &[Vec<String>],
) -> eigencast::Result<()> {
    match out {
        Some(path) => write_table_csv_file(path, header, rows),
        None => {
            let stdout = std::io::stdout();
            write_table_csv(stdout.lock(), header, rows).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn run(cli: &Cli) -> eigencast::Result<()> {
    match &cli.command {
        Command::Spectrum {
            chain,
            offset,
            symmetry_tol,
        } => {
            let h = build_zzxz(&chain.spec())?.shifted(*offset);
            let ed = diagonalize(&h)?;
            let report = detect_spectral_symmetry(&ed, *symmetry_tol);
            if !report.is_empty() {
                eprintln!(
                    "warning: {} symmetric eigenvalue pair(s) detected; phase draws cannot \
                     distinguish the partners. Rerun with a nonzero --offset.",
                    report.negation_pairs.len()
                );
            }
            let rows: Vec<Vec<String>> = ed
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(i, ev)| vec![i.to_string(), fmt_float(*ev)])
                .collect();
            emit_table(cli.out.as_ref(), &["index", "eigenvalue"], &rows)?;
            eprintln!("gap: {}", fmt_float(ed.gap));
            Ok(())
        }
        Command::Run { config, stats } => {
            let mut cfg = ExperimentConfig::from_path(config)?;
            apply_overrides(&mut cfg, cli);
            let records = run_trajectories(&cfg)?;
            match (&cli.out, cli.format) {
                (Some(path), Format::Csv) => write_csv_file(path, &records)?,
                (Some(path), Format::Jsonl) => write_jsonl_file(path, &records)?,
                (None, format) => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    let res = match format {
                        Format::Csv => eigencast::harness::emit::write_csv(&mut lock, &records),
                        Format::Jsonl => {
                            eigencast::harness::emit::write_jsonl(&mut lock, &records)
                        }
                    };
                    res.map_err(|source| Error::Io {
                        path: "<stdout>".into(),
                        source,
                    })?;
                }
            }
            let agg = estimate_suppression(&records, cfg.near_convergent_threshold)?;
            if let Some(path) = stats {
                eigencast::harness::emit::write_stats_file(path, &agg)?;
            } else if cli.out.is_some() {
                println!("{}", serde_json::to_string_pretty(&agg).expect("serialize"));
            }
            Ok(())
        }
        Command::Sweep { config, gamma } => {
            let base = ExperimentConfig::from_path(config)?;
            let mut rows = Vec::new();
            for g in gamma {
                let mut cfg = base.clone();
                apply_overrides(&mut cfg, cli);
                cfg.initial = eigencast::harness::InitialState::GroundOverlap { gamma_sq: *g };
                cfg.validate()?;
                let records = run_trajectories(&cfg)?;
                let agg = estimate_suppression(&records, cfg.near_convergent_threshold)?;
                rows.push(vec![
                    fmt_float(*g),
                    fmt_float(agg.combined.geometric_mean),
                    fmt_float(agg.combined.ci_low),
                    fmt_float(agg.combined.ci_high),
                    fmt_float(agg.convergence_fractions[0]),
                    fmt_float(agg.herald_failure_frequency),
                ]);
            }
            emit_table(
                cli.out.as_ref(),
                &[
                    "gamma_sq",
                    "suppression",
                    "ci_low",
                    "ci_high",
                    "ground_fraction",
                    "herald_failure_frequency",
                ],
                &rows,
            )
        }
        Command::Qaa {
            chain,
            times,
            steps_per_unit,
            schedule,
        } => {
            let ht = build_zzxz(&chain.spec())?;
            let h0 = eigencast::spectral::build_field_z(chain.n)?;
            let mut rows = Vec::new();
            for t in times {
                let started = Instant::now();
                let sweep = SweepConfig {
                    h0: h0.clone(),
                    ht: ht.clone(),
                    total_time: *t,
                    steps: ((steps_per_unit * t).ceil() as usize).max(1),
                    schedule: (*schedule).into(),
                };
                let result = run_qaa(&sweep)?;
                rows.push(vec![
                    fmt_float(*t),
                    fmt_float(result.infidelity),
                    fmt_float(started.elapsed().as_secs_f64()),
                ]);
            }
            emit_table(cli.out.as_ref(), &["t", "infidelity", "wall_time"], &rows)
        }
        Command::Validate { max_n, tolerance } => {
            let rows = validate_engines(*max_n, cli.seed.unwrap_or(0))?;
            let worst = rows
                .iter()
                .map(|r| r.3)
                .fold(0.0f64, f64::max);
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|(variant, n, tau, dev)| {
                    vec![
                        variant.to_string(),
                        n.to_string(),
                        fmt_float(*tau),
                        fmt_float(*dev),
                        (dev <= tolerance).to_string(),
                    ]
                })
                .collect();
            emit_table(
                cli.out.as_ref(),
                &["variant", "n", "tau", "max_deviation", "pass"],
                &table,
            )?;
            if worst > *tolerance {
                return Err(Error::Validation(format!(
                    "cross-engine deviation {worst:.3e} exceeds {tolerance:.1e}"
                )));
            }
            Ok(())
        }
        Command::ValidateMoments { samples } => {
            let seed = cli.seed.unwrap_or(0);
            let mut rows = Vec::new();
            let mut failures = 0usize;
            for entry in moment_catalogue() {
                let est = mc_integral_oracle(
                    entry.dims,
                    Arc::clone(&entry.integrand),
                    Arc::clone(&entry.bias),
                    *samples,
                    seed,
                    SamplingMode::Stratified,
                )?;
                let pass = (est.mean - entry.closed_form).abs() <= 3.0 * est.standard_error;
                failures += usize::from(!pass);
                rows.push(vec![
                    entry.name.clone(),
                    fmt_float(entry.closed_form),
                    fmt_float(est.mean),
                    fmt_float(est.standard_error),
                    pass.to_string(),
                ]);
            }
            emit_table(
                cli.out.as_ref(),
                &["quantity", "closed_form", "mc_estimate", "std_error", "pass"],
                &rows,
            )?;
            if failures > 0 {
                return Err(Error::Validation(format!(
                    "{failures} moment(s) outside 3 standard errors"
                )));
            }
            Ok(())
        }
        Command::Reproduce { target, n } => {
            let seed = cli.seed.unwrap_or(7);
            match target {
                ReproduceTarget::Fig2b => {
                    let rows = reproduce::fig2b(seed, cli.trajectories.unwrap_or(2000))?;
                    emit_table(cli.out.as_ref(), FIG2B_HEADER, &fig2b_rows(&rows))
                }
                ReproduceTarget::Fig3b => {
                    let rows = reproduce::fig3b(seed, cli.trajectories.unwrap_or(2000))?;
                    emit_table(cli.out.as_ref(), FIG3B_HEADER, &fig3b_rows(&rows))
                }
                ReproduceTarget::Fig4 => {
                    let result = reproduce::fig4(seed, cli.trajectories.unwrap_or(400), *n)?;
                    emit_table(cli.out.as_ref(), FIG4_HEADER, &fig4_rows(&result))?;
                    eprintln!(
                        "crossover: {} (cooling total time {:.1}, infidelity {:.3e})",
                        result.crossover,
                        result.cooling.expected_total_time,
                        result.cooling.achieved_infidelity
                    );
                    Ok(())
                }
            }
        }
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, cli: &Cli) {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.trajectories {
        cfg.trajectories = t;
    }
}

/// Enumerated-record equivalence checks at small sizes; weights are drawn
/// from a seeded stream so reruns are identical.
fn validate_engines(
    max_n: usize,
    seed: u64,
) -> eigencast::Result<Vec<(&'static str, usize, f64, f64)>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let mut draw_weights = |dim: usize| -> Vec<f64> {
        let mut w: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 0.01).collect();
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        w
    };
    let mut rows = Vec::new();
    for n in 2..=max_n.min(4) {
        let spec = SpinChainSpec {
            n,
            zz_coupling: 1.0,
            x_field: 0.9,
            z_field: 0.4,
            boundary: Boundary::Periodic,
        };
        let ed = diagonalize(&build_zzxz(&spec)?)?;
        let dim = 1 << n;
        for tau in [0.41, 1.7, 5.3] {
            let b = draw_weights(dim);
            let a = draw_weights(dim);
            rows.push((
                "single",
                n,
                tau,
                cross_check_variant(Variant::Single, &ed, &[b.clone()], tau)?,
            ));
            for (name, variant) in [
                ("two_bell", Variant::TwoBell),
                ("two_swap", Variant::TwoSwap),
                ("schmidt", Variant::Schmidt),
            ] {
                rows.push((
                    name,
                    n,
                    tau,
                    cross_check_variant(variant, &ed, &[a.clone(), b.clone()], tau)?,
                ));
            }
            if n <= 3 {
                rows.push((
                    "multi_symmetric",
                    n,
                    tau,
                    cross_check_variant(
                        Variant::MultiSymmetric,
                        &ed,
                        &[a.clone(), a.clone(), b.clone()],
                        tau,
                    )?,
                ));
            }
        }
    }
    Ok(rows)
}
