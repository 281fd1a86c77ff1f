use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use flatflow::analysis::{
    median_duration, timing_report_from_rows, FrontReport, TimingRow, DEFAULT_FRONT_THRESHOLD,
};
use flatflow::io::write_field;
use flatflow::{l1_distance, linf_distance, load_scenario, ModelKind, RunResult, Scenario};

/// Two-phase flow simulators for flat porous domains.
#[derive(Parser)]
#[command(name = "flatflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and optionally write its snapshots.
    Run {
        scenario: PathBuf,
        /// Directory for field dumps, the canonical scenario and a summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between the snapshots of two scenarios on the same grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::L1)]
        metric: Metric,
    },
    /// Distance to the reduced model as the aspect ratio shrinks.
    Convergence {
        /// A TP or BTP scenario.
        scenario: PathBuf,
        /// Aspect ratios, e.g. `1,1/4,1/16`.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<String>,
        /// Reference scenario; defaults to VE (or BVE) on the same setup.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Metric::L1)]
        metric: Metric,
        /// Exit with failure unless the distances strictly decrease.
        #[arg(long)]
        strict: bool,
    },
    /// Wall-clock comparison of models over a list of grids.
    Bench {
        scenario: PathBuf,
        /// Grids as `NXxNZ`, e.g. `100x100,200x100`.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<String>,
        /// Models to time; the first is the numerator of every ratio.
        /// Defaults to the scenario's model followed by VE.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    L1,
    Linf,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::Linf => "linf",
        }
    }

    fn distance(self, a: &flatflow::ScalarField, b: &flatflow::ScalarField) -> Result<f64> {
        Ok(match self {
            Metric::L1 => l1_distance(a, b)?,
            Metric::Linf => linf_distance(a, b)?,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, out } => cmd_run(&scenario, out.as_deref()),
        Command::Compare { a, b, metric } => cmd_compare(&a, &b, metric),
        Command::Convergence {
            scenario,
            gammas,
            reference,
            metric,
            strict,
        } => cmd_convergence(&scenario, &gammas, reference.as_deref(), metric, strict),
        Command::Bench {
            scenario,
            grids,
            models,
            repeats,
            csv,
        } => cmd_bench(&scenario, &grids, &models, repeats, csv.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

/// Worker count: `FLATFLOW_THREADS` if set, else the available cores.
fn worker_limit() -> Result<usize> {
    match std::env::var("FLATFLOW_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("FLATFLOW_THREADS must be a positive integer, got '{v}'"))?;
            if n == 0 {
                bail!("FLATFLOW_THREADS must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `jobs` on at most `workers` threads, keeping results in job order.
fn run_parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send + '_>>, workers: usize) -> Vec<T> {
    let n = jobs.len();
    let queue: Vec<Mutex<Option<Box<dyn FnOnce() -> T + Send + '_>>>> =
        jobs.into_iter().map(|j| Mutex::new(Some(j))).collect();
    let results: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= n {
                    break;
                }
                let job = queue[k].lock().unwrap().take().unwrap();
                *results[k].lock().unwrap() = Some(job());
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.into_inner().unwrap().unwrap())
        .collect()
}

fn fmt_time(t: f64) -> String {
    format!("{t}")
}

fn summary(result: &RunResult) -> String {
    let sc = &result.scenario;
    let last = result.snapshots.last().unwrap();
    let fronts = FrontReport::new(&last.field, last.time.max(f64::MIN_POSITIVE), DEFAULT_FRONT_THRESHOLD);
    let mut out = String::new();
    out.push_str(&format!("model            {}\n", sc.label()));
    out.push_str(&format!("grid             {}x{}\n", sc.nx, sc.nz));
    out.push_str(&format!("end_time         {}\n", sc.end_time));
    out.push_str(&format!("steps            {}\n", result.stats.steps));
    out.push_str(&format!("max_saturation   {:.6}\n", last.field.max()));
    out.push_str(&format!("min_saturation   {:.6}\n", last.field.min()));
    if let Ok(f) = fronts {
        out.push_str(&format!("front(0.1)       {:.6}\n", f.aggregate));
    }
    let l = &result.ledger;
    out.push_str(&format!(
        "mass             initial {:.12e} injected {:.12e} escaped {:.12e} current {:.12e}\n",
        l.initial_mass, l.injected, l.escaped, l.current_mass
    ));
    out.push_str(&format!("mass_defect      {:.3e}\n", l.relative_defect()));
    let st = &result.stats;
    if st.pressure_solves > 0 {
        out.push_str(&format!(
            "pressure_solves  {} (iterations {}, max {})\n",
            st.pressure_solves, st.pressure_iterations, st.max_pressure_iterations
        ));
    }
    if st.helmholtz_solves > 0 {
        out.push_str(&format!(
            "helmholtz_solves {} (iterations {})\n",
            st.helmholtz_solves, st.helmholtz_iterations
        ));
    }
    let t = &result.timings;
    out.push_str(&format!(
        "wall_clock_s     total {:.6} velocity {:.6} transport {:.6}\n",
        t.total.as_secs_f64(),
        t.velocity.as_secs_f64(),
        t.transport.as_secs_f64()
    ));
    out
}

fn cmd_run(path: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let sc = load(path)?;
    let result = flatflow::run(&sc)?;
    let text = summary(&result);
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let stem = sc.name.clone().unwrap_or_else(|| sc.model.name().to_lowercase());
        for snap in &result.snapshots {
            let file = dir.join(format!("{stem}_t{}.dat", fmt_time(snap.time)));
            write_field(&snap.field, snap.time, &file)?;
            println!("wrote {}", file.display());
        }
        fs::write(dir.join("scenario.cfg"), sc.to_config_string())?;
        fs::write(dir.join("summary.txt"), text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(a: &Path, b: &Path, metric: Metric) -> Result<ExitCode> {
    let (sa, sb) = (load(a)?, load(b)?);
    let workers = worker_limit()?;
    let results = run_parallel(
        vec![
            Box::new(|| flatflow::run(&sa)),
            Box::new(|| flatflow::run(&sb)),
        ],
        workers,
    );
    let mut results = results.into_iter();
    let ra = results.next().unwrap()?;
    let rb = results.next().unwrap()?;
    println!("{:>12} {:>24}", "time", metric.name());
    let mut any = false;
    for snap in &ra.snapshots {
        if let Some(other) = rb.snapshot_at(snap.time) {
            let d = metric.distance(&snap.field, other)?;
            println!("{:>12} {:>24.16e}", fmt_time(snap.time), d);
            any = true;
        }
    }
    if !any {
        bail!("the scenarios share no snapshot time");
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_gamma(text: &str) -> Result<f64> {
    let t = text.trim();
    let v = match t.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>()? / b.trim().parse::<f64>()?,
        None => t.parse::<f64>()?,
    };
    if !(v > 0.0 && v.is_finite()) {
        bail!("aspect ratio must be positive, got '{text}'");
    }
    Ok(v)
}

fn cmd_convergence(
    path: &Path,
    gammas: &[String],
    reference: Option<&Path>,
    metric: Metric,
    strict: bool,
) -> Result<ExitCode> {
    let base = load(path)?;
    let gammas: Vec<f64> = gammas
        .iter()
        .map(|g| parse_gamma(g).with_context(|| format!("parsing gamma '{g}'")))
        .collect::<Result<_>>()?;
    let reduced = match base.model {
        ModelKind::Tp => ModelKind::Ve,
        ModelKind::Btp => ModelKind::Bve,
        other => bail!("convergence needs a TP or BTP scenario, got {other}"),
    };
    let reference = match reference {
        Some(p) => load(p)?,
        // A Brinkman length missing from the scenario follows from its own gamma.
        None => base.with_model(reduced)?,
    };
    let variants: Vec<Scenario> = gammas
        .iter()
        .map(|&g| {
            let mut sc = base.clone();
            sc.gamma = Some(g);
            sc.validate().map(|_| sc)
        })
        .collect::<flatflow::Result<_>>()?;

    let mut jobs: Vec<Box<dyn FnOnce() -> flatflow::Result<RunResult> + Send + '_>> =
        vec![Box::new(|| flatflow::run(&reference))];
    for sc in &variants {
        jobs.push(Box::new(move || flatflow::run(sc)));
    }
    let mut results = run_parallel(jobs, worker_limit()?).into_iter();
    let reference_run = results.next().unwrap()?;
    let target = reference_run.final_field();

    println!("reference {} on {}x{}", reference.label(), reference.nx, reference.nz);
    println!("{:>14} {:>24}", "gamma", metric.name());
    let mut distances = Vec::new();
    for (g, r) in gammas.iter().zip(results) {
        let d = metric.distance(r?.final_field(), target)?;
        println!("{:>14} {:>24.16e}", fmt_time(*g), d);
        distances.push(d);
    }
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[b].partial_cmp(&gammas[a]).unwrap());
    let decreasing = order.windows(2).all(|w| distances[w[1]] < distances[w[0]]);
    println!(
        "verdict: distance {} strictly decreasing as gamma shrinks",
        if decreasing { "is" } else { "is NOT" }
    );
    Ok(if strict && !decreasing {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .trim()
        .split_once(['x', 'X'])
        .with_context(|| format!("grid '{text}' is not of the form NXxNZ"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn cmd_bench(
    path: &Path,
    grids: &[String],
    models: &[String],
    repeats: usize,
    csv: Option<&Path>,
) -> Result<ExitCode> {
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let base = load(path)?;
    let grids: Vec<(usize, usize)> = grids.iter().map(|g| parse_grid(g)).collect::<Result<_>>()?;
    let mut kinds: Vec<ModelKind> = if models.is_empty() {
        vec![base.model, ModelKind::Ve]
    } else {
        models
            .iter()
            .map(|m| m.parse::<ModelKind>())
            .collect::<flatflow::Result<_>>()?
    };
    kinds.dedup();

    let mut cases = Vec::new();
    for &(nx, nz) in &grids {
        for &kind in &kinds {
            let mut sc = base.with_model(kind)?;
            sc.nx = nx;
            sc.nz = nz;
            sc.validate()?;
            cases.push(sc);
        }
    }
    let mut jobs: Vec<Box<dyn FnOnce() -> flatflow::Result<RunResult> + Send + '_>> = Vec::new();
    for sc in &cases {
        for _ in 0..repeats {
            jobs.push(Box::new(move || flatflow::run(sc)));
        }
    }
    let results = run_parallel(jobs, worker_limit()?);
    let mut rows = Vec::new();
    let mut results = results.into_iter();
    for _ in &cases {
        let runs: Vec<RunResult> = results.by_ref().take(repeats).collect::<flatflow::Result<_>>()?;
        let median = median_duration(runs.iter().map(|r| r.timings.total).collect());
        // Report the phase split of the run closest to the median.
        let pick = runs
            .iter()
            .min_by_key(|r| abs_diff(r.timings.total, median))
            .unwrap();
        let mut row = TimingRow::from_result(pick);
        row.total = median;
        rows.push(row);
    }
    let report = timing_report_from_rows(rows)?;
    print!("{}", report.to_table());
    if let Some(p) = csv {
        fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn abs_diff(a: Duration, b: Duration) -> Duration {
    if a > b {
        a - b
    } else {
        b - a
    }
}
