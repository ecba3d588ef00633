//! `clik`: efficiency curves, verification and simulation from the command line.
//!
//! Exit codes: 0 on success, 1 when a verification check fails or a run
//! fails at runtime, 2 for bad arguments, configs or inputs.

mod config;
mod output;
mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clik::asymptotics::{self, EfficiencyCurve};
use clik::verify::{self, Level, VerifyOptions};

use output::Run;
use svg::Panel;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Lib(#[from] clik::Error),

    #[error("{0} verification check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use clik::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(E::Domain { .. } | E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::NotSupported(_)) => 2,
            CliError::Lib(_) | CliError::Io { .. } | CliError::CheckFailed(_) => 1,
        }
    }
}

fn lib(e: clik::Error) -> CliError {
    CliError::Lib(e)
}

fn csv_err(path: &str, e: csv::Error) -> CliError {
    CliError::Usage(format!("{path}: {e}"))
}

#[derive(Parser)]
#[command(name = "clik", version, about = "Composite likelihood efficiency tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise EMVN ratio avar(rho, sigma2 known) / avar(rho, sigma2 estimated).
    Figure1 {
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value_t = asymptotics::GRID_POINTS)]
        grid: usize,
        #[arg(long, default_value = "out/figure1")]
        out: PathBuf,
    },
    /// Full-conditional analogue of figure1, by Monte Carlo at sigma2 = 1.
    Figure2 {
        #[arg(long, default_value_t = 3)]
        p: usize,
        #[arg(long, default_value_t = 41)]
        grid: usize,
        #[arg(long, default_value_t = 200_000)]
        draws: usize,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "out/figure2")]
        out: PathBuf,
    },
    /// Four-cell multinomial: full, independence and pairwise variances.
    Figure3 {
        #[arg(long, default_value_t = 5.0)]
        k: f64,
        #[arg(long, default_value_t = asymptotics::GRID_POINTS)]
        grid: usize,
        #[arg(long, default_value = "out/figure3")]
        out: PathBuf,
    },
    /// Tri-normal mean: variance from (Y1, Y2) against (Y1, Y2, Y3).
    Example2 {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.25,1,4")]
        sigma2: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-0.9,-0.5,0,0.5,0.9")]
        rho: Vec<f64>,
        #[arg(long, default_value = "out/example2")]
        out: PathBuf,
    },
    /// Run the verification checks; exits 1 if any fails.
    Verify {
        #[arg(long, default_value = "quick")]
        level: String,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "out/verify")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0, hide = true)]
        debug_h_shift: f64,
    },
    /// Monte Carlo study of composite likelihood estimators from a config file.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out/simulate")]
        out: PathBuf,
    },
}

fn write_curve(run: &mut Run, name: &str, curve: &EfficiencyCurve) -> Result<(), CliError> {
    let text = curve.to_csv_string().map_err(lib)?;
    run.write_text(name, &text)?;
    Ok(())
}

fn figure1(p: usize, points: usize, out: &Path) -> Result<(), CliError> {
    let grid = asymptotics::rho_grid(p, points)?;
    let curve = asymptotics::ratio_curve_fig1(p, &grid)?;
    let crossover = asymptotics::ratio_crossover_fig1(p)?;
    let mut run = Run::start(out, "figure1")?;
    run.param("p", p).param("grid", points).param("crossover", crossover);
    write_curve(&mut run, "figure1.csv", &curve)?;
    let mut panel = Panel::new(&format!("pairwise, p = {p}"), "rho", "r(rho)")
        .series("ratio", &curve.x, curve.values("ratio")?);
    panel.hlines.push(1.0);
    panel.vlines.push(0.0);
    panel.y_range = Some((0.0, 3.0));
    run.write_text("figure1.svg", &svg::render(&[panel]))?;
    println!("ratio crossover at rho = {crossover:.6}");
    run.finish()?;
    Ok(())
}

fn figure2(p: usize, points: usize, draws: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let grid = asymptotics::rho_grid(p, points)?;
    let curve = asymptotics::fc_ratio_curve_fig2(p, &grid, draws, seed)?;
    let mut run = Run::start(out, "figure2")?;
    run.param("p", p).param("grid", points).param("draws", draws).param("sigma2", 1).seed(seed);
    write_curve(&mut run, "figure2.csv", &curve)?;
    let mut panel = Panel::new(&format!("full conditional, p = {p}"), "rho", "ratio")
        .series("ratio", &curve.x, curve.values("ratio")?);
    panel.hlines.push(1.0);
    panel.vlines.push(0.0);
    panel.y_range = Some((0.0, 3.0));
    run.write_text("figure2.svg", &svg::render(&[panel]))?;
    run.finish()?;
    Ok(())
}

fn figure3(k: f64, points: usize, out: &Path) -> Result<(), CliError> {
    let grid = asymptotics::theta_grid(k, points)?;
    let curve = asymptotics::ex3_curves_fig3(k, &grid)?;
    let mut run = Run::start(out, "figure3")?;
    run.param("k", k).param("grid", points);
    write_curve(&mut run, "figure3.csv", &curve)?;
    let x = &curve.x;
    let left = Panel::new(&format!("n Var, k = {k}"), "theta", "n Var")
        .series("full", x, curve.values("nvar_full")?)
        .series("independence", x, curve.values("nvar_ind")?)
        .series("pairwise", x, curve.values("nvar_pair")?);
    let mut right = Panel::new("pairwise / independence", "theta", "ratio").series("ratio", x, curve.values("ratio")?);
    right.hlines.push(1.0);
    run.write_text("figure3.svg", &svg::render(&[left, right]))?;
    run.finish()?;
    Ok(())
}

fn example2(sigma2: &[f64], rho: &[f64], out: &Path) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &s in sigma2 {
        let star = asymptotics::ex2_threshold(s)?;
        for &r in rho {
            let (v12, v123) = asymptotics::ex2_variances(s, r)?;
            rows.push([s, star, r, v12, v123]);
        }
    }
    let mut run = Run::start(out, "example2")?;
    run.param("sigma2", join(sigma2)).param("rho", join(rho));
    run.write("example2.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["sigma2", "rho_star", "rho", "v12", "v123"])
            .map_err(|e| csv_err("example2.csv", e))?;
        for row in &rows {
            csv.write_record(row.iter().map(|v| v.to_string()))
                .map_err(|e| csv_err("example2.csv", e))?;
        }
        csv.flush().map_err(|e| CliError::io(Path::new("example2.csv"), e))
    })?;
    let mut stdout = io::stdout().lock();
    for [s, star, r, v12, v123] in rows {
        let verdict = if v123 < v12 { "Y3 helps" } else if v123 > v12 { "Y3 hurts" } else { "tie" };
        let _ = writeln!(stdout, "sigma2={s} rho={r}: v12={v12:.6} v123={v123:.6} (rho*={star:.6}, {verdict})");
    }
    run.finish()?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn verify_cmd(level: &str, seed: u64, h_shift: f64, out: &Path) -> Result<(), CliError> {
    let level: Level = level.parse()?;
    let opts = VerifyOptions { level, seed, h_shift };
    let mut run = Run::start(out, "verify")?;
    run.param("level", format!("{level:?}").to_lowercase()).seed(seed);
    if h_shift != 0.0 {
        run.param("debug_h_shift", h_shift);
    }
    let mut criteria = Vec::with_capacity(verify::CRITERIA);
    for c in 1..=verify::CRITERIA {
        let r = verify::verify_criterion(c, &opts)?;
        println!("criterion {c:>2}: {} ({:.1}s)", if r.pass() { "PASS" } else { "FAIL" }, r.seconds);
        for check in &r.checks {
            println!("  {check}");
        }
        criteria.push(r);
    }
    let report = verify::VerifyReport { criteria };
    run.write("verify_report.csv", |w| report.write_csv(w).map_err(lib))?;
    run.finish()?;
    let failed = report.failures().len();
    if failed > 0 {
        return Err(CliError::CheckFailed(failed));
    }
    Ok(())
}

fn simulate(path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let config = config::parse(&text)?;
    let result = clik::montecarlo::run(&config)?;
    let mut run = Run::start(out, "simulate")?;
    run.param("config", path.display())
        .param("model", format!("{:?}", config.model))
        .param("theta", format!("{:?}", config.theta_true.values()))
        .param("n", config.n)
        .param("replicates", config.replicates)
        .param("threads", rayon::current_num_threads())
        .seed(config.seed);
    run.write("estimates.csv", |w| result.write_estimates_csv(w).map_err(lib))?;
    run.write("summary.csv", |w| result.write_summary_csv(w).map_err(lib))?;
    for s in &result.specs {
        let cells: Vec<String> = s
            .params
            .iter()
            .enumerate()
            .map(|(i, name)| format!("{name}: mean {:.5}, n var {:.5}", s.mean[i], s.n_cov.get(i, i)))
            .collect();
        println!("{} ({} failed): {}", s.label, s.failures, cells.join("; "));
    }
    run.finish()?;
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CLIK_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("CLIK_THREADS must be a nonnegative integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("CLIK_THREADS: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Figure1 { p, grid, out } => figure1(p, grid, &out),
        Command::Figure2 { p, grid, draws, seed, out } => figure2(p, grid, draws, seed, &out),
        Command::Figure3 { k, grid, out } => figure3(k, grid, &out),
        Command::Example2 { sigma2, rho, out } => example2(&sigma2, &rho, &out),
        Command::Verify { level, seed, out, debug_h_shift } => verify_cmd(&level, seed, debug_h_shift, &out),
        Command::Simulate { config, out } => simulate(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
