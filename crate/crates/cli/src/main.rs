use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mapruin::montecarlo::estimate_reach;
use mapruin::spectral::phase_matrix;
use mapruin::verify::{run_agreement, AgreementConfig};
use mapruin::{Error, MapModel, Result, RuinEngine};
use nalgebra::{DMatrix, DVector};

#[derive(Parser, Debug)]
#[command(
    name = "mapruin",
    version,
    about = "Survival probabilities of Markov additive risk processes observed at Poisson epochs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First-passage generator and occupation matrix.
    Spectral {
        #[arg(long)]
        model: PathBuf,
        /// Use the killed exponent (observation rates as killing).
        #[arg(long)]
        killed: bool,
    },
    /// Scale function on a grid, as CSV.
    Scale {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x_max: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Survival probabilities on a grid of initial capitals, as CSV.
    Survival {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        u_max: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probabilities of reaching level x before observed ruin.
    Reach {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        /// Grid step for a CSV curve of levels from u to x.
        #[arg(long, requires = "out")]
        step: Option<f64>,
        #[arg(long, requires = "step")]
        out: Option<PathBuf>,
    },
    /// Classical ruin quantities (ruin at the first time below zero).
    Classical {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, requires = "x")]
        u: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
    },
    /// Monte Carlo estimate of reach probabilities.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Compare analytic results with Monte Carlo estimates.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Results for the built-in two-state example.
    Example,
}

fn load(path: &Path) -> Result<MapModel> {
    MapModel::from_json(&fs::read_to_string(path)?)
}

fn format_matrix(name: &str, m: &DMatrix<f64>) -> String {
    let mut s = format!("{name} =\n");
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{:>10.6}", v)).collect();
        let _ = writeln!(s, "  [{} ]", cells.join(""));
    }
    s
}

fn format_vector(name: &str, v: &DVector<f64>) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{:.6}", x)).collect();
    format!("{name} = ({})\n", cells.join(", "))
}

fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && end >= start && start >= 0.0 && end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid needs 0 <= start <= end and step > 0 (start = {start}, end = {end}, step = {step})"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

fn csv_number(x: f64) -> String {
    format!("{:.16e}", x)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| csv_number(x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn example_report() -> Result<String> {
    let engine = RuinEngine::new(MapModel::two_state_example())?;
    let mut s = String::new();
    let _ = writeln!(s, "mu = {:.6}", engine.drift().mu);
    s += &format_matrix("Lambda", engine.generator()?);
    s += &format_matrix("Lambda_hat", engine.killed_generator());
    s += &format_matrix("L", engine.occupation()?);
    s += &format_matrix("U", &engine.sylvester_solution()?);
    s += &format_vector("phi(0)", &engine.survival_at_zero()?);
    Ok(s)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Example => print!("{}", example_report()?),
        Command::Spectral { model, killed } => {
            let model = load(&model)?;
            let data = phase_matrix(&model, killed)?;
            let gammas: Vec<String> = data
                .gammas
                .iter()
                .map(|g| format!("{:.6}{:+.6}i", g.re, g.im))
                .collect();
            println!("gamma = ({})", gammas.join(", "));
            let name = if killed { "Lambda_hat" } else { "Lambda" };
            print!("{}", format_matrix(name, &data.lambda));
            if !killed && model.drift().mu > 0.0 {
                let l = mapruin::spectral::occupation_matrix(&model, &data)?;
                print!("{}", format_matrix("L", &l.l));
            }
        }
        Command::Scale {
            model,
            x_max,
            step,
            out,
        } => {
            let engine = RuinEngine::new(load(&model)?)?;
            let n = engine.model().states();
            let mut header = vec!["x".to_string()];
            for i in 1..=n {
                header.extend((1..=n).map(|j| format!("W_{i}{j}")));
            }
            let mut rows = Vec::new();
            for x in grid(0.0, x_max, step)? {
                let w = engine.scale_function().eval_w(x)?;
                let mut row = vec![x];
                for i in 0..n {
                    row.extend((0..n).map(|j| w[(i, j)]));
                }
                rows.push(row);
            }
            write_csv(&out, &header, &rows)?;
        }
        Command::Survival {
            model,
            u_max,
            step,
            out,
        } => {
            let engine = RuinEngine::new(load(&model)?)?;
            if engine.drift().mu < 0.0 {
                eprintln!("warning: negative drift, ruin is certain");
            }
            let n = engine.model().states();
            let header: Vec<String> =
                std::iter::once("u".to_string()).chain(numbered("phi", n)).collect();
            let curve = engine.survival_curve(&grid(0.0, u_max, step)?)?;
            let rows: Vec<Vec<f64>> = curve
                .us
                .iter()
                .zip(&curve.phis)
                .map(|(&u, phi)| std::iter::once(u).chain(phi.iter().copied()).collect())
                .collect();
            write_csv(&out, &header, &rows)?;
        }
        Command::Reach {
            model,
            x,
            u,
            step,
            out,
        } => {
            let engine = RuinEngine::new(load(&model)?)?;
            let r = engine.reach_matrix_between(u, x)?;
            print!("{}", format_matrix(&format!("R({u}, {x})"), &r));
            print!("{}", format_vector("row sums", &r.column_sum()));
            if let (Some(step), Some(out)) = (step, out) {
                let n = engine.model().states();
                let header: Vec<String> =
                    std::iter::once("x".to_string()).chain(numbered("reach", n)).collect();
                let mut rows = Vec::new();
                for level in grid(u, x, step)? {
                    let sums = engine.reach_matrix_between(u, level)?.column_sum();
                    rows.push(std::iter::once(level).chain(sums.iter().copied()).collect());
                }
                write_csv(&out, &header, &rows)?;
            }
        }
        Command::Classical { model, u, x } => {
            let engine = RuinEngine::new(load(&model)?)?;
            if let Some(x) = x {
                let u = u.unwrap_or(0.0);
                let m = engine.classical_exit(u, x)?;
                print!("{}", format_matrix(&format!("classical exit ({u}, {x})"), &m));
            }
            print!(
                "{}",
                format_vector("classical survival at 0", &engine.classical_survival_at_zero()?)
            );
        }
        Command::Simulate {
            model,
            x,
            u,
            paths,
            seed,
        } => {
            let model = load(&model)?;
            let est = estimate_reach(&model, u, x, paths, seed)?;
            print!("{}", format_matrix(&format!("R({u}, {x}) estimate"), &est.matrix));
            print!("{}", format_matrix("standard error", &est.matrix_stderr));
            print!("{}", format_vector("row sums", &DVector::from_vec(est.rows.value.clone())));
            print!("{}", format_vector("standard error", &DVector::from_vec(est.rows.stderr.clone())));
            println!("paths = {paths} per state, seed = {seed}, capped = {}", est.rows.capped);
        }
        Command::Verify { model, paths, seed } => {
            let model = load(&model)?;
            let config = AgreementConfig {
                paths,
                seed,
                ..AgreementConfig::default()
            };
            let checks = run_agreement(&model, &config)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {} failed", checks.len(), failed);
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
