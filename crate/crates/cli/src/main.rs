use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use svddf::metrics::{metrics_row, METRICS_HEADER};
use svddf::pgm::{decode_pgm, encode_pgm, PgmEncoding};
use svddf::{
    add_noise, evaluate, read_pgm, rel_l2, synth_image, Error, ImageGrid, Method, NoiseSpec, RunOutput, SolverConfig,
    SsimConfig, SynthKind,
};

mod settings;

use settings::{Settings, SolverArgs};

#[derive(Parser, Debug)]
#[command(name = "svddf", version, about = "Damped second-order p-Laplacian flow denoising")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Multiply every pixel by `1 + delta * (2r - 1)` with seeded uniform `r`.
    AddNoise {
        input: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 255)]
        maxval: u32,
    },
    /// Run the flow on a noisy PGM until the stopping rule fires.
    Denoise {
        input: PathBuf,
        /// Clean reference; enables metrics output.
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 255)]
        maxval: u32,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// SSIM over a grid of p and eta values.
    Sweep {
        input: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long = "etas", value_delimiter = ',', required = true)]
        etas: Vec<f64>,
        #[arg(long = "ps", value_delimiter = ',', required = true)]
        ps: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Print one metrics row for a clean, noisy and denoised triple.
    Metrics {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        denoised: PathBuf,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        steps: usize,
    },
    /// Write a synthetic test image.
    Synth {
        /// `disk`, `piecewise` or `ramp`
        #[arg(long, default_value = "disk")]
        kind: String,
        #[arg(long, default_value_t = 128)]
        rows: usize,
        #[arg(long, default_value_t = 128)]
        cols: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// File stem [default: the kind]
        #[arg(long)]
        name: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 1 for numerical failures, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Diverged { .. } | Error::Degenerate(_) | Error::TooLarge { .. }) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::AddNoise { input, delta, seed, out, maxval } => cmd_add_noise(&input, delta, seed, &out, maxval),
        Command::Denoise { input, clean, out, maxval, solver } => {
            cmd_denoise(&input, clean.as_deref(), &out, maxval, &solver)
        }
        Command::Sweep { input, clean, etas, ps, out, solver } => cmd_sweep(&input, &clean, etas, ps, &out, &solver),
        Command::Metrics { clean, noisy, denoised, id, p, eta, steps } => {
            let clean_img = load(&clean)?;
            let report = evaluate(&clean_img, &load(&noisy)?, &load(&denoised)?, &SsimConfig::default())?;
            let id = id.unwrap_or_else(|| stem(&denoised));
            println!("{METRICS_HEADER}");
            println!("{}", metrics_row(&id, p.unwrap_or(f64::NAN), eta.unwrap_or(f64::NAN), steps, &report));
            Ok(())
        }
        Command::Synth { kind, rows, cols, out, name } => {
            let img = synth_image(kind.parse::<SynthKind>()?, rows, cols)?;
            let path = out.join(format!("{}.pgm", name.unwrap_or(kind)));
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            save_pgm(&img, &path, 255)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<ImageGrid> {
    read_pgm(path).with_context(|| format!("cannot load {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned())
}

fn save_pgm(img: &ImageGrid, path: &Path, maxval: u32) -> Result<()> {
    let bytes = encode_pgm(img, maxval, PgmEncoding::Binary)?;
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn save_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn cmd_add_noise(input: &Path, delta: f64, seed: u64, out: &Path, maxval: u32) -> Result<()> {
    let clean = load(input)?;
    let noisy = add_noise(&clean, &NoiseSpec::new(delta, seed))?;
    prepare_out(out)?;
    let name = stem(input);
    let pgm = out.join(format!("{name}_noisy.pgm"));
    save_pgm(&noisy, &pgm, maxval)?;
    let stored = decode_pgm(&fs::read(&pgm)?)?;
    let rel = rel_l2(noisy.as_column_major(), clean.as_column_major())?;
    let rel_stored = rel_l2(stored.as_column_major(), clean.as_column_major())?;
    let sidecar = format!(
        "input={}\ndelta={delta}\nseed={seed}\nmaxval={maxval}\nrel_l2={rel}\nrel_l2_stored={rel_stored}\n",
        input.display()
    );
    save_text(&out.join(format!("{name}_noisy.txt")), &sidecar)?;
    println!("{}", pgm.display());
    Ok(())
}

/// Runs the configured method; the result is clipped to the `[0, 1]` intensity range.
fn denoise(noisy: &ImageGrid, cfg: &SolverConfig, method: Method) -> svddf::Result<(ImageGrid, RunOutput)> {
    let out = match method {
        Method::Svddf => svddf::run_svddf(noisy, cfg)?,
        Method::FirstOrder => svddf::run_first_order(noisy, cfg)?,
    };
    Ok((out.image.clamped(0.0, 1.0), out))
}

fn cmd_denoise(input: &Path, clean: Option<&Path>, out: &Path, maxval: u32, args: &SolverArgs) -> Result<()> {
    let settings = Settings::from_args(args)?;
    let cfg = settings.solver_config()?;
    let method = settings.method()?;
    let noisy = load(input)?;
    let clean = clean.map(load).transpose()?;
    if let Some(c) = &clean {
        if !c.same_shape(&noisy) {
            bail!("clean image is {}x{}, input is {}x{}", c.rows(), c.cols(), noisy.rows(), noisy.cols());
        }
    }
    prepare_out(out)?;
    let name = stem(input);
    let csv_path = out.join(format!("{name}_trajectory.csv"));

    let (image, run) = match denoise(&noisy, &cfg, method) {
        Ok(r) => r,
        Err(Error::Diverged { step, log }) => {
            save_text(&csv_path, &log.to_csv())?;
            return Err(Error::Diverged { step, log }).context(format!("partial log kept in {}", csv_path.display()));
        }
        Err(e) => return Err(e.into()),
    };
    save_pgm(&image, &out.join(format!("{name}_denoised.pgm")), maxval)?;
    save_text(&csv_path, &run.log.to_csv())?;

    let mut manifest = format!("input={}\n", input.display());
    for line in settings.manifest_lines()? {
        manifest.push_str(&line);
        manifest.push('\n');
    }
    manifest.push_str(&format!("steps={}\nstop_reason={:?}\n", run.steps, run.stop));
    save_text(&out.join(format!("{name}_run.txt")), &manifest)?;

    println!("stopped at step {} ({:?})", run.steps, run.stop);
    if let Some(clean) = clean {
        let report = evaluate(&clean, &noisy, &image, &SsimConfig::default())?;
        println!("{METRICS_HEADER}");
        println!("{}", metrics_row(&name, cfg.p, cfg.eta, run.steps, &report));
    }
    Ok(())
}

/// Drops repeated values, keeping first occurrences in order.
fn dedup(values: Vec<f64>, what: &str) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if out.contains(&v) {
            eprintln!("warning: duplicate {what} value {v} ignored");
        } else {
            out.push(v);
        }
    }
    out
}

struct Cell {
    p: f64,
    eta: f64,
    result: Result<(usize, svddf::EvalReport)>,
}

fn cmd_sweep(input: &Path, clean: &Path, etas: Vec<f64>, ps: Vec<f64>, out: &Path, args: &SolverArgs) -> Result<()> {
    let (etas, ps) = (dedup(etas, "eta"), dedup(ps, "p"));
    let settings = Settings::from_args(args)?;
    let method = settings.method()?;
    let noisy = load(input)?;
    let clean = load(clean)?;
    if !clean.same_shape(&noisy) {
        bail!("clean image is {}x{}, input is {}x{}", clean.rows(), clean.cols(), noisy.rows(), noisy.cols());
    }
    prepare_out(out)?;

    let grid: Vec<(f64, f64)> = ps.iter().flat_map(|&p| etas.iter().map(move |&eta| (p, eta))).collect();
    let cells: Vec<Cell> = grid
        .par_iter()
        .map(|&(p, eta)| {
            let result = (|| {
                let mut s = settings.clone();
                s.set("p", Some(p));
                s.set("eta", Some(eta));
                let cfg = s.solver_config()?;
                let (image, run) = denoise(&noisy, &cfg, method)?;
                Ok((run.steps, evaluate(&clean, &noisy, &image, &SsimConfig::default())?))
            })();
            Cell { p, eta, result }
        })
        .collect();

    let name = stem(input);
    let mut table = Vec::new();
    write!(table, "p")?;
    for eta in &etas {
        write!(table, ",{eta}")?;
    }
    writeln!(table)?;
    let mut long = format!("{METRICS_HEADER}\n");
    for (row, &p) in cells.chunks(etas.len()).zip(&ps) {
        write!(table, "{p}")?;
        for cell in row {
            match &cell.result {
                Ok((steps, report)) => {
                    write!(table, ",{}", report.ssim_denoised)?;
                    long.push_str(&metrics_row(&name, cell.p, cell.eta, *steps, report));
                }
                Err(e) => {
                    eprintln!("warning: cell p={} eta={} failed: {e:#}", cell.p, cell.eta);
                    write!(table, ",NaN")?;
                    long.push_str(&format!("{name},{},{},NaN,NaN,NaN,NaN", cell.p, cell.eta));
                }
            }
            long.push('\n');
        }
        writeln!(table)?;
    }
    let table_path = out.join(format!("{name}_sweep.csv"));
    fs::write(&table_path, table).with_context(|| format!("cannot write {}", table_path.display()))?;
    save_text(&out.join(format!("{name}_sweep_metrics.csv")), &long)?;
    print!("{long}");
    Ok(())
}
