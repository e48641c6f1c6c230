//! Command-line front end: builds a map from family/parameter flags and
//! runs the requested analysis, writing CSV/JSON artifacts.
//!
//! Exit codes: 0 when the analysis ran (verdicts, including failures, are
//! payload, not exit status), 1 for usage errors, 2 for I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lozilab::attractor::{
    attractor_cover, basin_fraction, find_trapping_region, iterate_region,
    unstable_turn_triangle, RegionPolygon,
};
use lozilab::geometry::vec2::Vec2;
use lozilab::maps::{self, PiecewiseMap};

#[derive(Parser)]
#[command(name = "lozilab", version, about = "Piecewise-affine attractor toolkit")]
struct Cli {
    /// Map family: `lozi` or `bcnf`.
    #[arg(long, global = true, default_value = "lozi")]
    family: String,
    /// Comma-separated family parameters (lozi: a,b; bcnf: τl,δl,τr,δr).
    #[arg(long, global = true, default_value = "1.9,0.1")]
    params: String,
    /// Seed for any stochastic sampling.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate a constructed trapping region onto the attractor and write
    /// the cover.
    Attractor(AttractorArgs),
    /// Estimate the fraction of a box attracted to the sampled attractor.
    Basin(BasinArgs),
}

#[derive(Args)]
struct AttractorArgs {
    /// Iterations of the trapping region.
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Boxes across the region diameter.
    #[arg(long, default_value_t = 1024)]
    res: usize,
    /// CSV of box centers (defaults to att.csv in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasinArgs {
    /// Sampling box as `x0:x1,y0:y1`.
    #[arg(long = "box", allow_hyphen_values = true)]
    sample_box: String,
    /// Number of Monte-Carlo samples.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Iteration horizon per sample.
    #[arg(long, default_value_t = 2_000)]
    horizon: usize,
}

fn build_map(family: &str, params: &str) -> Result<PiecewiseMap, String> {
    let values: Result<Vec<f64>, _> = params
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let values = values.map_err(|e| format!("bad --params: {e}"))?;
    match (family, values.as_slice()) {
        ("lozi", [a, b]) => maps::lozi(*a, *b).map_err(|e| e.to_string()),
        ("bcnf", [tl, dl, tr, dr]) => maps::bcnf(*tl, *dl, *tr, *dr).map_err(|e| e.to_string()),
        ("lozi", _) => Err("lozi takes exactly two parameters: a,b".into()),
        ("bcnf", _) => Err("bcnf takes exactly four parameters: τl,δl,τr,δr".into()),
        (other, _) => Err(format!("unknown family `{other}`")),
    }
}

fn parse_box(text: &str) -> Result<RegionPolygon, String> {
    let parse_range = |part: &str| -> Result<(f64, f64), String> {
        let (lo, hi) = part
            .split_once(':')
            .ok_or_else(|| format!("range `{part}` must look like lo:hi"))?;
        let lo: f64 = lo.trim().parse().map_err(|e| format!("bad bound: {e}"))?;
        let hi: f64 = hi.trim().parse().map_err(|e| format!("bad bound: {e}"))?;
        if !(lo < hi) {
            return Err(format!("empty range `{part}`"));
        }
        Ok((lo, hi))
    };
    let (xs, ys) = text
        .split_once(',')
        .ok_or_else(|| "box must look like x0:x1,y0:y1".to_string())?;
    let (x0, x1) = parse_range(xs)?;
    let (y0, y1) = parse_range(ys)?;
    RegionPolygon::from_rect(Vec2::new(x0, y0), Vec2::new(x1, y1)).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), MainError> {
    let m = build_map(&cli.family, &cli.params).map_err(MainError::Usage)?;
    match cli.command {
        Command::Attractor(args) => {
            let tri = unstable_turn_triangle(&m).map_err(MainError::analysis)?;
            let trapped = find_trapping_region(&m, &tri, tri.diam() / 384.0)
                .map_err(MainError::analysis)?;
            let run = iterate_region(&m, &trapped.region, args.n, args.res)
                .map_err(MainError::analysis)?;
            let out = args.out.unwrap_or_else(|| cli.out_dir.join("att.csv"));
            let mut body = String::from("x,y\n");
            for c in run.approx.box_centers() {
                body.push_str(&format!("{},{}\n", c.x, c.y));
            }
            std::fs::write(&out, body).map_err(|e| MainError::Io(format!("{}: {e}", out.display())))?;
            println!(
                "attractor cover: {} boxes at mesh {:.3e} after {} iterations -> {}",
                run.approx.boxes().len(),
                run.approx.h(),
                args.n,
                out.display()
            );
            Ok(())
        }
        Command::Basin(args) => {
            let sample_box = parse_box(&args.sample_box).map_err(MainError::Usage)?;
            let att = attractor_cover(&m, Vec2::new(0.5, 0.1), 1_000, 200_000, 2.5 / 512.0)
                .map_err(MainError::analysis)?;
            let est = basin_fraction(&m, &att, &sample_box, args.samples, args.horizon, cli.seed)
                .map_err(MainError::analysis)?;
            println!(
                "basin fraction {:.6} ± {:.6} ({} of {} samples, horizon {}, tail {})",
                est.fraction_converging,
                est.standard_error,
                est.converged,
                est.n_samples,
                est.horizon,
                est.tail_len
            );
            Ok(())
        }
    }
}

enum MainError {
    Usage(String),
    Analysis(String),
    Io(String),
}

impl MainError {
    fn analysis(e: lozilab::error::Error) -> Self {
        MainError::Analysis(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(MainError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(MainError::Analysis(msg)) => {
            // Analysis-level failures are verdicts about the dynamics, not
            // tool failures; report and exit cleanly.
            println!("analysis failed: {msg}");
            ExitCode::SUCCESS
        }
        Err(MainError::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(2)
        }
    }
}
