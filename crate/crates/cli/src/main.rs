use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use tfit_core::dsp::RngStream;
use tfit_core::error::{Result, TfitError};
use tfit_core::estimate::{estimate_frame, EstimateReport, GodardConfig};
use tfit_core::harness::{
    frame_detect, max_abs_error_by_point, plot_csv, read_capture, run_ber_sweep, run_estimation_sweep,
    simulate_capture, write_capture, write_csv, write_report, ExperimentConfig, SweepAxis,
};

#[derive(Parser)]
#[command(name = "tfit", version, about = "Far-end IQ skew and imbalance estimation with TFIT frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set trials=3
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SweepOut {
    /// CSV output path
    #[arg(long, short)]
    out: PathBuf,
    /// Also render SVG plots into this directory
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Skew,
    Imbalance,
}

#[derive(Clone, Copy, ValueEnum)]
enum Panel {
    A,
    B,
    C,
    D,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a receiver impairment, others at zero
    SweepRx {
        #[arg(long, value_enum, default_value = "skew")]
        quantity: Quantity,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: SweepOut,
    },
    /// Sweep a transmitter impairment, others at zero
    SweepTx {
        #[arg(long, value_enum, default_value = "skew")]
        quantity: Quantity,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: SweepOut,
    },
    /// Sweep one impairment with the other three present (panels a-d)
    SweepCoexist {
        #[arg(long, value_enum)]
        panel: Panel,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: SweepOut,
    },
    /// BER per subcarrier with and without compensation
    SweepBer {
        #[arg(long, default_value = "tx_skew")]
        axis: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: SweepOut,
    },
    /// Simulate one capture file using the config's impairments
    Capture {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        out: PathBuf,
        /// Idle samples before the frame
        #[arg(long, default_value_t = 1000)]
        lead: usize,
    },
    /// Estimate impairments from a capture file
    Estimate {
        #[arg(long)]
        capture: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Skip detection and use this frame start
        #[arg(long)]
        frame_start: Option<usize>,
        /// JSON report path; printed to stdout when absent
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render SVG plots from a sweep or BER CSV
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, short)]
        out_dir: PathBuf,
    },
}

fn load(common: &Common, prepare: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    prepare(&mut cfg);
    if let Some(path) = &common.config {
        cfg.apply_kv_text(&std::fs::read_to_string(path)?)?;
    }
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| TfitError::Config(format!("override '{o}' is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn for_axis(axis: SweepAxis, coexist: bool) -> impl FnOnce(&mut ExperimentConfig) {
    move |cfg| {
        cfg.grid = axis.default_grid();
        if coexist {
            cfg.setup.impairments = axis.coexist_companions();
        }
    }
}

fn pick(rx: bool, q: Quantity) -> SweepAxis {
    match (rx, q) {
        (true, Quantity::Skew) => SweepAxis::RxSkew,
        (true, Quantity::Imbalance) => SweepAxis::RxImbalance,
        (false, Quantity::Skew) => SweepAxis::TxSkew,
        (false, Quantity::Imbalance) => SweepAxis::TxImbalance,
    }
}

fn estimation_sweep(common: &Common, out: &SweepOut, axis: SweepAxis, coexist: bool) -> Result<()> {
    let mut cfg = load(common, for_axis(axis, coexist))?;
    cfg.grid.axis = axis;
    let rows = run_estimation_sweep(&cfg)?;
    write_csv(&out.out, &rows)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    for (preset, err) in max_abs_error_by_point(&rows) {
        println!("{axis} {preset:>8.3} {unit}: max |error| {err:.4} {unit}", unit = axis.unit());
    }
    println!("{} rows ({failed} failed) -> {}", rows.len(), out.out.display());
    plots(&out.out, out.plot_dir.as_deref())
}

fn plots(csv: &Path, dir: Option<&Path>) -> Result<()> {
    if let Some(dir) = dir {
        for p in plot_csv(csv, dir)? {
            println!("plot -> {}", p.display());
        }
    }
    Ok(())
}

fn estimate(cfg: &ExperimentConfig, capture: &Path, frame_start: Option<usize>) -> Result<EstimateReport> {
    let frame = read_capture(capture)?;
    let plan = cfg.setup.placed_plan()?;
    let start = match frame_start {
        Some(s) => s,
        None => frame_detect(&frame, &plan)?,
    };
    info!("frame starts at sample {start}");
    estimate_frame(&frame, &plan, start, &GodardConfig::from_plan(&plan), cfg.apply_gsop)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SweepRx { quantity, common, out } => estimation_sweep(&common, &out, pick(true, quantity), false),
        Command::SweepTx { quantity, common, out } => estimation_sweep(&common, &out, pick(false, quantity), false),
        Command::SweepCoexist { panel, common, out } => {
            let axis = match panel {
                Panel::A => SweepAxis::RxSkew,
                Panel::B => SweepAxis::RxImbalance,
                Panel::C => SweepAxis::TxSkew,
                Panel::D => SweepAxis::TxImbalance,
            };
            estimation_sweep(&common, &out, axis, true)
        }
        Command::SweepBer { axis, common, out } => {
            let axis: SweepAxis = axis.parse()?;
            let mut cfg = load(&common, for_axis(axis, true))?;
            cfg.grid.axis = axis;
            let rows = run_ber_sweep(&cfg)?;
            write_csv(&out.out, &rows)?;
            println!("{} rows -> {}", rows.len(), out.out.display());
            plots(&out.out, out.plot_dir.as_deref())
        }
        Command::Capture { common, out, lead } => {
            let cfg = load(&common, |_| {})?;
            let mut setup = cfg.setup.clone();
            setup.lead_samples = lead;
            let frame = simulate_capture(&setup, &mut RngStream::new(cfg.seed, 0))?;
            write_capture(&out, &frame)?;
            println!("{} samples per polarization -> {}", frame.len(), out.display());
            Ok(())
        }
        Command::Estimate {
            capture,
            common,
            frame_start,
            report,
        } => {
            let cfg = load(&common, |_| {})?;
            let r = estimate(&cfg, &capture, frame_start)?;
            for (name, p) in [("X", &r.x), ("Y", &r.y)] {
                println!(
                    "pol {name}: rx skew {:.3} ps, rx imbalance {:.3} dB, tx skew {:.3} ps, tx imbalance {:.3} dB",
                    p.tau_rx_s * 1e12,
                    p.imbalance_rx_db,
                    p.tau_tx_s * 1e12,
                    p.imbalance_tx_db
                );
            }
            match report {
                Some(path) => write_report(&path, &r),
                None => {
                    println!("{}", serde_json::to_string_pretty(&r)?);
                    Ok(())
                }
            }
        }
        Command::Plot { csv, out_dir } => plots(&csv, Some(&out_dir)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
