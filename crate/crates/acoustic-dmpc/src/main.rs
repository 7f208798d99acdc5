//! Command line front end: run one simulation, sweep loss probabilities,
//! tune the channel budget, inspect the wire format, or dump path geometry.
//! All knobs live in a TOML file (see `RunConfig`); `--override key=value`
//! patches individual entries.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acoustic_dmpc::codec::{encode_coeffs, encode_payload, hex_dump, EncodedMessage, Payload};
use acoustic_dmpc::config::{parse_override, RunConfig};
use acoustic_dmpc::error::Error;
use acoustic_dmpc::sim::{
    run, summary_csv, sweep, sweep_csv, timeseries_csv, windows_csv, write_text, SimSetup,
};
use acoustic_dmpc::tuning::{audit_csv, tune, TuneOptions, TuneSpace};

#[derive(Parser)]
#[command(
    name = "acoustic-dmpc",
    version,
    about = "Formation path following over a lossy acoustic broadcast channel"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Patch one configuration entry, e.g. channel.loss_prob=0.3. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replaces the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// One closed-loop run; writes timeseries, window verdicts, and a summary.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// The same run across several loss probabilities and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated loss probabilities.
        #[arg(long, default_value = "0,0.05,0.1,0.2,0.3,0.5")]
        losses: String,
        /// Comma-separated seeds; defaults to the configured seed.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Search for the cheapest channel budget that keeps the error windows.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Simulated seconds per candidate evaluation.
        #[arg(long, default_value_t = 250.0)]
        duration: f64,
        /// Evaluation budget.
        #[arg(long, default_value_t = 60)]
        max_evals: usize,
    },
    /// Shows how one packet is coded under the configured scheme.
    CodecDebug {
        #[command(flatten)]
        common: Common,
    },
    /// Samples the configured path geometry to CSV.
    Paths {
        #[command(flatten)]
        common: Common,
        /// Arc-length sample spacing, meters.
        #[arg(long, default_value_t = 1.0)]
        ds: f64,
        /// Total sampled arc length, meters.
        #[arg(long, default_value_t = 500.0)]
        length: f64,
    },
}

fn load_setup(common: &Common) -> Result<(RunConfig, SimSetup), Error> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut overrides = Vec::with_capacity(common.overrides.len() + 1);
    for o in &common.overrides {
        overrides.push(parse_override(o)?);
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    let cfg = RunConfig::from_toml(&text, &overrides)?;
    let setup = cfg.to_setup()?;
    Ok((cfg, setup))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Error> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Parse(format!("bad {what} entry '{s}'")))
        })
        .collect()
}

fn cmd_run(common: &Common) -> Result<(), Error> {
    let (_, setup) = load_setup(common)?;
    let result = run(&setup)?;
    write_text(&common.out.join("timeseries.csv"), &timeseries_csv(&result, &setup)?)?;
    write_text(&common.out.join("windows.csv"), &windows_csv(&result.report))?;
    write_text(&common.out.join("summary.csv"), &summary_csv(&result, &setup))?;
    println!(
        "{} s simulated, {} agents, loss {:.2}: mean cross-track mse {:.3e} m^2, \
         mean speed mse {:.3e} (m/s)^2, windows {} -> {}",
        setup.duration,
        setup.mac.fleet_size,
        setup.mac.loss_prob,
        result.report.mean_cross_track_mse,
        result.report.mean_speed_mse,
        result.report.steady_windows,
        if result.report.all_pass { "all pass" } else { "FAIL" },
    );
    println!("wrote {}", common.out.display());
    Ok(())
}

fn cmd_sweep(common: &Common, losses: &str, seeds: &Option<String>) -> Result<(), Error> {
    let (cfg, setup) = load_setup(common)?;
    let losses: Vec<f64> = parse_list(losses, "loss")?;
    let seeds: Vec<u64> = match seeds {
        Some(s) => parse_list(s, "seed")?,
        None => vec![cfg.seed],
    };
    let points = sweep(&setup, &losses, &seeds)?;
    write_text(&common.out.join("sweep.csv"), &sweep_csv(&points))?;
    for p in &points {
        println!(
            "loss {:.2} seed {}: cross {:.3e} speed {:.3e} {}",
            p.loss_prob,
            p.seed,
            p.result.report.mean_cross_track_mse,
            p.result.report.mean_speed_mse,
            if p.result.report.all_pass { "pass" } else { "FAIL" },
        );
    }
    println!("wrote {}", common.out.join("sweep.csv").display());
    Ok(())
}

fn cmd_tune(common: &Common, duration: f64, max_evals: usize) -> Result<(), Error> {
    let (cfg, setup) = load_setup(common)?;
    let opts = TuneOptions { sim_duration: duration, max_evals, seed: cfg.seed };
    let outcome = tune(&setup, &TuneSpace::default(), &opts)?;
    write_text(&common.out.join("tuning.csv"), &audit_csv(&outcome))?;
    let b = &outcome.best;
    println!(
        "best: {:.3} bit/s per agent (f_bits {}, {} windows/step, step {} s, horizon {})",
        b.bit_rate, b.f_bits, b.iters_per_step, b.step_period, b.horizon_intervals,
    );
    println!(
        "{} evaluations, audit at {}",
        outcome.evals_used,
        common.out.join("tuning.csv").display()
    );
    Ok(())
}

fn cmd_codec_debug(common: &Common) -> Result<(), Error> {
    let (_, setup) = load_setup(common)?;
    let scheme = setup.quant.clone().ok_or_else(|| {
        Error::Config("codec-debug needs quantization.enabled = true".into())
    })?;
    let v = setup.mac.fleet_size;
    let hp = setup.params.horizon_intervals;
    println!(
        "scheme: {} integer + {} fraction bits per residual, {}-bit anchor at {} m/step",
        scheme.i_bits, scheme.f_bits, scheme.w1_bits, scheme.m_lsb,
    );
    println!(
        "residual grid [{}, {}] in steps of {}, message scale k_ref {}",
        scheme.grid_min(),
        scheme.grid_max(),
        scheme.step(),
        scheme.k_ref,
    );
    // a nominal-speed message codes to all-zero residuals; a perturbed one
    // shows the grid at work
    let line = acoustic_dmpc::bspline::ideal_line_coeffs(3.0, scheme.k_ref, hp)?;
    let mut bent = line.clone();
    for (i, c) in bent.iter_mut().enumerate() {
        *c += 0.03 * (i as f64 - hp as f64 / 2.0);
    }
    for (name, coeffs) in [("nominal", &line), ("perturbed", &bent)] {
        let msg = encode_coeffs(coeffs, &scheme)?;
        println!(
            "{name} coefficients -> anchor code {}, residual codes {:?}, {} saturated",
            msg.m_code, msg.codes, msg.saturated,
        );
    }
    let per_neighbor: Vec<(u32, EncodedMessage)> = (1..v as u32)
        .map(|j| (j, encode_coeffs(&bent, &scheme).unwrap()))
        .collect();
    let payload = Payload { sender: 0, per_neighbor };
    let bytes = encode_payload(&payload, &scheme, v, hp)?;
    println!(
        "payload from agent 0 to {} neighbors: {} bits, {} bytes",
        v - 1,
        acoustic_dmpc::codec::payload_bits(v, scheme.w1_bits, scheme.w_fi(), hp),
        bytes.len(),
    );
    println!("hex: {}", hex_dump(&bytes));
    write_text(&common.out.join("payload.hex"), &format!("{}\n", hex_dump(&bytes)))?;
    Ok(())
}

fn cmd_paths(common: &Common, ds: f64, length: f64) -> Result<(), Error> {
    if !(ds > 0.0 && length > 0.0) {
        return Err(Error::Argument("ds and length must be > 0".into()));
    }
    let (_, setup) = load_setup(common)?;
    let mut out = String::from("# schema: paths/v1\ns,x,y,z\n");
    let n = (length / ds).floor() as usize;
    for i in 0..=n {
        let s = i as f64 * ds;
        let p = setup.path.position(s);
        out.push_str(&format!(
            "{s:.10e},{:.10e},{:.10e},{:.10e}\n",
            p[0], p[1], p[2]
        ));
    }
    let file = common.out.join("path.csv");
    write_text(&file, &out)?;
    println!("wrote {} samples to {}", n + 1, file.display());
    Ok(())
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Key(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { common } => cmd_run(common),
        Cmd::Sweep { common, losses, seeds } => cmd_sweep(common, losses, seeds),
        Cmd::Tune { common, duration, max_evals } => cmd_tune(common, *duration, *max_evals),
        Cmd::CodecDebug { common } => cmd_codec_debug(common),
        Cmd::Paths { common, ds, length } => cmd_paths(common, *ds, *length),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
