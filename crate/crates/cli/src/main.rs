//! `looplab`: command-line front end to the loop-energy laboratory.
//!
//! Exit codes: 0 success or pass, 1 verification failure or numerical
//! failure, 2 usage or configuration error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use looplab::lattice::SetSpec;
use looplab::maps::ConformalTestMap;

use config::{
    parse_config, parse_curve_arg, parse_list, parse_map, parse_number, parse_phi_arg, parse_set, CommandKind,
    ConfigError, CurveArg, Identity, NumberList, PhiArg, Route, RunConfig,
};
use output::{now, RunRecord, Sink, WallClock, VERSION};

#[derive(Parser)]
#[command(name = "looplab", version = VERSION, about = "Loop energy and Brownian loop-measure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Loop energy of a curve by the rooted limit and the disk formula.
    Energy(Flags),
    /// Random-walk loop mass of a domain, or hitting mass of two sets in it.
    Mass(Flags),
    /// Renormalized plane hitting mass with its radius and mesh tables.
    LambdaStar(Flags),
    /// Werner mass estimate from loop-soup samples.
    Werner(Flags),
    /// Sample loop soups and write them as JSON lines.
    Soup(Flags),
    /// Check one identity; exits 1 on failure.
    Verify(Flags),
    /// Onsager–Machlup prediction, optionally with the κ = 8/3 count.
    Om(Flags),
    /// Onsager–Machlup ratio for Brownian motion tubes.
    BrownianOm(Flags),
}

impl Cmd {
    fn split(self) -> (CommandKind, Flags) {
        match self {
            Cmd::Energy(f) => (CommandKind::Energy, f),
            Cmd::Mass(f) => (CommandKind::Mass, f),
            Cmd::LambdaStar(f) => (CommandKind::LambdaStar, f),
            Cmd::Werner(f) => (CommandKind::Werner, f),
            Cmd::Soup(f) => (CommandKind::Soup, f),
            Cmd::Verify(f) => (CommandKind::Verify, f),
            Cmd::Om(f) => (CommandKind::Om, f),
            Cmd::BrownianOm(f) => (CommandKind::BrownianOm, f),
        }
    }
}

#[derive(Args)]
struct Flags {
    /// JSON configuration document; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory [default: $LOOPLAB_OUT, else ./looplab-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long, value_enum)]
    identity: Option<Identity>,
    #[arg(long, value_enum)]
    route: Option<Route>,
    /// Curve file, `circle:<n>` or `quadratic:<c>:<n>`.
    #[arg(long, value_parser = parse_curve_arg)]
    curve: Option<CurveArg>,
    /// `identity`, `quadratic:<c>`, `scale:<s>` or a JSON map.
    #[arg(long, value_parser = parse_map)]
    map: Option<ConformalTestMap>,
    #[arg(long, value_parser = parse_number)]
    annulus_r: Option<f64>,
    /// JSON set descriptions.
    #[arg(long, value_parser = parse_set)]
    domain: Option<SetSpec>,
    #[arg(long, value_parser = parse_set)]
    v1: Option<SetSpec>,
    #[arg(long, value_parser = parse_set)]
    v2: Option<SetSpec>,
    #[arg(long, value_parser = parse_set)]
    k: Option<SetSpec>,
    #[arg(long, value_parser = parse_set)]
    d_prime: Option<SetSpec>,
    /// Mesh, e.g. `1/64`.
    #[arg(long, value_parser = parse_number)]
    mesh: Option<f64>,
    /// Comma-separated meshes.
    #[arg(long, value_parser = parse_list)]
    meshes: Option<NumberList>,
    #[arg(long, value_parser = parse_list)]
    r_factors: Option<NumberList>,
    #[arg(long, value_parser = parse_number)]
    box_half: Option<f64>,
    /// Comma-separated, decreasing.
    #[arg(long = "eps", value_parser = parse_list)]
    eps_schedule: Option<NumberList>,
    #[arg(long, value_parser = parse_number)]
    kappa: Option<f64>,
    /// `linear:<a>` or `sine:<a>`.
    #[arg(long, value_parser = parse_phi_arg)]
    phi: Option<PhiArg>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, value_parser = parse_number)]
    allowance: Option<f64>,
    #[arg(long)]
    empirical: bool,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident; $($field:ident),*) => {
        $( if let Some(v) = $flags.$field.take() { $cfg.$field = Some(v); } )*
    };
}

fn resolve(kind: CommandKind, mut flags: Flags) -> anyhow::Result<(RunConfig, Flags)> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config::config_err(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text, &path.display().to_string())?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != kind {
            return Err(config::config_err(format!(
                "configuration is for `{}`, not `{}`",
                c.name(),
                kind.name()
            )));
        }
    }
    cfg.command = Some(kind);
    overlay!(cfg, flags; seed, replicas, identity, route, curve, map, annulus_r, domain, v1, v2, k, d_prime,
        mesh, box_half, kappa, phi, samples, allowance);
    for (flag, field) in [
        (flags.meshes.take(), &mut cfg.meshes),
        (flags.r_factors.take(), &mut cfg.r_factors),
        (flags.eps_schedule.take(), &mut cfg.eps_schedule),
    ] {
        if let Some(NumberList(v)) = flag {
            *field = Some(v);
        }
    }
    if flags.empirical {
        cfg.empirical = Some(true);
    }
    Ok((cfg, flags))
}

/// Library errors caused by the inputs count as configuration errors.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<looplab::Error>() {
        Some(
            looplab::Error::InvalidArgument(_)
            | looplab::Error::InvalidCurve(_)
            | looplab::Error::MapConstruction(_)
            | looplab::Error::SetsNotDisjoint
            | looplab::Error::EmptySet
            | looplab::Error::EpsilonTooSmall,
        ) => 2,
        _ => 1,
    }
}

fn execute(kind: CommandKind, flags: Flags) -> anyhow::Result<Option<bool>> {
    let (mut cfg, flags) = resolve(kind, flags)?;
    if let Some(n) = flags.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let dir = flags
        .out
        .or_else(|| std::env::var_os("LOOPLAB_OUT").map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("looplab-out"));
    let sink = Sink::new(&dir)?;
    let started = now();
    let clock = Instant::now();
    let outcome = commands::run(kind, &mut cfg, &sink)?;
    let record = RunRecord {
        config: cfg,
        version: VERSION.to_string(),
        wall_clock: WallClock { started, elapsed_seconds: clock.elapsed().as_secs_f64() },
        payload: outcome.payload,
    };
    sink.record(&record)?;
    for t in &outcome.tables {
        sink.table(t)?;
    }
    if !flags.quiet {
        for line in &outcome.summary {
            println!("{line}");
        }
        println!("records appended to {}", sink.dir().join("records.jsonl").display());
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let (kind, flags) = Cli::parse().command.split();
    match execute(kind, flags) {
        Ok(Some(false)) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("looplab {}: {e:#}", kind.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
