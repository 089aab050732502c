use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tangle::error::Error;
use tangle::runner::{self, ExperimentConfig, Kind, Params};

#[derive(Parser)]
#[command(name = "tangle", version, about = "Numerical experiments on polynomial curve families")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides TANGLE_THREADS and the config
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: runs/<kind>)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a cinematic family and record norms
    Family(Common),
    /// Rectangle incidence bound sweep
    RectBound(Common),
    /// Kakeya, Wolff, cinematic or Córdoba maximal experiments
    Maximal(Common),
    /// Knapp example slopes
    Knapp(Common),
    /// Logarithmic sharpness example
    Sharpness(Common),
    /// Furstenberg-type set instances
    Furstenberg(Common),
    /// Randomized lemma suites
    Lemmas {
        #[command(flatten)]
        common: Common,
        /// Run a single lemma
        #[arg(long)]
        only: Option<String>,
        /// Replay one instance index
        #[arg(long)]
        instance: Option<usize>,
    },
    /// Tube volume around algebraic varieties
    Wongkew(Common),
    /// Summarize result directories as markdown
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the markdown here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(kind: Kind, c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            runner::parse_config(&text)?
        }
        None => ExperimentConfig::defaults(kind),
    };
    if cfg.kind() != kind {
        return Err(Error::Config {
            path: "kind".into(),
            msg: format!("config is `{}` but the subcommand is `{}`", cfg.kind().name(), kind.name()),
        });
    }
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    Ok(cfg)
}

fn execute(kind: Kind, c: &Common, tweak: impl FnOnce(&mut ExperimentConfig)) -> Result<i32, Error> {
    let mut cfg = load(kind, c)?;
    tweak(&mut cfg);
    runner::validate(&cfg)?;
    let threads = runner::resolve_threads(c.threads, &cfg)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    let outcome = runner::run(&cfg, &out, threads)?;
    eprintln!(
        "{}: wrote {} in {:.2}s{}",
        kind.name(),
        outcome.out_dir.display(),
        outcome.manifest.wall_time_s,
        if outcome.manifest.failed { " (some checks failed)" } else { "" }
    );
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Family(c) => execute(Kind::Family, c, |_| {}),
        Cmd::RectBound(c) => execute(Kind::RectBound, c, |_| {}),
        Cmd::Maximal(c) => execute(Kind::Maximal, c, |_| {}),
        Cmd::Knapp(c) => execute(Kind::Knapp, c, |_| {}),
        Cmd::Sharpness(c) => execute(Kind::Sharpness, c, |_| {}),
        Cmd::Furstenberg(c) => execute(Kind::Furstenberg, c, |_| {}),
        Cmd::Wongkew(c) => execute(Kind::Wongkew, c, |_| {}),
        Cmd::Lemmas { common, only, instance } => execute(Kind::Lemmas, common, |cfg| {
            if let Params::Lemmas(p) = &mut cfg.params {
                if only.is_some() {
                    p.only = only.clone();
                }
                if instance.is_some() {
                    p.instance = *instance;
                }
            }
        }),
        Cmd::Report { dirs, out } => runner::report(dirs).and_then(|s| {
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            match out {
                Some(p) => std::fs::write(p, &s.markdown)?,
                None => print!("{}", s.markdown),
            }
            Ok(0)
        }),
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(runner::exit_code(&e) as u8)
        }
    }
}
