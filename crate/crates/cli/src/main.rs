use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pathovc::corpus::Percent;
use pathovc_cli::commands::{
    cmd_convert, cmd_pair, cmd_preprocess, cmd_stats, cmd_train, ConvertRequest, StatsMode,
};
use pathovc_cli::{CliError, Result, Run, RunConfig};

/// Pathological-to-pathological voice conversion.
///
/// Exit status: 0 on success, 1 for user errors (bad flags, malformed
/// input, protocol refusals), 2 for internal errors.
#[derive(Debug, Parser)]
#[command(name = "pathovc", version)]
struct Cli {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract mel-cepstral features for every utterance in a manifest.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train on the B1/B3 utterances of a feature store.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Explicit training keys, one per line.
        #[arg(long)]
        train_list: Option<PathBuf>,
    },
    /// Convert B2 utterances to a target speaker.
    Convert {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        source: Option<String>,
        /// Explicit utterance keys, one per line.
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long)]
        allow_train_blocks: bool,
        /// Skip waveform synthesis.
        #[arg(long)]
        no_wav: bool,
    },
    /// Pair speakers of the same band by intelligibility score.
    Pair {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        max_delta: Option<Percent>,
        #[arg(long)]
        allow_female: bool,
        #[arg(long)]
        allow_cross_sex: bool,
    },
    /// Listening-test statistics from a ratings CSV.
    Stats {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        mode: StatsMode,
        /// Condition pair for the signed-rank test, `a:b`; repeatable.
        #[arg(long = "pair")]
        pairs: Vec<String>,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match &cli.command {
        Some(Command::Convert {
            allow_train_blocks,
            no_wav,
            ..
        }) => {
            cfg.convert.allow_train_blocks |= allow_train_blocks;
            if *no_wav {
                cfg.convert.write_wav = false;
            }
        }
        Some(Command::Pair {
            max_delta,
            allow_female,
            allow_cross_sex,
            ..
        }) => {
            if let Some(d) = max_delta {
                cfg.corpus.max_delta = *d;
            }
            cfg.corpus.allow_female |= allow_female;
            cfg.corpus.allow_cross_sex |= allow_cross_sex;
        }
        Some(Command::Stats { pairs, .. }) if !pairs.is_empty() => {
            cfg.stats.wilcoxon_pairs = pairs
                .iter()
                .map(|p| {
                    let (a, b) = p
                        .split_once(':')
                        .ok_or_else(|| CliError::User(format!("--pair {p:?} is not a:b")))?;
                    Ok([a.to_string(), b.to_string()])
                })
                .collect::<Result<_>>()?;
        }
        _ => {}
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli)?;
    if cli.dump_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::user("no subcommand given; see --help"));
    };
    let out = cli.out.ok_or_else(|| CliError::user("--out is required"))?;
    let run = Run::new(cfg, out)?;
    match command {
        Command::Preprocess { manifest } => {
            let r = cmd_preprocess(&run, &manifest)?;
            println!(
                "{} utterance(s) stored, {} skipped, index at {}",
                r.store.entries.len(),
                r.skipped.len(),
                run.out.display()
            );
        }
        Command::Train {
            features,
            train_list,
        } => {
            let r = cmd_train(&run, &features, train_list.as_deref())?;
            let last = r.steps.last().map(|s| s.loss.total).unwrap_or(f64::NAN);
            println!(
                "trained {} step(s) on {} utterance(s); final loss {last}",
                r.steps.len(),
                r.utterances
            );
            println!("checkpoint {}", r.checkpoint.display());
            println!("report {}", r.report.display());
        }
        Command::Convert {
            checkpoint,
            features,
            target,
            source,
            keys,
            allow_train_blocks,
            ..
        } => {
            let req = ConvertRequest {
                checkpoint: &checkpoint,
                features: &features,
                target: &target,
                source: source.as_deref(),
                keys: keys.as_deref(),
                allow_train_blocks,
            };
            let done = cmd_convert(&run, &req)?;
            for c in &done {
                println!("{} -> {}", c.key, c.features.display());
            }
            println!("{} utterance(s) converted to {target}", done.len());
        }
        Command::Pair { manifest, .. } => {
            let p = cmd_pair(&run, &manifest)?;
            for pair in &p.pairs {
                println!("{} {} {}", pair.a, pair.b, pair.delta);
            }
            if !p.unmatched.is_empty() {
                println!("unmatched: {}", p.unmatched.join(" "));
            }
        }
        Command::Stats { ratings, mode, .. } => {
            let r = cmd_stats(&run, &ratings, mode)?;
            print!("{}", r.summary);
            println!("wrote {}", r.csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(2),
    }
}
