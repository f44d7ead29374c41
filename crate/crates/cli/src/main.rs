//! `jointsense` command-line entry point.
//!
//! Any config key can be overridden with `--section.key value` (or
//! `--section.key=value`); those arguments are pulled out before clap sees
//! the rest. Precedence: defaults < `--config` file < `--section.key` <
//! command flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jointsense::config::Config;
use jointsense::pipeline::{self, PipelineError};

#[derive(Parser, Debug)]
#[command(name = "jointsense", version, about = "Joint-capsule proprioception pipeline")]
struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Data {
    /// Dataset CSV written by `simulate`.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the capsule and write dataset.csv.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the estimator; writes checkpoint, loss curve and error tables.
    Train {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterative sensor ablation with Welch/Holm significance.
    Ablate {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated trial seeds (one per trial).
        #[arg(long)]
        seeds: Option<String>,
        /// Scale error bars in the SVG charts (10 matches the usual display).
        #[arg(long)]
        magnify: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Near-limit Shapley attribution.
    Attribute {
        #[command(flatten)]
        data: Data,
        /// twist, bend or pushpull; repeat or comma-separate for several.
        #[arg(long, value_delimiter = ',')]
        criterion: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline with a summary against the reference joint.
    Repro {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Splits `--section.key value` / `--section.key=value` overrides from the
/// arguments clap should parse.
fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, inline) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        let is_key = key.split_once('.').is_some_and(|(s, k)| {
            !s.is_empty() && !k.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        });
        if !is_key {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("missing value for --{key}"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn build_config(path: Option<&PathBuf>, overrides: &[(String, String)], flags: &[(&str, String)]) -> Result<Config, PipelineError> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply_overrides(overrides)?;
    cfg.apply_overrides(flags)?;
    Ok(cfg)
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), PipelineError> {
    let mut flags: Vec<(&str, String)> = Vec::new();
    let mut flag = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k, v));
        }
    };
    let s = |v: Option<u64>| v.map(|x| x.to_string());
    match &cli.command {
        Command::Simulate { seed, samples, .. } => {
            flag("simulation.seed", s(*seed));
            flag("simulation.samples", samples.map(|x| x.to_string()));
        }
        Command::Train { seed, .. } => flag("train.seed", s(*seed)),
        Command::Ablate { trials, seeds, magnify, .. } => {
            flag("ablation.trials", trials.map(|x| x.to_string()));
            flag("ablation.seeds", seeds.clone());
            flag("ablation.magnify", magnify.map(|x| x.to_string()));
        }
        Command::Attribute { criterion, trials, seeds, .. } => {
            flag("attribution.criteria", (!criterion.is_empty()).then(|| criterion.join(",")));
            flag("attribution.trials", trials.map(|x| x.to_string()));
            flag("attribution.seeds", seeds.clone());
        }
        Command::Repro { .. } => {}
    }
    let cfg = build_config(cli.config.as_ref(), overrides, &flags)?;

    match cli.command {
        Command::Simulate { out, .. } => {
            let o = pipeline::cmd_simulate(&cfg, &out)?;
            println!("wrote {} samples ({} rail-pinned channels) to {}", o.records.len(), o.pinned_channels.len(), out.join("dataset.csv").display());
        }
        Command::Train { data, out, .. } => {
            let o = pipeline::cmd_train(&cfg, &data.dataset, &out)?;
            println!("trained {} epochs, final train loss {:.6}", o.report.epoch_losses.len(), o.report.final_train_loss);
            for (name, st) in jointsense::AXIS_NAMES.iter().zip(&o.evaluation.stats) {
                println!("  {name:<6} mean {:.5}  max {:.5}  std {:.5}", st.mean_abs, st.max, st.std_abs);
            }
            println!("outputs in {}", out.display());
        }
        Command::Ablate { data, out, .. } => {
            let o = pipeline::cmd_ablate(&cfg, &data.dataset, &out)?;
            print!("{}", std::fs::read_to_string(out.join("ablation_summary.txt")).unwrap_or_default());
            if o.note.is_none() {
                println!("outputs in {}", out.display());
            }
        }
        Command::Attribute { data, out, .. } => {
            pipeline::cmd_attribute(&cfg, &data.dataset, &out)?;
            print!("{}", std::fs::read_to_string(out.join("attribution_summary.txt")).unwrap_or_default());
        }
        Command::Repro { out } => {
            let o = pipeline::cmd_repro(&cfg, &out)?;
            print!("{}", o.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match extract_overrides(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli, &overrides)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_out() {
        let (rest, o) =
            extract_overrides(v(&["jointsense", "--train.epochs", "5", "train", "--dataset", "d.csv", "--dataset.min_std=2", "--out", "o"])).unwrap();
        assert_eq!(rest, v(&["jointsense", "train", "--dataset", "d.csv", "--out", "o"]));
        assert_eq!(o, vec![("train.epochs".into(), "5".into()), ("dataset.min_std".into(), "2".into())]);
    }

    #[test]
    fn missing_override_value() {
        assert!(extract_overrides(v(&["jointsense", "--train.epochs"])).is_err());
    }
}
