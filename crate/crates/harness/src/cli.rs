//! Command-line interface. Every command prints the resolved configuration
//! and its hash before doing anything else.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ocvp::kv::parse_list;
use ocvp::oaae::Oaae;
use ocvp::predictor::{SamplerConfig, Variant};
use ocvp::{DType, Execution};

use crate::config::{load_overrides, ExperimentConfig};
use crate::pipeline::{dataset_digest, parameter_table, Flow, Run, RunOptions, Stage};

#[derive(Debug, Parser)]
#[command(name = "ocvp", version, about = "Object-centric video prediction laboratory")]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset preset: bounce2, bounce3 or bounce-real-ish.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Global seed (data generation, initialization, training, sampling).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long, global = true, default_value = "runs/default")]
    pub out: PathBuf,
    /// Rerun stages even when hash-matched artifacts exist.
    #[arg(long, global = true)]
    pub force: bool,
    /// Override a config key, e.g. `--set oaae.embed_dim=8` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Stop the compare pipeline after this stage.
    #[arg(long, global = true, value_name = "STAGE")]
    pub stop_after: Option<Stage>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// Suppress progress output on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the dataset.
    Generate,
    /// Train the object-aware autoencoder and the single-encoder autoencoder.
    TrainOaae,
    /// Train one predictor variant.
    TrainPredictor {
        #[arg(long)]
        variant: Variant,
    },
    /// Roll out a trained predictor and write the clips.
    Predict {
        #[arg(long)]
        variant: Variant,
        /// Comma-separated dataset clip indices (default: the test clips).
        #[arg(long)]
        clips: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        /// Predicted frames (default: predictor.horizon).
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0)]
        sample_seed: u64,
        /// Take the most likely token at every position.
        #[arg(long)]
        argmax: bool,
    },
    /// Sample all trained variants over the temperature grid and write the report.
    Evaluate,
    /// Full pipeline: data, autoencoders, three predictors, evaluation.
    Compare,
    /// Build every model and print parameter counts.
    Params,
}

/// Resolves the configuration named by the global flags.
pub fn resolve_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let overrides = load_overrides(cli.config.as_deref(), cli.preset.as_deref(), cli.seed, &cli.set)?;
    ExperimentConfig::resolve(&overrides)
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = resolve_config(cli)?;
    print!("# config {}\n{}", cfg.hash(), cfg.canonical());
    println!("# end config");
    let opts = RunOptions {
        force: cli.force,
        exec: if cli.sequential { Execution::Sequential } else { Execution::default() },
        stop_after: cli.stop_after,
        quiet: cli.quiet,
    };
    if let Command::Params = cli.command {
        return print_params(&cfg);
    }
    let mut run = Run::open(cfg, &cli.out, opts)?;
    match &cli.command {
        Command::Generate => {
            let ds = run.ensure_dataset()?;
            println!("dataset {}", ds.dir.display());
            println!("dataset_config_hash {}", ds.config_hash);
            println!("dataset_digest {}", dataset_digest(&ds)?);
        }
        Command::TrainOaae => {
            for stage in [Stage::Oaae, Stage::OaaeSis] {
                let m = run.autoencoder(stage, true)?;
                println!("{stage} parameters {} checkpoint {}", m.param_count(), run.dir.join(format!("checkpoints/{stage}.ckpt")).display());
            }
        }
        Command::TrainPredictor { variant } => {
            let m = run.predictor(*variant, true)?;
            println!("predictor-{} parameters {}", variant.as_str(), m.param_count());
        }
        Command::Predict {
            variant,
            clips,
            temperature,
            horizon,
            sample_seed,
            argmax,
        } => {
            let ids: Vec<usize> = match clips {
                Some(s) => parse_list(s).map_err(anyhow::Error::msg).context("--clips")?,
                None => run.cfg.test_range().collect(),
            };
            let horizon = horizon.unwrap_or(run.cfg.predictor.horizon);
            let sampler = SamplerConfig {
                temperature: *temperature,
                argmax: *argmax,
                seed: *sample_seed,
            };
            for p in run.predict(*variant, &ids, horizon, sampler)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate => {
            let table = run.evaluate()?;
            print!("{}", table.to_csv());
        }
        Command::Compare => match run.compare()? {
            Flow::Done(table) => print!("{}", table.to_csv()),
            Flow::Stopped(stage) => println!("stopped after {stage}"),
        },
        Command::Params => unreachable!("handled above"),
    }
    Ok(())
}

fn print_params(cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let schema = cfg.dataset_spec().schema;
    println!("slots {} classes {}", schema.n_slots(), schema.n_classes());
    println!("component,embed_dim,num_params");
    for v in Variant::ALL {
        let ae_cfg = cfg.oaae_for(v);
        if v == Variant::Sis || v == Variant::Sncat {
            let ae = Oaae::new(&ae_cfg, &schema, DType::F32, 0)?;
            let name = if v.decomposed() { "oaae" } else { "oaae-sis" };
            println!("{name},{},{}", ae_cfg.encoder_embed_dim(&schema), ae.param_count());
        }
    }
    for (v, dim, params) in parameter_table(cfg)? {
        println!("predictor-{},{dim},{params}", v.as_str());
    }
    Ok(())
}
