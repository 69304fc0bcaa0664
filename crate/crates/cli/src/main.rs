use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ctfsyn_cli::{run, validate_config, ConfigErrors, ExperimentConfig, UnknownRecipe, RECIPES};
use serde_json::json;

/// Charge-trap-flash synapse experiments.
#[derive(Parser)]
#[command(name = "sim", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Recipe to run (see `sim list`).
    recipe: Option<String>,
    /// Config file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the recipe names.
    List,
    /// Print the default configuration.
    Defaults,
}

fn error_json(kind: &str, err: &anyhow::Error) -> serde_json::Value {
    let mut e = json!({ "kind": kind, "message": format!("{err:#}") });
    if let Some(c) = err.downcast_ref::<ConfigErrors>() {
        e["issues"] = serde_json::to_value(&c.0).unwrap_or_default();
    }
    json!({ "error": e })
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if err.downcast_ref::<ConfigErrors>().is_some() {
        ("config", 2)
    } else if err.downcast_ref::<UnknownRecipe>().is_some() {
        ("usage", 2)
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        ("io", 1)
    } else {
        ("recipe", 1)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Some(Command::List) => {
            for r in RECIPES {
                println!("{r}");
            }
            return Ok(());
        }
        Some(Command::Defaults) => {
            print!("{}", ExperimentConfig::default().to_text());
            return Ok(());
        }
        None => {}
    }
    let recipe = cli.recipe.ok_or_else(|| UnknownRecipe(String::new()))?;
    let cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            validate_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    log::info!("running {recipe} with seed {} into {}", cli.seed, cli.out.display());
    let m = run(&recipe, &cfg, cli.seed, &cli.out)?;
    log::info!("{} outputs in {:.2} s", m.outputs.len(), m.wall_clock_s);
    println!("{}", cli.out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = json!({ "error": { "kind": "usage", "message": e.to_string().trim() } });
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            eprintln!("{}", error_json(kind, &e));
            ExitCode::from(code)
        }
    }
}
