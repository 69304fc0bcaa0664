pub mod config;
pub mod manifest;
pub mod recipes;

use std::path::Path;
use std::time::Instant;

use anyhow::Result;

pub use config::{validate_config, ConfigErrors, ConfigIssue, ExperimentConfig};
pub use manifest::{RunManifest, OutputEntry};
pub use recipes::{run_recipe, Outputs, UnknownRecipe, RECIPES};

/// Run `recipe`, write its outputs and `manifest.json` into `out_dir`.
pub fn run(recipe: &str, cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<RunManifest> {
    if !RECIPES.contains(&recipe) {
        return Err(UnknownRecipe(recipe.to_string()).into());
    }
    let start = Instant::now();
    let mut out = Outputs::new(out_dir)?;
    run_recipe(recipe, cfg, seed, &mut out)?;
    let manifest = RunManifest {
        recipe: recipe.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_sha256: manifest::sha256_hex(cfg.to_text().as_bytes()),
        outputs: out.files().iter().map(|p| manifest::entry(p)).collect::<Result<_>>()?,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(manifest)
}
