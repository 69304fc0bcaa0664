//! Figure reproduction recipes.  Each writes plot-ready CSV/JSON files into the
//! output directory; column orders are fixed and listed in the README.

mod device;
mod network;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const RECIPES: [&str; 8] = [
    "fig2a-trajectories",
    "fig2b-thresholds",
    "fig2c-levels",
    "fig3b-gate-current",
    "fig4-stdp",
    "fig6-circuit",
    "fig7-snn",
    "calibrate",
];

/// Collects the files a recipe writes, in order.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn csv<R>(&mut self, name: &str, header: &[&str], rows: R) -> Result<()>
    where
        R: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Shortest round-trip decimal form, so reruns are byte-identical.
pub(crate) fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn run_recipe(name: &str, cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    match name {
        "fig2a-trajectories" => device::fig2a(cfg, out),
        "fig2b-thresholds" => device::fig2b(cfg, out),
        "fig2c-levels" => device::fig2c(cfg, out),
        "fig3b-gate-current" => device::fig3b(cfg, out),
        "calibrate" => device::calibrate(cfg, out),
        "fig4-stdp" => network::fig4(cfg, out),
        "fig6-circuit" => network::fig6(cfg, out),
        "fig7-snn" => network::fig7(cfg, seed, out),
        other => bail!(UnknownRecipe(other.to_string())),
    }
}

#[derive(Debug)]
pub struct UnknownRecipe(pub String);

impl std::fmt::Display for UnknownRecipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown recipe `{}` (available: {})", self.0, RECIPES.join(", "))
    }
}

impl std::error::Error for UnknownRecipe {}
