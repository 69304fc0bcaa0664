use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::seed;

pub const SPECIES: [&str; 3] = ["setosa", "versicolor", "virginica"];
pub const FEATURES: [&str; 4] = ["sepal_length", "sepal_width", "petal_length", "petal_width"];

const EMBEDDED: &str = include_str!("../../data/iris.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrisData {
    pub features: Vec<[f64; 4]>,
    pub labels: Vec<usize>,
}

#[derive(Deserialize)]
struct Row {
    sepal_length: f64,
    sepal_width: f64,
    petal_length: f64,
    petal_width: f64,
    species: String,
}

fn species_index(name: &str) -> Option<usize> {
    let n = name.trim().to_ascii_lowercase();
    let n = n.strip_prefix("iris-").unwrap_or(&n);
    SPECIES.iter().position(|s| *s == n)
}

impl IrisData {
    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, row) in csv::Reader::from_reader(r).deserialize::<Row>().enumerate() {
            let row = row?;
            let label = species_index(&row.species)
                .ok_or_else(|| Error::Data(format!("row {}: unknown species {:?}", i + 1, row.species)))?;
            let f = [row.sepal_length, row.sepal_width, row.petal_length, row.petal_width];
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("row {}: non-finite feature", i + 1)));
            }
            features.push(f);
            labels.push(label);
        }
        if features.is_empty() {
            return Err(Error::Data("no rows".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// The canonical 150-row table shipped with the crate.
    pub fn embedded() -> Self {
        Self::from_reader(EMBEDDED.as_bytes()).expect("bundled iris table parses")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffle, holding out `round(test_fraction · n_class)` of each class.
pub fn stratified_split(labels: &[usize], test_fraction: f64, master: u64) -> Result<Split> {
    ensure((0.0..1.0).contains(&test_fraction), "test_fraction", || format!("must lie in [0, 1), got {test_fraction}"))?;
    let mut rng = seed::stream(master, "snn-split", 0);
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        split.test.extend_from_slice(&idx[..n_test]);
        split.train.extend_from_slice(&idx[n_test..]);
    }
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    /// One spike per feature at `window · (1 - x)`.
    Latency,
    /// `fields` Gaussian receptive fields per feature; a field fires at
    /// `window · (1 - activation)` unless that is later than `cutoff · window`.
    Grf { fields: usize, beta: f64, cutoff: f64 },
}

impl Default for Encoding {
    fn default() -> Self {
        Encoding::Grf { fields: 5, beta: 1.0, cutoff: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    /// One entry per input line; `None` means the line stays silent.
    pub spike_times: Vec<Option<f64>>,
    pub label: usize,
}

/// Min-max normalization fitted on the training rows, then spike-time coding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
    pub window: f64,
    pub encoding: Encoding,
}

impl Encoder {
    pub fn fit(data: &IrisData, rows: &[usize], window: f64, encoding: Encoding) -> Result<Self> {
        ensure(window.is_finite() && window > 0.0, "window", || format!("must be > 0, got {window}"))?;
        if let Encoding::Grf { fields, beta, cutoff } = encoding {
            ensure(fields >= 2, "fields", || format!("must be >= 2, got {fields}"))?;
            ensure(beta > 0.0, "beta", || format!("must be > 0, got {beta}"))?;
            ensure(cutoff > 0.0 && cutoff <= 1.0, "cutoff", || format!("must lie in (0, 1], got {cutoff}"))?;
        }
        let mut lo = [f64::INFINITY; 4];
        let mut hi = [f64::NEG_INFINITY; 4];
        for &r in rows {
            for k in 0..4 {
                lo[k] = lo[k].min(data.features[r][k]);
                hi[k] = hi[k].max(data.features[r][k]);
            }
        }
        for k in 0..4 {
            if !(hi[k] > lo[k]) {
                return Err(Error::Degenerate(format!("feature {} has no spread in the training rows", FEATURES[k])));
            }
        }
        Ok(Self { lo, hi, window, encoding })
    }

    pub fn n_inputs(&self) -> usize {
        match self.encoding {
            Encoding::Latency => 4,
            Encoding::Grf { fields, .. } => 4 * fields,
        }
    }

    pub fn normalize(&self, f: &[f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| ((f[k] - self.lo[k]) / (self.hi[k] - self.lo[k])).clamp(0.0, 1.0))
    }

    pub fn encode(&self, f: &[f64; 4], label: usize) -> EncodedSample {
        let x = self.normalize(f);
        let spike_times = match self.encoding {
            Encoding::Latency => x.iter().map(|x| Some(self.window * (1.0 - x))).collect(),
            Encoding::Grf { fields, beta, cutoff } => {
                let sigma = beta / (fields - 1) as f64;
                x.iter()
                    .flat_map(|&x| {
                        (0..fields).map(move |j| {
                            let c = j as f64 / (fields - 1) as f64;
                            let a = (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp();
                            let t = self.window * (1.0 - a);
                            (t <= cutoff * self.window).then_some(t)
                        })
                    })
                    .collect()
            }
        };
        EncodedSample { spike_times, label }
    }

    pub fn encode_rows(&self, data: &IrisData, rows: &[usize]) -> Vec<EncodedSample> {
        rows.iter().map(|&r| self.encode(&data.features[r], data.labels[r])).collect()
    }
}
