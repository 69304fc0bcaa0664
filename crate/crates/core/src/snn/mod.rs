//! Single-layer spiking classifier for Iris: latency-coded inputs, leaky
//! integrate-and-fire outputs, teacher-forced STDP through one of three
//! synapse rules (ideal additive, behavioral soft-bound, simulated CTF device).

mod data;

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use data::{stratified_split, EncodedSample, Encoder, Encoding, IrisData, Split, FEATURES, SPECIES};

use crate::device::{CtfDevice, DeviceParams, TrapState};
use crate::error::{ensure, Result};
use crate::plasticity::{self, Branch, PlasticityParams};
use crate::seed;
use crate::waveform::{superpose, StdpDrive, Waveform, WaveformTemplate};

pub const N_OUT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub v_thresh: f64,
    pub tau_mem: f64,
    pub v_reset: f64,
    pub refractory: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self { v_thresh: 2.5, tau_mem: 1.0, v_reset: 0.0, refractory: 0.0 }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.tau_mem > 0.0, "tau_mem", || format!("must be > 0, got {}", self.tau_mem))?;
        ensure(self.v_reset < self.v_thresh, "v_reset", || {
            format!("must be below v_thresh ({} >= {})", self.v_reset, self.v_thresh)
        })?;
        ensure(self.refractory >= 0.0, "refractory", || format!("must be >= 0, got {}", self.refractory))
    }
}

/// Weight-independent exponential STDP with hard bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealRule {
    pub eta: f64,
    pub tau_ltp: f64,
    pub tau_ltd: f64,
}

impl Default for IdealRule {
    fn default() -> Self {
        Self { eta: 0.01, tau_ltp: 1.05, tau_ltd: 1.24 }
    }
}

impl IdealRule {
    pub fn delta(&self, dt: f64) -> f64 {
        if dt >= 0.0 {
            self.eta * (-dt / self.tau_ltp).exp()
        } else {
            -self.eta * (dt / self.tau_ltd).exp()
        }
    }
}

/// Waveforms for the device rule on the network's time base.
pub fn snn_drive() -> StdpDrive {
    StdpDrive {
        gate: WaveformTemplate { t_spike: 5e-3, t_tail: 1.0, ..WaveformTemplate::gate() },
        drain: WaveformTemplate { t_spike: 70e-3, t_tail: 1.0, ..WaveformTemplate::drain() },
        dt_sample: 1e-3,
        v_floor: 6.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleSpec {
    Ideal(IdealRule),
    Behavioral(PlasticityParams),
    Ctf { device: DeviceParams, drive: StdpDrive },
}

impl RuleSpec {
    pub fn ctf_default() -> Self {
        RuleSpec::Ctf { device: DeviceParams::default(), drive: snn_drive() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RuleSpec::Ideal(_) => "ideal",
            RuleSpec::Behavioral(_) => "behavioral",
            RuleSpec::Ctf { .. } => "ctf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnConfig {
    pub encoding: Encoding,
    pub window: f64,
    pub tick: f64,
    pub lif: LifParams,
    /// Teacher spike delay after the earliest input spike, s.
    pub teacher_offset: f64,
    pub w_init: (f64, f64),
    pub test_fraction: f64,
    pub epochs: usize,
}

impl Default for SnnConfig {
    fn default() -> Self {
        Self {
            encoding: Encoding::default(),
            window: 1.0,
            tick: 1e-3,
            lif: LifParams::default(),
            teacher_offset: 0.4,
            w_init: (0.3, 0.7),
            test_fraction: 0.2,
            epochs: 30,
        }
    }
}

impl SnnConfig {
    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        ensure(self.tick > 0.0 && self.tick <= self.window, "tick", || format!("must lie in (0, window], got {}", self.tick))?;
        ensure(self.teacher_offset >= 0.0, "teacher_offset", || format!("must be >= 0, got {}", self.teacher_offset))?;
        let (lo, hi) = self.w_init;
        ensure(0.0 <= lo && lo <= hi && hi <= 1.0, "w_init", || format!("need 0 <= lo <= hi <= 1, got ({lo}, {hi})"))
    }
}

struct CtfSynapses {
    device: CtfDevice,
    pre: Waveform,
    post: Waveform,
    v_floor: f64,
    states: Vec<TrapState>,
    /// Above-floor held segments of the superposed trace, keyed by Δt in ticks.
    traces: HashMap<i64, Vec<(f64, f64)>>,
}

impl CtfSynapses {
    fn segments(&mut self, ticks: i64, tick: f64) -> &[(f64, f64)] {
        let (pre, post, floor) = (&self.pre, &self.post, self.v_floor);
        self.traces.entry(ticks).or_insert_with(|| {
            superpose(pre, post, ticks as f64 * tick).trace.held_segments().filter(|s| s.0.abs() >= floor).collect()
        })
    }
}

enum Plasticity {
    Ideal(IdealRule),
    Behavioral(PlasticityParams),
    Ctf(Box<CtfSynapses>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub first_spike: [Option<f64>; N_OUT],
    /// Membrane potentials when inference stopped (pre-reset for the winner).
    pub v: [f64; N_OUT],
    /// `(input, output, t_post - t_pre)` for every input that spiked and every
    /// output that fired.
    pub dts: Vec<(usize, usize, f64)>,
}

impl RunOutput {
    /// Earliest spike, then higher potential, then lower index; if nothing
    /// fired, the highest potential.
    pub fn prediction(&self) -> usize {
        let mut best = 0;
        for j in 1..N_OUT {
            let key = |k: usize| (self.first_spike[k].unwrap_or(f64::INFINITY), -self.v[k]);
            let (a, b) = (key(j), key(best));
            if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
                best = j;
            }
        }
        best
    }
}

pub struct SnnNetwork {
    n_in: usize,
    g: Vec<f64>,
    lif: LifParams,
    window: f64,
    tick: f64,
    teacher_offset: f64,
    rule: Plasticity,
}

impl SnnNetwork {
    pub fn new<R: Rng + ?Sized>(n_in: usize, cfg: &SnnConfig, rule: &RuleSpec, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (lo, hi) = cfg.w_init;
        let g = (0..n_in * N_OUT).map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo }).collect();
        Self::with_weights(n_in, g, cfg, rule)
    }

    pub fn with_weights(n_in: usize, g: Vec<f64>, cfg: &SnnConfig, rule: &RuleSpec) -> Result<Self> {
        cfg.validate()?;
        ensure(g.len() == n_in * N_OUT, "weights", || format!("expected {} values, got {}", n_in * N_OUT, g.len()))?;
        ensure(g.iter().all(|x| (0.0..=1.0).contains(x)), "weights", || "must lie in [0, 1]".into())?;
        let rule = match rule {
            RuleSpec::Ideal(r) => Plasticity::Ideal(*r),
            RuleSpec::Behavioral(p) => {
                p.validate()?;
                Plasticity::Behavioral(*p)
            }
            RuleSpec::Ctf { device, drive } => {
                let device = CtfDevice::new(*device)?;
                let (pre, post) = drive.render()?;
                let w = device.window();
                let states = g.iter().map(|&x| device.state_at(w.v_t_of_g_norm(x))).collect::<Result<_>>()?;
                Plasticity::Ctf(Box::new(CtfSynapses { device, pre, post, v_floor: drive.v_floor, states, traces: HashMap::new() }))
            }
        };
        let mut net = Self { n_in, g, lif: cfg.lif, window: cfg.window, tick: cfg.tick, teacher_offset: cfg.teacher_offset, rule };
        net.sync_from_states();
        Ok(net)
    }

    fn sync_from_states(&mut self) {
        if let Plasticity::Ctf(c) = &self.rule {
            for (g, s) in self.g.iter_mut().zip(&c.states) {
                *g = s.g_norm();
            }
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    /// Normalized conductances, row-major `[input][output]`.
    pub fn weights(&self) -> &[f64] {
        &self.g
    }

    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.g[input * N_OUT + output]
    }

    fn ticks(&self, t: f64) -> i64 {
        (t / self.tick).round() as i64
    }

    /// Run one sample.  With a teacher, output `teacher` fires at the teacher
    /// time and the others stay silent; otherwise the first output to reach
    /// threshold ends inference.
    pub fn run_sample(&self, sample: &EncodedSample, teacher: Option<usize>) -> RunOutput {
        let mut events: Vec<(i64, usize)> =
            sample.spike_times.iter().enumerate().filter_map(|(i, t)| t.map(|t| (self.ticks(t), i))).collect();
        events.sort_unstable();
        let mut out = RunOutput { first_spike: [None; N_OUT], v: [0.0; N_OUT], dts: Vec::new() };
        if let Some(k) = teacher {
            let Some(&(first, _)) = events.first() else { return out };
            let t_teach = first + self.ticks(self.teacher_offset);
            out.first_spike[k] = Some(t_teach as f64 * self.tick);
            out.dts = events.iter().map(|&(t, i)| (i, k, (t_teach - t) as f64 * self.tick)).collect();
            return out;
        }
        let n_ticks = self.ticks(self.window);
        let decay = (-self.tick / self.lif.tau_mem).exp();
        let refractory = self.ticks(self.lif.refractory);
        let mut until = [i64::MIN; N_OUT];
        let mut e = 0;
        for k in 0..=n_ticks {
            for v in out.v.iter_mut() {
                *v *= decay;
            }
            while e < events.len() && events[e].0 == k {
                let i = events[e].1;
                for j in 0..N_OUT {
                    if k > until[j] {
                        out.v[j] += self.g[i * N_OUT + j];
                    }
                }
                e += 1;
            }
            let fired: Vec<usize> = (0..N_OUT).filter(|&j| k > until[j] && out.v[j] >= self.lif.v_thresh).collect();
            if !fired.is_empty() {
                for &j in &fired {
                    out.first_spike[j] = Some(k as f64 * self.tick);
                    until[j] = k + refractory;
                    out.dts.extend(events[..e].iter().map(|&(t, i)| (i, j, (k - t) as f64 * self.tick)));
                }
                break;
            }
        }
        out
    }

    pub fn predict(&self, sample: &EncodedSample) -> usize {
        self.run_sample(sample, None).prediction()
    }

    /// Change synapse `input → output` for a pairing at offset `dt`.
    pub fn apply_update(&mut self, input: usize, output: usize, dt: f64) -> Result<()> {
        let idx = input * N_OUT + output;
        let tick = self.tick;
        let ticks = self.ticks(dt);
        let g = self.g[idx];
        self.g[idx] = match &mut self.rule {
            Plasticity::Ideal(r) => (g + r.delta(dt)).clamp(0.0, 1.0),
            Plasticity::Behavioral(p) => {
                let branch = if dt >= 0.0 { Branch::Ltp } else { Branch::Ltd };
                plasticity::update(p, g, dt, branch)
            }
            Plasticity::Ctf(c) => {
                let segs = c.segments(ticks, tick).to_vec();
                let s = c.device.apply_segments(&c.states[idx], segs, 0.0)?;
                c.states[idx] = s;
                s.g_norm()
            }
        };
        Ok(())
    }

    /// One supervised pass over `train` in the order given.
    pub fn train_epoch(&mut self, train: &[EncodedSample], order: &[usize]) -> Result<()> {
        for &s in order {
            let out = self.run_sample(&train[s], Some(train[s].label));
            for (i, j, dt) in out.dts {
                self.apply_update(i, j, dt)?;
            }
        }
        Ok(())
    }

    /// Copy with every conductance moved by Gaussian noise of σ `sigma`
    /// (fraction of the range), clamped to [0, 1]; plasticity is dropped.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<SnnNetwork> {
        ensure(sigma.is_finite() && sigma >= 0.0, "sigma_over_range", || format!("must be >= 0, got {sigma}"))?;
        let g = if sigma == 0.0 {
            self.g.clone()
        } else {
            let n = Normal::new(0.0, sigma).expect("positive sigma");
            self.g.iter().map(|&x| (x + n.sample(rng)).clamp(0.0, 1.0)).collect()
        };
        Ok(SnnNetwork {
            n_in: self.n_in,
            g,
            lif: self.lif,
            window: self.window,
            tick: self.tick,
            teacher_offset: self.teacher_offset,
            rule: Plasticity::Ideal(IdealRule::default()),
        })
    }
}

pub fn evaluate(net: &SnnNetwork, samples: &[EncodedSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.iter().filter(|s| net.predict(s) == s.label).count();
    hits as f64 / samples.len() as f64
}

/// Everything one seed produces.
pub struct SeedRun {
    pub seed: u64,
    pub initial: f64,
    /// Test accuracy after each epoch.
    pub trace: Vec<f64>,
    pub network: SnnNetwork,
    pub test: Vec<EncodedSample>,
}

impl SeedRun {
    pub fn final_accuracy(&self) -> f64 {
        self.trace.last().copied().unwrap_or(self.initial)
    }
}

/// Split, encode, initialize and train one network.  Split, initial weights and
/// presentation order depend only on `seed`, so runs of different rules with
/// the same seed are paired.
pub fn run_seed(cfg: &SnnConfig, rule: &RuleSpec, data: &IrisData, seed_value: u64) -> Result<SeedRun> {
    cfg.validate()?;
    let split = stratified_split(&data.labels, cfg.test_fraction, seed_value)?;
    let enc = Encoder::fit(data, &split.train, cfg.window, cfg.encoding)?;
    let train = enc.encode_rows(data, &split.train);
    let test = enc.encode_rows(data, &split.test);
    let mut net = SnnNetwork::new(enc.n_inputs(), cfg, rule, &mut seed::stream(seed_value, "snn-init", 0))?;
    let initial = evaluate(&net, &test);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut seed::stream(seed_value, "snn-order", epoch as u64));
        net.train_epoch(&train, &order)?;
        trace.push(evaluate(&net, &test));
    }
    Ok(SeedRun { seed: seed_value, initial, trace, network: net, test })
}

pub fn run_seeds(cfg: &SnnConfig, rule: &RuleSpec, data: &IrisData, seeds: &[u64]) -> Result<Vec<SeedRun>> {
    seeds.par_iter().map(|&s| run_seed(cfg, rule, data, s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub clean: f64,
    pub noisy: Vec<f64>,
    pub mean_abs_delta: f64,
}

/// Accuracy change when every conductance carries Gaussian programming noise.
pub fn noise_robustness(net: &SnnNetwork, test: &[EncodedSample], sigma_over_range: f64, noise_seeds: &[u64]) -> Result<NoiseReport> {
    let clean = evaluate(net, test);
    let noisy = noise_seeds
        .iter()
        .map(|&s| Ok(evaluate(&net.perturbed(sigma_over_range, &mut seed::stream(s, "snn-noise", 0))?, test)))
        .collect::<Result<Vec<f64>>>()?;
    let mean_abs_delta = if noisy.is_empty() {
        0.0
    } else {
        noisy.iter().map(|a| (a - clean).abs()).sum::<f64>() / noisy.len() as f64
    };
    Ok(NoiseReport { clean, noisy, mean_abs_delta })
}
