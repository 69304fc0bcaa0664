//! Experiment configuration: a flat `key = value` text file with optional
//! `[section]` headers and dotted keys.  Every key has a default; the full
//! default file is printed by `sim defaults`.

use std::collections::BTreeMap;
use std::fmt;

use ctfsyn::circuit::{CellTopology, CircuitStack, DiodeModel, EssentialWrite, MosfetModel, Substrate};
use ctfsyn::device::{CalibrationTargets, DeviceParams};
use ctfsyn::plasticity::PlasticityParams;
use ctfsyn::snn::{snn_drive, IdealRule, SnnConfig};
use ctfsyn::waveform::{StdpDrive, WaveformTemplate};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub program_v: f64,
    pub program_t_p: f64,
    pub erase_v: f64,
    pub erase_t_p: f64,
    pub n_pulses: usize,
    pub program_sweep: Vec<f64>,
    pub erase_sweep: Vec<f64>,
    pub program_widths: Vec<f64>,
    pub erase_widths: Vec<f64>,
    /// Total stress time per width in the level-count sweep, s.
    pub level_time: f64,
    pub max_level_pulses: usize,
    pub gate_current_points: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            program_v: 12.5,
            program_t_p: 1e-3,
            erase_v: -14.5,
            erase_t_p: 20e-3,
            n_pulses: 1000,
            program_sweep: vec![10.5, 11.0, 11.5, 12.0, 12.5],
            erase_sweep: vec![-12.5, -13.0, -13.5, -14.0, -14.5],
            program_widths: vec![1e-3, 0.5e-3, 0.25e-3, 0.125e-3, 0.0625e-3],
            erase_widths: vec![20e-3, 10e-3, 5e-3, 2.5e-3, 1.25e-3],
            level_time: 30.0,
            max_level_pulses: 60_000,
            gate_current_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdpConfig {
    #[serde(flatten)]
    pub drive: StdpDrive,
    pub dt_min: f64,
    pub dt_max: f64,
    pub n_points: usize,
}

impl Default for StdpConfig {
    fn default() -> Self {
        Self { drive: StdpDrive::default(), dt_min: -20e-3, dt_max: 20e-3, n_points: 41 }
    }
}

/// Junction parameters; `v_bv = 0` means no breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionConfig {
    pub i_s: f64,
    pub n_ideality: f64,
    pub v_bv: f64,
    pub i_bv: f64,
    pub r_s: f64,
}

impl From<DiodeModel> for JunctionConfig {
    fn from(d: DiodeModel) -> Self {
        Self { i_s: d.i_s, n_ideality: d.n_ideality, v_bv: d.v_bv.unwrap_or(0.0), i_bv: d.i_bv, r_s: d.r_s }
    }
}

impl From<JunctionConfig> for DiodeModel {
    fn from(j: JunctionConfig) -> Self {
        Self { i_s: j.i_s, n_ideality: j.n_ideality, v_bv: (j.v_bv != 0.0).then_some(j.v_bv), i_bv: j.i_bv, r_s: j.r_s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub mosfet: MosfetModel,
    pub sd: JunctionConfig,
    pub zd: JunctionConfig,
    pub body: JunctionConfig,
    pub v_start: f64,
    pub v_stop: f64,
    pub v_step: f64,
    pub sweep_v_g: f64,
    pub read_v_g: f64,
    pub read_v_ts: Vec<f64>,
    pub write_v_g: f64,
    pub essential: EssentialWrite,
    pub post: WaveformTemplate,
    pub dt_sample: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            mosfet: MosfetModel::default(),
            sd: DiodeModel::standard().into(),
            zd: DiodeModel::zener().into(),
            body: DiodeModel::body().into(),
            v_start: -8.0,
            v_stop: 8.0,
            v_step: 0.01,
            sweep_v_g: 0.0,
            read_v_g: 0.2,
            read_v_ts: vec![-1.3, -1.05, -0.8, -0.55, -0.3],
            write_v_g: 9.8,
            essential: EssentialWrite::default(),
            post: WaveformTemplate::drain(),
            dt_sample: 1e-4,
        }
    }
}

impl CircuitConfig {
    pub fn stack(&self, topology: CellTopology) -> CircuitStack {
        let mut topology = topology;
        if topology.body_diode.is_some() {
            topology.body_diode = Some(self.body.into());
        }
        CircuitStack { mosfet: self.mosfet, sd: self.sd.into(), zd: self.zd.into(), topology }
    }

    pub fn topologies(&self) -> Vec<CircuitStack> {
        CellTopology::all().into_iter().map(|t| self.stack(t)).collect()
    }

    pub fn stack_of(&self, has_2d: bool, substrate: Substrate) -> CircuitStack {
        self.stack(CellTopology::new(has_2d, substrate))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnSection {
    #[serde(flatten)]
    pub net: SnnConfig,
    pub seeds: usize,
    /// Rules to train, any of `ideal`, `behavioral`, `ctf`.
    pub rules: Vec<String>,
    pub ideal: IdealRule,
    pub drive: StdpDrive,
    pub noise_sigma: f64,
    pub noise_seeds: usize,
    /// Iris CSV; empty uses the bundled copy.
    pub iris_path: String,
}

impl Default for SnnSection {
    fn default() -> Self {
        Self {
            net: SnnConfig::default(),
            seeds: 20,
            rules: vec!["ideal".into(), "behavioral".into(), "ctf".into()],
            ideal: IdealRule::default(),
            drive: snn_drive(),
            noise_sigma: 0.001,
            noise_seeds: 20,
            iris_path: String::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub device: DeviceParams,
    pub pulses: PulseConfig,
    pub stdp: StdpConfig,
    pub circuit: CircuitConfig,
    pub plasticity: PlasticityParams,
    pub snn: SnnSection,
    pub calibrate: CalibrationTargets,
}

impl ExperimentConfig {
    /// The full configuration as config-file text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in flatten(&Value::try_from(self).expect("config serializes")) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "`{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Every problem found in a config file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config ({} problem{})", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for i in &self.0 {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn flatten(v: &Value) -> BTreeMap<String, Value> {
    fn walk(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
        match v {
            Value::Table(t) => {
                for (k, v) in t {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other.clone());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", v, &mut out);
    out
}

fn insert(table: &mut Table, key: &str, value: Value) {
    let mut parts = key.split('.').peekable();
    let mut t = table;
    while let Some(p) = parts.next() {
        if parts.peek().is_none() {
            t.insert(p.to_string(), value);
            return;
        }
        t = t.entry(p).or_insert_with(|| Value::Table(Table::new())).as_table_mut().expect("defaults nest tables");
    }
}

#[derive(Clone, Copy)]
enum Rule {
    Positive,
    Negative,
    NonNegative,
    Unit,
    AtLeast(f64),
}

fn rule(key: &str) -> Option<Rule> {
    use Rule::*;
    let last = key.rsplit('.').next().unwrap_or(key);
    Some(match (key, last) {
        ("pulses.program_v" | "pulses.program_sweep" | "calibrate.v_th_program" | "calibrate.program_sweep", _) => Positive,
        ("pulses.erase_v" | "pulses.erase_sweep" | "calibrate.v_th_erase" | "calibrate.erase_sweep", _) => Negative,
        ("plasticity.dg_max_ltp", _) => Positive,
        ("plasticity.dg_max_ltd", _) => Negative,
        ("snn.test_fraction" | "snn.w_init", _) | (_, "charge_centroid" | "cutoff") => Unit,
        ("calibrate.current_factor", _) => AtLeast(1.0),
        ("calibrate.traversal_pulses", _) => AtLeast(1.0),
        ("snn.seeds" | "snn.epochs" | "snn.noise_seeds" | "stdp.n_points", _) => NonNegative,
        (_, "n_ideality") => AtLeast(1.0),
        (_, "noise_sigma" | "refractory" | "r_s" | "g_off" | "i_bv" | "a1" | "a2" | "v_floor" | "teacher_offset") => NonNegative,
        (_, "v_neg") => Negative,
        (
            _,
            "t_p" | "program_t_p" | "erase_t_p" | "t_spike" | "t_tail" | "dt_sample" | "n_pulses" | "level_time"
            | "max_level_pulses" | "gate_current_points" | "program_widths" | "erase_widths" | "v_step" | "window"
            | "tick" | "tau_mem" | "v_thresh" | "tau_ltp" | "tau_ltd" | "eta" | "a_tox" | "b_tox" | "a_box" | "b_box" | "rtol"
            | "d_tox" | "d_ctl" | "d_box" | "eps_tox" | "eps_ctl" | "eps_box" | "area" | "i_s" | "k" | "overdrive_on"
            | "area_ratio" | "v_pos" | "fields" | "beta" | "v_th_tol" | "traversal_tol" | "i_program" | "i_erase"
            | "max_iterations",
        ) => Positive,
        _ => return None,
    })
}

fn check_number(key: &str, x: f64) -> Option<String> {
    if !x.is_finite() {
        return Some(format!("must be finite, got {x}"));
    }
    let ok = match rule(key)? {
        Rule::Positive => x > 0.0,
        Rule::Negative => x < 0.0,
        Rule::NonNegative => x >= 0.0,
        Rule::Unit => (0.0..=1.0).contains(&x),
        Rule::AtLeast(m) => x >= m,
    };
    let want = match rule(key)? {
        Rule::Positive => "> 0".to_string(),
        Rule::Negative => "< 0".to_string(),
        Rule::NonNegative => ">= 0".to_string(),
        Rule::Unit => "in [0, 1]".to_string(),
        Rule::AtLeast(m) => format!(">= {m}"),
    };
    (!ok).then(|| format!("must be {want}, got {x}"))
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

/// Coerce `v` to the type of `default`, or explain why it cannot be.
fn coerce(default: &Value, v: Value) -> Result<Value, String> {
    match (default, v) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Float(_), v @ Value::Float(_)) => Ok(v),
        (Value::Integer(_), v @ Value::Integer(i)) => {
            if i < 0 {
                Err(format!("must be a non-negative integer, got {i}"))
            } else {
                Ok(v)
            }
        }
        (Value::Array(d), Value::Array(items)) => {
            let elem = d.first().cloned().unwrap_or(Value::Float(0.0));
            items.into_iter().map(|x| coerce(&elem, x)).collect::<Result<Vec<_>, _>>().map(Value::Array)
        }
        (d, v) if std::mem::discriminant(d) == std::mem::discriminant(&v) => Ok(v),
        (d, v) => Err(format!("expected {}, got {}", type_name(d), type_name(&v))),
    }
}

fn range_issues(key: &str, v: &Value) -> Vec<String> {
    match v {
        Value::Float(x) => check_number(key, *x).into_iter().collect(),
        Value::Integer(i) => check_number(key, *i as f64).into_iter().collect(),
        Value::Array(items) => items.iter().flat_map(|x| range_issues(key, x)).collect(),
        _ => Vec::new(),
    }
}

/// Parse config text, fill defaults and check every value.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let defaults = Value::try_from(ExperimentConfig::default()).expect("defaults serialize");
    let known = flatten(&defaults);
    let mut merged = defaults.as_table().expect("config is a table").clone();
    let mut issues = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            let head = line.split('#').next().unwrap_or("").trim();
            let name = head.strip_prefix('[').and_then(|h| h.strip_suffix(']')).map(str::trim);
            match name {
                Some(n) if !n.is_empty() && n.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')) => {
                    section = n.to_string();
                }
                _ => issues.push(ConfigIssue { line: Some(line_no), key: None, message: format!("malformed section header `{line}`") }),
            }
            continue;
        }
        let parsed: Table = match toml::from_str(line) {
            Ok(t) => t,
            Err(e) => {
                let msg = e.message().trim().to_string();
                issues.push(ConfigIssue { line: Some(line_no), key: None, message: format!("syntax error: {msg}") });
                continue;
            }
        };
        for (rel, value) in flatten(&Value::Table(parsed)) {
            let key = if section.is_empty() { rel } else { format!("{section}.{rel}") };
            let issue = |message: String| ConfigIssue { line: Some(line_no), key: Some(key.clone()), message };
            if let Some(first) = seen.insert(key.clone(), line_no) {
                issues.push(issue(format!("already set on line {first}")));
                continue;
            }
            let Some(default) = known.get(&key) else {
                issues.push(issue("unknown key".into()));
                continue;
            };
            match coerce(default, value) {
                Ok(v) => {
                    let problems = range_issues(&key, &v);
                    if problems.is_empty() {
                        insert(&mut merged, &key, v);
                    }
                    issues.extend(problems.into_iter().map(issue));
                }
                Err(m) => issues.push(issue(m)),
            }
        }
    }
    if !issues.is_empty() {
        return Err(ConfigErrors(issues));
    }
    let cfg: ExperimentConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![ConfigIssue { line: None, key: None, message: e.message().to_string() }]))?;
    let cross = cross_checks(&cfg);
    if cross.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(
            cross
                .into_iter()
                .map(|(key, message)| ConfigIssue { line: seen.get(&key).copied(), key: Some(key), message })
                .collect(),
        ))
    }
}

/// Checks that involve more than one key, delegated to the model validators.
fn cross_checks(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut push = |section: &str, r: ctfsyn::error::Result<()>| {
        if let Err(e) = r {
            let key = match &e {
                ctfsyn::error::Error::InvalidParameter { name, .. } => format!("{section}.{name}"),
                _ => section.to_string(),
            };
            out.push((key, e.to_string()));
        }
    };
    push("device", ctfsyn::device::CtfDevice::new(cfg.device).map(|_| ()));
    push("stdp", cfg.stdp.drive.render().map(|_| ()));
    push("snn.drive", cfg.snn.drive.render().map(|_| ()));
    push("snn", cfg.snn.net.validate());
    push("plasticity", cfg.plasticity.validate());
    push("calibrate", cfg.calibrate.validate());
    for t in CellTopology::all() {
        push("circuit", cfg.circuit.stack(t).validate());
    }
    let c = &cfg.circuit;
    if c.v_stop <= c.v_start {
        out.push(("circuit.v_stop".into(), format!("must exceed v_start ({} <= {})", c.v_stop, c.v_start)));
    }
    if cfg.stdp.dt_max <= cfg.stdp.dt_min {
        out.push(("stdp.dt_max".into(), format!("must exceed dt_min ({} <= {})", cfg.stdp.dt_max, cfg.stdp.dt_min)));
    }
    for r in &cfg.snn.rules {
        if !["ideal", "behavioral", "ctf"].contains(&r.as_str()) {
            out.push(("snn.rules".into(), format!("unknown rule `{r}` (expected ideal, behavioral or ctf)")));
        }
    }
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(validate_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = validate_config("[device.window]\nv_t_min = -1.4\n").unwrap();
        let b = validate_config("device.window.v_t_min = -1.4 # wider\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.device.window.v_t_min, -1.4);
    }

    #[test]
    fn integers_are_accepted_for_floats() {
        assert_eq!(validate_config("pulses.program_v = 12").unwrap().pulses.program_v, 12.0);
    }

    #[test]
    fn duplicate_keys_are_reported() {
        let e = validate_config("snn.epochs = 3\nsnn.epochs = 4\n").unwrap_err();
        assert_eq!(e.0[0].line, Some(2));
    }
}
