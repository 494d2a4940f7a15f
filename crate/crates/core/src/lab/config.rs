//! Sectioned `key = value` experiment configuration.
//!
//! ```text
//! master_seed = 7
//!
//! [distribution]
//! d = 5
//! noise_std = 0.0
//!
//! [model]
//! m = 256
//! ```
//!
//! Lines starting with `#` are comments. Unknown sections and keys are
//! errors, as are duplicate keys. Every field except `distribution.d` has
//! a default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::activation::ActivationKind;
use crate::data::{InputLaw, TeacherSpec};
use crate::error::{LabError, Result};
use crate::model::{InitPolicy, ModelSpec, SignPattern};
use crate::optim::{Algorithm, TrainConfig};

#[derive(Debug, Clone, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

/// Raw parse: section name to entries, each remembering its line.
#[derive(Debug, Clone, Default)]
struct RawConfig {
    sections: BTreeMap<String, Section>,
}

fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    let mut current = String::new();
    raw.sections.insert(current.clone(), Section { line: 0, ..Default::default() });
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| LabError::Parse {
                line: lineno,
                field: content.to_string(),
                message: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(LabError::Parse {
                    line: lineno,
                    field: name,
                    message: "unknown section".into(),
                });
            }
            if raw.sections.contains_key(&name) {
                return Err(LabError::Parse {
                    line: lineno,
                    field: name,
                    message: "duplicate section".into(),
                });
            }
            raw.sections.insert(name.clone(), Section { line: lineno, ..Default::default() });
            current = name;
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| LabError::Parse {
            line: lineno,
            field: content.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let allowed = SCHEMA
            .iter()
            .find(|(s, _)| *s == current)
            .map(|(_, keys)| *keys)
            .unwrap_or(&[]);
        if !allowed.contains(&key.as_str()) {
            return Err(LabError::Parse {
                line: lineno,
                field: qualified(&current, &key),
                message: "unknown key".into(),
            });
        }
        let section = raw.sections.get_mut(&current).expect("inserted above");
        if section.entries.insert(key.clone(), (lineno, value)).is_some() {
            return Err(LabError::Parse {
                line: lineno,
                field: qualified(&current, &key),
                message: "duplicate key".into(),
            });
        }
    }
    Ok(raw)
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["master_seed"]),
    (
        "distribution",
        &[
            "d",
            "m_teacher",
            "teacher_seed",
            "teacher_norm",
            "teacher_activation",
            "input_law",
            "input_radius",
            "input_scale",
            "noise_std",
            "c_x",
            "c_y",
        ],
    ),
    ("model", &["m", "activation", "signs", "sign_seed", "init", "init_scale", "init_seed"]),
    ("training", &["algorithm", "eta", "horizon", "n", "strict_mode", "checkpoint_stride"]),
    ("stability", &["replicates", "neighbor_policy", "gap_mc"]),
    (
        "sweep",
        &["kind", "n_grid", "replicates", "eta_t_per_n", "m_scale", "m_cap", "rate_stride"],
    ),
    ("check", &["pairs", "instances", "trajectory_runs", "pair_radius"]),
    ("reference", &["build", "surrogate_n", "max_steps", "n_mc", "dist"]),
    ("bounds", &["risk_csv", "population_csv"]),
    ("budget", &["max_steps"]),
    ("output", &["dir", "formats"]),
];

struct Getter<'a> {
    raw: &'a RawConfig,
}

impl Getter<'_> {
    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        let Some(sec) = self.raw.sections.get(section) else {
            return Ok(None);
        };
        let Some((line, value)) = sec.entries.get(key) else {
            return Ok(None);
        };
        value.parse::<T>().map(Some).map_err(|_| LabError::Parse {
            line: *line,
            field: qualified(section, key),
            message: format!("cannot parse `{value}`"),
        })
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.raw
            .sections
            .get(section)
            .and_then(|s| s.entries.get(key).map(|e| e.0).or(Some(s.line)))
            .unwrap_or(0)
    }

    fn invalid(&self, section: &str, key: &str, message: impl Into<String>) -> LabError {
        LabError::Parse {
            line: self.line_of(section, key),
            field: qualified(section, key),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Stability,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborPolicy {
    Fresh,
    Identical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySection {
    pub replicates: usize,
    pub neighbor_policy: NeighborPolicy,
    /// Monte-Carlo size for per-replicate gaps; 0 disables.
    pub gap_mc: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Rate sweeps: ηT = eta_t_per_n · n.
    pub eta_t_per_n: f64,
    /// Rate sweeps: m = min(m_cap, ⌈m_scale · (ηT)³⌉).
    pub m_scale: f64,
    pub m_cap: usize,
    /// SGD rate sweeps average the population risk over every
    /// `rate_stride`-th iterate.
    pub rate_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSection {
    pub pairs: usize,
    pub instances: usize,
    pub trajectory_runs: usize,
    /// Random points are drawn with ‖W − W₀‖ up to this radius.
    pub pair_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSection {
    pub build: bool,
    pub surrogate_n: usize,
    pub max_steps: usize,
    pub n_mc: usize,
    /// ‖W*_λ − W₀‖ used when the reference is not built.
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub distribution: TeacherSpec,
    pub model: ModelSpec,
    pub training: TrainConfig,
    pub n: usize,
    pub stability: StabilitySection,
    pub sweep: SweepSection,
    pub check: CheckSection,
    pub reference: ReferenceSection,
    pub risk_csv: Option<String>,
    /// Population risks written by `train` when a reference is built.
    pub population_csv: Option<String>,
    pub max_steps: Option<u64>,
    pub output_dir: String,
    pub formats: Vec<String>,
}

fn parse_list<T: FromStr>(g: &Getter<'_>, section: &str, key: &str) -> Result<Option<Vec<T>>> {
    let Some(text) = g.get::<String>(section, key)? else {
        return Ok(None);
    };
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| g.invalid(section, key, format!("cannot parse `{s}`"))))
        .collect::<Result<Vec<T>>>()
        .map(Some)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_raw(text)?;
        let g = Getter { raw: &raw };

        if !raw.sections.contains_key("distribution") {
            return Err(LabError::Parse {
                line: 0,
                field: "distribution".into(),
                message: "missing section".into(),
            });
        }
        let d: usize = g
            .get("distribution", "d")?
            .ok_or_else(|| g.invalid("distribution", "d", "missing field `d`"))?;
        if d == 0 {
            return Err(g.invalid("distribution", "d", "d must be at least 1"));
        }
        let c_x: f64 = g.or("distribution", "c_x", 1.0)?;
        let input_law = match g.or("distribution", "input_law", "sphere".to_string())?.as_str() {
            "sphere" => InputLaw::Sphere {
                radius: g.or("distribution", "input_radius", c_x)?,
            },
            "truncated_gaussian" => InputLaw::TruncatedGaussian {
                scale: g.or("distribution", "input_scale", c_x / (d as f64).sqrt())?,
            },
            other => {
                return Err(g.invalid("distribution", "input_law", format!("unknown input law `{other}`")))
            }
        };
        let activation = |section: &str, key: &str| -> Result<ActivationKind> {
            let name: String = g.or(section, key, "tanh".to_string())?;
            name.parse::<ActivationKind>()
                .map_err(|e| g.invalid(section, key, e.to_string()))
        };
        let distribution = TeacherSpec {
            d,
            m_teacher: g.or("distribution", "m_teacher", 2)?,
            activation: activation("distribution", "teacher_activation")?,
            neuron_norm: g.or("distribution", "teacher_norm", 0.8)?,
            seed: g.or("distribution", "teacher_seed", 0)?,
            input_law,
            noise_std: g.or("distribution", "noise_std", 0.0)?,
            c_x,
            c_y: g.or("distribution", "c_y", 1.0)?,
        };

        let m: usize = g.or("model", "m", 256)?;
        if m == 0 {
            return Err(g.invalid("model", "m", "m must be at least 1"));
        }
        let signs = match g.or("model", "signs", "alternating".to_string())?.as_str() {
            "alternating" => SignPattern::Alternating,
            "random" => SignPattern::Random {
                seed: g.or("model", "sign_seed", 0)?,
            },
            other => return Err(g.invalid("model", "signs", format!("unknown sign pattern `{other}`"))),
        };
        let init_scale: f64 = g.or("model", "init_scale", 0.1)?;
        let init_seed: u64 = g.or("model", "init_seed", 0)?;
        let init = match g.or("model", "init", "zeros".to_string())?.as_str() {
            "zeros" => InitPolicy::Zeros,
            "gaussian" => InitPolicy::Gaussian {
                scale: init_scale,
                seed: init_seed,
            },
            "paired_gaussian" => InitPolicy::PairedGaussian {
                scale: init_scale,
                seed: init_seed,
            },
            other => return Err(g.invalid("model", "init", format!("unknown init policy `{other}`"))),
        };
        let model = ModelSpec {
            m,
            activation: activation("model", "activation")?,
            signs,
            init,
        };

        let algorithm: Algorithm = {
            let name: String = g.or("training", "algorithm", "gd".to_string())?;
            name.parse()
                .map_err(|e: LabError| g.invalid("training", "algorithm", e.to_string()))?
        };
        let training = TrainConfig {
            eta: g.or("training", "eta", 0.1)?,
            horizon: g.or("training", "horizon", 100)?,
            algorithm,
            seed: 0,
            checkpoint_stride: g.or("training", "checkpoint_stride", 10)?,
            record_scalars: true,
            strict_mode: g.or("training", "strict_mode", true)?,
        };
        if !(training.eta > 0.0 && training.eta.is_finite()) {
            return Err(g.invalid("training", "eta", "eta must be positive"));
        }
        if training.checkpoint_stride == 0 {
            return Err(g.invalid("training", "checkpoint_stride", "must be at least 1"));
        }
        let n: usize = g.or("training", "n", 64)?;
        if n == 0 {
            return Err(g.invalid("training", "n", "n must be at least 1"));
        }

        let neighbor_policy = match g.or("stability", "neighbor_policy", "fresh".to_string())?.as_str() {
            "fresh" => NeighborPolicy::Fresh,
            "identical" => NeighborPolicy::Identical,
            other => {
                return Err(g.invalid("stability", "neighbor_policy", format!("unknown policy `{other}`")))
            }
        };
        let stability = StabilitySection {
            replicates: g.or("stability", "replicates", 4)?,
            neighbor_policy,
            gap_mc: g.or("stability", "gap_mc", 0)?,
        };

        let kind = match g.or("sweep", "kind", "stability".to_string())?.as_str() {
            "stability" => SweepKind::Stability,
            "rate" => SweepKind::Rate,
            other => return Err(g.invalid("sweep", "kind", format!("unknown sweep kind `{other}`"))),
        };
        let sweep = SweepSection {
            kind,
            n_grid: parse_list(&g, "sweep", "n_grid")?.unwrap_or_else(|| vec![64, 128, 256, 512]),
            replicates: g.or("sweep", "replicates", stability.replicates)?,
            eta_t_per_n: g.or("sweep", "eta_t_per_n", 1.0 / 16.0)?,
            m_scale: g.or("sweep", "m_scale", 1.0)?,
            m_cap: g.or("sweep", "m_cap", 8192)?,
            rate_stride: g.or("sweep", "rate_stride", 8)?,
        };
        if sweep.n_grid.is_empty() {
            return Err(g.invalid("sweep", "n_grid", "grid is empty"));
        }
        if sweep.rate_stride == 0 {
            return Err(g.invalid("sweep", "rate_stride", "must be at least 1"));
        }

        let check = CheckSection {
            pairs: g.or("check", "pairs", 10_000)?,
            instances: g.or("check", "instances", 200)?,
            trajectory_runs: g.or("check", "trajectory_runs", 20)?,
            pair_radius: g.or("check", "pair_radius", 2.0)?,
        };
        let reference = ReferenceSection {
            build: g.or("reference", "build", false)?,
            surrogate_n: g.or("reference", "surrogate_n", 20_000)?,
            max_steps: g.or("reference", "max_steps", 2000)?,
            n_mc: g.or("reference", "n_mc", 20_000)?,
            dist: g.or("reference", "dist", 0.0)?,
        };
        let formats = parse_list::<String>(&g, "output", "formats")?
            .unwrap_or_else(|| vec!["csv".into(), "json".into()]);
        if let Some(bad) = formats.iter().find(|f| *f != "csv" && *f != "json") {
            return Err(g.invalid("output", "formats", format!("unknown format `{bad}`")));
        }
        Ok(ExperimentConfig {
            master_seed: g.or("", "master_seed", 0)?,
            distribution,
            model,
            training,
            n,
            stability,
            sweep,
            check,
            reference,
            risk_csv: g.get("bounds", "risk_csv")?,
            population_csv: g.get("bounds", "population_csv")?,
            max_steps: g.get("budget", "max_steps")?,
            output_dir: g.or("output", "dir", "snnlab-out".to_string())?,
            formats,
        })
    }

    /// Canonical text form with every field spelled out; parses back to
    /// an equal config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let d = &self.distribution;
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "\n[distribution]");
        let _ = writeln!(s, "d = {}", d.d);
        let _ = writeln!(s, "m_teacher = {}", d.m_teacher);
        let _ = writeln!(s, "teacher_seed = {}", d.seed);
        let _ = writeln!(s, "teacher_norm = {:?}", d.neuron_norm);
        let _ = writeln!(s, "teacher_activation = {}", d.activation);
        match d.input_law {
            InputLaw::Sphere { radius } => {
                let _ = writeln!(s, "input_law = sphere\ninput_radius = {radius:?}");
            }
            InputLaw::TruncatedGaussian { scale } => {
                let _ = writeln!(s, "input_law = truncated_gaussian\ninput_scale = {scale:?}");
            }
        }
        let _ = writeln!(s, "noise_std = {:?}", d.noise_std);
        let _ = writeln!(s, "c_x = {:?}", d.c_x);
        let _ = writeln!(s, "c_y = {:?}", d.c_y);

        let m = &self.model;
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "m = {}", m.m);
        let _ = writeln!(s, "activation = {}", m.activation);
        match m.signs {
            SignPattern::Alternating => {
                let _ = writeln!(s, "signs = alternating");
            }
            SignPattern::Random { seed } => {
                let _ = writeln!(s, "signs = random\nsign_seed = {seed}");
            }
        }
        match m.init {
            InitPolicy::Zeros => {
                let _ = writeln!(s, "init = zeros");
            }
            InitPolicy::Gaussian { scale, seed } => {
                let _ = writeln!(s, "init = gaussian\ninit_scale = {scale:?}\ninit_seed = {seed}");
            }
            InitPolicy::PairedGaussian { scale, seed } => {
                let _ = writeln!(
                    s,
                    "init = paired_gaussian\ninit_scale = {scale:?}\ninit_seed = {seed}"
                );
            }
        }

        let t = &self.training;
        let _ = writeln!(s, "\n[training]");
        let _ = writeln!(s, "algorithm = {}", t.algorithm);
        let _ = writeln!(s, "eta = {:?}", t.eta);
        let _ = writeln!(s, "horizon = {}", t.horizon);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "strict_mode = {}", t.strict_mode);
        let _ = writeln!(s, "checkpoint_stride = {}", t.checkpoint_stride);

        let st = &self.stability;
        let _ = writeln!(s, "\n[stability]");
        let _ = writeln!(s, "replicates = {}", st.replicates);
        let policy = match st.neighbor_policy {
            NeighborPolicy::Fresh => "fresh",
            NeighborPolicy::Identical => "identical",
        };
        let _ = writeln!(s, "neighbor_policy = {policy}");
        let _ = writeln!(s, "gap_mc = {}", st.gap_mc);

        let sw = &self.sweep;
        let _ = writeln!(s, "\n[sweep]");
        let kind = match sw.kind {
            SweepKind::Stability => "stability",
            SweepKind::Rate => "rate",
        };
        let _ = writeln!(s, "kind = {kind}");
        let grid: Vec<String> = sw.n_grid.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "n_grid = {}", grid.join(", "));
        let _ = writeln!(s, "replicates = {}", sw.replicates);
        let _ = writeln!(s, "eta_t_per_n = {:?}", sw.eta_t_per_n);
        let _ = writeln!(s, "m_scale = {:?}", sw.m_scale);
        let _ = writeln!(s, "m_cap = {}", sw.m_cap);
        let _ = writeln!(s, "rate_stride = {}", sw.rate_stride);

        let c = &self.check;
        let _ = writeln!(s, "\n[check]");
        let _ = writeln!(s, "pairs = {}", c.pairs);
        let _ = writeln!(s, "instances = {}", c.instances);
        let _ = writeln!(s, "trajectory_runs = {}", c.trajectory_runs);
        let _ = writeln!(s, "pair_radius = {:?}", c.pair_radius);

        let r = &self.reference;
        let _ = writeln!(s, "\n[reference]");
        let _ = writeln!(s, "build = {}", r.build);
        let _ = writeln!(s, "surrogate_n = {}", r.surrogate_n);
        let _ = writeln!(s, "max_steps = {}", r.max_steps);
        let _ = writeln!(s, "n_mc = {}", r.n_mc);
        let _ = writeln!(s, "dist = {:?}", r.dist);

        if self.risk_csv.is_some() || self.population_csv.is_some() {
            let _ = writeln!(s, "\n[bounds]");
        }
        if let Some(path) = &self.risk_csv {
            let _ = writeln!(s, "risk_csv = {path}");
        }
        if let Some(path) = &self.population_csv {
            let _ = writeln!(s, "population_csv = {path}");
        }
        if let Some(steps) = self.max_steps {
            let _ = writeln!(s, "\n[budget]\nmax_steps = {steps}");
        }
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output_dir);
        let _ = writeln!(s, "formats = {}", self.formats.join(", "));
        s
    }

    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::parse("[distribution]\nd = 3\n").unwrap();
        assert_eq!(cfg.distribution.d, 3);
        assert_eq!(cfg.model.m, 256);
        assert_eq!(cfg.training.algorithm, Algorithm::Gd);
    }

    #[test]
    fn empty_distribution_names_missing_field() {
        match ExperimentConfig::parse("master_seed = 1\n[distribution]\n[model]\nm = 4\n") {
            Err(LabError::Parse { line, field, message }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "distribution.d");
                assert!(message.contains("missing field"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        match ExperimentConfig::parse("[distribution]\nd = 2\n\n[model]\nwidth = 4\n") {
            Err(LabError::Parse { line, field, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(field, "model.width");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_value_names_field() {
        match ExperimentConfig::parse("[distribution]\nd = 2\n[training]\neta = fast\n") {
            Err(LabError::Parse { line, field, .. }) => {
                assert_eq!((line, field.as_str()), (4, "training.eta"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn render_round_trips() {
        let text = "master_seed = 9\n[distribution]\nd = 4\ninput_law = truncated_gaussian\nnoise_std = 0.05\n\
                    [model]\nm = 32\ninit = paired_gaussian\ninit_scale = 0.5\nsigns = random\nsign_seed = 3\n\
                    [training]\nalgorithm = sgd\neta = 0.05\n[sweep]\nn_grid = 16, 32, 64\nkind = rate\n\
                    [budget]\nmax_steps = 100000\n[bounds]\nrisk_csv = risks.csv\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.sweep.n_grid, vec![16, 32, 64]);
    }
}
