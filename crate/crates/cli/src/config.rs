use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleChoice {
    Product,
    Qmc,
}

impl std::str::FromStr for RuleChoice {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "product" => Ok(Self::Product),
            "qmc" => Ok(Self::Qmc),
            _ => Err(CliError::Config(format!("unknown rule `{s}` (product|qmc)"))),
        }
    }
}

impl std::fmt::Display for RuleChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Product => "product",
            Self::Qmc => "qmc",
        })
    }
}

/// Pass thresholds, one per checked quantity. Keys are `tol.<field>` in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub normalization_exact: f64,
    pub normalization_sigmas: f64,
    pub scale_invariance: f64,
    pub criticality_sigmas: f64,
    pub spectrum_band: f64,
    pub spectrum_null_fraction: f64,
    pub spectrum_n3_sigmas: f64,
    pub route_gap: f64,
    pub rescaling: f64,
    pub first_variation: f64,
    pub h_spread: f64,
    pub sasaki_einstein: f64,
    pub lambda: f64,
    pub cylinder_gap: f64,
    pub sl_invariance: f64,
    pub reduction_bridge: f64,
    pub reduction_maximum: f64,
    pub holder_slack: f64,
    pub mc_sigmas: f64,
    pub polarization: f64,
    pub factorization: f64,
    pub pairing_sigmas: f64,
    pub poisson: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            normalization_exact: 1e-10,
            normalization_sigmas: 3.0,
            scale_invariance: 1e-9,
            criticality_sigmas: 3.0,
            spectrum_band: 0.02,
            spectrum_null_fraction: 0.05,
            spectrum_n3_sigmas: 3.0,
            route_gap: 1e-6,
            rescaling: 1e-8,
            first_variation: 0.01,
            h_spread: 1e-4,
            sasaki_einstein: 1e-4,
            lambda: 1e-3,
            cylinder_gap: 1e-6,
            sl_invariance: 1e-6,
            reduction_bridge: 1e-6,
            reduction_maximum: 1e-6,
            holder_slack: 1e-9,
            mc_sigmas: 3.0,
            polarization: 1e-12,
            factorization: 1e-8,
            pairing_sigmas: 3.0,
            poisson: 1e-8,
        }
    }
}

impl Tolerances {
    fn set(&mut self, key: &str, value: f64) -> Result<(), CliError> {
        let mut map = match serde_json::to_value(&*self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("tolerances serialize to an object"),
        };
        let slot = map.get_mut(key).ok_or_else(|| CliError::Config(format!("unknown tolerance `{key}`")))?;
        *slot = serde_json::json!(value);
        *self = serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Problem sizes for the suites. The quick preset keeps every suite but
/// shrinks seeds, node counts and resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    pub spectrum_degree: usize,
    pub n3_count: usize,
    pub n3_replicas: usize,
    pub scale_graphs: usize,
    pub criticality_directions: usize,
    pub route_graphs: usize,
    pub route_nodes: usize,
    pub rescaling_h: usize,
    pub first_variation_fields: usize,
    pub se_nodes: usize,
    pub affine_resolution: usize,
    pub sweep_resolution: usize,
    pub sl_maps: usize,
    pub perturbed_seeds: usize,
    pub cylinder_points: usize,
    pub kahler_seeds: usize,
    pub reduction_level: usize,
    pub growth_level: usize,
    pub mc_count: usize,
    pub forms_seeds: usize,
    pub forms_nodes: usize,
    pub pairing_count: usize,
}

impl Sizes {
    pub fn full() -> Self {
        Self {
            spectrum_degree: 6,
            n3_count: 20_000,
            n3_replicas: 4,
            scale_graphs: 5,
            criticality_directions: 20,
            route_graphs: 20,
            route_nodes: 100,
            rescaling_h: 10,
            first_variation_fields: 3,
            se_nodes: 24,
            affine_resolution: 320,
            sweep_resolution: 160,
            sl_maps: 2,
            perturbed_seeds: 5,
            cylinder_points: 10,
            kahler_seeds: 20,
            reduction_level: 14,
            growth_level: 16,
            mc_count: 200_000,
            forms_seeds: 100,
            forms_nodes: 48,
            pairing_count: 4096,
        }
    }

    pub fn quick() -> Self {
        Self {
            spectrum_degree: 3,
            n3_count: 1000,
            n3_replicas: 4,
            scale_graphs: 2,
            criticality_directions: 4,
            route_graphs: 4,
            route_nodes: 20,
            rescaling_h: 4,
            first_variation_fields: 1,
            se_nodes: 6,
            affine_resolution: 320,
            sweep_resolution: 80,
            sl_maps: 1,
            perturbed_seeds: 2,
            cylinder_points: 4,
            kahler_seeds: 4,
            reduction_level: 8,
            growth_level: 10,
            mc_count: 20_000,
            forms_seeds: 20,
            forms_nodes: 8,
            pairing_count: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub rule: RuleChoice,
    pub level: usize,
    pub count: usize,
    pub seed: u64,
    pub fd_step: Option<f64>,
    pub out: PathBuf,
    pub graph: Option<PathBuf>,
    pub quick: bool,
    /// Harness self-test: multiplies `c_norm` by this factor before comparing.
    pub c_norm_factor: f64,
    pub sizes: Sizes,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            rule: RuleChoice::Product,
            level: 12,
            count: 200_000,
            seed: 1,
            fd_step: None,
            out: PathBuf::from("crvol-out"),
            graph: None,
            quick: false,
            c_norm_factor: 1.0,
            sizes: Sizes::full(),
            tolerances: Tolerances::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("bad value `{value}` for `{key}`")))
}

impl RunConfig {
    /// Switches to the quick preset. Size keys set afterwards still apply.
    pub fn make_quick(&mut self) {
        self.quick = true;
        self.level = 8;
        self.count = 20_000;
        self.sizes = Sizes::quick();
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "n" => self.n = parse(&key, value)?,
            "rule" => self.rule = value.parse()?,
            "level" => self.level = parse(&key, value)?,
            "count" => self.count = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "fd-step" => self.fd_step = Some(parse(&key, value)?),
            "out" => self.out = PathBuf::from(value),
            "graph" => self.graph = Some(PathBuf::from(value)),
            "quick" => {
                if parse::<bool>(&key, value)? {
                    self.make_quick();
                }
            }
            "affine-resolution" => self.sizes.affine_resolution = parse(&key, value)?,
            "sweep-resolution" => self.sizes.sweep_resolution = parse(&key, value)?,
            "n3-count" => self.sizes.n3_count = parse(&key, value)?,
            k if k.starts_with("tol.") => self.tolerances.set(&k[4..].replace('-', "_"), parse(k, value)?)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Lines `key = value`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key=value", i + 1)))?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn step(&self, n: usize) -> f64 {
        self.fd_step.unwrap_or_else(|| crvol::variation::default_step(n))
    }

    /// Flat echo of every field, embedded in each report.
    pub fn echo(&self, subcommand: &str) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("subcommand".into(), subcommand.to_string());
        m.insert("n".into(), self.n.to_string());
        m.insert("rule".into(), self.rule.to_string());
        m.insert("level".into(), self.level.to_string());
        m.insert("count".into(), self.count.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("fd-step".into(), self.fd_step.map(|s| s.to_string()).unwrap_or_else(|| "default".into()));
        m.insert("out".into(), self.out.display().to_string());
        m.insert("graph".into(), self.graph.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
        m.insert("quick".into(), self.quick.to_string());
        m.insert("c-norm-factor".into(), self.c_norm_factor.to_string());
        if let Ok(serde_json::Value::Object(sizes)) = serde_json::to_value(&self.sizes) {
            for (k, v) in sizes {
                m.insert(format!("size.{k}"), v.to_string());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nn = 3\nseed=9\ntol.route_gap = 1e-7\nrule = qmc\n").unwrap();
        assert_eq!((c.n, c.seed, c.rule), (3, 9, RuleChoice::Qmc));
        assert_eq!(c.tolerances.route_gap, 1e-7);
        c.apply("--seed", "4").unwrap();
        assert_eq!(c.seed, 4);
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("n 3").is_err());
        assert!(c.apply("tol.nothing", "1").is_err());
    }

    #[test]
    fn quick_preset_keeps_later_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("quick = true\naffine-resolution = 64\n").unwrap();
        assert!(c.quick);
        assert_eq!(c.sizes.affine_resolution, 64);
        assert_eq!(c.level, 8);
        assert_eq!(c.echo("all")["size.affine_resolution"], "64");
    }
}
