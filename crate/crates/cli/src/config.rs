//! Flat `key = value` experiment configuration.
//!
//! One key per line; `#` starts a comment; blank lines are ignored.
//! Unknown or malformed keys are usage errors that name the key, so a
//! typo never silently changes an experiment.
//!
//! ```text
//! # A large recovery run
//! n = 1000
//! m = 250
//! agents = 50
//! sparsity = 20
//! step_size = 0.8
//! problem_seed = 1
//! topology = er
//! topology_param = 0.25
//! topology_seed = 1
//! algorithm = diht
//! tol = 1e-2
//! max_iter = 500
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use diht_core::recovery::StepSizeRule;
use diht_core::{DeliveryModel, Topology};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Diht,
    Naive,
    Centralized,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Diht => "diht",
            Algorithm::Naive => "naive",
            Algorithm::Centralized => "centralized",
        }
    }

    fn parse(value: &str) -> CliResult<Self> {
        match value {
            "diht" => Ok(Algorithm::Diht),
            "naive" => Ok(Algorithm::Naive),
            "centralized" => Ok(Algorithm::Centralized),
            other => Err(CliError::usage(format!(
                "algorithm: `{other}` is not one of diht, naive, centralized"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopologySpec {
    Er { prob: f64, seed: u64 },
    Geometric { radius: f64, seed: u64 },
    Path,
    Complete,
    File(PathBuf),
}

impl TopologySpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TopologySpec::Er { .. } => "er",
            TopologySpec::Geometric { .. } => "geometric",
            TopologySpec::Path => "path",
            TopologySpec::Complete => "complete",
            TopologySpec::File(_) => "file",
        }
    }

    /// Short label for result tables, e.g. `er(0.25)#1`.
    pub fn label(&self) -> String {
        match self {
            TopologySpec::Er { prob, seed } => format!("er({prob})#{seed}"),
            TopologySpec::Geometric { radius, seed } => format!("geometric({radius})#{seed}"),
            TopologySpec::Path => "path".into(),
            TopologySpec::Complete => "complete".into(),
            TopologySpec::File(path) => format!("file({})", path.display()),
        }
    }

    /// Parses a compact `kind[:param[:seed]]` cell from a sweep list.
    pub fn parse_compact(cell: &str) -> CliResult<Self> {
        let mut parts = cell.splitn(3, ':');
        let kind = parts.next().unwrap_or_default().trim();
        let second = parts.next().map(str::trim);
        let third = parts.next().map(str::trim);
        let no_extras = |field: &str| -> CliResult<()> {
            if second.is_some() || third.is_some() {
                Err(CliError::usage(format!(
                    "topologies: `{field}` takes no parameter in `{cell}`"
                )))
            } else {
                Ok(())
            }
        };
        match kind {
            "path" => no_extras("path").map(|()| TopologySpec::Path),
            "complete" => no_extras("complete").map(|()| TopologySpec::Complete),
            "file" => {
                let path = second.filter(|p| !p.is_empty()).ok_or_else(|| {
                    CliError::usage(format!("topologies: `{cell}` is missing the file path"))
                })?;
                Ok(TopologySpec::File(PathBuf::from(path)))
            }
            "er" | "geometric" => {
                let param = second.filter(|p| !p.is_empty()).ok_or_else(|| {
                    CliError::usage(format!("topologies: `{cell}` is missing its parameter"))
                })?;
                let param: f64 = param.parse().map_err(|_| {
                    CliError::usage(format!("topologies: bad parameter in `{cell}`"))
                })?;
                let seed: u64 = match third {
                    Some(s) if !s.is_empty() => s.parse().map_err(|_| {
                        CliError::usage(format!("topologies: bad seed in `{cell}`"))
                    })?,
                    _ => 0,
                };
                Ok(if kind == "er" {
                    TopologySpec::Er { prob: param, seed }
                } else {
                    TopologySpec::Geometric { radius: param, seed }
                })
            }
            other => Err(CliError::usage(format!(
                "topologies: `{other}` is not one of er, geometric, path, complete, file"
            ))),
        }
    }

    /// Materializes the graph for `agents` nodes.
    pub fn build(&self, agents: usize) -> CliResult<Topology> {
        let named = |field: &str, err: diht_core::Error| match err {
            diht_core::Error::InvalidArgument(msg) => CliError::usage(format!("{field}: {msg}")),
            other => CliError::Run(other),
        };
        match self {
            TopologySpec::Er { prob, seed } => Topology::erdos_renyi(agents, *prob, *seed)
                .map_err(|e| named("topology_param", e)),
            TopologySpec::Geometric { radius, seed } => {
                Topology::random_geometric(agents, *radius, *seed)
                    .map_err(|e| named("topology_param", e))
            }
            TopologySpec::Path => Topology::path(agents).map_err(|e| named("agents", e)),
            TopologySpec::Complete => Topology::complete(agents).map_err(|e| named("agents", e)),
            TopologySpec::File(path) => {
                let topology = Topology::load(path).map_err(|e| {
                    CliError::usage(format!("topology_file: cannot load {}: {e}", path.display()))
                })?;
                if topology.agents() != agents {
                    return Err(CliError::usage(format!(
                        "topology_file: {} connects {} agents, config says {agents}",
                        path.display(),
                        topology.agents()
                    )));
                }
                Ok(topology)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub agents: usize,
    pub sparsity: usize,
    pub step_size: StepSizeRule,
    pub noise_sigma: f64,
    pub problem_seed: u64,
    pub topology: TopologySpec,
    pub algorithm: Algorithm,
    pub delivery: DeliveryModel,
    pub tol: f64,
    pub max_iter: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let mut raw = RawConfig::from_file(path)?;
        let config = Self::from_raw(&mut raw)?;
        raw.ensure_empty()?;
        Ok(config)
    }

    /// Consumes this config's keys from `raw`; leftovers are for the
    /// caller to reject (or to interpret, in a sweep).
    pub fn from_raw(raw: &mut RawConfig) -> CliResult<Self> {
        let common = CommonFields::from_raw(raw)?;
        let topology = TopologySpec::from_raw(raw)?;
        let algorithm = match raw.take("algorithm")? {
            Some(text) => Algorithm::parse(&text)?,
            None => Algorithm::Diht,
        };
        Ok(common.assemble(topology, algorithm))
    }
}

/// Everything an experiment needs except the topology and algorithm,
/// which a sweep supplies per cell.
#[derive(Clone, Debug)]
pub struct CommonFields {
    pub n: usize,
    pub m: usize,
    pub agents: usize,
    pub sparsity: usize,
    pub step_size: StepSizeRule,
    pub noise_sigma: f64,
    pub problem_seed: u64,
    pub delivery: DeliveryModel,
    pub tol: f64,
    pub max_iter: usize,
    pub out_dir: Option<PathBuf>,
}

impl CommonFields {
    pub fn from_raw(raw: &mut RawConfig) -> CliResult<Self> {
        let n = raw.require("n")?;
        let m = raw.require("m")?;
        let agents = raw.require("agents")?;
        let sparsity = raw.require("sparsity")?;
        for (field, value) in [("n", n), ("m", m), ("agents", agents)] {
            if value == 0 {
                return Err(CliError::usage(format!("{field}: must be at least 1")));
            }
        }

        let step_size = match raw.take("step_size")?.as_deref() {
            None | Some("auto") => StepSizeRule::Auto,
            Some(text) => {
                let v: f64 = text.parse().map_err(|_| {
                    CliError::usage(format!("step_size: `{text}` is neither `auto` nor a number"))
                })?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::usage("step_size: must be positive and finite"));
                }
                StepSizeRule::Fixed(v)
            }
        };

        let noise_sigma: f64 = raw.take_parsed("noise_sigma")?.unwrap_or(0.0);
        if !(noise_sigma >= 0.0) {
            return Err(CliError::usage("noise_sigma: must be non-negative"));
        }
        let problem_seed: u64 = raw.take_parsed("problem_seed")?.unwrap_or(0);

        let delivery = match raw.take("delivery")?.as_deref() {
            None | Some("sync") => DeliveryModel::Synchronous,
            Some("async") => DeliveryModel::Asynchronous {
                seed: raw.take_parsed("async_seed")?.unwrap_or(0),
                max_delay: {
                    let d: u64 = raw.take_parsed("max_delay")?.unwrap_or(4);
                    if d == 0 {
                        return Err(CliError::usage("max_delay: must be at least 1"));
                    }
                    d
                },
            },
            Some(other) => {
                return Err(CliError::usage(format!(
                    "delivery: `{other}` is not one of sync, async"
                )))
            }
        };
        if matches!(delivery, DeliveryModel::Synchronous) {
            for key in ["async_seed", "max_delay"] {
                if raw.take(key)?.is_some() {
                    return Err(CliError::usage(format!(
                        "{key}: only meaningful with delivery = async"
                    )));
                }
            }
        }

        let tol: f64 = raw.take_parsed("tol")?.unwrap_or(1e-2);
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(CliError::usage("tol: must be positive and finite"));
        }
        let max_iter: usize = raw.take_parsed("max_iter")?.unwrap_or(500);
        if max_iter == 0 {
            return Err(CliError::usage("max_iter: must be at least 1"));
        }

        let out_dir = raw.take("out_dir")?.map(PathBuf::from);

        Ok(CommonFields {
            n,
            m,
            agents,
            sparsity,
            step_size,
            noise_sigma,
            problem_seed,
            delivery,
            tol,
            max_iter,
            out_dir,
        })
    }

    pub fn assemble(self, topology: TopologySpec, algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            m: self.m,
            agents: self.agents,
            sparsity: self.sparsity,
            step_size: self.step_size,
            noise_sigma: self.noise_sigma,
            problem_seed: self.problem_seed,
            topology,
            algorithm,
            delivery: self.delivery,
            tol: self.tol,
            max_iter: self.max_iter,
            out_dir: self.out_dir,
        }
    }

}

impl TopologySpec {
    /// Parses the `topology*` key group from a run config.
    pub fn from_raw(raw: &mut RawConfig) -> CliResult<TopologySpec> {
        let kind = raw
            .take("topology")?
            .ok_or_else(|| CliError::usage("topology: required (er, geometric, path, complete, file)"))?;
        let param: Option<f64> = raw.take_parsed("topology_param")?;
        let seed: u64 = raw.take_parsed("topology_seed")?.unwrap_or(0);
        let file = raw.take("topology_file")?;

        let reject_param = |kind: &str| -> CliResult<()> {
            if param.is_some() {
                Err(CliError::usage(format!(
                    "topology_param: `{kind}` takes no parameter"
                )))
            } else {
                Ok(())
            }
        };
        if kind != "file" {
            if let Some(path) = &file {
                return Err(CliError::usage(format!(
                    "topology_file: `{path}` given but topology is `{kind}`"
                )));
            }
        }
        match kind.as_str() {
            "er" => Ok(TopologySpec::Er {
                prob: param
                    .ok_or_else(|| CliError::usage("topology_param: required for topology = er"))?,
                seed,
            }),
            "geometric" => Ok(TopologySpec::Geometric {
                radius: param.ok_or_else(|| {
                    CliError::usage("topology_param: required for topology = geometric")
                })?,
                seed,
            }),
            "path" => reject_param("path").map(|()| TopologySpec::Path),
            "complete" => reject_param("complete").map(|()| TopologySpec::Complete),
            "file" => {
                reject_param("file")?;
                let path = file.ok_or_else(|| {
                    CliError::usage("topology_file: required for topology = file")
                })?;
                Ok(TopologySpec::File(PathBuf::from(path)))
            }
            other => Err(CliError::usage(format!(
                "topology: `{other}` is not one of er, geometric, path, complete, file"
            ))),
        }
    }
}

impl ExperimentConfig {
    /// One line per semantically meaningful field, sorted by key. The
    /// output directory is deliberately left out: where artifacts land
    /// does not change what the experiment is.
    pub fn canonical_string(&self) -> String {
        let mut fields: Vec<(&str, String)> = vec![
            ("agents", self.agents.to_string()),
            ("algorithm", self.algorithm.name().into()),
            ("m", self.m.to_string()),
            ("max_iter", self.max_iter.to_string()),
            ("n", self.n.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("problem_seed", self.problem_seed.to_string()),
            ("sparsity", self.sparsity.to_string()),
            (
                "step_size",
                match self.step_size {
                    StepSizeRule::Auto => "auto".into(),
                    StepSizeRule::Fixed(v) => v.to_string(),
                },
            ),
            ("tol", self.tol.to_string()),
            ("topology", self.topology.kind().into()),
        ];
        match &self.topology {
            TopologySpec::Er { prob, seed } => {
                fields.push(("topology_param", prob.to_string()));
                fields.push(("topology_seed", seed.to_string()));
            }
            TopologySpec::Geometric { radius, seed } => {
                fields.push(("topology_param", radius.to_string()));
                fields.push(("topology_seed", seed.to_string()));
            }
            TopologySpec::File(path) => {
                fields.push(("topology_file", path.display().to_string()));
            }
            TopologySpec::Path | TopologySpec::Complete => {}
        }
        match self.delivery {
            DeliveryModel::Synchronous => fields.push(("delivery", "sync".into())),
            DeliveryModel::Asynchronous { seed, max_delay } => {
                fields.push(("delivery", "async".into()));
                fields.push(("async_seed", seed.to_string()));
                fields.push(("max_delay", max_delay.to_string()));
            }
        }
        fields.sort_by_key(|&(k, _)| k);
        let mut text = String::new();
        for (key, value) in fields {
            writeln!(text, "{key} = {value}").expect("string write");
        }
        text
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical_string().as_bytes()))
    }

    /// Deterministic, human-scannable identifier:
    /// `<algorithm>-<topology kind>-<hash prefix>`.
    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-{}",
            self.algorithm.name(),
            self.topology.kind(),
            &self.config_hash()[..8]
        )
    }
}

/// FNV-1a, 64-bit. Stable across platforms and releases, unlike the
/// standard library's hasher.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Parsed `key = value` lines, consumed key by key.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "line {}: expected `key = value`, found `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(CliError::usage(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn take(&mut self, key: &str) -> CliResult<Option<String>> {
        Ok(self.entries.remove(key))
    }

    pub fn take_parsed<V: std::str::FromStr>(&mut self, key: &str) -> CliResult<Option<V>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(text) => text.parse().map(Some).map_err(|_| {
                CliError::usage(format!("{key}: cannot parse `{text}`"))
            }),
        }
    }

    fn require<V: std::str::FromStr>(&mut self, key: &str) -> CliResult<V> {
        self.take_parsed(key)?
            .ok_or_else(|| CliError::usage(format!("{key}: required")))
    }

    pub fn ensure_empty(&self) -> CliResult<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(CliError::usage(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
        n = 100\n\
        m = 40\n\
        agents = 4\n\
        sparsity = 5\n\
        topology = er\n\
        topology_param = 0.5\n\
        topology_seed = 3\n\
    ";

    fn parse(text: &str) -> CliResult<ExperimentConfig> {
        let mut raw = RawConfig::from_str(text)?;
        let config = ExperimentConfig::from_raw(&mut raw)?;
        raw.ensure_empty()?;
        Ok(config)
    }

    #[test]
    fn defaults_fill_the_optional_fields() {
        let config = parse(BASE).unwrap();
        assert_eq!(config.algorithm, Algorithm::Diht);
        assert_eq!(config.delivery, DeliveryModel::Synchronous);
        assert_eq!(config.step_size, StepSizeRule::Auto);
        assert_eq!(config.tol, 1e-2);
        assert_eq!(config.max_iter, 500);
        assert_eq!(config.out_dir, None);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{BASE}  # trailing\n\ntol = 0.05 # inline\n");
        let config = parse(&text).unwrap();
        assert_eq!(config.tol, 0.05);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = format!("{BASE}stepsize = 1\n");
        match parse(&text) {
            Err(CliError::Usage(msg)) => assert!(msg.contains("stepsize"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_keys_are_named() {
        match parse("n = 10\n") {
            Err(CliError::Usage(msg)) => assert!(msg.starts_with("m:"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn topology_parameter_rules_are_enforced() {
        let text = "n=10\nm=4\nagents=2\nsparsity=1\ntopology = er\n";
        match parse(text) {
            Err(CliError::Usage(msg)) => assert!(msg.starts_with("topology_param:"), "{msg}"),
            other => panic!("expected usage error, got {other:?}"),
        }
        let text = "n=10\nm=4\nagents=2\nsparsity=1\ntopology = path\ntopology_param = 0.3\n";
        assert!(matches!(parse(text), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_ignores_the_output_directory_only() {
        let a = parse(BASE).unwrap();
        let mut b = a.clone();
        b.out_dir = Some(PathBuf::from("/tmp/elsewhere"));
        assert_eq!(a.config_hash(), b.config_hash());

        let mut c = a.clone();
        c.problem_seed = 99;
        assert_ne!(a.config_hash(), c.config_hash());
        let mut d = a.clone();
        d.algorithm = Algorithm::Naive;
        assert_ne!(a.config_hash(), d.config_hash());
    }

    #[test]
    fn run_ids_are_deterministic() {
        let a = parse(BASE).unwrap();
        let b = parse(BASE).unwrap();
        assert_eq!(a.run_id(), b.run_id());
        assert!(a.run_id().starts_with("diht-er-"));
    }

    #[test]
    fn compact_topology_cells_parse() {
        assert_eq!(
            TopologySpec::parse_compact("er:0.25:7").unwrap(),
            TopologySpec::Er { prob: 0.25, seed: 7 }
        );
        assert_eq!(
            TopologySpec::parse_compact("geometric:0.5").unwrap(),
            TopologySpec::Geometric { radius: 0.5, seed: 0 }
        );
        assert_eq!(TopologySpec::parse_compact("path").unwrap(), TopologySpec::Path);
        assert!(TopologySpec::parse_compact("ring").is_err());
        assert!(TopologySpec::parse_compact("er").is_err());
        assert!(TopologySpec::parse_compact("path:0.2").is_err());
    }

    #[test]
    fn fnv_matches_the_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }
}
