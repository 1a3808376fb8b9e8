//! TOML experiment configuration.
//!
//! ```toml
//! [sequence]
//! kind = "constant_modulus"
//! r = 0.5
//! phase = { rule = "seeded", seed = 7 }
//!
//! [symbol]
//! preset = "cos"          # or: coeffs = "c1=1,c-1=1"
//!
//! [function]
//! name = "square"         # or poly:c0,c1,…
//!
//! [sweep]
//! n_values = [8, 16, 32, 64]
//!
//! [quadrature]
//! abs_tol = 1e-10
//!
//! [output]
//! dir = "results"
//! formats = ["csv", "json"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ttlab::blaschke::GENERATOR_TAGS;
use ttlab::{ExperimentConfig, QuadratureConfig, ScalarFunction, SymbolRep, ZeroSequence};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<String>,
}

impl Default for SymbolSection {
    fn default() -> Self {
        SymbolSection {
            preset: Some("cos".into()),
            coeffs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSection {
    pub name: String,
}

impl Default for FunctionSection {
    fn default() -> Self {
        FunctionSection {
            name: "identity".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_values: Vec<usize>,
    pub alpha_count: usize,
    pub seed: u64,
    pub max_n: usize,
    pub grid_points: usize,
    pub partial_terms: usize,
    pub thresholds: Vec<f64>,
    /// Symbol pair for the product defect.
    pub product: [String; 2],
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_values: vec![8, 16, 32, 64],
            alpha_count: 32,
            seed: 0,
            max_n: 256,
            grid_points: 64,
            partial_terms: 100_000,
            thresholds: vec![10.0, 100.0, 1000.0],
            product: ["c1=1".into(), "c-1=1".into()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Defaults to `results`; not part of the canonical form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

fn default_sequence() -> ZeroSequence {
    ZeroSequence::UniformZero
}

/// Parsed configuration file; every section but `sequence` has defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_sequence")]
    pub sequence: ZeroSequence,
    #[serde(default)]
    pub symbol: SymbolSection,
    #[serde(default)]
    pub function: FunctionSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub output: OutputSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            sequence: default_sequence(),
            symbol: SymbolSection::default(),
            function: FunctionSection::default(),
            sweep: SweepSection::default(),
            quadrature: QuadratureConfig::default(),
            output: OutputSection::default(),
        }
    }
}

fn config_error(e: ttlab::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            let mut msg = if path == "." || path.is_empty() {
                inner.trim().to_string()
            } else {
                format!("{path}: {}", inner.trim())
            };
            if msg.contains("unknown variant") && path.starts_with("sequence") {
                msg.push_str(&format!(" (valid generators: {})", GENERATOR_TAGS.join(", ")));
            }
            CliError::Config(msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn symbol(&self) -> Result<SymbolRep, CliError> {
        match (&self.symbol.preset, &self.symbol.coeffs) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "symbol: give either `preset` or `coeffs`, not both".into(),
            )),
            (Some(p), None) => SymbolRep::preset(p).map_err(config_error),
            (None, Some(c)) => SymbolRep::parse(c)
                .and_then(|s| {
                    s.as_trig()
                        .is_some()
                        .then_some(s)
                        .ok_or_else(|| ttlab::Error::param("symbol.coeffs", "expected c<k>=<value> terms"))
                })
                .map_err(config_error),
            (None, None) => Err(CliError::Config("symbol: `preset` or `coeffs` is required".into())),
        }
    }

    pub fn function(&self) -> Result<ScalarFunction, CliError> {
        ScalarFunction::parse(&self.function.name).map_err(config_error)
    }

    pub fn product_pair(&self) -> Result<(SymbolRep, SymbolRep), CliError> {
        let p = SymbolRep::parse(&self.sweep.product[0]).map_err(config_error)?;
        let q = SymbolRep::parse(&self.sweep.product[1]).map_err(config_error)?;
        Ok((p, q))
    }

    /// Validated experiment configuration.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let mut e = ExperimentConfig::new(self.sequence.clone(), self.symbol()?, self.function()?, self.sweep.n_values.clone());
        e.alpha_count = self.sweep.alpha_count;
        e.max_n = self.sweep.max_n;
        e.grid_points = self.sweep.grid_points;
        e.partial_terms = self.sweep.partial_terms;
        e.thresholds = self.sweep.thresholds.clone();
        e.seed = self.sweep.seed;
        e.quadrature = self.quadrature.clone();
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats: must not be empty".into()));
        }
        e.validate().map_err(config_error)?;
        self.product_pair()?;
        Ok(e)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    /// The config without its output location.
    fn located_nowhere(&self) -> ConfigFile {
        let mut c = self.clone();
        c.output.dir = None;
        c
    }

    /// Canonical JSON (sorted keys, defaults filled, output location dropped).
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self.located_nowhere()).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// TOML form of the canonical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.located_nowhere()).expect("config serializes")
    }
}
