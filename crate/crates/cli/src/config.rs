//! Run configuration: an optional TOML file overlaid by command-line flags,
//! validated in full before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use locmom_core::dynamics::{PotentialShape, PropagationConfig};
use locmom_core::local::{Definition, MomentOrder, ObservableSpec};
use locmom_core::phase_space::QuasiKind;
use locmom_core::states::StateRecipe;
use locmom_core::{Error, GridSpec, Result, Wavefunction, DEFAULT_MASK_EPS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every setting a command can take. Values left as `None` fall back to the
/// config file and then to the built-in defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// TOML file with any of these settings (flags take precedence).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_max: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    /// State recipe, e.g. `gaussian(s=1,k0=2,q0=0)`.
    #[arg(long)]
    pub state: Option<String>,
    /// S, C, MH, W or all.
    #[arg(long)]
    pub definition: Option<String>,
    /// Moment order 1..4 or `variance`.
    #[arg(long)]
    pub order: Option<String>,
    /// `p`, `p^k`, `q` or `q^k`.
    #[arg(long)]
    pub observable: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (a directory for `evolve`); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mask_eps: Option<f64>,
    /// `free`, `harmonic:ω` or `barrier:h,w,c`.
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Phase-space distribution: `wigner`, `mh` or `classical`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Write distributions in the binary layout instead of CSV.
    #[arg(long)]
    #[serde(default)]
    pub binary: bool,
}

impl RunConfig {
    /// Fills unset fields from `other`.
    fn or(self, other: RunConfig) -> RunConfig {
        RunConfig {
            config: self.config.or(other.config),
            grid_n: self.grid_n.or(other.grid_n),
            q_min: self.q_min.or(other.q_min),
            q_max: self.q_max.or(other.q_max),
            hbar: self.hbar.or(other.hbar),
            mass: self.mass.or(other.mass),
            state: self.state.or(other.state),
            definition: self.definition.or(other.definition),
            order: self.order.or(other.order),
            observable: self.observable.or(other.observable),
            format: self.format.or(other.format),
            out: self.out.or(other.out),
            mask_eps: self.mask_eps.or(other.mask_eps),
            potential: self.potential.or(other.potential),
            dt: self.dt.or(other.dt),
            steps: self.steps.or(other.steps),
            stride: self.stride.or(other.stride),
            kind: self.kind.or(other.kind),
            binary: self.binary || other.binary,
        }
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::input(format!("config: {}", e.message())))
    }

    fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("config: cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Overlays the referenced config file (if any) and validates everything.
    pub fn resolve(self) -> Result<Resolved> {
        let merged = match &self.config {
            Some(path) => {
                let file = Self::load(path)?;
                self.or(file)
            }
            None => self,
        };
        Resolved::from_config(merged)
    }
}

/// Observable selector understood by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableText {
    Momentum(u32),
    Position(u32),
}

impl ObservableText {
    pub fn spec(self, grid: &GridSpec) -> ObservableSpec {
        match self {
            ObservableText::Momentum(k) => ObservableSpec::MomentumPower(k),
            ObservableText::Position(k) => ObservableSpec::position_fn(grid, |q| q.powi(k as i32)),
        }
    }
}

impl fmt::Display for ObservableText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, k) = match self {
            ObservableText::Momentum(k) => ("p", k),
            ObservableText::Position(k) => ("q", k),
        };
        if *k == 1 {
            f.write_str(name)
        } else {
            write!(f, "{name}^{k}")
        }
    }
}

impl FromStr for ObservableText {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::input(format!(
                "observable: expected p, p^k, q or q^k with k in 1..4, got '{s}'"
            ))
        };
        let (name, k) = match s.trim().split_once('^') {
            Some((name, k)) => (name, k.parse::<u32>().map_err(|_| bad())?),
            None => (s.trim(), 1),
        };
        if !(1..=4).contains(&k) {
            return Err(bad());
        }
        match name {
            "p" => Ok(ObservableText::Momentum(k)),
            "q" => Ok(ObservableText::Position(k)),
            _ => Err(bad()),
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: GridSpec,
    pub recipe: StateRecipe,
    pub definition_text: String,
    pub definitions: Vec<Definition>,
    pub order: MomentOrder,
    pub observable: ObservableText,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub mask_eps: f64,
    pub potential: PotentialShape,
    pub propagation: PropagationConfig,
    pub kind: QuasiKind,
    pub binary: bool,
    psi: Wavefunction,
}

fn parse_definitions(text: &str) -> Result<(String, Vec<Definition>)> {
    if text.eq_ignore_ascii_case("all") {
        return Ok(("all".into(), Definition::ALL.to_vec()));
    }
    let d: Definition = text.parse()?;
    Ok((d.to_string(), vec![d]))
}

impl Resolved {
    fn from_config(c: RunConfig) -> Result<Resolved> {
        let grid = GridSpec::new(
            c.grid_n.unwrap_or(512),
            c.q_min.unwrap_or(-20.0),
            c.q_max.unwrap_or(20.0),
            c.hbar.unwrap_or(1.0),
            c.mass.unwrap_or(1.0),
        )?;
        let recipe: StateRecipe = c.state.as_deref().unwrap_or("gaussian(s=1,k0=2,q0=0)").parse()?;
        let (definition_text, definitions) = parse_definitions(c.definition.as_deref().unwrap_or("all"))?;
        let order: MomentOrder = c.order.as_deref().unwrap_or("variance").parse()?;
        let observable: ObservableText = c.observable.as_deref().unwrap_or("p").parse()?;
        let mask_eps = c.mask_eps.unwrap_or(DEFAULT_MASK_EPS);
        if !(mask_eps.is_finite() && (0.0..1.0).contains(&mask_eps)) {
            return Err(Error::input("mask-eps: must lie in [0, 1)"));
        }
        let potential: PotentialShape = c.potential.as_deref().unwrap_or("free").parse()?;
        let propagation = PropagationConfig::new(c.dt.unwrap_or(1e-3), c.steps.unwrap_or(100), c.stride.unwrap_or(1))?;
        let kind: QuasiKind = c.kind.as_deref().unwrap_or("wigner").parse()?;
        // Synthesis checks the recipe parameters and the window preconditions.
        let psi = locmom_core::states::synthesize(&recipe, &grid)?.with_mask_eps(mask_eps)?;
        Ok(Resolved {
            grid,
            recipe,
            definition_text,
            definitions,
            order,
            observable,
            format: c.format.unwrap_or(Format::Csv),
            out: c.out,
            mask_eps,
            potential,
            propagation,
            kind,
            binary: c.binary,
            psi,
        })
    }

    /// The configuration as a fully populated `RunConfig`.
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            config: None,
            grid_n: Some(self.grid.n()),
            q_min: Some(self.grid.q_min()),
            q_max: Some(self.grid.q_max()),
            hbar: Some(self.grid.hbar()),
            mass: Some(self.grid.mass()),
            state: Some(self.recipe.to_string()),
            definition: Some(self.definition_text.clone()),
            order: Some(self.order.to_string()),
            observable: Some(self.observable.to_string()),
            format: Some(self.format),
            out: self.out.clone(),
            mask_eps: Some(self.mask_eps),
            potential: Some(self.potential.to_string()),
            dt: Some(self.propagation.dt),
            steps: Some(self.propagation.steps),
            stride: Some(self.propagation.snapshot_stride),
            kind: Some(self.kind.to_string()),
            binary: self.binary,
        }
    }

    /// Canonical TOML text; parsing it back yields the same text.
    pub fn canonical(&self) -> String {
        toml::to_string(&self.to_config()).expect("config serializes")
    }

    pub fn state(&self) -> Result<Wavefunction> {
        Ok(self.psi.clone())
    }
}
