//! Run configuration, its canonical TOML form and the JSON report writer.

use std::io;
use std::path::{Path, PathBuf};

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::extrapolate::DEFAULT_RADII;
use crate::families::FamilyParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckDec,
    Adm,
    Invariance,
    VerifyClifford,
    VerifySl,
    WittenFlux,
    Mots,
    Families,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckDec => "check-dec",
            Command::Adm => "adm",
            Command::Invariance => "invariance",
            Command::VerifyClifford => "verify-clifford",
            Command::VerifySl => "verify-sl",
            Command::WittenFlux => "witten-flux",
            Command::Mots => "mots",
            Command::Families => "families",
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// DEC slack; the backend default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dec: Option<f64>,
    #[serde(default = "d_identity")]
    pub identity: f64,
    #[serde(default = "d_order")]
    pub order: f64,
    #[serde(default = "d_flux")]
    pub flux: f64,
    #[serde(default = "d_invariance")]
    pub invariance: f64,
    #[serde(default = "d_stability")]
    pub stability: f64,
    #[serde(default = "d_frame")]
    pub frame: f64,
}

fn d_identity() -> f64 {
    1e-12
}
fn d_order() -> f64 {
    0.25
}
fn d_flux() -> f64 {
    0.01
}
fn d_invariance() -> f64 {
    1e-6
}
fn d_stability() -> f64 {
    1e-8
}
fn d_frame() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dec: None,
            identity: d_identity(),
            order: d_order(),
            flux: d_flux(),
            invariance: d_invariance(),
            stability: d_stability(),
            frame: d_frame(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Angle θ in degrees.
    #[serde(default)]
    pub theta: f64,
    /// `+1` or `−1`.
    #[serde(default = "d_sign")]
    pub sign: i8,
    /// Contact angle: degrees, or `linear:<deg>:<s₀>,<s₁>,…` with slopes in radians per unit length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    /// Surface override: `plane:<offset>,<slope>` or `cap:<c₀>,…,<c_{n−1}>,<radius>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
    #[serde(default = "d_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "d_spacings")]
    pub spacings: Vec<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_r_max")]
    pub r_max: f64,
    #[serde(default = "d_theta_grid")]
    pub theta_grid: usize,
    #[serde(default = "d_rotations")]
    pub rotations: usize,
    #[serde(default = "d_trace_samples")]
    pub trace_samples: usize,
    #[serde(default = "d_basis")]
    pub basis: usize,
    #[serde(default = "d_order_q")]
    pub quadrature_order: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Divides every charge by this constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<f64>,
    pub family: FamilyParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Outputs,
}

fn d_sign() -> i8 {
    1
}
fn d_radii() -> Vec<f64> {
    DEFAULT_RADII.to_vec()
}
fn d_spacings() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}
fn d_samples() -> usize {
    256
}
fn d_r_max() -> f64 {
    20.0
}
fn d_theta_grid() -> usize {
    25
}
fn d_rotations() -> usize {
    5
}
fn d_trace_samples() -> usize {
    1000
}
fn d_basis() -> usize {
    10
}
fn d_order_q() -> usize {
    crate::charges::DEFAULT_ORDER
}
fn d_seed() -> u64 {
    7
}

impl RunConfig {
    pub fn new(command: Command, family: FamilyParams) -> Self {
        RunConfig {
            command,
            theta: 0.0,
            sign: d_sign(),
            gamma: None,
            surface: None,
            radii: d_radii(),
            spacings: d_spacings(),
            samples: d_samples(),
            r_max: d_r_max(),
            theta_grid: d_theta_grid(),
            rotations: d_rotations(),
            trace_samples: d_trace_samples(),
            basis: d_basis(),
            quadrature_order: d_order_q(),
            seed: d_seed(),
            normalize: None,
            family,
            tolerances: Tolerances::default(),
            output: Outputs::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    /// The canonical TOML form. Parsing it yields an equal config.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn theta_radians(&self) -> f64 {
        self.theta.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::InvalidParameter(format!("sign must be + or -, got {}", self.sign)));
        }
        if !self.theta.is_finite() || self.theta.abs() > 90.0 {
            return Err(Error::AngleOutOfRange { value: self.theta, range: "[-90, 90] degrees" });
        }
        if self.radii.len() < 2 || self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidParameter("radii must be at least two positive numbers".into()));
        }
        if self.spacings.is_empty() || self.spacings.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidParameter("spacings must be positive".into()));
        }
        if self.samples == 0 || self.basis == 0 || self.quadrature_order < 2 {
            return Err(Error::InvalidParameter("samples, basis and quadrature order must be positive".into()));
        }
        Ok(())
    }
}

/// Pretty JSON with every float written with 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats;
/// non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser).map_err(|e| Error::Internal(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}
