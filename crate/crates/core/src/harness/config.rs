//! Line-based experiment configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value unit
//! ```
//!
//! Every dimensioned value carries an explicit unit; values are stored in SI.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::biphoton::{BiphotonModel, CollectionMode, GeometryConfig};
use crate::classical::{ClassicalGunModel, EmissionMode, KDistribution};
use crate::error::{Error, Result};
use crate::optics::{DoubleSlitSpec, TransverseGrid};

pub const PRESET_NAMES: &[&str] = &["paper-fig1"];

const PAPER_FIG1: &str = include_str!("../../presets/paper-fig1.cfg");

/// Built-in preset text by name.
pub fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "paper-fig1" => Some(PAPER_FIG1),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Interference,
    Image,
    Classical,
    Report,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Interference => "interference",
            Mode::Image => "image",
            Mode::Classical => "classical",
            Mode::Report => "report",
            Mode::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "interference" => Mode::Interference,
            "image" => Mode::Image,
            "classical" => Mode::Classical,
            "report" => Mode::Report,
            "sweep" => Mode::Sweep,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub samples: usize,
    /// m.
    pub extent: f64,
}

impl GridParams {
    pub fn build(&self) -> Result<TransverseGrid> {
        crate::optics::make_grid(self.samples, self.extent, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountsConfig {
    pub total: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceConfig {
    /// Scan window `[-half_width, half_width]` in the focal plane, m.
    pub half_width: f64,
    pub bootstrap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlurSpec {
    /// Image-plane Gaussian standard deviation, m.
    Sigma(f64),
    /// Per-peak FWHM excess over the ideal image, m.
    FwhmExcess(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageConfig {
    pub half_width: f64,
    pub blur: BlurSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalConfig {
    pub model: ClassicalGunModel,
    /// m; falls back to the biphoton wavelength.
    pub wavelength: Option<f64>,
    pub pattern_samples: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub models: usize,
    pub samples: usize,
}

/// Inputs of the uncertainty report. Missing values are taken from prior
/// reports (relative paths resolve against the output directory) or from
/// the geometry and biphoton sections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportConfig {
    pub dk1: Option<f64>,
    pub dk2: Option<f64>,
    pub dk_sum: Option<f64>,
    pub dx1: Option<f64>,
    pub dx2: Option<f64>,
    pub dx_diff: Option<f64>,
    pub interference_report: Option<PathBuf>,
    pub image_report: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub geometry: Option<GeometryConfig>,
    pub biphoton: Option<BiphotonModel>,
    pub classical: Option<ClassicalConfig>,
    pub grid: GridParams,
    pub counts: CountsConfig,
    pub interference: InterferenceConfig,
    pub image: Option<ImageConfig>,
    pub sweep: SweepConfig,
    pub report: ReportConfig,
    /// Hex SHA-256 of the configuration text.
    pub source_hash: String,
}

impl ExperimentConfig {
    /// Fail unless the sections `mode` needs are present.
    pub fn require(&self, mode: Mode) -> Result<()> {
        let missing = |what: &str| {
            Err(Error::Configuration(format!(
                "mode {} requires a [{what}] section",
                mode.name()
            )))
        };
        match mode {
            Mode::Interference => {
                if self.geometry.is_none() {
                    return missing("geometry");
                }
                if self.biphoton.is_none() {
                    return missing("biphoton");
                }
            }
            Mode::Image => {
                if self.geometry.is_none() {
                    return missing("geometry");
                }
                if self.image.is_none() {
                    return missing("image");
                }
            }
            Mode::Classical => {
                if self.geometry.is_none() {
                    return missing("geometry");
                }
                match &self.classical {
                    None => return missing("classical"),
                    Some(c) if c.wavelength.is_none() && self.biphoton.is_none() => {
                        return Err(Error::Configuration(
                            "mode classical needs a wavelength in [classical] or [biphoton]".into(),
                        ))
                    }
                    _ => {}
                }
            }
            Mode::Report | Mode::Sweep => {}
        }
        Ok(())
    }
}

/// Load a configuration file, or a built-in preset when `path` names one
/// and no such file exists.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    if !path.exists() {
        if let Some(src) = path.to_str().and_then(preset_source) {
            return parse_config(src);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

struct Entry {
    value: String,
    line: usize,
    used: Cell<bool>,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, "unterminated section header"))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(parse_err(line, format!("bad section name '{name}'")));
            }
            if sections.contains_key(name) {
                return Err(parse_err(line, format!("duplicate section [{name}]")));
            }
            sections.insert(
                name.to_string(),
                Section {
                    line,
                    entries: BTreeMap::new(),
                },
            );
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(parse_err(line, "empty key or value"));
        }
        let name = current
            .as_ref()
            .ok_or_else(|| parse_err(line, format!("key '{key}' outside any section")))?;
        let section = sections.get_mut(name).expect("current section exists");
        if section.entries.contains_key(key) {
            return Err(parse_err(line, format!("duplicate key '{key}' in [{name}]")));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
                used: Cell::new(false),
            },
        );
    }
    Ok(sections)
}

#[derive(Clone, Copy)]
enum Dim {
    Length,
    Wavenumber,
    Angle,
}

fn unit_factor(dim: Dim, unit: &str) -> Option<f64> {
    Some(match (dim, unit) {
        (Dim::Length, "nm") => 1e-9,
        (Dim::Length, "um") | (Dim::Length, "µm") => 1e-6,
        (Dim::Length, "mm") => 1e-3,
        (Dim::Length, "cm") => 1e-2,
        (Dim::Length, "m") => 1.0,
        (Dim::Wavenumber, "1/m") | (Dim::Wavenumber, "m^-1") => 1.0,
        (Dim::Wavenumber, "1/cm") | (Dim::Wavenumber, "cm^-1") => 1e2,
        (Dim::Wavenumber, "1/mm") | (Dim::Wavenumber, "mm^-1") => 1e3,
        (Dim::Wavenumber, "1/um") | (Dim::Wavenumber, "um^-1") => 1e6,
        (Dim::Angle, "rad") => 1.0,
        (Dim::Angle, "mrad") => 1e-3,
        (Dim::Angle, "urad") => 1e-6,
        _ => return None,
    })
}

struct Reader<'a> {
    name: &'a str,
    section: &'a Section,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a Entry> {
        let e = self.section.entries.get(key)?;
        e.used.set(true);
        Some(e)
    }

    fn missing(&self, key: &str) -> Error {
        parse_err(
            self.section.line,
            format!("[{}] is missing required key '{key}'", self.name),
        )
    }

    fn quantity_opt(&self, key: &str, dim: Dim) -> Result<Option<f64>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        let mut parts = e.value.split_whitespace();
        let number = parts.next().unwrap_or("");
        let unit = parts.next().ok_or_else(|| {
            parse_err(e.line, format!("'{key}' needs an explicit unit, got '{}'", e.value))
        })?;
        if parts.next().is_some() {
            return Err(parse_err(e.line, format!("'{key}': expected 'number unit'")));
        }
        let v: f64 = number
            .parse()
            .map_err(|_| parse_err(e.line, format!("'{key}': '{number}' is not a number")))?;
        let factor = unit_factor(dim, unit)
            .ok_or_else(|| parse_err(e.line, format!("'{key}': unknown unit '{unit}'")))?;
        if !v.is_finite() {
            return Err(parse_err(e.line, format!("'{key}' must be finite")));
        }
        Ok(Some(v * factor))
    }

    fn quantity(&self, key: &str, dim: Dim) -> Result<f64> {
        self.quantity_opt(key, dim)?.ok_or_else(|| self.missing(key))
    }

    fn plain_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        e.value
            .parse()
            .map(Some)
            .map_err(|_| parse_err(e.line, format!("'{key}': cannot parse '{}'", e.value)))
    }

    fn plain<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.plain_opt(key)?.ok_or_else(|| self.missing(key))
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        options
            .iter()
            .find(|(name, _)| *name == e.value)
            .map(|(_, v)| Some(*v))
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                parse_err(
                    e.line,
                    format!("'{key}' must be one of {}, got '{}'", names.join(", "), e.value),
                )
            })
    }

    fn line_of(&self, key: &str) -> usize {
        self.section
            .entries
            .get(key)
            .map(|e| e.line)
            .unwrap_or(self.section.line)
    }

    /// Wrap a validation failure of this section as a configuration error.
    fn invalid(&self, e: Error) -> Error {
        Error::Configuration(format!("[{}]: {}", self.name, strip_kind(&e)))
    }
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) | Error::Configuration(m) => m.clone(),
        other => other.to_string(),
    }
}

const SECTIONS: &[&str] = &[
    "run",
    "geometry",
    "biphoton",
    "grid",
    "counts",
    "interference",
    "image",
    "classical",
    "sweep",
    "report",
];

/// Parse and validate configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let sections = tokenize(text)?;
    for (name, s) in &sections {
        if !SECTIONS.contains(&name.as_str()) {
            return Err(parse_err(s.line, format!("unknown section [{name}]")));
        }
    }
    let reader = |name: &'static str| {
        sections.get(name).map(|section| Reader { name, section })
    };

    let mode = match reader("run") {
        Some(r) => {
            let m = r.raw("mode").map(|e| {
                Mode::parse(&e.value)
                    .ok_or_else(|| parse_err(e.line, format!("unknown mode '{}'", e.value)))
            });
            m.transpose()?
        }
        None => None,
    };

    let geometry = reader("geometry").map(|r| parse_geometry(&r)).transpose()?;
    let biphoton = reader("biphoton").map(|r| parse_biphoton(&r)).transpose()?;

    let grid = match reader("grid") {
        Some(r) => GridParams {
            samples: r.plain("samples")?,
            extent: r.quantity("extent", Dim::Length)?,
        },
        None => GridParams {
            samples: 4096,
            extent: 20.48e-3,
        },
    };
    if let Err(e) = grid.build() {
        return Err(Error::Configuration(format!("[grid]: {}", strip_kind(&e))));
    }

    let counts = match reader("counts") {
        Some(r) => CountsConfig {
            total: r.plain_opt("total")?.unwrap_or(1_000_000),
            seed: r.plain_opt("seed")?.unwrap_or(0),
        },
        None => CountsConfig {
            total: 1_000_000,
            seed: 0,
        },
    };
    if counts.total == 0 {
        return Err(Error::Configuration("[counts]: total must be positive".into()));
    }

    let interference = match reader("interference") {
        Some(r) => InterferenceConfig {
            half_width: r.quantity_opt("half_width", Dim::Length)?.unwrap_or(2.5e-3),
            bootstrap: r
                .plain_opt("bootstrap")?
                .unwrap_or(crate::estimators::interference::BOOTSTRAP_RESAMPLES),
        },
        None => InterferenceConfig {
            half_width: 2.5e-3,
            bootstrap: crate::estimators::interference::BOOTSTRAP_RESAMPLES,
        },
    };
    if !(interference.half_width > 0.0) {
        return Err(Error::Configuration("[interference]: half_width must be positive".into()));
    }

    let image = reader("image").map(|r| parse_image(&r)).transpose()?;
    let classical = reader("classical")
        .map(|r| parse_classical(&r, biphoton.as_ref()))
        .transpose()?;

    let sweep = match reader("sweep") {
        Some(r) => SweepConfig {
            models: r.plain_opt("models")?.unwrap_or(100),
            samples: r.plain_opt("samples")?.unwrap_or(10_000),
        },
        None => SweepConfig {
            models: 100,
            samples: 10_000,
        },
    };
    if sweep.models == 0 {
        return Err(Error::Configuration("[sweep]: models must be positive".into()));
    }

    let report = match reader("report") {
        Some(r) => ReportConfig {
            dk1: r.quantity_opt("dk1", Dim::Wavenumber)?,
            dk2: r.quantity_opt("dk2", Dim::Wavenumber)?,
            dk_sum: r.quantity_opt("dk_sum", Dim::Wavenumber)?,
            dx1: r.quantity_opt("dx1", Dim::Length)?,
            dx2: r.quantity_opt("dx2", Dim::Length)?,
            dx_diff: r.quantity_opt("dx_diff", Dim::Length)?,
            interference_report: r.plain_opt::<String>("interference_report")?.map(PathBuf::from),
            image_report: r.plain_opt::<String>("image_report")?.map(PathBuf::from),
        },
        None => ReportConfig::default(),
    };

    // anything not consumed above is unknown
    let mut unknown: Vec<(usize, String)> = sections
        .iter()
        .flat_map(|(name, s)| {
            s.entries
                .iter()
                .filter(|(_, e)| !e.used.get())
                .map(move |(k, e)| (e.line, format!("unknown key '{k}' in [{name}]")))
        })
        .collect();
    unknown.sort();
    if let Some((line, message)) = unknown.into_iter().next() {
        return Err(parse_err(line, message));
    }

    Ok(ExperimentConfig {
        mode,
        geometry,
        biphoton,
        classical,
        grid,
        counts,
        interference,
        image,
        sweep,
        report,
        source_hash: hex_sha256(text.as_bytes()),
    })
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse_geometry(r: &Reader<'_>) -> Result<GeometryConfig> {
    let a = r.quantity("slit_width", Dim::Length)?;
    let d = r.quantity("slit_separation", Dim::Length)?;
    let slit = DoubleSlitSpec::new(a, d).map_err(|e| r.invalid(e))?;
    let g = GeometryConfig {
        slit,
        a1: r.quantity("a1", Dim::Length)?,
        a2: r.quantity("a2", Dim::Length)?,
        b: r.quantity("b", Dim::Length)?,
        f_imaging: r.quantity("f_imaging", Dim::Length)?,
        f_collection: r.quantity("f_collection", Dim::Length)?,
        d1_mode: r
            .choice(
                "d1_mode",
                &[("point", CollectionMode::Point), ("bucket", CollectionMode::Bucket)],
            )?
            .unwrap_or(CollectionMode::Point),
        d2_width: r.quantity("d2_width", Dim::Length)?,
        d3_width: r.quantity("d3_width", Dim::Length)?,
    };
    g.validate().map_err(|e| r.invalid(e))?;
    Ok(g)
}

fn parse_biphoton(r: &Reader<'_>) -> Result<BiphotonModel> {
    let wavelength = r.quantity("wavelength", Dim::Length)?;
    let sigma_sum = r.quantity("sigma_sum", Dim::Wavenumber)?;
    let divergence = r.quantity_opt("divergence", Dim::Angle)?;
    let sigma_single = r.quantity_opt("sigma_single", Dim::Wavenumber)?;
    let single = match (divergence, sigma_single) {
        (Some(t), None) => 2.0 * PI / wavelength * t,
        (None, Some(s)) => s,
        (None, None) => {
            return Err(parse_err(
                r.section.line,
                "[biphoton] needs 'divergence' or 'sigma_single'",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(parse_err(
                r.line_of("sigma_single"),
                "give only one of 'divergence' and 'sigma_single'",
            ))
        }
    };
    BiphotonModel::new(wavelength, sigma_sum, single).map_err(|e| r.invalid(e))
}

fn parse_image(r: &Reader<'_>) -> Result<ImageConfig> {
    let half_width = r.quantity_opt("half_width", Dim::Length)?.unwrap_or(1.5e-3);
    let blur = match (
        r.quantity_opt("blur", Dim::Length)?,
        r.quantity_opt("fwhm_excess", Dim::Length)?,
    ) {
        (Some(s), None) => BlurSpec::Sigma(s),
        (None, Some(e)) => BlurSpec::FwhmExcess(e),
        (None, None) => BlurSpec::Sigma(0.0),
        (Some(_), Some(_)) => {
            return Err(parse_err(
                r.line_of("fwhm_excess"),
                "give only one of 'blur' and 'fwhm_excess'",
            ))
        }
    };
    let ok = match blur {
        BlurSpec::Sigma(s) => s >= 0.0,
        BlurSpec::FwhmExcess(e) => e >= 0.0,
    };
    if !ok || !(half_width > 0.0) {
        return Err(Error::Configuration(
            "[image]: blur must be non-negative and half_width positive".into(),
        ));
    }
    Ok(ImageConfig { half_width, blur })
}

fn parse_classical(r: &Reader<'_>, biphoton: Option<&BiphotonModel>) -> Result<ClassicalConfig> {
    let wavelength = r.quantity_opt("wavelength", Dim::Length)?;
    let lambda = wavelength.or(biphoton.map(|b| b.wavelength));
    let k_spread = match (
        r.quantity_opt("k_spread", Dim::Wavenumber)?,
        r.quantity_opt("divergence", Dim::Angle)?,
    ) {
        (Some(k), None) => k,
        (None, Some(t)) => {
            let lambda = lambda.ok_or_else(|| {
                parse_err(r.line_of("divergence"), "'divergence' needs a wavelength")
            })?;
            2.0 * PI / lambda * t
        }
        (None, None) => {
            return Err(parse_err(
                r.section.line,
                "[classical] needs 'k_spread' or 'divergence'",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(parse_err(
                r.line_of("divergence"),
                "give only one of 'k_spread' and 'divergence'",
            ))
        }
    };
    let w = r.quantity("source_width", Dim::Length)?;
    let factor: f64 = r.plain_opt("noise_factor")?.unwrap_or(1.0);
    let mut model = ClassicalGunModel::with_noise_factor(k_spread, w, factor).map_err(|e| r.invalid(e))?;
    if let Some(d) = r.choice(
        "distribution",
        &[("gaussian", KDistribution::Gaussian), ("uniform", KDistribution::Uniform)],
    )? {
        model.k_distribution = d;
    }
    if let Some(e) = r.choice(
        "emission",
        &[("independent", EmissionMode::Independent), ("shared", EmissionMode::SharedPoint)],
    )? {
        model.emission = e;
    }
    let cfg = ClassicalConfig {
        model,
        wavelength,
        pattern_samples: r.plain_opt("pattern_samples")?.unwrap_or(4000),
        samples: r.plain_opt("samples")?.unwrap_or(10_000),
    };
    if cfg.pattern_samples == 0 || cfg.samples == 0 {
        return Err(Error::Configuration("[classical]: sample counts must be positive".into()));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biphoton::{check_two_photon_lens_equation, magnification};

    #[test]
    fn preset_geometry() {
        let c = load_config("paper-fig1").unwrap();
        let g = c.geometry.unwrap();
        assert!((g.object_distance() - 0.79).abs() < 1e-12);
        assert!((g.image_distance() - 1.42).abs() < 1e-12);
        assert!((magnification(&g) - 1.80).abs() < 0.01);
        assert!(check_two_photon_lens_equation(&g, 0.01).satisfied);
        let b = c.biphoton.unwrap();
        assert!((b.sigma_sum - 2500.0).abs() < 1e-9);
        assert!((b.sigma_single * 1e-3 - 23.26).abs() < 0.01);
        assert_eq!(c.grid.samples, 4096);
        for m in [Mode::Interference, Mode::Image, Mode::Classical, Mode::Report, Mode::Sweep] {
            c.require(m).unwrap();
        }
    }

    fn preset_with(from: &str, to: &str) -> String {
        let src = preset_source("paper-fig1").unwrap();
        assert!(src.contains(from), "{from}");
        src.replace(from, to)
    }

    #[test]
    fn overlapping_slits_rejected() {
        let err = parse_config(&preset_with("slit_width = 0.165 mm", "slit_width = 0.5 mm")).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
        assert!(err.to_string().contains("overlap"), "{err}");
    }

    #[test]
    fn missing_unit_rejected_with_line() {
        let err = parse_config(&preset_with("a2 = 46.5 cm", "a2 = 0.465")).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 8);
                assert!(message.contains("unit"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        let err = parse_config(&preset_with("b = 142 cm", "b = 142 cm\nbee = 3 mm")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 10, .. }), "{err}");
        let err = parse_config("[geometri]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn syntax_errors() {
        for text in [
            "key = 1\n",
            "[grid\n",
            "[grid]\nsamples\n",
            "[grid]\nsamples = 10\nsamples = 12\n",
            "[grid]\n[grid]\n",
            "[grid]\nsamples = 64\nextent = 1 furlong\n",
            "[grid]\nsamples = many\nextent = 1 mm\n",
        ] {
            assert!(matches!(parse_config(text), Err(Error::Parse { .. })), "{text}");
        }
    }

    #[test]
    fn units_convert_to_si() {
        let c = parse_config(
            "[report]\ndk1 = 23 1/mm\ndk2 = 23000 1/m\ndx1 = 165 um\ndx2 = 0.0165 cm\n",
        )
        .unwrap();
        assert_eq!(c.report.dk1, Some(23e3));
        assert_eq!(c.report.dk2, Some(23e3));
        assert!((c.report.dx1.unwrap() - 1.65e-4).abs() < 1e-18);
        assert!((c.report.dx2.unwrap() - 1.65e-4).abs() < 1e-18);
    }

    #[test]
    fn mode_requirements() {
        let c = parse_config("[counts]\ntotal = 10\n").unwrap();
        assert!(c.require(Mode::Report).is_ok());
        assert!(c.require(Mode::Sweep).is_ok());
        for m in [Mode::Interference, Mode::Image, Mode::Classical] {
            assert!(matches!(c.require(m), Err(Error::Configuration(_))));
        }
    }

    #[test]
    fn hash_tracks_text() {
        let a = parse_config("[counts]\ntotal = 10\n").unwrap();
        let b = parse_config("[counts]\ntotal = 11\n").unwrap();
        assert_eq!(a.source_hash.len(), 64);
        assert_ne!(a.source_hash, b.source_hash);
    }
}
