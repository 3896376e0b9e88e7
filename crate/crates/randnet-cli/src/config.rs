//! Configuration resolution for the experiment runner.
//!
//! Parameters come from three layers with increasing precedence: built-in
//! defaults, an optional JSON config file, and command-line flags.  All
//! validation happens here so that a bad configuration is rejected before
//! any numerical work starts (exit code 2).

use std::path::{Path, PathBuf};

use randnet::profile::ProfileKind;
use randnet::sampler::EntryLaw;
use randnet::C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem; reported on stderr and mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Contour parameters as they appear in a config file.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub radius: Option<f64>,
    pub nodes: Option<usize>,
}

/// The JSON config document.  Every field is optional; command-line flags
/// override whatever the file sets.  `zeta1`/`zeta2` are strings of the form
/// `"re"` or `"re,im"`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub g: Option<f64>,
    pub zeta1: Option<String>,
    pub zeta2: Option<String>,
    pub alpha: Option<f64>,
    pub profile: Option<String>,
    pub law: Option<String>,
    pub contour: Option<ContourConfig>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub t_points: Option<usize>,
    pub tau_max: Option<f64>,
    pub tau_step: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Values taken from command-line flags (highest precedence).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub g: Option<f64>,
    pub zeta1: Option<String>,
    pub zeta2: Option<String>,
    pub alpha: Option<f64>,
    pub profile: Option<String>,
    pub law: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Fully resolved and validated parameters for one run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: &'static str,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub g: f64,
    pub zeta1: C64,
    pub zeta2: C64,
    pub alpha: f64,
    pub profile: ProfileKind,
    pub law: EntryLaw,
    pub contour_radius: f64,
    pub contour_nodes: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub tau_max: f64,
    pub tau_step: f64,
    pub out_dir: Option<PathBuf>,
    pub workers: usize,
}

/// Contour part of the parameter echo.
#[derive(Debug, Clone, Serialize)]
pub struct ContourEcho {
    pub radius: f64,
    pub nodes: usize,
}

/// Time/τ grid part of the parameter echo.
#[derive(Debug, Clone, Serialize)]
pub struct GridEcho {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub tau_max: f64,
    pub tau_step: f64,
}

/// The numeric parameters echoed into the report and folded into the config
/// hash.  Worker count and output paths are deliberately excluded: they must
/// not change any number the run produces.
#[derive(Debug, Clone, Serialize)]
pub struct ParamsEcho {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub g: f64,
    pub zeta1: [f64; 2],
    pub zeta2: [f64; 2],
    pub alpha: f64,
    pub profile: String,
    pub law: String,
    pub contour: ContourEcho,
    pub grid: GridEcho,
}

impl Resolved {
    /// The report echo of everything that can influence the numbers.
    pub fn echo(&self) -> ParamsEcho {
        ParamsEcho {
            n: self.n,
            samples: self.samples,
            seed: self.seed,
            g: self.g,
            zeta1: [self.zeta1.re, self.zeta1.im],
            zeta2: [self.zeta2.re, self.zeta2.im],
            alpha: self.alpha,
            profile: self.profile.to_string(),
            law: self.law.to_string(),
            contour: ContourEcho {
                radius: self.contour_radius,
                nodes: self.contour_nodes,
            },
            grid: GridEcho {
                t_min: self.t_min,
                t_max: self.t_max,
                t_points: self.t_points,
                tau_max: self.tau_max,
                tau_step: self.tau_step,
            },
        }
    }
}

/// Hex SHA-256 of the canonical JSON of `(command, params)`.
pub fn config_hash(command: &str, params: &ParamsEcho) -> String {
    let payload = serde_json::json!({ "command": command, "params": params });
    let text = serde_json::to_string(&payload).expect("parameters serialize");
    hex_digest(text.as_bytes())
}

/// Hex SHA-256 of arbitrary bytes (used for the frozen acceptance suite).
pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(out, "{b:02x}").expect("hex formatting");
    }
    out
}

/// Loads and parses a JSON config file.
pub fn load_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| bad(format!("config file {}: {e}", path.display())))
}

/// Parses `"re"` or `"re,im"` into a complex number.
pub fn parse_complex(s: &str) -> Result<C64, ConfigError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let parse = |p: &str| -> Result<f64, ConfigError> {
        p.parse::<f64>()
            .map_err(|_| bad(format!("cannot parse '{p}' as a number in '{s}'")))
    };
    match parts.as_slice() {
        [re] => Ok(C64::new(parse(re)?, 0.0)),
        [re, im] => Ok(C64::new(parse(re)?, parse(im)?)),
        _ => Err(bad(format!(
            "spectral parameter must be 're' or 're,im', got '{s}'"
        ))),
    }
}

/// Parses a profile spec: `constant`, `row-stochastic`,
/// `two-block[:within,across]`, or a path to a profile file.
pub fn parse_profile(s: &str) -> Result<ProfileKind, ConfigError> {
    match s {
        "constant" => Ok(ProfileKind::Constant),
        "row-stochastic" | "row-stochastic-random" => Ok(ProfileKind::RowStochasticRandom),
        "two-block" => Ok(ProfileKind::TwoBlock {
            within: 1.5,
            across: 0.5,
        }),
        other if other.starts_with("two-block:") => {
            let rest = &other["two-block:".len()..];
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            let [w, a] = parts.as_slice() else {
                return Err(bad(format!(
                    "two-block profile needs 'two-block:within,across', got '{other}'"
                )));
            };
            let parse = |p: &str| -> Result<f64, ConfigError> {
                p.parse::<f64>()
                    .map_err(|_| bad(format!("cannot parse '{p}' as a weight in '{other}'")))
            };
            let (within, across) = (parse(w)?, parse(a)?);
            if !(within > 0.0 && across > 0.0 && within.is_finite() && across.is_finite()) {
                return Err(bad(format!(
                    "two-block weights must be positive, got '{other}'"
                )));
            }
            Ok(ProfileKind::TwoBlock { within, across })
        }
        other => {
            if Path::new(other).is_file() {
                Ok(ProfileKind::FromFile {
                    path: other.to_string(),
                })
            } else {
                Err(bad(format!(
                    "unknown profile '{other}' (expected constant, row-stochastic, \
                     two-block[:within,across], or a path to an existing profile file)"
                )))
            }
        }
    }
}

/// Parses an entry-law name.
pub fn parse_law(s: &str) -> Result<EntryLaw, ConfigError> {
    s.parse::<EntryLaw>().map_err(|e| bad(e.to_string()))
}

/// Experiments whose numerics reference the spectral parameters; only these
/// get the outside-the-unit-disk domain check at resolve time.
const USES_ZETA: &[&str] = &[
    "kernel-mc",
    "mde-check",
    "f-operator",
    "linearization",
    "gap",
];

/// Merges defaults, file values, and flag values; validates everything.
pub fn resolve(
    experiment: &'static str,
    file: &FileConfig,
    cli: &Overrides,
) -> Result<Resolved, ConfigError> {
    let n = cli.n.or(file.n).unwrap_or(200);
    let samples = cli.samples.or(file.samples).unwrap_or(20);
    let seed = cli.seed.or(file.seed).unwrap_or(1);
    let default_g = if experiment == "autocorr" { 0.5 } else { 1.0 };
    let g = cli.g.or(file.g).unwrap_or(default_g);
    let default_alpha = if experiment == "gap" { 0.0 } else { 5e-3 };
    let alpha = cli.alpha.or(file.alpha).unwrap_or(default_alpha);
    let zeta1_str = cli
        .zeta1
        .clone()
        .or_else(|| file.zeta1.clone())
        .unwrap_or_else(|| "1.5".to_string());
    let zeta2_str = cli
        .zeta2
        .clone()
        .or_else(|| file.zeta2.clone())
        .unwrap_or_else(|| "1.5".to_string());
    let profile_str = cli
        .profile
        .clone()
        .or_else(|| file.profile.clone())
        .unwrap_or_else(|| "constant".to_string());
    let law_str = cli
        .law
        .clone()
        .or_else(|| file.law.clone())
        .unwrap_or_else(|| "complex-gaussian".to_string());
    let contour = file.contour.unwrap_or_default();
    let contour_radius = contour.radius.unwrap_or(2.0);
    let contour_nodes = contour.nodes.unwrap_or(64);
    let t_min = file.t_min.unwrap_or(1.0);
    let t_max = file.t_max.unwrap_or(100.0);
    let t_points = file.t_points.unwrap_or(40);
    let tau_max = file.tau_max.unwrap_or(5.0);
    let tau_step = file.tau_step.unwrap_or(0.5);
    let out_dir = cli.out_dir.clone().or_else(|| file.out_dir.clone());
    let workers = cli.workers.or(file.workers).unwrap_or(1);

    if n == 0 {
        return Err(bad("n must be at least 1"));
    }
    if workers == 0 {
        return Err(bad("workers must be at least 1"));
    }
    if samples == 0 && matches!(experiment, "kernel-mc" | "gap") {
        return Err(bad(format!("{experiment} needs at least one sample")));
    }
    if !(g.is_finite() && g > 0.0 && g <= 1.0) {
        return Err(bad(format!("g must lie in (0, 1], got {g}")));
    }
    if experiment == "autocorr" && g >= 1.0 {
        return Err(bad(format!(
            "autocorr needs a subcritical coupling g < 1, got {g}"
        )));
    }
    if !alpha.is_finite() {
        return Err(bad(format!("alpha must be finite, got {alpha}")));
    }
    if experiment == "linearization" && alpha == 0.0 {
        return Err(bad("linearization needs a nonzero alpha"));
    }
    let zeta1 = parse_complex(&zeta1_str)?;
    let zeta2 = parse_complex(&zeta2_str)?;
    if USES_ZETA.contains(&experiment) {
        for (name, z) in [("zeta1", zeta1), ("zeta2", zeta2)] {
            if !z.norm().is_finite() || z.norm() <= 1.0 {
                return Err(bad(format!(
                    "{name} must lie strictly outside the unit disk, got |{name}| = {}",
                    z.norm()
                )));
            }
        }
    }
    let profile = parse_profile(&profile_str)?;
    let law = parse_law(&law_str)?;
    if !(contour_radius.is_finite() && contour_radius > 1.0) {
        return Err(bad(format!(
            "contour radius must exceed 1, got {contour_radius}"
        )));
    }
    if contour_nodes < 8 || !contour_nodes.is_multiple_of(2) {
        return Err(bad(format!(
            "contour nodes must be an even count of at least 8, got {contour_nodes}"
        )));
    }
    if !(t_min.is_finite() && t_max.is_finite() && t_min > 0.0 && t_max > t_min) {
        return Err(bad(format!(
            "need 0 < t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if t_points < 2 {
        return Err(bad("t_points must be at least 2"));
    }
    if !(tau_step.is_finite() && tau_step > 0.0 && tau_max.is_finite() && tau_max >= 0.0) {
        return Err(bad(format!(
            "need tau_step > 0 and tau_max >= 0, got step {tau_step}, max {tau_max}"
        )));
    }
    if tau_max / tau_step > 10_000.0 {
        return Err(bad("tau grid has more than 10000 points"));
    }

    Ok(Resolved {
        experiment,
        n,
        samples,
        seed,
        g,
        zeta1,
        zeta2,
        alpha,
        profile,
        law,
        contour_radius,
        contour_nodes,
        t_min,
        t_max,
        t_points,
        tau_max,
        tau_step,
        out_dir,
        workers,
    })
}
