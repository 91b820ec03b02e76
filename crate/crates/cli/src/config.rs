//! Experiment configuration: flat key=value files, CLI flags, and the merge
//! precedence flags > file > model defaults. Every rejection names the
//! offending key so a bad config is a one-line fix.

use std::fmt;
use std::path::{Path, PathBuf};

use hippa_core::ModelKind;
use serde::Serialize;

/// Any configuration problem; the binary maps these to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// One competitor in an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    BoostedHippa,
    Hippa,
    SgDss,
    SgCss(f64),
    SgPss,
}

impl Method {
    /// Parses one method name. Constant-step entries carry their stepsize:
    /// both `sg-css(0.1)` and `sg-css-0.1` are accepted.
    pub fn parse(raw: &str) -> Result<Method, ConfigError> {
        let s = raw.trim();
        match s {
            "boosted-hippa" => return Ok(Method::BoostedHippa),
            "hippa" => return Ok(Method::Hippa),
            "sg-dss" => return Ok(Method::SgDss),
            "sg-pss" => return Ok(Method::SgPss),
            _ => {}
        }
        let alpha_text = if let Some(inner) = s.strip_prefix("sg-css(").and_then(|t| t.strip_suffix(')')) {
            Some(inner)
        } else {
            s.strip_prefix("sg-css-")
        };
        if let Some(alpha_text) = alpha_text {
            let alpha: f64 = alpha_text
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid sg-css stepsize `{alpha_text}`")))?;
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(err(format!("sg-css stepsize must be > 0, got {alpha}")));
            }
            return Ok(Method::SgCss(alpha));
        }
        Err(err(format!(
            "unknown method `{s}` (expected boosted-hippa, hippa, sg-dss, sg-css(alpha), sg-pss)"
        )))
    }

    /// Canonical identifier, used for CSV filenames and the plot-data
    /// `method` column.
    pub fn id(&self) -> String {
        match self {
            Method::BoostedHippa => "boosted-hippa".into(),
            Method::Hippa => "hippa".into(),
            Method::SgDss => "sg-dss".into(),
            Method::SgCss(alpha) => format!("sg-css-{alpha}"),
            Method::SgPss => "sg-pss".into(),
        }
    }
}

/// Parses a comma-separated method list, rejecting duplicates (their output
/// files would collide).
pub fn parse_methods(raw: &str) -> Result<Vec<Method>, ConfigError> {
    let mut methods = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let m = Method::parse(part)?;
        if methods.iter().any(|seen: &Method| seen.id() == m.id()) {
            return Err(err(format!("duplicate method `{}`", m.id())));
        }
        methods.push(m);
    }
    if methods.is_empty() {
        return Err(err("methods list is empty"));
    }
    Ok(methods)
}

/// Experiment budget. Both flavors are deterministic: the seconds variant is
/// virtual time (one subgradient call = one microsecond), never wall clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    OuterIterations(usize),
    VirtualSeconds(f64),
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub p: f64,
    pub gamma: f64,
    pub theta_ls: f64,
    pub outlier_ratio: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub budget: Budget,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn model_number(&self) -> u8 {
        match self.model {
            ModelKind::Symmetric => 1,
            ModelKind::Asymmetric => 2,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(err(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(err(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.theta_ls.is_finite() && self.theta_ls > 0.0 && self.theta_ls < 1.0) {
            return Err(err(format!("theta must be in (0, 1), got {}", self.theta_ls)));
        }
        if !(self.outlier_ratio.is_finite()
            && self.outlier_ratio >= 0.0
            && self.outlier_ratio < 1.0)
        {
            return Err(err(format!(
                "outliers must be in [0, 1), got {}",
                self.outlier_ratio
            )));
        }
        if self.n1 == 0 || self.n2 == 0 || self.r == 0 {
            return Err(err("n1, n2, r must all be >= 1"));
        }
        if self.r > self.n1.min(self.n2) {
            return Err(err(format!(
                "r must be <= min(n1, n2), got r={} with n1={}, n2={}",
                self.r, self.n1, self.n2
            )));
        }
        if self.model == ModelKind::Symmetric && self.n1 != self.n2 {
            return Err(err(format!(
                "model 1 is symmetric: n2 must equal n1 (got n1={}, n2={})",
                self.n1, self.n2
            )));
        }
        if let Budget::VirtualSeconds(s) = self.budget {
            if !(s.is_finite() && s >= 0.0) {
                return Err(err(format!("seconds must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// The paper's comparison line-up, used when no methods are requested.
pub fn default_methods() -> Vec<Method> {
    vec![
        Method::BoostedHippa,
        Method::Hippa,
        Method::SgDss,
        Method::SgCss(0.01),
        Method::SgCss(0.1),
        Method::SgCss(1.0),
        Method::SgPss,
    ]
}

/// Partially specified configuration from one source (flags or a file).
#[derive(Debug, Clone, Default)]
pub struct PartialConfig {
    pub model: Option<u8>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub r: Option<usize>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub outliers: Option<f64>,
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub seconds: Option<f64>,
    pub methods: Option<Vec<Method>>,
    pub out: Option<PathBuf>,
}

impl PartialConfig {
    /// Overlays `self` (higher precedence) on `lower`.
    pub fn merge_over(self, lower: PartialConfig) -> PartialConfig {
        PartialConfig {
            model: self.model.or(lower.model),
            n1: self.n1.or(lower.n1),
            n2: self.n2.or(lower.n2),
            r: self.r.or(lower.r),
            p: self.p.or(lower.p),
            gamma: self.gamma.or(lower.gamma),
            theta: self.theta.or(lower.theta),
            outliers: self.outliers.or(lower.outliers),
            seed: self.seed.or(lower.seed),
            iters: self.iters.or(lower.iters),
            seconds: self.seconds.or(lower.seconds),
            methods: self.methods.or(lower.methods),
            out: self.out.or(lower.out),
        }
    }

    /// Fills the gaps with model defaults and validates the result.
    pub fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let model = match self.model.unwrap_or(1) {
            1 => ModelKind::Symmetric,
            2 => ModelKind::Asymmetric,
            other => return Err(err(format!("model must be 1 or 2, got {other}"))),
        };
        let n1 = self.n1.unwrap_or(50);
        let n2 = self.n2.unwrap_or(match model {
            ModelKind::Symmetric => n1,
            ModelKind::Asymmetric => 40,
        });
        let budget = match (self.iters, self.seconds) {
            (Some(_), Some(_)) => {
                return Err(err("choose exactly one of iters/seconds, not both"))
            }
            (Some(n), None) => Budget::OuterIterations(n),
            (None, Some(s)) => Budget::VirtualSeconds(s),
            (None, None) => Budget::OuterIterations(100),
        };
        let cfg = ExperimentConfig {
            model,
            n1,
            n2,
            r: self.r.unwrap_or(5),
            p: self.p.unwrap_or(2.0),
            gamma: self.gamma.unwrap_or(match model {
                ModelKind::Symmetric => 0.5,
                ModelKind::Asymmetric => 1.0,
            }),
            theta_ls: self.theta.unwrap_or(0.8),
            outlier_ratio: self.outliers.unwrap_or(0.3),
            seed: self.seed.unwrap_or(0),
            methods: self.methods.unwrap_or_else(default_methods),
            budget,
            out: self.out.unwrap_or_else(|| PathBuf::from("results")),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| err(format!("invalid value for `{key}`: `{value}`")))
}

/// Parses a flat key=value config file. Lines starting with `#` and blank
/// lines are ignored; unknown and duplicate keys are rejected by name.
pub fn parse_config_file(path: &Path) -> Result<PartialConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read config file {}: {e}", path.display())))?;
    let mut partial = PartialConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(format!(
                "malformed line {} in {}: expected key=value",
                lineno + 1,
                path.display()
            )));
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(err(format!("duplicate config key `{key}`")));
        }
        seen.push(key.to_string());
        match key {
            "model" => partial.model = Some(parse_value(key, value)?),
            "n1" => partial.n1 = Some(parse_value(key, value)?),
            "n2" => partial.n2 = Some(parse_value(key, value)?),
            "r" => partial.r = Some(parse_value(key, value)?),
            "p" => partial.p = Some(parse_value(key, value)?),
            "gamma" => partial.gamma = Some(parse_value(key, value)?),
            "theta" => partial.theta = Some(parse_value(key, value)?),
            "outliers" => partial.outliers = Some(parse_value(key, value)?),
            "seed" => partial.seed = Some(parse_value(key, value)?),
            "iters" => partial.iters = Some(parse_value(key, value)?),
            "seconds" => partial.seconds = Some(parse_value(key, value)?),
            "methods" => partial.methods = Some(parse_methods(value)?),
            "out" => partial.out = Some(PathBuf::from(value)),
            _ => return Err(err(format!("unknown config key `{key}`"))),
        }
    }
    Ok(partial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing_both_css_spellings() {
        assert_eq!(Method::parse("sg-css(0.1)").unwrap(), Method::SgCss(0.1));
        assert_eq!(Method::parse("sg-css-0.1").unwrap(), Method::SgCss(0.1));
        assert_eq!(Method::parse("boosted-hippa").unwrap(), Method::BoostedHippa);
        assert!(Method::parse("sg-css(-1)").is_err());
        assert!(Method::parse("newton").is_err());
    }

    #[test]
    fn method_ids_are_filename_safe() {
        for m in default_methods() {
            let id = m.id();
            assert!(
                id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.'),
                "unsafe id {id}"
            );
        }
    }

    #[test]
    fn empty_partial_resolves_to_model1_paper_defaults() {
        let cfg = PartialConfig::default().resolve().unwrap();
        assert_eq!(cfg.model_number(), 1);
        assert_eq!((cfg.n1, cfg.n2, cfg.r), (50, 50, 5));
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.theta_ls, 0.8);
        assert_eq!(cfg.p, 2.0);
        assert_eq!(cfg.outlier_ratio, 0.3);
        assert_eq!(cfg.methods.len(), 7);
    }

    #[test]
    fn model2_defaults() {
        let partial = PartialConfig { model: Some(2), ..Default::default() };
        let cfg = partial.resolve().unwrap();
        assert_eq!((cfg.n1, cfg.n2, cfg.r), (50, 40, 5));
        assert_eq!(cfg.gamma, 1.0);
    }

    #[test]
    fn flags_override_file() {
        let file = PartialConfig { p: Some(2.0), gamma: Some(0.7), ..Default::default() };
        let flags = PartialConfig { p: Some(1.25), ..Default::default() };
        let cfg = flags.merge_over(file).resolve().unwrap();
        assert_eq!(cfg.p, 1.25);
        assert_eq!(cfg.gamma, 0.7);
    }

    #[test]
    fn negative_gamma_rejected_with_message() {
        let partial = PartialConfig { gamma: Some(-1.0), ..Default::default() };
        let e = partial.resolve().unwrap_err();
        assert!(e.0.contains("gamma must be > 0"), "got: {e}");
    }

    #[test]
    fn both_budgets_rejected() {
        let partial =
            PartialConfig { iters: Some(10), seconds: Some(1.0), ..Default::default() };
        assert!(partial.resolve().is_err());
    }

    #[test]
    fn symmetric_dimension_mismatch_rejected() {
        let partial =
            PartialConfig { model: Some(1), n1: Some(20), n2: Some(16), ..Default::default() };
        let e = partial.resolve().unwrap_err();
        assert!(e.0.contains("symmetric"));
    }

    #[test]
    fn config_file_round_trip_and_unknown_key() {
        let dir = std::env::temp_dir().join(format!("hippa-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.cfg");
        std::fs::write(
            &good,
            "# comment\nmodel = 2\nn1 = 20\nn2=16\nr = 3\np = 1.25\nmethods = hippa,sg-dss\n",
        )
        .unwrap();
        let partial = parse_config_file(&good).unwrap();
        let cfg = partial.resolve().unwrap();
        assert_eq!(cfg.model_number(), 2);
        assert_eq!((cfg.n1, cfg.n2, cfg.r), (20, 16, 3));
        assert_eq!(cfg.p, 1.25);
        assert_eq!(cfg.methods, vec![Method::Hippa, Method::SgDss]);

        let bad = dir.join("bad.cfg");
        std::fs::write(&bad, "gama = 0.5\n").unwrap();
        let e = parse_config_file(&bad).unwrap_err();
        assert!(e.0.contains("unknown config key `gama`"), "got: {e}");

        let dup = dir.join("dup.cfg");
        std::fs::write(&dup, "p = 2\np = 3\n").unwrap();
        assert!(parse_config_file(&dup).unwrap_err().0.contains("duplicate"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
