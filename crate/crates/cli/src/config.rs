//! Scenario parameters: defaults, a flat `key = value` config file, and
//! command-line overrides, in increasing precedence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Environment variable consulted when no output directory is configured.
pub const OUT_DIR_ENV: &str = "ADAPTCONV_OUT_DIR";

const DEFAULT_OUT_DIR: &str = "adaptconv-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Smooth1d,
    Banana2d,
    ThreeGauss,
    VkdeDemo,
    PhaseSpace,
    Verify,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Smooth1d,
        Scenario::Banana2d,
        Scenario::ThreeGauss,
        Scenario::VkdeDemo,
        Scenario::PhaseSpace,
        Scenario::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Smooth1d => "smooth1d",
            Scenario::Banana2d => "banana2d",
            Scenario::ThreeGauss => "threegauss",
            Scenario::VkdeDemo => "vkde-demo",
            Scenario::PhaseSpace => "phasespace",
            Scenario::Verify => "verify",
        }
    }

    /// Spatial dimension of the scenario grid.
    pub fn dim(self) -> usize {
        match self {
            Scenario::Banana2d => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario '{s}'")))
    }
}

/// Recognized keys, in their normalized spelling.
pub const KEYS: [&str; 14] = [
    "grid_n",
    "grid_lo",
    "grid_hi",
    "sigma",
    "lambda",
    "q",
    "kappa",
    "beta",
    "seed",
    "out_dir",
    "filter",
    "alpha",
    "n_samples",
    "centers",
];

fn normalize_key(key: &str) -> Result<String> {
    let k = key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase();
    if KEYS.contains(&k.as_str()) {
        Ok(k)
    } else {
        Err(CliError::Config(format!("unknown key '{}'", key.trim())))
    }
}

/// Raw string settings keyed by normalized name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    /// Parses `key = value` lines. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value', got '{line}'", no + 1)))?;
            if v.trim().is_empty() {
                return Err(CliError::Config(format!("line {}: empty value for '{}'", no + 1, k.trim())));
            }
            s.set(k, v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.values.insert(normalize_key(key)?, value.to_string());
        Ok(())
    }

    /// Entries of `other` replace those of `self`.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::Config(format!("cannot parse {key} = '{v}'"))),
        }
    }

    /// A comma-separated list, broadcast when it has a single entry.
    fn list<T: FromStr + Clone>(&self, key: &str, dim: usize) -> Result<Option<Vec<T>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let items: std::result::Result<Vec<T>, _> = v.split(',').map(|s| s.trim().parse::<T>()).collect();
        let items = items.map_err(|_| CliError::Config(format!("cannot parse {key} = '{v}'")))?;
        match items.len() {
            1 => Ok(Some(vec![items[0].clone(); dim])),
            n if n == dim => Ok(Some(items)),
            n => Err(CliError::Config(format!("{key} has {n} entries, the scenario is {dim}-dimensional"))),
        }
    }
}

/// Fully resolved parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub grid_n: Vec<usize>,
    pub grid_lo: Vec<f64>,
    pub grid_hi: Vec<f64>,
    /// Standard deviation of the Gaussian smoothing kernel.
    pub sigma: f64,
    pub lambda: f64,
    /// Window width of the fixed-window variant (`Q = q Id`).
    pub q: f64,
    /// `None` selects the calibrated value.
    pub kappa: Option<f64>,
    pub beta: f64,
    /// Compression factor of the second bump in `smooth1d`.
    pub alpha: f64,
    pub n_samples: usize,
    /// Kernel-ellipse centers for `banana2d`.
    pub centers: Vec<[f64; 2]>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub filter: Option<String>,
}

fn banana_ridge(x1: f64) -> [f64; 2] {
    [x1, 4.0 * (x1 / 5.0).powi(2)]
}

fn parse_centers(v: &str) -> Result<Vec<[f64; 2]>> {
    let bad = || CliError::Config(format!("cannot parse centers = '{v}', expected 'x:y;x:y'"));
    v.split(';')
        .map(|pair| {
            let (a, b) = pair.split_once(':').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if a.is_finite() && b.is_finite() {
                Ok([a, b])
            } else {
                Err(bad())
            }
        })
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ScenarioSpec {
    /// Built-in defaults of `scenario`.
    pub fn defaults(scenario: Scenario) -> Self {
        let (n, lo, hi, sigma): (Vec<usize>, Vec<f64>, Vec<f64>, f64) = match scenario {
            Scenario::Smooth1d => (vec![1024], vec![-7.0], vec![11.0], 0.4),
            Scenario::Banana2d => (vec![97, 129], vec![-20.0, -8.0], vec![20.0, 46.0], 1.5),
            Scenario::ThreeGauss => (vec![641], vec![-16.0], vec![16.0], 0.5),
            Scenario::VkdeDemo => (vec![1501], vec![-30.0], vec![30.0], 1.0),
            Scenario::PhaseSpace => (vec![256], vec![-12.0], vec![12.0], 1.0),
            Scenario::Verify => (vec![256], vec![-12.0], vec![12.0], 1.0),
        };
        ScenarioSpec {
            scenario,
            grid_n: n,
            grid_lo: lo,
            grid_hi: hi,
            sigma,
            lambda: 0.9,
            q: 1.0,
            kappa: None,
            beta: 1.0 / scenario.dim() as f64,
            alpha: 6.0,
            n_samples: 100,
            centers: [-10.0, -5.0, 0.0, 5.0, 10.0].into_iter().map(banana_ridge).collect(),
            seed: 1,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            filter: None,
        }
    }

    /// Applies `settings` over the defaults; `env_out_dir` is used when no
    /// output directory is set.
    pub fn resolve(scenario: Scenario, settings: &Settings, env_out_dir: Option<&str>) -> Result<Self> {
        let mut s = ScenarioSpec::defaults(scenario);
        let d = scenario.dim();
        if let Some(v) = settings.list::<usize>("grid_n", d)? {
            s.grid_n = v;
        }
        if let Some(v) = settings.list::<f64>("grid_lo", d)? {
            s.grid_lo = v;
        }
        if let Some(v) = settings.list::<f64>("grid_hi", d)? {
            s.grid_hi = v;
        }
        if let Some(v) = settings.parsed("sigma")? {
            s.sigma = v;
        }
        if let Some(v) = settings.parsed("lambda")? {
            s.lambda = v;
        }
        if let Some(v) = settings.parsed("q")? {
            s.q = v;
        }
        if let Some(v) = settings.parsed("kappa")? {
            s.kappa = Some(v);
        }
        if let Some(v) = settings.parsed("beta")? {
            s.beta = v;
        }
        if let Some(v) = settings.parsed("alpha")? {
            s.alpha = v;
        }
        if let Some(v) = settings.parsed("n_samples")? {
            s.n_samples = v;
        }
        if let Some(v) = settings.parsed("seed")? {
            s.seed = v;
        }
        if scenario == Scenario::Smooth1d && settings.get("grid_hi").is_none() {
            // room for the compressed bump of width ~1/alpha around x = 8
            s.grid_hi = vec![s.grid_hi[0].max(8.0 + 7.0 / s.alpha)];
        }
        if let Some(v) = settings.get("centers") {
            s.centers = parse_centers(v)?;
        }
        if let Some(v) = settings.get("filter") {
            s.filter = Some(v.to_string());
        }
        match (settings.get("out_dir"), env_out_dir) {
            (Some(v), _) => s.out_dir = PathBuf::from(v),
            (None, Some(v)) if !v.is_empty() => s.out_dir = PathBuf::from(v),
            _ => {}
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let max_n = if self.scenario.dim() == 1 { 4096 } else { 512 };
        for (k, &n) in self.grid_n.iter().enumerate() {
            if !(16..=max_n).contains(&n) {
                return bad(format!("grid_n[{k}] = {n} outside [16, {max_n}]"));
            }
        }
        for k in 0..self.grid_lo.len() {
            let (lo, hi) = (self.grid_lo[k], self.grid_hi[k]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("grid bounds [{lo}, {hi}] on axis {k} are not an interval"));
            }
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} = {v} must be positive")))
            }
        };
        positive("sigma", self.sigma)?;
        positive("q", self.q)?;
        positive("beta", self.beta)?;
        positive("alpha", self.alpha)?;
        if let Some(k) = self.kappa {
            positive("kappa", k)?;
        }
        if !(self.lambda > 0.0 && self.lambda < std::f64::consts::SQRT_2) {
            return bad(format!("lambda = {} outside (0, sqrt 2)", self.lambda));
        }
        if !(2..=1_000_000).contains(&self.n_samples) {
            return bad(format!("n_samples = {} outside [2, 1000000]", self.n_samples));
        }
        Ok(())
    }

    /// The parameters as strings, for the report.
    pub fn params(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("grid_n".into(), join(&self.grid_n));
        m.insert("grid_lo".into(), join(&self.grid_lo));
        m.insert("grid_hi".into(), join(&self.grid_hi));
        m.insert("sigma".into(), self.sigma.to_string());
        m.insert("lambda".into(), self.lambda.to_string());
        m.insert("q".into(), self.q.to_string());
        m.insert("kappa".into(), self.kappa.map_or_else(|| "calibrated".into(), |k| k.to_string()));
        m.insert("beta".into(), self.beta.to_string());
        m.insert("alpha".into(), self.alpha.to_string());
        m.insert("n_samples".into(), self.n_samples.to_string());
        m.insert(
            "centers".into(),
            self.centers.iter().map(|c| format!("{}:{}", c[0], c[1])).collect::<Vec<_>>().join(";"),
        );
        m.insert("seed".into(), self.seed.to_string());
        if let Some(f) = &self.filter {
            m.insert("filter".into(), f.clone());
        }
        m
    }

    pub fn grid(&self) -> Result<adaptconv::Grid> {
        Ok(adaptconv::make_grid(self.scenario.dim(), &self.grid_lo, &self.grid_hi, &self.grid_n)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_precedence() {
        let file = Settings::parse("# comment\nsigma = 0.7\n\nlambda=0.8\nQ = 2\n").unwrap();
        let mut flags = Settings::new();
        flags.set("--sigma", "0.3").unwrap();
        let mut all = file.clone();
        all.merge(&flags);
        let s = ScenarioSpec::resolve(Scenario::Smooth1d, &all, None).unwrap();
        assert_eq!(s.sigma, 0.3);
        assert_eq!(s.lambda, 0.8);
        assert_eq!(s.q, 2.0);
        assert_eq!(s.alpha, 6.0);
    }

    #[test]
    fn out_dir_fallbacks() {
        let empty = Settings::new();
        let s = ScenarioSpec::resolve(Scenario::Smooth1d, &empty, Some("/tmp/x")).unwrap();
        assert_eq!(s.out_dir, PathBuf::from("/tmp/x"));
        let s = ScenarioSpec::resolve(Scenario::Smooth1d, &empty, None).unwrap();
        assert_eq!(s.out_dir, PathBuf::from(DEFAULT_OUT_DIR));
        let mut set = Settings::new();
        set.set("out-dir", "/tmp/y").unwrap();
        let s = ScenarioSpec::resolve(Scenario::Smooth1d, &set, Some("/tmp/x")).unwrap();
        assert_eq!(s.out_dir, PathBuf::from("/tmp/y"));
    }

    #[test]
    fn lists_broadcast_and_check_length() {
        let s = Settings::parse("grid_n = 64\ngrid_lo = -3,-4").unwrap();
        let spec = ScenarioSpec::resolve(Scenario::Banana2d, &s, None).unwrap();
        assert_eq!(spec.grid_n, vec![64, 64]);
        assert_eq!(spec.grid_lo, vec![-3.0, -4.0]);
        let s = Settings::parse("grid_n = 64,64,64").unwrap();
        assert!(ScenarioSpec::resolve(Scenario::Banana2d, &s, None).is_err());
    }

    #[test]
    fn corrupted_inputs_are_config_errors() {
        for text in ["sigma 0.4", "bogus = 1", "sigma = abc", "sigma =", "lambda = 2.0", "grid_n = 3", "centers = 1;2"]
        {
            let r = Settings::parse(text).and_then(|s| ScenarioSpec::resolve(Scenario::Banana2d, &s, None));
            assert!(matches!(r, Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("nope".parse::<Scenario>().is_err());
    }
}
