//! INI-style experiment configuration: `[problem]`, `[smoothers]`, `[run]`
//! sections of `key = value` lines. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use saddle_core::problems::CMode;

pub const SECTIONS: [&str; 3] = ["problem", "smoothers", "run"];
const PROBLEM_KEYS: [&str; 7] = ["kind", "grid", "viscosity", "c_weight", "n", "m", "c_mode"];
const SMOOTHER_KEYS: [&str; 5] = ["a", "s", "rescale", "margin", "ium_smoother"];
const RUN_KEYS: [&str; 6] = ["methods", "k_max", "tol", "gmres_tol", "seed", "output"];

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "problem" => &PROBLEM_KEYS,
        "smoothers" => &SMOOTHER_KEYS,
        _ => &RUN_KEYS,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Line(usize),
    /// 1-based position among the command-line overrides.
    Override(usize),
    /// Not present anywhere.
    Absent,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Override(i) => write!(f, "override #{i}"),
            Origin::Absent => f.write_str("config"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigErrorKind {
    UnknownKey { key: String, suggestion: Option<String> },
    MissingRequired { key: String },
    BadValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: Origin,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.origin)?;
        match &self.kind {
            ConfigErrorKind::UnknownKey { key, suggestion: Some(s) } => write!(f, "unknown key `{key}` (did you mean `{s}`?)"),
            ConfigErrorKind::UnknownKey { key, suggestion: None } => write!(f, "unknown key `{key}`"),
            ConfigErrorKind::MissingRequired { key } => write!(f, "missing required key `{key}`"),
            ConfigErrorKind::BadValue { key, value, reason } => write!(f, "bad value `{value}` for `{key}`: {reason}"),
        }
    }
}

/// All problems found in one config, in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    MacStokes { grid: usize, viscosity: f64 },
    MixedPoisson { grid: usize, c_weight: f64 },
    Random { n: usize, m: usize, c_mode: CMode },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherA {
    Exact(f64),
    Jacobi(f64),
    Sgs(f64),
    TwoGrid { smooths: usize, damping: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherS {
    Exact,
    Jacobi(f64),
    Sgs(f64),
}

/// Matrix the Schur smoother is built on and rescaled to dominate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleTarget {
    SBar,
    S,
    /// Build on S̄, no rescaling.
    None,
}

/// Velocity operator used in the IUM update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IumSmoother {
    Symmetrized,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MethodSpec {
    Bwy,
    Sium,
    Ium,
    GmresG,
    GmresSplit,
}

impl MethodSpec {
    pub fn name(self) -> &'static str {
        match self {
            MethodSpec::Bwy => "bwy",
            MethodSpec::Sium => "sium",
            MethodSpec::Ium => "ium",
            MethodSpec::GmresG => "gmres_G",
            MethodSpec::GmresSplit => "gmres_split",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "bwy" => MethodSpec::Bwy,
            "sium" => MethodSpec::Sium,
            "ium" => MethodSpec::Ium,
            "gmres_G" | "gmres_g" => MethodSpec::GmresG,
            "gmres_split" => MethodSpec::GmresSplit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub smoother_a: SmootherA,
    pub smoother_s: SmootherS,
    pub rescale: RescaleTarget,
    pub margin: f64,
    pub ium_smoother: IumSmoother,
    /// Sorted, without duplicates.
    pub methods: Vec<MethodSpec>,
    pub k_max: usize,
    pub tol: f64,
    pub gmres_tol: f64,
    pub seed: u64,
    pub output: PathBuf,
}

pub const DEFAULT_K_MAX: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_GMRES_TOL: f64 = 1e-8;
pub const DEFAULT_MARGIN: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT: &str = "out";

impl ExperimentConfig {
    /// Canonical text of every setting that affects results (the output
    /// path is excluded).
    pub fn canonical(&self) -> String {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        format!(
            "problem={:?};a={:?};s={:?};rescale={:?};margin={:e};ium={:?};methods={};k_max={};tol={:e};gmres_tol={:e};seed={}",
            self.problem,
            self.smoother_a,
            self.smoother_s,
            self.rescale,
            self.margin,
            self.ium_smoother,
            methods.join(","),
            self.k_max,
            self.tol,
            self.gmres_tol,
            self.seed
        )
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Default)]
struct Raw {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Raw {
    fn insert(&mut self, section: &str, key: &str, value: &str, origin: Origin) {
        if !SECTIONS.contains(&section) {
            return;
        }
        if !keys_of(section).contains(&key) {
            self.errors.push(ConfigError {
                origin,
                kind: ConfigErrorKind::UnknownKey { key: key.to_string(), suggestion: suggest_key(section, key) },
            });
            return;
        }
        let slot = (section.to_string(), key.to_string());
        if let (Some(prev), Origin::Line(_)) = (self.entries.get(&slot), origin) {
            self.errors.push(ConfigError {
                origin,
                kind: ConfigErrorKind::BadValue {
                    key: format!("{section}.{key}"),
                    value: value.to_string(),
                    reason: format!("duplicate key, first set at {}", prev.origin),
                },
            });
            return;
        }
        self.entries.insert(slot, Entry { value: value.to_string(), origin });
    }
}

fn closest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

fn suggest_key(section: &str, key: &str) -> Option<String> {
    closest(key, keys_of(section).iter().copied()).or_else(|| {
        let mut all = Vec::new();
        for s in SECTIONS {
            for k in keys_of(s) {
                all.push((s, *k));
            }
        }
        let hit = closest(key, all.iter().map(|(_, k)| *k))?;
        let (s, k) = all.iter().find(|(_, k)| *k == hit)?;
        Some(format!("[{s}] {k}"))
    })
}

fn strip_comment(line: &str) -> &str {
    let cut = line.find(['#', ';']).unwrap_or(line.len());
    line[..cut].trim()
}

fn read_text(text: &str) -> Raw {
    let mut raw = Raw::default();
    let mut section: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let origin = Origin::Line(i + 1);
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                raw.errors.push(ConfigError {
                    origin,
                    kind: ConfigErrorKind::UnknownKey { key: format!("[{name}]"), suggestion: closest(name, SECTIONS).map(|s| s.to_string()) },
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            raw.errors.push(ConfigError {
                origin,
                kind: ConfigErrorKind::BadValue { key: String::new(), value: line.to_string(), reason: "expected `key = value`".into() },
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match &section {
            Some(s) => raw.insert(&s.clone(), key, value, origin),
            None => raw.errors.push(ConfigError {
                origin,
                kind: ConfigErrorKind::BadValue { key: key.to_string(), value: value.to_string(), reason: "key outside any section".into() },
            }),
        }
    }
    raw
}

/// Parses a config; every problem found is reported, not just the first.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    parse_config_with_overrides(text, &[])
}

/// Overrides are `section.key=value` and replace (or add) the file's value.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigErrors> {
    let mut raw = read_text(text);
    for (i, ov) in overrides.iter().enumerate() {
        let origin = Origin::Override(i + 1);
        let parsed = ov.split_once('=').and_then(|(k, v)| k.trim().split_once('.').map(|(s, k)| (s.trim(), k.trim(), v.trim())));
        match parsed {
            Some((s, k, v)) if SECTIONS.contains(&s) => {
                raw.entries.remove(&(s.to_string(), k.to_string()));
                raw.insert(s, k, v, origin);
            }
            Some((s, _, _)) => raw.errors.push(ConfigError {
                origin,
                kind: ConfigErrorKind::UnknownKey { key: format!("[{s}]"), suggestion: closest(s, SECTIONS).map(|s| s.to_string()) },
            }),
            None => raw.errors.push(ConfigError {
                origin,
                kind: ConfigErrorKind::BadValue { key: String::new(), value: ov.clone(), reason: "expected `section.key=value`".into() },
            }),
        }
    }
    let mut v = Validator { raw: &raw, errors: Vec::new() };
    let cfg = v.build();
    let mut errors = raw.errors.clone();
    errors.extend(v.errors);
    errors.sort_by_key(|e| e.origin);
    match cfg {
        Some(cfg) if errors.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(errors)),
    }
}

struct Validator<'a> {
    raw: &'a Raw,
    errors: Vec<ConfigError>,
}

/// `name(arg, ...)` or bare `name`.
fn call_syntax(value: &str) -> Option<(&str, Vec<&str>)> {
    match value.split_once('(') {
        None => Some((value.trim(), Vec::new())),
        Some((name, rest)) => {
            let args = rest.trim().strip_suffix(')')?;
            let args = if args.trim().is_empty() { Vec::new() } else { args.split(',').map(str::trim).collect() };
            Some((name.trim(), args))
        }
    }
}

impl Validator<'_> {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.raw.entries.get(&(section.to_string(), key.to_string()))
    }

    fn bad(&mut self, section: &str, key: &str, reason: impl Into<String>) {
        let e = self.get(section, key).cloned();
        let (value, origin) = e.map(|e| (e.value, e.origin)).unwrap_or((String::new(), Origin::Absent));
        self.errors.push(ConfigError { origin, kind: ConfigErrorKind::BadValue { key: format!("{section}.{key}"), value, reason: reason.into() } });
    }

    fn missing(&mut self, section: &str, key: &str) {
        self.errors.push(ConfigError { origin: Origin::Absent, kind: ConfigErrorKind::MissingRequired { key: format!("{section}.{key}") } });
    }

    fn number<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: Option<T>, check: impl Fn(&T) -> Result<(), String>) -> Option<T> {
        let Some(e) = self.get(section, key) else {
            if default.is_none() {
                self.missing(section, key);
            }
            return default;
        };
        match e.value.parse::<T>() {
            Ok(x) => match check(&x) {
                Ok(()) => Some(x),
                Err(reason) => {
                    self.bad(section, key, reason);
                    None
                }
            },
            Err(_) => {
                self.bad(section, key, "not a number");
                None
            }
        }
    }

    /// Rejects keys that have no meaning for the chosen problem kind.
    fn forbid(&mut self, key: &str, kind: &str) {
        if self.get("problem", key).is_some() {
            self.bad("problem", key, format!("does not apply to kind = {kind}"));
        }
    }

    fn build(&mut self) -> Option<ExperimentConfig> {
        let problem = self.problem();
        let is_grid = matches!(problem, Some(ProblemSpec::MacStokes { .. } | ProblemSpec::MixedPoisson { .. }));
        let smoother_a = self.smoother_a(is_grid);
        let smoother_s = self.smoother_s();
        let rescale = self.rescale();
        let margin = self.number("smoothers", "margin", Some(DEFAULT_MARGIN), |x: &f64| {
            if x.is_finite() && *x >= 0.0 {
                Ok(())
            } else {
                Err("must be finite and >= 0".into())
            }
        });
        let ium_smoother = match self.get("smoothers", "ium_smoother").map(|e| e.value.clone()) {
            None => Some(IumSmoother::Symmetrized),
            Some(v) if v == "symmetrized" => Some(IumSmoother::Symmetrized),
            Some(v) if v == "plain" => Some(IumSmoother::Plain),
            Some(_) => {
                self.bad("smoothers", "ium_smoother", "expected symmetrized or plain");
                None
            }
        };
        let methods = self.methods();
        if let (Some(IumSmoother::Plain), Some(ms)) = (ium_smoother, &methods) {
            if ms.contains(&MethodSpec::Ium) {
                self.bad(
                    "smoothers",
                    "ium_smoother",
                    "ium requires its velocity update to use the symmetrized smoother R_bar_A = 2 R_A - R_A A R_A; \
                     its contraction bound does not hold for the plain R_A",
                );
            }
        }
        let k_max = self.number("run", "k_max", Some(DEFAULT_K_MAX), |x: &usize| if *x >= 1 { Ok(()) } else { Err("must be >= 1".into()) });
        let unit_open = |x: &f64| if *x > 0.0 && *x < 1.0 { Ok(()) } else { Err("must be in (0, 1)".to_string()) };
        let tol = self.number("run", "tol", Some(DEFAULT_TOL), unit_open);
        let gmres_tol = self.number("run", "gmres_tol", Some(DEFAULT_GMRES_TOL), unit_open);
        let seed = self.number("run", "seed", Some(DEFAULT_SEED), |_| Ok(()));
        let output = self.get("run", "output").map(|e| PathBuf::from(&e.value)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
        Some(ExperimentConfig {
            problem: problem?,
            smoother_a: smoother_a?,
            smoother_s: smoother_s?,
            rescale: rescale?,
            margin: margin?,
            ium_smoother: ium_smoother?,
            methods: methods?,
            k_max: k_max?,
            tol: tol?,
            gmres_tol: gmres_tol?,
            seed: seed?,
            output,
        })
    }

    fn problem(&mut self) -> Option<ProblemSpec> {
        let Some(kind) = self.get("problem", "kind").map(|e| e.value.clone()) else {
            self.missing("problem", "kind");
            return None;
        };
        let grid_check = |g: &usize| if *g >= 4 && g % 2 == 0 { Ok(()) } else { Err("must be even and >= 4".to_string()) };
        let positive = |x: &f64| if x.is_finite() && *x > 0.0 { Ok(()) } else { Err("must be finite and > 0".to_string()) };
        match kind.as_str() {
            "mac_stokes" => {
                for k in ["c_weight", "n", "m", "c_mode"] {
                    self.forbid(k, &kind);
                }
                let grid = self.number("problem", "grid", Some(8), grid_check);
                let viscosity = self.number("problem", "viscosity", Some(1.0), positive);
                Some(ProblemSpec::MacStokes { grid: grid?, viscosity: viscosity? })
            }
            "mixed_poisson" => {
                for k in ["viscosity", "n", "m", "c_mode"] {
                    self.forbid(k, &kind);
                }
                let grid = self.number("problem", "grid", Some(8), grid_check);
                let c_weight = self.number("problem", "c_weight", Some(1.0), |x: &f64| {
                    if x.is_finite() && *x >= 0.0 {
                        Ok(())
                    } else {
                        Err("must be finite and >= 0".into())
                    }
                });
                Some(ProblemSpec::MixedPoisson { grid: grid?, c_weight: c_weight? })
            }
            "random" => {
                for k in ["grid", "viscosity", "c_weight"] {
                    self.forbid(k, &kind);
                }
                let n = self.number("problem", "n", None, |x: &usize| if *x >= 1 { Ok(()) } else { Err("must be >= 1".into()) });
                let m = self.number("problem", "m", None, |x: &usize| if *x >= 1 { Ok(()) } else { Err("must be >= 1".into()) });
                if let (Some(n), Some(m)) = (n, m) {
                    if m > n {
                        self.bad("problem", "m", format!("must not exceed n = {n} (B needs full row rank)"));
                        return None;
                    }
                }
                let c_mode = match self.get("problem", "c_mode").map(|e| e.value.clone()).as_deref() {
                    None | Some("zero") => Some(CMode::Zero),
                    Some("diag") => Some(CMode::Diag),
                    Some("laplace") => Some(CMode::Laplace),
                    Some(_) => {
                        self.bad("problem", "c_mode", "expected zero, diag or laplace");
                        None
                    }
                };
                Some(ProblemSpec::Random { n: n?, m: m?, c_mode: c_mode? })
            }
            _ => {
                let hint = closest(&kind, ["mac_stokes", "mixed_poisson", "random"]).map(|s| format!(" (did you mean {s}?)")).unwrap_or_default();
                self.bad("problem", "kind", format!("expected mac_stokes, mixed_poisson or random{hint}"));
                None
            }
        }
    }

    fn float_arg(&mut self, key: &str, args: &[&str], idx: usize, default: Option<f64>, name: &str) -> Option<f64> {
        match args.get(idx) {
            None => {
                if default.is_none() {
                    self.bad("smoothers", key, format!("missing argument {name}"));
                }
                default
            }
            Some(a) => match a.parse::<f64>() {
                Ok(x) if x.is_finite() => Some(x),
                _ => {
                    self.bad("smoothers", key, format!("{name} is not a number"));
                    None
                }
            },
        }
    }

    fn damping(&mut self, key: &str, args: &[&str], idx: usize, default: Option<f64>) -> Option<f64> {
        let d = self.float_arg(key, args, idx, default, "damping")?;
        if d > 0.0 && d <= 1.0 {
            Some(d)
        } else {
            self.bad("smoothers", key, "damping must be in (0, 1]");
            None
        }
    }

    fn positive(&mut self, key: &str, args: &[&str], default: Option<f64>, name: &str) -> Option<f64> {
        let x = self.float_arg(key, args, 0, default, name)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.bad("smoothers", key, format!("{name} must be > 0"));
            None
        }
    }

    fn arity(&mut self, key: &str, args: &[&str], max: usize) -> bool {
        if args.len() > max {
            self.bad("smoothers", key, format!("takes at most {max} argument(s)"));
            false
        } else {
            true
        }
    }

    fn smoother_a(&mut self, is_grid: bool) -> Option<SmootherA> {
        let Some(value) = self.get("smoothers", "a").map(|e| e.value.clone()) else {
            return Some(SmootherA::Sgs(0.95));
        };
        let Some((name, args)) = call_syntax(&value) else {
            self.bad("smoothers", "a", "expected name(args)");
            return None;
        };
        match name {
            "exact" if self.arity("a", &args, 1) => Some(SmootherA::Exact(self.positive("a", &args, Some(1.0), "scale")?)),
            "jacobi" if self.arity("a", &args, 1) => Some(SmootherA::Jacobi(self.positive("a", &args, None, "theta")?)),
            "sgs" if self.arity("a", &args, 1) => Some(SmootherA::Sgs(self.damping("a", &args, 0, None)?)),
            "two_grid" if self.arity("a", &args, 2) => {
                if !is_grid {
                    self.bad("smoothers", "a", "two_grid needs a grid problem (mac_stokes or mixed_poisson)");
                    return None;
                }
                let smooths = match args.first().map(|a| a.parse::<usize>()) {
                    None => 1,
                    Some(Ok(s)) if s >= 1 => s,
                    Some(_) => {
                        self.bad("smoothers", "a", "smoothing count must be an integer >= 1");
                        return None;
                    }
                };
                Some(SmootherA::TwoGrid { smooths, damping: self.damping("a", &args, 1, Some(0.95))? })
            }
            "exact" | "jacobi" | "sgs" | "two_grid" => None,
            _ => {
                self.bad("smoothers", "a", "expected exact(scale), jacobi(theta), sgs(damping) or two_grid(smooths, damping)");
                None
            }
        }
    }

    fn smoother_s(&mut self) -> Option<SmootherS> {
        let Some(value) = self.get("smoothers", "s").map(|e| e.value.clone()) else {
            return Some(SmootherS::Jacobi(1.0));
        };
        let Some((name, args)) = call_syntax(&value) else {
            self.bad("smoothers", "s", "expected name(args)");
            return None;
        };
        match name {
            "exact" if self.arity("s", &args, 0) => Some(SmootherS::Exact),
            "jacobi" if self.arity("s", &args, 1) => Some(SmootherS::Jacobi(self.positive("s", &args, Some(1.0), "theta")?)),
            "sgs" if self.arity("s", &args, 1) => Some(SmootherS::Sgs(self.damping("s", &args, 0, Some(1.0))?)),
            "exact" | "jacobi" | "sgs" => None,
            _ => {
                self.bad("smoothers", "s", "expected exact, jacobi(theta) or sgs(damping)");
                None
            }
        }
    }

    fn rescale(&mut self) -> Option<RescaleTarget> {
        match self.get("smoothers", "rescale").map(|e| e.value.clone()).as_deref() {
            None | Some("S_bar") => Some(RescaleTarget::SBar),
            Some("S") => Some(RescaleTarget::S),
            Some("none") => Some(RescaleTarget::None),
            Some(_) => {
                self.bad("smoothers", "rescale", "expected S_bar, S or none");
                None
            }
        }
    }

    fn methods(&mut self) -> Option<Vec<MethodSpec>> {
        let Some(value) = self.get("run", "methods").map(|e| e.value.clone()) else {
            return Some(vec![MethodSpec::Bwy, MethodSpec::Sium, MethodSpec::Ium]);
        };
        let mut out = Vec::new();
        let mut ok = true;
        for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match MethodSpec::parse(item) {
                Some(m) => out.push(m),
                None => {
                    let names = ["bwy", "sium", "ium", "gmres_G", "gmres_split"];
                    let hint = closest(item, names).map(|s| format!(" (did you mean {s}?)")).unwrap_or_default();
                    self.bad("run", "methods", format!("unknown method `{item}`{hint}"));
                    ok = false;
                }
            }
        }
        if ok && out.is_empty() {
            self.bad("run", "methods", "list is empty");
            ok = false;
        }
        out.sort();
        out.dedup();
        ok.then_some(out)
    }
}
