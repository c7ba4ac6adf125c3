//! Layered settings: built-in defaults, then a config file, then flags.
//!
//! Config files are either a flat JSON object or `key = value` lines (`#`
//! starts a comment). Keys mirror the long flags; the tolerance schedule also
//! accepts the dotted forms `eps.kind`, `eps.e0`, `eps.sigma`, `eps.floor`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nsbundle::harness::Format;
use nsbundle::{EpsSchedule, MuSchedule, RunConfig, Variant, WarmStart};

/// Raw `key -> value` settings, all values as text.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

const KEYS: &[&str] = &[
    "problems",
    "algo",
    "mu",
    "mu-rho",
    "eps-kind",
    "e0",
    "sigma",
    "eps-floor",
    "ftol",
    "max-k",
    "warm",
    "out",
    "format",
    "strict",
    "seed",
    "probe-eta",
    "capacity",
    "inner-cap",
    "threads",
    "accepted-cut",
];

fn canonical(key: &str) -> Option<&'static str> {
    let k = key.trim().to_ascii_lowercase().replace('_', "-");
    let k = match k.as_str() {
        "eps.kind" => "eps-kind",
        "eps.e0" => "e0",
        "eps.sigma" => "sigma",
        "eps.floor" => "eps-floor",
        "mu.rho" => "mu-rho",
        other => other,
    };
    KEYS.iter().copied().find(|c| *c == k)
}

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), String> {
        let k = canonical(key).ok_or_else(|| format!("unknown setting `{key}`"))?;
        self.0.insert(k.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Entries of `other` override those of `self`.
    pub fn merge(&mut self, other: Settings) {
        self.0.extend(other.0);
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_lines(text)
        }
    }

    fn parse_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let obj = value.as_object().ok_or("config must be a JSON object")?;
        let mut s = Settings::default();
        for (k, v) in obj {
            s.set(
                k,
                json_text(v).ok_or_else(|| format!("unsupported value for `{k}`"))?,
            )?;
        }
        Ok(s)
    }

    fn parse_lines(text: &str) -> Result<Self, String> {
        let mut s = Settings::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", n + 1))?;
            s.set(k, v.trim())
                .map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(s)
    }
}

fn json_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        serde_json::Value::Array(items) => items
            .iter()
            .map(|i| match i {
                serde_json::Value::Array(_) | serde_json::Value::Object(_) => None,
                other => json_text(other),
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(",")),
        _ => None,
    }
}

/// Fully resolved invocation.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: RunConfig,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn list(v: &str) -> Vec<&str> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn number<T: std::str::FromStr>(s: &Settings, key: &str) -> Result<Option<T>, String> {
    s.get(key)
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| format!("invalid value `{v}` for --{key}"))
        })
        .transpose()
}

fn boolean(s: &Settings, key: &str) -> Result<Option<bool>, String> {
    s.get(key)
        .map(|v| match v.trim() {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            other => Err(format!("invalid value `{other}` for --{key}")),
        })
        .transpose()
}

impl Plan {
    pub fn from_settings(s: &Settings) -> Result<Self, String> {
        let mut cfg = RunConfig::default();

        if let Some(p) = s.get("problems") {
            cfg.problems = list(p).into_iter().map(String::from).collect();
        }
        if let Some(a) = s.get("algo") {
            cfg.variants = list(a)
                .into_iter()
                .map(|v| v.parse::<Variant>().map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
        }

        let mu = number::<f64>(s, "mu")?.unwrap_or(1.0);
        cfg.mu = match number::<f64>(s, "mu-rho")? {
            Some(rho) => MuSchedule::Geometric { mu0: mu, rho },
            None => MuSchedule::Constant { mu },
        };

        let e0s: Vec<f64> = match s.get("e0") {
            Some(v) => list(v)
                .into_iter()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| format!("invalid value `{x}` for --e0"))
                })
                .collect::<Result<_, _>>()?,
            None => vec![0.1],
        };
        let sigma = number::<f64>(s, "sigma")?.unwrap_or(0.5);
        let floor = number::<f64>(s, "eps-floor")?;
        let kinds = s.get("eps-kind").map_or(vec!["decay"], list);
        cfg.schedules = Vec::new();
        for kind in kinds {
            match kind {
                "const" | "constant" => cfg
                    .schedules
                    .extend(e0s.iter().map(|&eps| EpsSchedule::Constant { eps })),
                "decay" => cfg
                    .schedules
                    .extend(e0s.iter().map(|&e0| EpsSchedule::Decay { e0 })),
                "descent" => cfg.schedules.push(EpsSchedule::Descent { sigma, floor }),
                other => {
                    return Err(format!(
                        "unknown tolerance schedule `{other}` (const, decay, descent)"
                    ))
                }
            }
        }

        if let Some(v) = number(s, "ftol")? {
            cfg.ftol = v;
        }
        if let Some(v) = number(s, "max-k")? {
            cfg.max_outer = v;
        }
        if let Some(w) = s.get("warm") {
            cfg.warm = w.parse::<WarmStart>().map_err(|e| e.to_string())?;
        }
        cfg.strict = boolean(s, "strict")?.unwrap_or(false);
        // all algorithms are deterministic; the seed is accepted for scripting
        // compatibility only
        let _seed: Option<u64> = number(s, "seed")?;
        cfg.probe_eta = number(s, "probe-eta")?;
        cfg.capacity = number(s, "capacity")?;
        if let Some(v) = number(s, "inner-cap")? {
            cfg.appo.inner_cap = v;
        }
        if let Some(v) = boolean(s, "accepted-cut")? {
            cfg.appo.bundle_accepted_cut = v;
        }
        cfg.threads = number(s, "threads")?;

        let format = match s.get("format") {
            Some(f) => f.parse::<Format>().map_err(|e| e.to_string())?,
            None => Format::Table,
        };
        let out = s.get("out").map(PathBuf::from);
        if format == Format::Csv && out.is_none() {
            return Err("--format csv writes one file per run and needs --out DIR".into());
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(Plan {
            config: cfg,
            format,
            out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_files() {
        let s = Settings::parse(
            "# comment\nproblems = CB2, DEM\neps.kind = descent\neps.sigma=0.25\nmax_k = 40\n",
        )
        .unwrap();
        let plan = Plan::from_settings(&s).unwrap();
        assert_eq!(plan.config.problems, ["CB2", "DEM"]);
        assert_eq!(
            plan.config.schedules,
            [EpsSchedule::Descent {
                sigma: 0.25,
                floor: None
            }]
        );
        assert_eq!(plan.config.max_outer, 40);
    }

    #[test]
    fn json_files() {
        let s = Settings::parse(
            r#"{"algo": ["fpba1", "fpba2"], "eps.e0": [0.1, 0.001], "strict": true, "mu": 2}"#,
        )
        .unwrap();
        let plan = Plan::from_settings(&s).unwrap();
        assert_eq!(plan.config.variants, [Variant::Fpba1, Variant::Fpba2]);
        assert_eq!(plan.config.schedules.len(), 2);
        assert!(plan.config.strict);
        assert_eq!(plan.config.mu, MuSchedule::Constant { mu: 2.0 });
    }

    #[test]
    fn later_layers_win() {
        let mut a = Settings::parse("ftol = 1e-3\nwarm = reset").unwrap();
        let mut b = Settings::default();
        b.set("ftol", "1e-8").unwrap();
        a.merge(b);
        let plan = Plan::from_settings(&a).unwrap();
        assert_eq!(plan.config.ftol, 1e-8);
        assert_eq!(plan.config.warm, WarmStart::Reset);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("no equals sign").is_err());
        for (k, v) in [
            ("sigma", "1.5"),
            ("eps-kind", "weird"),
            ("algo", "newton"),
            ("ftol", "abc"),
            ("format", "csv"),
        ] {
            let mut s = Settings::default();
            s.set(k, v).unwrap();
            if k == "sigma" {
                s.set("eps-kind", "descent").unwrap();
            }
            assert!(Plan::from_settings(&s).is_err(), "{k}={v}");
        }
        let mut s = Settings::default();
        s.set("problems", "").unwrap();
        assert!(Plan::from_settings(&s).is_err());
    }
}
