//! Plain-text key=value experiment configuration with CLI-flag overrides.
//!
//! A config file holds one `key=value` pair per line (`#` comments and the
//! special key `command` are allowed); flags of the form `--key value`
//! override file entries. The canonical text form round-trips losslessly.

use std::collections::BTreeMap;

#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub command: String,
    pub entries: BTreeMap<String, String>,
}

#[derive(Debug, Default)]
pub struct ValidationErrors(pub Vec<String>);

impl std::fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn parse_file_text(text: &str) -> Result<Self, ValidationErrors> {
        let mut cfg = ExperimentConfig::default();
        let mut errors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let key = k.trim().to_string();
                    let value = v.trim().to_string();
                    if key == "command" {
                        cfg.command = value;
                    } else {
                        cfg.entries.insert(key, value);
                    }
                }
                None => errors.push(format!(
                    "line {}: expected key=value, got {raw:?}",
                    lineno + 1
                )),
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ValidationErrors(errors))
        }
    }

    /// Canonical text form; parsing it back yields an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.command.is_empty() {
            out.push_str(&format!("command={}\n", self.command));
        }
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

/// Typed accessor that accumulates field-level errors instead of failing
/// at the first one.
pub struct Fields<'a> {
    cfg: &'a ExperimentConfig,
    pub errors: Vec<String>,
}

impl<'a> Fields<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Fields {
            cfg,
            errors: Vec::new(),
        }
    }

    pub fn req_f64(&mut self, key: &str) -> f64 {
        match self.cfg.get(key) {
            Some(v) => self.parse_f64(key, v),
            None => {
                self.errors.push(format!("{key}: required"));
                f64::NAN
            }
        }
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        match self.cfg.get(key) {
            Some(v) => self.parse_f64(key, v),
            None => default,
        }
    }

    fn parse_f64(&mut self, key: &str, v: &str) -> f64 {
        v.parse().unwrap_or_else(|_| {
            self.errors.push(format!("{key}: not a number: {v:?}"));
            f64::NAN
        })
    }

    pub fn req_usize(&mut self, key: &str) -> usize {
        match self.cfg.get(key) {
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors.push(format!("{key}: not an integer: {v:?}"));
                0
            }),
            None => {
                self.errors.push(format!("{key}: required"));
                0
            }
        }
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> usize {
        match self.cfg.get(key) {
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors.push(format!("{key}: not an integer: {v:?}"));
                default
            }),
            None => default,
        }
    }

    pub fn u64_or(&mut self, key: &str, default: u64) -> u64 {
        match self.cfg.get(key) {
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors.push(format!("{key}: not an integer: {v:?}"));
                default
            }),
            None => default,
        }
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        self.cfg.get(key).unwrap_or(default).to_string()
    }

    pub fn push_error(&mut self, msg: String) {
        self.errors.push(msg);
    }

    pub fn finish(self) -> Result<(), ValidationErrors> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(self.errors))
        }
    }
}

/// Parse `--key value` (or `--key=value`) flags into config overrides.
pub fn apply_flags(
    cfg: &mut ExperimentConfig,
    args: &[String],
) -> Result<(), ValidationErrors> {
    let mut errors = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        if let Some(stripped) = arg.strip_prefix("--") {
            if let Some((k, v)) = stripped.split_once('=') {
                cfg.set(k, v);
                i += 1;
            } else if i + 1 < args.len() {
                cfg.set(stripped, &args[i + 1]);
                i += 2;
            } else {
                errors.push(format!("flag --{stripped} is missing its value"));
                i += 1;
            }
        } else {
            errors.push(format!("unexpected argument {arg:?}"));
            i += 1;
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let text = "command=simulate\na=1\nn=64\ntheta=0\n";
        let cfg = ExperimentConfig::parse_file_text(text).unwrap();
        assert_eq!(cfg.command, "simulate");
        assert_eq!(cfg.to_text(), text);
        let again = ExperimentConfig::parse_file_text(&cfg.to_text()).unwrap();
        assert_eq!(again.to_text(), cfg.to_text());
    }

    #[test]
    fn flags_override() {
        let mut cfg = ExperimentConfig::parse_file_text("command=sde\na=1\n").unwrap();
        apply_flags(
            &mut cfg,
            &["--a".to_string(), "2".to_string(), "--h=0.001".to_string()],
        )
        .unwrap();
        assert_eq!(cfg.get("a"), Some("2"));
        assert_eq!(cfg.get("h"), Some("0.001"));
    }

    #[test]
    fn errors_accumulate() {
        let cfg = ExperimentConfig::parse_file_text("command=x\na=zzz\n").unwrap();
        let mut f = Fields::new(&cfg);
        let _ = f.req_f64("a");
        let _ = f.req_usize("n");
        let err = f.finish().unwrap_err();
        assert_eq!(err.0.len(), 2);
    }
}
