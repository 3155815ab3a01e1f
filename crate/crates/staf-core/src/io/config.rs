//! Flat key=value configuration files.
//!
//! One `key = value` pair per line; blank lines and `#` comments are
//! ignored. No nesting. Later keys override earlier ones within a file;
//! callers layer files under command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use super::IoError;

pub type ConfigMap = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> Result<ConfigMap, IoError> {
    let mut out = ConfigMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| IoError::Config {
            line: idx + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(IoError::Config { line: idx + 1, message: "empty key".into() });
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<ConfigMap, IoError> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let text = "# experiment settings\n\ntau = 5\nlr=1e-3\n  omega0 =30\n";
        let map = parse_config(text).unwrap();
        assert_eq!(map.get("tau").unwrap(), "5");
        assert_eq!(map.get("lr").unwrap(), "1e-3");
        assert_eq!(map.get("omega0").unwrap(), "30");
    }

    #[test]
    fn later_keys_override() {
        let map = parse_config("a=1\na=2\n").unwrap();
        assert_eq!(map.get("a").unwrap(), "2");
    }

    #[test]
    fn rejects_non_pairs() {
        match parse_config("tau 5") {
            Err(IoError::Config { line: 1, .. }) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
