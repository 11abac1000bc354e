//! Flat `key = value` sweep configuration files.

use std::path::{Path, PathBuf};

use paceforge_core::harness::SweepConfig;
use paceforge_core::pid::ResponseKind;

/// Sweep settings plus the output paths that can also live in a file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FileSettings {
    pub sweep: SweepConfig,
    pub out: Option<PathBuf>,
    pub records: Option<PathBuf>,
}

/// Parses a config file. Keys match the long flag names; `_` and `-` are
/// interchangeable and `#` starts a comment.
pub fn parse(text: &str) -> Result<FileSettings, String> {
    let mut s = FileSettings::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let key = key.trim().replace('_', "-");
        apply(&mut s, &key, value.trim()).map_err(|e| format!("line {}: {e}", n + 1))?;
    }
    Ok(s)
}

pub fn load(path: &Path) -> Result<FileSettings, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn apply(s: &mut FileSettings, key: &str, v: &str) -> Result<(), String> {
    let c = &mut s.sweep;
    match key {
        "m" => c.m = num(v)?,
        "d" => c.d = num(v)?,
        "T" | "t" | "horizon" => c.horizon = num(v)?,
        "instances" => c.instances = num(v)?,
        "trials" => c.trials = num(v)?,
        "seed" => c.seed = num(v)?,
        "map" => c.map = v.parse::<ResponseKind>().map_err(|e| e.to_string())?,
        "s-grid" => c.s_grid = list(v)?,
        "beta-grid" => c.beta_grid = list(v)?,
        "alpha-d-grid" => c.alpha_d_grid = list(v)?,
        "alpha-i-grid" => c.alpha_i_grid = list(v)?,
        "tol" => c.tol = num(v)?,
        "exact-tiny" => c.exact_tiny = num(v)?,
        "mu1-frac" => c.mu1_frac = Some(num(v)?),
        "out" => s.out = Some(PathBuf::from(v)),
        "records" => s.records = Some(PathBuf::from(v)),
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

pub fn list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|x| num(x.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let text = "\
# small run
m = 3
d=2
T = 50
instances = 2
trials = 1
seed = 9
map = entropy
s_grid = 1, 10
beta-grid = 0,0.9
alpha_d_grid = 0
alpha_i_grid = 0,0.5
tol = 1e-3
exact_tiny = true
mu1_frac = 0.05
out = a.csv  # trailing comment
records = r.csv
";
        let s = parse(text).unwrap();
        assert_eq!((s.sweep.m, s.sweep.d, s.sweep.horizon), (3, 2, 50));
        assert_eq!((s.sweep.instances, s.sweep.trials, s.sweep.seed), (2, 1, 9));
        assert_eq!(s.sweep.map, ResponseKind::Log);
        assert_eq!(s.sweep.s_grid, vec![1.0, 10.0]);
        assert_eq!(s.sweep.beta_grid, vec![0.0, 0.9]);
        assert_eq!(s.sweep.alpha_d_grid, vec![0.0]);
        assert_eq!(s.sweep.alpha_i_grid, vec![0.0, 0.5]);
        assert_eq!(s.sweep.tol, 1e-3);
        assert!(s.sweep.exact_tiny);
        assert_eq!(s.sweep.mu1_frac, Some(0.05));
        assert_eq!(s.out, Some(PathBuf::from("a.csv")));
        assert_eq!(s.records, Some(PathBuf::from("r.csv")));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse("colour = red").unwrap_err().contains("unknown key"));
        assert!(parse("m = three").unwrap_err().contains("line 1"));
        assert!(parse("just words").is_err());
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("\n# nothing\n").unwrap().sweep, SweepConfig::default());
    }
}
