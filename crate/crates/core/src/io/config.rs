//! Plain-text suite configuration.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment            (also `;`)
//! [section name]       starts a section
//! key = value          entry of the current section
//! ```
//!
//! Entries before the first header belong to the unnamed top section. Keys
//! are unique within a section.
//!
//! For benchmark suites the top section accepts `repetitions` (default 1) and
//! `jobs` (default 1). Every named section is a grid of cells. Keys `n`,
//! `c_r`, `c_p`, `snr_db` and `algorithm` take comma-separated lists and the
//! cells are their cartesian product. Other cell keys: `rows`, `seed`
//! (default 1), `delta_rule` (`dimension` or `entries`), `tol` (a number,
//! `varrho` or `<factor>*varrho`, default `varrho`), `max_iters`, `rho0`,
//! `rho_growth` (`sqrtk`, `arithmetic`, `geometric:<g>`), `rho_max`, `mu`,
//! `nu`, `svd` (`full` or `partial`) and `theta` (`bracketed` or `quartic`).
//! NSA cells start from the benchmark settings (`rho0 = 1/||D||_2`, doubling).

use super::IoError;
use crate::bench::{SuiteCell, TolRule};
use crate::instance::{DeltaRule, GenParams};
use crate::model::{Algorithm, RhoGrowth, SolverConfig, SvdMode};
use crate::subproblem::ThetaMethod;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    /// Header line, 0 for the top section.
    pub line: usize,
    /// `(key, value, line)` in file order.
    pub entries: Vec<(String, String, usize)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    /// The unnamed top section comes first.
    pub sections: Vec<Section>,
}

impl Config {
    pub fn top(&self) -> &Section {
        &self.sections[0]
    }

    pub fn named(&self) -> &[Section] {
        &self.sections[1..]
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Config { line, msg: msg.into() }
}

pub fn parse_config(text: &str) -> Result<Config, IoError> {
    let mut sections = vec![Section::default()];
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(ln, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(cfg_err(ln, "empty section name"));
            }
            sections.push(Section { name: name.to_string(), line: ln, entries: Vec::new() });
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| cfg_err(ln, format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(cfg_err(ln, "empty key"));
        }
        let sec = sections.last_mut().expect("top section");
        if sec.get(k).is_some() {
            return Err(cfg_err(ln, format!("duplicate key {k:?}")));
        }
        sec.entries.push((k.to_string(), v.to_string(), ln));
    }
    Ok(Config { sections })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub cells: Vec<SuiteCell>,
    pub repetitions: usize,
    pub jobs: usize,
}

fn parse_one<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T, IoError> {
    v.trim().parse().map_err(|_| cfg_err(line, format!("bad value {v:?} for {key}")))
}

fn list<T: std::str::FromStr>(sec: &Section, key: &str, default: Option<T>) -> Result<Vec<T>, IoError> {
    match sec.get(key) {
        Some((v, line)) => v.split(',').map(|x| parse_one(x, line, key)).collect(),
        None => default
            .map(|d| vec![d])
            .ok_or_else(|| cfg_err(sec.line, format!("section [{}] needs {key}", sec.name))),
    }
}

fn opt<T: std::str::FromStr>(sec: &Section, key: &str) -> Result<Option<T>, IoError> {
    sec.get(key).map(|(v, l)| parse_one(v, l, key)).transpose()
}

fn parse_tol(v: &str, line: usize) -> Result<(f64, TolRule), IoError> {
    let v = v.replace(' ', "");
    if v == "varrho" {
        return Ok((1.0, TolRule::TimesVarrho(1.0)));
    }
    if let Some(f) = v.strip_suffix("*varrho") {
        return Ok((1.0, TolRule::TimesVarrho(parse_one(f, line, "tol")?)));
    }
    Ok((parse_one(&v, line, "tol")?, TolRule::Fixed))
}

const CELL_KEYS: [&str; 17] = [
    "n", "rows", "c_r", "c_p", "snr_db", "seed", "delta_rule", "algorithm", "tol", "max_iters", "rho0",
    "rho_growth", "rho_max", "mu", "nu", "svd", "theta",
];

fn section_cells(sec: &Section) -> Result<Vec<SuiteCell>, IoError> {
    if let Some((k, _, l)) = sec.entries.iter().find(|(k, _, _)| !CELL_KEYS.contains(&k.as_str())) {
        return Err(cfg_err(*l, format!("unknown key {k:?}")));
    }
    let ns: Vec<usize> = list(sec, "n", None)?;
    let crs: Vec<f64> = list(sec, "c_r", None)?;
    let cps: Vec<f64> = list(sec, "c_p", None)?;
    let snrs: Vec<f64> = list(sec, "snr_db", None)?;
    let algs = match sec.get("algorithm") {
        Some((v, l)) => v
            .split(',')
            .map(|a| Algorithm::parse(a.trim()).ok_or_else(|| cfg_err(l, format!("unknown algorithm {a:?}"))))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![Algorithm::Nsa],
    };
    let rows: Option<usize> = opt(sec, "rows")?;
    let seed: u64 = opt(sec, "seed")?.unwrap_or(1);
    let delta_rule = match sec.get("delta_rule") {
        None | Some(("dimension", _)) => DeltaRule::Dimension,
        Some(("entries", _)) => DeltaRule::EntryCount,
        Some((v, l)) => return Err(cfg_err(l, format!("unknown delta_rule {v:?}"))),
    };
    let (tol, tol_rule) = match sec.get("tol") {
        Some((v, l)) => parse_tol(v, l)?,
        None => (1.0, TolRule::TimesVarrho(1.0)),
    };
    let mut cells = Vec::new();
    for &alg in &algs {
        let mut config = match alg {
            Algorithm::Nsa => SolverConfig::nsa_benchmark(tol),
            _ => SolverConfig { tol, ..SolverConfig::new(alg) },
        };
        if let Some(v) = opt(sec, "max_iters")? {
            config.max_iters = v;
        }
        config.rho0 = opt(sec, "rho0")?.or(config.rho0);
        config.rho_max = opt(sec, "rho_max")?.or(config.rho_max);
        config.mu = opt(sec, "mu")?;
        config.nu = opt(sec, "nu")?;
        if let Some((v, l)) = sec.get("rho_growth") {
            config.rho_growth = RhoGrowth::parse(v).ok_or_else(|| cfg_err(l, format!("unknown rho_growth {v:?}")))?;
        }
        match sec.get("svd") {
            None => {}
            Some(("full", _)) => config.svd_mode = SvdMode::Full,
            Some(("partial", _)) => config.svd_mode = SvdMode::PartialWithPrediction,
            Some((v, l)) => return Err(cfg_err(l, format!("unknown svd {v:?}"))),
        }
        match sec.get("theta") {
            None => {}
            Some(("bracketed", _)) => config.theta_method = ThetaMethod::Bracketed,
            Some(("quartic", _)) => config.theta_method = ThetaMethod::Quartic,
            Some((v, l)) => return Err(cfg_err(l, format!("unknown theta {v:?}"))),
        }
        for &n in &ns {
            for &c_r in &crs {
                for &c_p in &cps {
                    for &snr_db in &snrs {
                        let gen = GenParams { rows, delta_rule, ..GenParams::new(n, c_r, c_p, snr_db, seed) };
                        gen.validate().map_err(|e| cfg_err(sec.line, format!("[{}]: {e}", sec.name)))?;
                        cells.push(SuiteCell { gen, config: config.clone(), tol_rule });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Expands a parsed configuration into benchmark cells.
pub fn suite_from_config(cfg: &Config) -> Result<SuiteSpec, IoError> {
    let top = cfg.top();
    if let Some((k, _, l)) = top.entries.iter().find(|(k, _, _)| k != "repetitions" && k != "jobs") {
        return Err(cfg_err(*l, format!("unknown key {k:?}")));
    }
    let repetitions: usize = opt(top, "repetitions")?.unwrap_or(1);
    let jobs: usize = opt(top, "jobs")?.unwrap_or(1);
    if repetitions == 0 {
        return Err(cfg_err(top.get("repetitions").map_or(0, |x| x.1), "repetitions must be positive"));
    }
    let mut cells = Vec::new();
    for sec in cfg.named() {
        cells.extend(section_cells(sec)?);
    }
    Ok(SuiteSpec { cells, repetitions, jobs: jobs.max(1) })
}
