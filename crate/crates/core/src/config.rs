//! Run configuration: a flat TOML file of dotted keys, overridable key by key.
//!
//! ```toml
//! grid.n_tau = 512
//! sweep.t = [1e-4, 1e-8, 1e-12, 1e-16, 1e-20]
//! metric.perturbation = 1.0
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::comparison::EquivalenceRule;
use crate::error::{Error, Result};
use crate::family::{Decorations, FamilyParams, Profile, Tail};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub n_tau: usize,
    pub kmax: i32,
    pub c: f64,
    pub c1: f64,
    /// Number of pinched collars; each gets the sweep value of `t`.
    pub collars: usize,
    /// Number of thick directions.
    pub thick: usize,
    pub thick_wp: f64,
    pub thick_poincare: f64,
    pub u_core: f64,
    pub s: f64,
    pub delta: f64,
    pub m_bound: f64,
    pub eps: f64,
    pub profile: String,
    pub beltrami_tails: Vec<(usize, usize, Tail)>,
    pub beltrami_b: Vec<(usize, usize, Complex64)>,
    pub quadratic_tails: Vec<(usize, usize, Tail)>,
    pub quadratic_beta: Vec<(usize, usize, Complex64)>,
    pub sweep_t: Vec<f64>,
    pub perturbation: f64,
    pub mcmullen_delta: f64,
    pub mcmullen_eps: f64,
    pub c_max: f64,
    pub exponent_threshold: f64,
    pub tolerance_scale: f64,
    pub kahler_tolerance: f64,
    pub out_dir: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            n_tau: 512,
            kmax: 8,
            c: 0.5,
            c1: 0.25,
            collars: 1,
            thick: 0,
            thick_wp: 1.0,
            thick_poincare: 1.0,
            u_core: 0.5,
            s: 0.0,
            delta: 1.0,
            m_bound: 10.0,
            eps: 0.25,
            profile: "leading".into(),
            beltrami_tails: Vec::new(),
            beltrami_b: Vec::new(),
            quadratic_tails: Vec::new(),
            quadratic_beta: Vec::new(),
            sweep_t: vec![1e-4, 1e-8, 1e-12, 1e-16, 1e-20],
            perturbation: 1.0,
            mcmullen_delta: 10.0,
            mcmullen_eps: 2.0 * PI,
            c_max: 32.0,
            exponent_threshold: 0.75,
            tolerance_scale: 1.0,
            kahler_tolerance: 1e-8,
            out_dir: "out".into(),
        }
    }
}

/// Documented keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("grid.n_tau", "nodes per collar in tau"),
    ("grid.kmax", "largest stored angular mode"),
    ("collar.c", "outer collar radius c"),
    ("collar.c1", "inner cut-off radius c1 < c"),
    ("family.collars", "number of pinched collars m"),
    ("family.thick", "number of thick directions n - m"),
    ("family.thick_wp", "Weil-Petersson norm of each thick direction"),
    ("family.thick_poincare", "Poincare-model value in thick directions"),
    ("family.u_core", "modulus of the core chart"),
    ("family.s", "value of every thick coordinate s"),
    ("family.delta", "radius of the pinching neighbourhood"),
    ("family.m_bound", "bound M on Laurent sums"),
    ("family.eps", "exponent slack eps"),
    ("family.profile", "\"leading\" or \"decorated\""),
    ("family.beltrami_tails", "[[i, j, k, re, im], ...] Beltrami Laurent tails"),
    ("family.beltrami_b", "[[i, j, re, im], ...] off-diagonal Beltrami constants"),
    ("family.quadratic_tails", "[[i, j, k, re, im], ...] quadratic Laurent tails"),
    ("family.quadratic_beta", "[[i, j, re, im], ...] off-diagonal quadratic constants"),
    ("sweep.t", "list of |t| values"),
    ("sweep.log10_t", "[start, stop, points]: log-spaced |t| values"),
    ("metric.perturbation", "constant C of the perturbed Ricci metric"),
    ("mcmullen.delta", "McMullen delta"),
    ("mcmullen.eps", "McMullen epsilon"),
    ("equivalence.c_max", "largest admissible comparability constant"),
    ("equivalence.exponent_threshold", "fitted |exponent| read as degeneration"),
    ("tolerance.scale", "multiplier on every acceptance tolerance"),
    ("tolerance.kahler", "relative tolerance of curvature symmetry checks"),
    ("output.dir", "output directory"),
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out)?,
            other => {
                if out.insert(key.clone(), other.clone()).is_some() {
                    return Err(Error::config(format!("duplicate key {key}")));
                }
            }
        }
    }
    Ok(())
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(format!("{key}: expected a number, got {v}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::config(format!("{key}: expected a non-negative integer, got {v}"))),
    }
}

fn as_rows(key: &str, v: &Value, width: usize) -> Result<Vec<Vec<f64>>> {
    let arr = v.as_array().ok_or_else(|| Error::config(format!("{key}: expected an array of rows")))?;
    arr.iter()
        .map(|row| {
            let r = row.as_array().ok_or_else(|| Error::config(format!("{key}: each entry must be an array")))?;
            if r.len() != width {
                return Err(Error::config(format!("{key}: rows need {width} entries, got {}", r.len())));
            }
            r.iter().map(|x| as_f64(key, x)).collect()
        })
        .collect()
}

fn index(key: &str, x: f64) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Error::config(format!("{key}: index {x} is not a non-negative integer")))
    }
}

fn tails(key: &str, v: &Value) -> Result<Vec<(usize, usize, Tail)>> {
    as_rows(key, v, 5)?
        .into_iter()
        .map(|r| {
            if r[2].fract() != 0.0 {
                return Err(Error::config(format!("{key}: mode {} is not an integer", r[2])));
            }
            Ok((index(key, r[0])?, index(key, r[1])?, (r[2] as i32, Complex64::new(r[3], r[4]))))
        })
        .collect()
}

fn constants(key: &str, v: &Value) -> Result<Vec<(usize, usize, Complex64)>> {
    as_rows(key, v, 4)?
        .into_iter()
        .map(|r| Ok((index(key, r[0])?, index(key, r[1])?, Complex64::new(r[2], r[3]))))
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::config(format!("config parse error: {e}")))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat)?;
        let mut cfg = Config::default();
        for (k, v) in &flat {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` with `value` in TOML syntax.
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
        let k = k.trim();
        let v = v.trim();
        let parsed: Value = match format!("x = {v}").parse::<toml::Table>() {
            Ok(t) => t["x"].clone(),
            Err(_) => Value::String(v.to_string()),
        };
        self.set(k, &parsed)
    }

    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        match key {
            "grid.n_tau" => self.n_tau = as_usize(key, v)?,
            "grid.kmax" => self.kmax = as_usize(key, v)? as i32,
            "collar.c" => self.c = as_f64(key, v)?,
            "collar.c1" => self.c1 = as_f64(key, v)?,
            "family.collars" => self.collars = as_usize(key, v)?,
            "family.thick" => self.thick = as_usize(key, v)?,
            "family.thick_wp" => self.thick_wp = as_f64(key, v)?,
            "family.thick_poincare" => self.thick_poincare = as_f64(key, v)?,
            "family.u_core" => self.u_core = as_f64(key, v)?,
            "family.s" => self.s = as_f64(key, v)?,
            "family.delta" => self.delta = as_f64(key, v)?,
            "family.m_bound" => self.m_bound = as_f64(key, v)?,
            "family.eps" => self.eps = as_f64(key, v)?,
            "family.profile" => {
                self.profile = v
                    .as_str()
                    .ok_or_else(|| Error::config(format!("{key}: expected a string")))?
                    .to_string()
            }
            "family.beltrami_tails" => self.beltrami_tails = tails(key, v)?,
            "family.beltrami_b" => self.beltrami_b = constants(key, v)?,
            "family.quadratic_tails" => self.quadratic_tails = tails(key, v)?,
            "family.quadratic_beta" => self.quadratic_beta = constants(key, v)?,
            "sweep.t" => {
                let arr = v.as_array().ok_or_else(|| Error::config(format!("{key}: expected an array")))?;
                self.sweep_t = arr.iter().map(|x| as_f64(key, x)).collect::<Result<_>>()?;
            }
            "sweep.log10_t" => {
                let arr = v.as_array().ok_or_else(|| Error::config(format!("{key}: expected [start, stop, points]")))?;
                if arr.len() != 3 {
                    return Err(Error::config(format!("{key}: expected [start, stop, points]")));
                }
                let (a, b) = (as_f64(key, &arr[0])?, as_f64(key, &arr[1])?);
                let n = as_usize(key, &arr[2])?;
                self.sweep_t = match n {
                    0 => Vec::new(),
                    1 => vec![10f64.powf(a)],
                    _ => (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect(),
                };
            }
            "metric.perturbation" => self.perturbation = as_f64(key, v)?,
            "mcmullen.delta" => self.mcmullen_delta = as_f64(key, v)?,
            "mcmullen.eps" => self.mcmullen_eps = as_f64(key, v)?,
            "equivalence.c_max" => self.c_max = as_f64(key, v)?,
            "equivalence.exponent_threshold" => self.exponent_threshold = as_f64(key, v)?,
            "tolerance.scale" => self.tolerance_scale = as_f64(key, v)?,
            "tolerance.kahler" => self.kahler_tolerance = as_f64(key, v)?,
            "output.dir" => {
                self.out_dir = v
                    .as_str()
                    .ok_or_else(|| Error::config(format!("{key}: expected a string")))?
                    .to_string()
            }
            _ => return Err(Error::config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if self.n_tau < 16 {
            return bad(format!("grid.n_tau = {} is below 16", self.n_tau));
        }
        if !(0.0 < self.c1 && self.c1 < self.c && self.c < 1.0) {
            return bad(format!("need 0 < collar.c1 < collar.c < 1, got {} and {}", self.c1, self.c));
        }
        if self.collars == 0 {
            return bad("family.collars must be >= 1".into());
        }
        if self.sweep_t.is_empty() {
            return bad("sweep is empty".into());
        }
        if let Some(t) = self.sweep_t.iter().find(|t| !(**t > 0.0 && **t < self.delta)) {
            return bad(format!("sweep value t = {t} outside (0, {})", self.delta));
        }
        if self.profile != "leading" && self.profile != "decorated" {
            return bad(format!("family.profile must be \"leading\" or \"decorated\", got {:?}", self.profile));
        }
        if !(self.perturbation >= 0.0) {
            return bad(format!("metric.perturbation must be >= 0, got {}", self.perturbation));
        }
        if !(self.mcmullen_delta > 0.0 && self.mcmullen_eps > 0.0) {
            return bad("McMullen parameters must be positive".into());
        }
        if !(self.c_max >= 1.0) {
            return bad(format!("equivalence.c_max must be >= 1, got {}", self.c_max));
        }
        if !(self.tolerance_scale >= 0.0) {
            return bad(format!("tolerance.scale must be >= 0, got {}", self.tolerance_scale));
        }
        Ok(())
    }

    pub fn family_params(&self) -> FamilyParams {
        FamilyParams {
            c: self.c,
            c1: self.c1,
            u_core: self.u_core,
            thick_wp: self.thick_wp,
            m_bound: self.m_bound,
            eps: self.eps,
            delta: self.delta,
        }
    }

    pub fn profile(&self) -> Profile {
        if self.profile == "leading" {
            Profile::Leading
        } else {
            Profile::Decorated(Decorations {
                beltrami_tails: self.beltrami_tails.clone(),
                beltrami_b: self.beltrami_b.clone(),
                quadratic_tails: self.quadratic_tails.clone(),
                quadratic_beta: self.quadratic_beta.clone(),
                ..Default::default()
            })
        }
    }

    pub fn equivalence_rule(&self) -> EquivalenceRule {
        EquivalenceRule { c_max: self.c_max, exponent_threshold: self.exponent_threshold }
    }

    /// The fully resolved configuration as JSON.
    pub fn resolved(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys_and_rejects_unknown() {
        let c = Config::parse("grid.n_tau = 256\nsweep.t = [1e-6]\nmetric.perturbation = 2").unwrap();
        assert_eq!(c.n_tau, 256);
        assert_eq!(c.sweep_t, vec![1e-6]);
        assert_eq!(c.perturbation, 2.0);
        let err = Config::parse("grid.nodes = 3").unwrap_err();
        assert!(err.to_string().contains("unknown key grid.nodes"));
        assert!(Config::parse("sweep.t = []").is_err());
    }

    #[test]
    fn overrides_and_log_sweep() {
        let mut c = Config::default();
        c.set_str("sweep.log10_t = [-4, -20, 5]").unwrap();
        assert_eq!(c.sweep_t.len(), 5);
        assert!((c.sweep_t[4] - 1e-20).abs() < 1e-32);
        c.set_str("family.profile = decorated").unwrap();
        assert_eq!(c.profile, "decorated");
        assert!(c.set_str("nonsense").is_err());
    }
}
