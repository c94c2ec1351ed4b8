//! Run plans parsed from flat TOML: global keys plus optional one-level sections named after
//! experiments, e.g.
//!
//! ```toml
//! experiment = "smoothing"
//! seed = 7
//! s1 = [0.9, 1.5]
//!
//! [smoothing]
//! ladder = [128, 256, 512]
//! ```
//!
//! Global keys other than `experiment`, `experiments` and `seed` apply to every listed experiment
//! that knows them; section keys apply to their experiment only. Unknown keys are errors.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::ExtremalDatum;
use crate::integrator::Scheme;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingParams {
    pub s: f64,
    pub s1: Vec<f64>,
    pub ladder: Vec<usize>,
    pub amplitude: f64,
    pub dt: f64,
    pub horizon: f64,
    pub samples: usize,
    pub beta: f64,
    pub scheme: Scheme,
    pub assert: bool,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            s: 0.0,
            s1: vec![0.9, 1.5],
            ladder: vec![128, 256, 512],
            amplitude: 0.003,
            dt: 1e-3,
            horizon: 5.0,
            samples: 10,
            beta: 2.0,
            scheme: Scheme::NormalFormIfrk4,
            assert: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MkdvParams {
    pub s: f64,
    pub s1: Vec<f64>,
    pub ladder: Vec<usize>,
    pub amplitude: f64,
    pub dt: f64,
    pub horizon: f64,
    pub samples: usize,
    pub assert: bool,
}

impl Default for MkdvParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            s1: vec![1.8],
            ladder: vec![32, 64, 128],
            amplitude: 0.1,
            dt: 2.5e-6,
            horizon: 0.25,
            samples: 5,
            assert: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Datum {
    Cos,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub n: usize,
    pub datum: Datum,
    pub s: f64,
    pub amplitude: f64,
    /// Added constant; removed by the mean gauge before integration.
    pub mean: f64,
    pub dt: f64,
    pub horizon: f64,
    pub samples: usize,
    pub beta: f64,
    pub scheme: Scheme,
    pub potential_amp: f64,
    pub potential_k: usize,
    pub potential_speed: f64,
    pub diagnostics: Vec<f64>,
    pub dump: bool,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            n: 64,
            datum: Datum::Cos,
            s: 1.0,
            amplitude: 1.0,
            mean: 0.0,
            dt: 5e-4,
            horizon: 1.0,
            samples: 10,
            beta: 2.0,
            scheme: Scheme::Ifrk4,
            potential_amp: 0.0,
            potential_k: 1,
            potential_speed: 1.0,
            diagnostics: vec![0.0, 1.0],
            dump: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalFormParams {
    pub trials: usize,
    pub n: usize,
    pub support: usize,
    pub times: Vec<f64>,
    pub tol: f64,
    pub rho_n: usize,
    pub rho_tol: f64,
}

impl Default for NormalFormParams {
    fn default() -> Self {
        Self { trials: 100, n: 16, support: 5, times: vec![0.0, 0.37, 1.9], tol: 1e-11, rho_n: 32, rho_tol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourFreqParams {
    #[serde(rename = "K")]
    pub k: i64,
    pub pair_k: i64,
}

impl Default for FourFreqParams {
    fn default() -> Self {
        Self { k: 30, pair_k: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanParams {
    pub s: f64,
    pub s1: f64,
    pub eps: f64,
    #[serde(rename = "K")]
    pub k: Vec<i64>,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { s: 0.0, s1: 0.9, eps: 0.01, k: vec![10, 20, 40] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilinearParams {
    pub s: f64,
    pub s1: f64,
    pub trials: usize,
    pub ladder: Vec<usize>,
}

impl Default for BilinearParams {
    fn default() -> Self {
        Self { s: 0.0, s1: 1.0, trials: 20, ladder: vec![64, 128, 256] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonantParams {
    pub s: f64,
    pub s1: f64,
    pub ladder: Vec<usize>,
    pub datum: ExtremalDatum,
}

impl Default for ResonantParams {
    fn default() -> Self {
        Self { s: 0.0, s1: 1.5, ladder: vec![64, 128, 256, 512, 1024], datum: ExtremalDatum::Spike }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TalbotParams {
    pub n: usize,
    pub m: usize,
    /// Evolution time in units of 2π.
    pub t_over_2pi: f64,
    pub c: f64,
    pub ladder: Vec<usize>,
}

impl Default for TalbotParams {
    fn default() -> Self {
        Self { n: 2047, m: 8192, t_over_2pi: std::f64::consts::SQRT_2 - 1.0, c: 0.0, ladder: vec![1024, 2048, 4096] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum PlanItem {
    Smoothing(SmoothingParams),
    MkdvSmoothing(MkdvParams),
    Evolve(EvolveParams),
    NormalformCheck(NormalFormParams),
    FourFreqSweep(FourFreqParams),
    MultiplierScan(ScanParams),
    BilinearEnsemble(BilinearParams),
    ResonantLadder(ResonantParams),
    Talbot(TalbotParams),
}

impl PlanItem {
    pub fn name(&self) -> &'static str {
        match self {
            PlanItem::Smoothing(_) => "smoothing",
            PlanItem::MkdvSmoothing(_) => "mkdv-smoothing",
            PlanItem::Evolve(_) => "evolve",
            PlanItem::NormalformCheck(_) => "normalform-check",
            PlanItem::FourFreqSweep(_) => "four-freq-sweep",
            PlanItem::MultiplierScan(_) => "multiplier-scan",
            PlanItem::BilinearEnsemble(_) => "bilinear-ensemble",
            PlanItem::ResonantLadder(_) => "resonant-ladder",
            PlanItem::Talbot(_) => "talbot",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::Constraint { key: key.into(), reason: reason.into() });
        let ladder_ok = |l: &[usize]| l.len() >= 3 && l.windows(2).all(|w| w[1] > w[0]) && l[0] > 0;
        match self {
            PlanItem::Smoothing(p) => {
                if !(p.dt > 0.0) {
                    return bad("dt", "must be positive");
                }
                if !ladder_ok(&p.ladder) {
                    return bad("ladder", "needs at least 3 increasing entries");
                }
                if !(p.horizon > 0.0) || p.samples == 0 {
                    return bad("horizon", "horizon and samples must be positive");
                }
                if p.s <= -0.5 {
                    return bad("s", "must exceed -1/2");
                }
            }
            PlanItem::MkdvSmoothing(p) => {
                if !(p.dt > 0.0) {
                    return bad("dt", "must be positive");
                }
                if !ladder_ok(&p.ladder) {
                    return bad("ladder", "needs at least 3 increasing entries");
                }
                if !(p.horizon > 0.0) || p.samples == 0 {
                    return bad("horizon", "horizon and samples must be positive");
                }
                if p.s <= 0.5 {
                    return bad("s", "mKdV smoothing needs s > 1/2");
                }
            }
            PlanItem::Evolve(p) => {
                if !(p.dt > 0.0) {
                    return bad("dt", "must be positive");
                }
                if p.n == 0 {
                    return bad("n", "must be positive");
                }
                if p.samples == 0 {
                    return bad("samples", "must be positive");
                }
                if p.potential_k == 0 {
                    return bad("potential_k", "potential must be mean-zero");
                }
            }
            PlanItem::NormalformCheck(p) => {
                if 3 * p.support > p.n {
                    return bad("support", "must be at most n/3");
                }
                if p.trials == 0 {
                    return bad("trials", "must be positive");
                }
            }
            PlanItem::FourFreqSweep(p) => {
                if p.k < 1 || p.pair_k < 1 {
                    return bad("K", "must be positive");
                }
            }
            PlanItem::MultiplierScan(p) => {
                if p.k.is_empty() || p.k.iter().any(|&k| k < 2) {
                    return bad("K", "every entry must be at least 2");
                }
                if !(p.eps > 0.0) {
                    return bad("eps", "must be positive");
                }
            }
            PlanItem::BilinearEnsemble(p) => {
                if p.s <= -0.5 {
                    return bad("s", "must exceed -1/2");
                }
                if p.trials == 0 || p.ladder.is_empty() {
                    return bad("trials", "need trials and a ladder");
                }
            }
            PlanItem::ResonantLadder(p) => {
                if p.ladder.len() < 2 {
                    return bad("ladder", "needs at least 2 entries");
                }
            }
            PlanItem::Talbot(p) => {
                if p.m < 3 * p.n + 1 {
                    return bad("m", "must be at least 3n + 1");
                }
                if p.ladder.is_empty() || p.ladder.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("ladder", "must be increasing");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub seed: u64,
    pub items: Vec<PlanItem>,
}

fn known_keys<T: Default + Serialize>() -> Vec<String> {
    match toml::Value::try_from(T::default()) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn keys_for(name: &str) -> Option<Vec<String>> {
    Some(match name {
        "smoothing" => known_keys::<SmoothingParams>(),
        "mkdv-smoothing" => known_keys::<MkdvParams>(),
        "evolve" => known_keys::<EvolveParams>(),
        "normalform-check" => known_keys::<NormalFormParams>(),
        "four-freq-sweep" => known_keys::<FourFreqParams>(),
        "multiplier-scan" => known_keys::<ScanParams>(),
        "bilinear-ensemble" => known_keys::<BilinearParams>(),
        "resonant-ladder" => known_keys::<ResonantParams>(),
        "talbot" => known_keys::<TalbotParams>(),
        _ => return None,
    })
}

fn build<T: DeserializeOwned>(table: toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| {
        let msg = e.to_string();
        if let Some(rest) = msg.split("unknown field `").nth(1) {
            Error::UnknownKey(rest.split('`').next().unwrap_or_default().to_string())
        } else {
            Error::Toml(e)
        }
    })
}

fn item_from(name: &str, table: toml::Table) -> Result<PlanItem> {
    Ok(match name {
        "smoothing" => PlanItem::Smoothing(build(table)?),
        "mkdv-smoothing" => PlanItem::MkdvSmoothing(build(table)?),
        "evolve" => PlanItem::Evolve(build(table)?),
        "normalform-check" => PlanItem::NormalformCheck(build(table)?),
        "four-freq-sweep" => PlanItem::FourFreqSweep(build(table)?),
        "multiplier-scan" => PlanItem::MultiplierScan(build(table)?),
        "bilinear-ensemble" => PlanItem::BilinearEnsemble(build(table)?),
        "resonant-ladder" => PlanItem::ResonantLadder(build(table)?),
        "talbot" => PlanItem::Talbot(build(table)?),
        other => return Err(Error::Constraint { key: "experiment".into(), reason: format!("unknown experiment `{other}`") }),
    })
}

/// Expands composite names into their experiments.
fn expand(name: &str) -> Vec<String> {
    match name {
        "identity-suite" => vec!["normalform-check".into(), "four-freq-sweep".into()],
        other => vec![other.into()],
    }
}

/// Parses a plan from TOML text, filling defaults and validating every item.
pub fn parse_config(text: &str) -> Result<RunPlan> {
    let root: toml::Table = text.parse()?;
    let mut names: Vec<String> = Vec::new();
    let mut seed = DEFAULT_SEED;
    let mut globals = toml::Table::new();
    let mut sections: Vec<(String, toml::Table)> = Vec::new();
    for (key, value) in root {
        match (key.as_str(), value) {
            ("experiment", toml::Value::String(s)) => names.extend(expand(&s)),
            ("experiments", toml::Value::Array(list)) => {
                for v in list {
                    let s = v.as_str().ok_or_else(|| Error::Constraint {
                        key: "experiments".into(),
                        reason: "entries must be strings".into(),
                    })?;
                    names.extend(expand(s));
                }
            }
            ("experiment" | "experiments", _) => {
                return Err(Error::Constraint { key: key.clone(), reason: "must name experiments".into() })
            }
            ("seed", toml::Value::Integer(i)) if i >= 0 => seed = i as u64,
            ("seed", _) => return Err(Error::Constraint { key: "seed".into(), reason: "must be a nonnegative integer".into() }),
            (_, toml::Value::Table(t)) => sections.push((key, t)),
            (_, v) => {
                globals.insert(key, v);
            }
        }
    }
    if names.is_empty() {
        return Err(Error::Constraint { key: "experiment".into(), reason: "no experiment given".into() });
    }
    for (sec, _) in &sections {
        if keys_for(sec).is_none() {
            return Err(Error::UnknownKey(sec.clone()));
        }
        if !names.contains(sec) {
            return Err(Error::Constraint { key: sec.clone(), reason: "section for an experiment not in the plan".into() });
        }
    }
    let mut used = vec![false; globals.len()];
    let mut items = Vec::new();
    for name in &names {
        let keys = keys_for(name)
            .ok_or_else(|| Error::Constraint { key: "experiment".into(), reason: format!("unknown experiment `{name}`") })?;
        let mut table = toml::Table::new();
        for (i, (k, v)) in globals.iter().enumerate() {
            if keys.contains(k) {
                used[i] = true;
                table.insert(k.clone(), v.clone());
            }
        }
        for (sec, t) in &sections {
            if sec == name {
                for (k, v) in t {
                    table.insert(k.clone(), v.clone());
                }
            }
        }
        let item = item_from(name, table)?;
        item.validate()?;
        items.push(item);
    }
    if let Some((k, _)) = globals.iter().zip(&used).find(|(_, u)| !**u).map(|(kv, _)| kv) {
        return Err(Error::UnknownKey(k.clone()));
    }
    Ok(RunPlan { seed, items })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_plan_gets_defaults() {
        let plan = parse_config("experiment = \"smoothing\"\ns = 0\n").unwrap();
        assert_eq!(plan.seed, DEFAULT_SEED);
        assert_eq!(plan.items, vec![PlanItem::Smoothing(SmoothingParams::default())]);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("experiment = \"smoothing\"\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey(k) if k == "bogus"));
        let err = parse_config("experiment = \"smoothing\"\n[smoothing]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey(k) if k == "bogus"));
    }

    #[test]
    fn constraint_names_key() {
        let err = parse_config("experiment = \"smoothing\"\ndt = -1.0\n").unwrap_err();
        assert!(matches!(err, Error::Constraint { key, .. } if key == "dt"));
        let err = parse_config("experiment = \"smoothing\"\nladder = [64, 128]\n").unwrap_err();
        assert!(matches!(err, Error::Constraint { key, .. } if key == "ladder"));
    }

    #[test]
    fn identity_suite_expands() {
        let plan = parse_config("experiment = \"identity-suite\"\nseed = 3\n[four-freq-sweep]\nK = 5\n").unwrap();
        assert_eq!(plan.seed, 3);
        assert_eq!(plan.items.len(), 2);
        assert_eq!(plan.items[0].name(), "normalform-check");
        assert_eq!(plan.items[1], PlanItem::FourFreqSweep(FourFreqParams { k: 5, pair_k: 100 }));
    }

    #[test]
    fn globals_shared_across_items() {
        let plan = parse_config("experiments = [\"multiplier-scan\", \"bilinear-ensemble\"]\ns = 0.25\n").unwrap();
        match (&plan.items[0], &plan.items[1]) {
            (PlanItem::MultiplierScan(a), PlanItem::BilinearEnsemble(b)) => assert!(a.s == 0.25 && b.s == 0.25),
            _ => panic!("unexpected plan"),
        }
    }

    #[test]
    fn echo_round_trips() {
        let plan = parse_config("experiment = \"talbot\"\nt_over_2pi = 0.25\n").unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(serde_json::from_str::<RunPlan>(&json).unwrap(), plan);
    }
}
