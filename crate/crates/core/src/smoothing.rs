//! Nonlinear-minus-linear experiments, resolution ladders, growth fits and the Miura pipeline
//! linking mKdV to KdV.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimates::linear_fit;
use crate::integrator::{evolve, Equation, PotentialSpec, SolverConfig, TrajectorySample};
use crate::linear::{airy_evolve, LinearOp};
use crate::spectral::{
    convolve, random_sobolev_data, sobolev_norm, unit_phase, FourierField, SobolevIndex, C64,
};

/// Largest relative change of `‖N(t)‖` between consecutive ladder rungs for a smoothing verdict.
pub const DIFF_TOLERANCE: f64 = 0.05;
/// Smallest relative change of `‖u(t)‖` required to show that the rough norm is not resolved.
pub const ROUGH_GROWTH: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    /// `‖u(t)‖_{H^{s1}}` for each requested `s1`.
    pub u_norms: Vec<f64>,
    /// `‖u(t) - e^{tL}g‖_{H^{s1}}` for each requested `s1`.
    pub diff_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub p: f64,
    /// Two standard errors of the slope.
    pub band: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub solver: SolverConfig,
    /// Transport coefficient of the linear flow that is subtracted.
    pub c: f64,
    /// `⟨g²⟩` for mKdV runs.
    pub mu: Option<f64>,
    pub s1: Vec<f64>,
    pub rows: Vec<ReportRow>,
}

fn report_from(
    g: &FourierField,
    traj: &[TrajectorySample],
    op: LinearOp,
    cfg: &SolverConfig,
    s1_list: &[f64],
    mu: Option<f64>,
) -> Result<ExperimentReport> {
    let rows = traj
        .iter()
        .map(|smp| {
            let lin = airy_evolve(g, smp.t, op);
            let diff = smp.u.sub(&lin);
            let mut u_norms = Vec::with_capacity(s1_list.len());
            let mut diff_norms = Vec::with_capacity(s1_list.len());
            for &s1 in s1_list {
                u_norms.push(sobolev_norm(&smp.u, SobolevIndex::homogeneous(s1))?);
                diff_norms.push(sobolev_norm(&diff, SobolevIndex::homogeneous(s1))?);
            }
            Ok(ReportRow { t: smp.t, u_norms, diff_norms })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { n: g.n(), solver: cfg.clone(), c: op.c, mu, s1: s1_list.to_vec(), rows })
}

/// Evolves KdV and records `‖u(t)‖` and `‖u(t) - e^{tL}g‖` in each `H^{s1}`, with `L` carrying the
/// mean-gauge transport of `cfg`.
pub fn nonlinear_minus_linear(
    g: &FourierField,
    pot: &PotentialSpec,
    cfg: &SolverConfig,
    s1_list: &[f64],
    sample_times: &[f64],
) -> Result<ExperimentReport> {
    if cfg.equation != Equation::Kdv {
        return Err(invalid("nonlinear_minus_linear runs KdV; use mkdv_smoothing"));
    }
    let traj = evolve(g, pot, cfg, sample_times)?;
    report_from(g, &traj, cfg.linear_op(), cfg, s1_list, None)
}

/// `⟨g²⟩ = Σ|g_k|²`.
pub fn mean_square(g: &FourierField) -> f64 {
    g.modes().map(|(_, c)| c.norm_sqr()).sum()
}

/// mKdV analogue of [`nonlinear_minus_linear`]. The resonant self-interaction `6⟨g²⟩v_x` is part of
/// the linear flow that is subtracted, so `c = 6⟨g²⟩`.
pub fn mkdv_smoothing(
    g: &FourierField,
    cfg: &SolverConfig,
    s1_list: &[f64],
    sample_times: &[f64],
) -> Result<ExperimentReport> {
    if cfg.equation != Equation::Mkdv {
        return Err(invalid("mkdv_smoothing needs the mKdV equation"));
    }
    let mu = mean_square(g);
    let traj = evolve(g, &PotentialSpec::zero(), cfg, sample_times)?;
    report_from(g, &traj, LinearOp::new(6.0 * mu)?, cfg, s1_list, Some(mu))
}

/// Slope of `log ‖N(t)‖` against `log⟨t⟩` over the later half of the samples.
pub fn growth_fit(report: &ExperimentReport, s1_index: usize) -> Result<GrowthFit> {
    if s1_index >= report.s1.len() {
        return Err(invalid("s1 index out of range"));
    }
    let pts: Vec<(f64, f64)> =
        report.rows.iter().filter(|r| r.t > 0.0).map(|r| (r.t, r.diff_norms[s1_index])).collect();
    if pts.len() < 8 {
        return Err(Error::Fit(format!("need at least 8 positive sample times, got {}", pts.len())));
    }
    let (tmin, tmax) = (pts[0].0, pts[pts.len() - 1].0);
    if tmax < 10.0 * tmin {
        return Err(Error::Fit("sample times must span a decade".into()));
    }
    if pts.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Fit("nonpositive norm".into()));
    }
    let tail = &pts[pts.len() / 2..];
    let x: Vec<f64> = tail.iter().map(|p| 0.5 * (1.0 + p.0 * p.0).ln()).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let (p, b, se) = linear_fit(&x, &y)?;
    let rms = (x.iter().zip(&y).map(|(a, c)| (c - b - p * a).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    Ok(GrowthFit { p, band: 2.0 * se, residual: rms, samples: tail.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub s: f64,
    pub s1: Vec<f64>,
    pub ladder: Vec<usize>,
    pub seed: u64,
    pub amplitude: f64,
    pub solver: SolverConfig,
    pub sample_times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairChange {
    pub coarse: usize,
    pub fine: usize,
    pub s1: f64,
    pub t: Vec<f64>,
    pub diff_change: Vec<f64>,
    pub u_change: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub s1: f64,
    pub coarse: usize,
    pub fine: usize,
    pub max_diff_change: f64,
    pub min_u_change: f64,
    pub smoothing_consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityStudy {
    pub spec: LadderSpec,
    pub replicas: Vec<ExperimentReport>,
    pub pairs: Vec<PairChange>,
    /// One per `s1`, judged on the finest consecutive pair.
    pub verdicts: Vec<Verdict>,
}

fn rel(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

/// Runs the same seeded datum at every truncation of the ladder (concurrently) with one shared
/// `dt` and compares consecutive rungs sample by sample.
pub fn resolution_stability_study(spec: &LadderSpec) -> Result<StabilityStudy> {
    if spec.ladder.len() < 3 {
        return Err(Error::LadderTooShort { min: 3, got: spec.ladder.len() });
    }
    if spec.ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("ladder must be increasing"));
    }
    let times: Vec<f64> = spec.sample_times.iter().copied().filter(|&t| t > 0.0).collect();
    if times.is_empty() {
        return Err(invalid("need positive sample times"));
    }
    let replicas = spec
        .ladder
        .par_iter()
        .map(|&n| {
            let g = random_sobolev_data(spec.s, n, spec.seed, spec.amplitude)?;
            match spec.solver.equation {
                Equation::Kdv => nonlinear_minus_linear(&g, &PotentialSpec::zero(), &spec.solver, &spec.s1, &times),
                Equation::Mkdv => mkdv_smoothing(&g, &spec.solver, &spec.s1, &times),
                Equation::MkdvGalilean => Err(invalid("ladder runs KdV or mKdV")),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for w in replicas.windows(2) {
        for (j, &s1) in spec.s1.iter().enumerate() {
            let (a, b) = (&w[0].rows, &w[1].rows);
            pairs.push(PairChange {
                coarse: w[0].n,
                fine: w[1].n,
                s1,
                t: a.iter().map(|r| r.t).collect(),
                diff_change: a.iter().zip(b).map(|(x, y)| rel(x.diff_norms[j], y.diff_norms[j])).collect(),
                u_change: a.iter().zip(b).map(|(x, y)| rel(x.u_norms[j], y.u_norms[j])).collect(),
            });
        }
    }
    let m = spec.s1.len();
    let verdicts = pairs[pairs.len() - m..]
        .iter()
        .map(|p| {
            let max_diff_change = p.diff_change.iter().cloned().fold(0.0, f64::max);
            let min_u_change = p.u_change.iter().cloned().fold(f64::INFINITY, f64::min);
            Verdict {
                s1: p.s1,
                coarse: p.coarse,
                fine: p.fine,
                max_diff_change,
                min_u_change,
                smoothing_consistent: max_diff_change <= DIFF_TOLERANCE && min_u_change >= ROUGH_GROWTH,
            }
        })
        .collect();
    Ok(StabilityStudy { spec: spec.clone(), replicas, pairs, verdicts })
}

fn require_real_mean_zero(w: &FourierField, what: &'static str) -> Result<()> {
    if !w.is_real() {
        return Err(Error::NotReal(what));
    }
    if !w.is_mean_zero() {
        return Err(Error::NotMeanZero(what));
    }
    Ok(())
}

/// `Mw = w_x + w² - ⟨w²⟩`, truncated to the modes of `w`.
pub fn miura(w: &FourierField) -> Result<FourierField> {
    require_real_mean_zero(w, "miura")?;
    let sq = convolve(w, w);
    Ok(w.map_modes(|k, c| if k == 0 { C64::new(0.0, 0.0) } else { C64::new(0.0, k as f64) * c + sq.get(k) }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiuraInverse {
    #[serde(skip)]
    pub w: Option<FourierField>,
    /// Max-norm of `Mw - u` at the last iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const MIURA_MAX_ITER: usize = 50;

fn to_real_vec(half: &[C64]) -> DVector<f64> {
    DVector::from_iterator(2 * (half.len() - 1), half[1..].iter().flat_map(|c| [c.re, c.im]))
}

fn from_real_vec(x: &DVector<f64>) -> Vec<C64> {
    let mut half = vec![C64::new(0.0, 0.0)];
    half.extend(x.as_slice().chunks(2).map(|p| C64::new(p[0], p[1])));
    half
}

/// Newton iteration for `Mw = u` on real mean-zero fields, started from `∂⁻¹u`. Divergence or
/// stagnation (data outside the local regime) is reported through `converged = false`.
pub fn miura_inverse(u: &FourierField, tol: f64) -> Result<MiuraInverse> {
    require_real_mean_zero(u, "miura_inverse")?;
    let n = u.n();
    let target = u.half();
    let mut w = u.map_modes(|k, c| if k == 0 { c } else { c / C64::new(0.0, k as f64) });
    let residual_of = |w: &FourierField| -> Result<Vec<C64>> {
        let m = miura(w)?.half();
        Ok(m.iter().zip(&target).map(|(a, b)| a - b).collect())
    };
    let maxabs = |r: &[C64]| r.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut r = residual_of(&w)?;
    let mut res = maxabs(&r);
    for it in 0..MIURA_MAX_ITER {
        if res <= tol {
            return Ok(MiuraInverse { w: Some(w), residual: res, iterations: it, converged: true });
        }
        if n == 0 {
            break;
        }
        // Jacobian DM(w)h = h_x + 2Π_N(wh), assembled column by column
        let dim = 2 * n;
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for col in 0..dim {
            let (mode, imag) = (col / 2 + 1, col % 2 == 1);
            let mut hh = vec![C64::new(0.0, 0.0); n + 1];
            hh[mode] = if imag { C64::new(0.0, 1.0) } else { C64::new(1.0, 0.0) };
            let h = FourierField::from_half(&hh)?;
            let wh = convolve(&w, &h);
            let d: Vec<C64> = (0..=n)
                .map(|k| if k == 0 { C64::new(0.0, 0.0) } else { C64::new(0.0, k as f64) * hh[k] + wh.get(k as i64) * 2.0 })
                .collect();
            jac.set_column(col, &to_real_vec(&d));
        }
        let Some(step) = jac.lu().solve(&to_real_vec(&r)) else {
            return Ok(MiuraInverse { w: Some(w), residual: res, iterations: it, converged: false });
        };
        let x = to_real_vec(&w.half()) - step;
        w = FourierField::from_half(&from_real_vec(&x))?;
        r = residual_of(&w)?;
        res = maxabs(&r);
        if !res.is_finite() || res > 1e12 {
            return Ok(MiuraInverse { w: None, residual: res, iterations: it + 1, converged: false });
        }
    }
    let converged = res <= tol;
    Ok(MiuraInverse { w: Some(w), residual: res, iterations: MIURA_MAX_ITER, converged })
}

/// `w_k(t) = v_k(t) e^{-6iμkt}`, i.e. `w(x,t) = v(x - 6μt, t)`, which maps solutions of
/// `v_t + v_xxx = 6v²v_x` to solutions of the frame with `6⟨w²⟩w_x` removed.
pub fn galilean_shift(traj: &[TrajectorySample], mu: f64) -> Vec<TrajectorySample> {
    traj.iter()
        .map(|s| {
            let u = s.u.map_modes(|k, c| c * unit_phase(-6.0 * mu * k as f64, s.t));
            TrajectorySample { u, ..s.clone() }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiuraDefect {
    pub dt: f64,
    /// `‖M w_dt(T) - u_ref(T)‖_{L²}`.
    pub defect: f64,
}

/// Compares the Miura image of numerical mKdV solutions (one per `dt`) with a KdV solution
/// `u_t + u_xxx = 6uu_x` from `M g`, integrated with `reference_dt`.
pub fn miura_kdv_defect(g: &FourierField, t_end: f64, dts: &[f64], reference_dt: f64) -> Result<Vec<MiuraDefect>> {
    require_real_mean_zero(g, "miura_kdv_defect")?;
    let mu = mean_square(g);
    let ug = miura(g)?;
    let kdv_cfg = SolverConfig::kdv(reference_dt, t_end).with_beta(-6.0);
    let u_ref = evolve(&ug, &PotentialSpec::zero(), &kdv_cfg, &[t_end])?.remove(0).u;
    dts.par_iter()
        .map(|&dt| {
            let traj = evolve(g, &PotentialSpec::zero(), &SolverConfig::mkdv(dt, t_end), &[t_end])?;
            let w = galilean_shift(&traj, mu).remove(0).u;
            let defect = sobolev_norm(&miura(&w)?.sub(&u_ref), SobolevIndex::homogeneous(0.0))?;
            Ok(MiuraDefect { dt, defect })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(values: impl Fn(f64) -> f64) -> ExperimentReport {
        let rows = (1..=40)
            .map(|i| {
                let t = 0.5 * 1.15f64.powi(i);
                ReportRow { t, u_norms: vec![1.0], diff_norms: vec![values(t)] }
            })
            .collect();
        ExperimentReport { n: 1, solver: SolverConfig::kdv(1.0, 1.0), c: 0.0, mu: None, s1: vec![1.0], rows }
    }

    #[test]
    fn growth_fit_synthetic() {
        let fit = growth_fit(&synthetic(|t| 3.0 * (1.0 + t * t)), 0).unwrap();
        assert!((fit.p - 2.0).abs() < 1e-10 && fit.band < 1e-8);
        let fit = growth_fit(&synthetic(|_| 0.7), 0).unwrap();
        assert!(fit.p.abs() < 1e-12);
        assert!(matches!(growth_fit(&synthetic(|_| 0.0), 0), Err(Error::Fit(_))));
    }

    #[test]
    fn miura_of_cosine() {
        let m = miura(&FourierField::cosine(4, 1, 1.0)).unwrap();
        assert!((m.get(1) - C64::new(0.0, 0.5)).norm() < 1e-16);
        assert!((m.get(-1) - C64::new(0.0, -0.5)).norm() < 1e-16);
        assert!((m.get(2) - C64::new(0.25, 0.0)).norm() < 1e-16);
        assert_eq!(m.get(0), C64::new(0.0, 0.0));
        assert_eq!(miura(&FourierField::zeros(4)).unwrap(), FourierField::zeros(4));
    }

    #[test]
    fn miura_inverse_recovers_cosine() {
        let w = FourierField::cosine(16, 1, 1.0);
        let inv = miura_inverse(&miura(&w).unwrap(), 1e-13).unwrap();
        assert!(inv.converged);
        assert!(inv.w.unwrap().max_abs_diff(&w) < 1e-10);
    }

    #[test]
    fn report_starts_at_zero() {
        let g = random_sobolev_data(0.5, 16, 1, 0.1).unwrap();
        let rep = nonlinear_minus_linear(&g, &PotentialSpec::zero(), &SolverConfig::kdv(1e-3, 0.1), &[0.5, 1.0], &[0.0, 0.1]).unwrap();
        assert_eq!(rep.rows[0].diff_norms, vec![0.0, 0.0]);
        assert!(rep.rows[1].diff_norms[1] > 0.0);
    }

    #[test]
    fn galilean_frame_matches_direct_solve() {
        let g = FourierField::cosine(16, 1, 0.5).add(&FourierField::sine(16, 2, 0.2));
        let mu = mean_square(&g);
        let a = evolve(&g, &PotentialSpec::zero(), &SolverConfig::mkdv(1e-3, 0.5), &[0.5]).unwrap();
        let cfg = SolverConfig { equation: Equation::MkdvGalilean, ..SolverConfig::mkdv(1e-3, 0.5) };
        let b = evolve(&g, &PotentialSpec::zero(), &cfg, &[0.5]).unwrap();
        assert!(galilean_shift(&a, mu)[0].u.max_abs_diff(&b[0].u) < 1e-9);
    }

    #[test]
    fn short_ladder_rejected() {
        let spec = LadderSpec {
            s: 0.0,
            s1: vec![0.9],
            ladder: vec![16, 32],
            seed: 1,
            amplitude: 0.01,
            solver: SolverConfig::kdv(1e-3, 1.0),
            sample_times: vec![1.0],
        };
        assert!(matches!(resolution_stability_study(&spec), Err(Error::LadderTooShort { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]
        #[test]
        fn miura_round_trip(seed in 0u64..10_000) {
            let w = random_sobolev_data(1.0, 24, seed, 0.05).unwrap();
            let inv = miura_inverse(&miura(&w).unwrap(), 1e-14).unwrap();
            prop_assert!(inv.converged);
            prop_assert!(inv.w.unwrap().max_abs_diff(&w) < 1e-10);
        }
    }
}
