//! Brute-force checks of the frequency-side multiplier bound, bilinear ensembles and the
//! resonant-term sharpness ladder.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::normal_form::op_rho_tilde;
use crate::spectral::{convolve_to, random_sobolev_data, sobolev_norm, FourierField, SobolevIndex, C64};

/// `|k1k2k3|^{-s} |k4|^{s1} |k1k2k3k4|^{ε} / (|k1| · (|k1+k2||k1+k3||k2+k3|)^{1/2-7ε})`, or `None`
/// when a frequency or a pairwise sum in the denominator vanishes, or `Σk_i ≠ 0`.
pub fn multiplier_ratio(q: [i64; 4], s: f64, s1: f64, eps: f64) -> Option<f64> {
    let [k1, k2, k3, k4] = q;
    if q.contains(&0) || k1 + k2 + k3 + k4 != 0 {
        return None;
    }
    let p = ((k1 + k2) * (k1 + k3) * (k2 + k3)).unsigned_abs();
    if p == 0 {
        return None;
    }
    let a123 = (k1 * k2 * k3).unsigned_abs() as f64;
    let a4 = k4.unsigned_abs() as f64;
    let num = a123.powf(-s) * a4.powf(s1) * (a123 * a4).powf(eps);
    let den = k1.unsigned_abs() as f64 * (p as f64).powf(0.5 - 7.0 * eps);
    Some(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub max_ratio: f64,
    pub argmax: [i64; 4],
    #[serde(rename = "K")]
    pub k_max: i64,
    pub evaluated: u64,
}

fn better(a: (f64, [i64; 4]), b: (f64, [i64; 4])) -> (f64, [i64; 4]) {
    // deterministic: larger ratio, ties to the lexicographically smaller quadruple
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Maximum of [`multiplier_ratio`] over `|k_i| ≤ K`. The enumerand is symmetric in `k2 ↔ k3`, so
/// only `k2 ≤ k3` is visited; work is split by `k1`.
pub fn multiplier_scan(s: f64, s1: f64, eps: f64, k_max: i64) -> Result<ScanResult> {
    if k_max < 2 {
        return Err(invalid("K must be at least 2"));
    }
    if ![s, s1, eps].iter().all(|x| x.is_finite()) {
        return Err(invalid("non-finite scan parameter"));
    }
    let ks: Vec<i64> = (-k_max..=k_max).filter(|&k| k != 0).collect();
    let partial: Vec<((f64, [i64; 4]), u64)> = ks
        .par_iter()
        .map(|&k1| {
            let mut best = (f64::NEG_INFINITY, [0; 4]);
            let mut count = 0u64;
            for &k2 in &ks {
                for &k3 in ks.iter().filter(|&&k3| k3 >= k2) {
                    let k4 = -(k1 + k2 + k3);
                    if k4 == 0 || k4.abs() > k_max {
                        continue;
                    }
                    if let Some(r) = multiplier_ratio([k1, k2, k3, k4], s, s1, eps) {
                        count += 1;
                        best = better(best, (r, [k1, k2, k3, k4]));
                    }
                }
            }
            (best, count)
        })
        .collect();
    let (best, evaluated) = partial
        .into_iter()
        .fold(((f64::NEG_INFINITY, [0; 4]), 0), |(b, c), (p, n)| (better(b, p), c + n));
    if evaluated == 0 {
        return Err(invalid("no admissible quadruple"));
    }
    Ok(ScanResult { max_ratio: best.0, argmax: best.1, k_max, evaluated })
}

/// Unmodulated `B(u,v)` with output on `N_u + N_v` modes, computed as `(1/3)(∂⁻¹u)(∂⁻¹v)`.
pub fn bilinear_full(u: &FourierField, v: &FourierField) -> FourierField {
    let inv = |f: &FourierField| f.map_modes(|k, c| if k == 0 { C64::new(0.0, 0.0) } else { c / C64::new(0.0, k as f64) });
    let prod = convolve_to(&inv(u), &inv(v), u.n() + v.n());
    prod.map_modes(|k, c| if k == 0 { C64::new(0.0, 0.0) } else { c / 3.0 })
}

pub fn bilinear_ratio(u: &FourierField, v: &FourierField, s: f64, s1: f64) -> Result<f64> {
    let b = bilinear_full(u, v);
    let den = sobolev_norm(u, SobolevIndex::homogeneous(s))? * sobolev_norm(v, SobolevIndex::homogeneous(s))?;
    if den == 0.0 {
        return Err(invalid("zero input"));
    }
    Ok(sobolev_norm(&b, SobolevIndex::homogeneous(s1))? / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub trials: usize,
    pub n: usize,
}

/// Largest bilinear ratio over `trials` independent random pairs drawn at regularity `s`.
pub fn bilinear_ratio_ensemble(s: f64, s1: f64, trials: usize, n: usize, seed: u64) -> Result<EnsembleResult> {
    if s <= -0.5 {
        return Err(invalid("bilinear ensemble needs s > -1/2"));
    }
    if trials == 0 || n == 0 {
        return Err(invalid("need at least one trial and one mode"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<(u64, u64)> = (0..trials).map(|_| (rng.next_u64(), rng.next_u64())).collect();
    let ratios = seeds
        .par_iter()
        .map(|&(a, b)| {
            let u = random_sobolev_data(s, n, a, 1.0)?;
            let v = random_sobolev_data(s, n, b, 1.0)?;
            bilinear_ratio(&u, &v, s, s1)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EnsembleResult {
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        mean_ratio: ratios.iter().sum::<f64>() / trials as f64,
        trials,
        n,
    })
}

/// Extremal data for the resonant term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremalDatum {
    /// `|u_k| = |k|^{-s-1/2}` for `1 ≤ |k| ≤ N`.
    PowerLaw,
    /// `u_{±N} = N^{-s}/√2`, unit homogeneous `H^s` norm concentrated at the cutoff.
    Spike,
}

impl ExtremalDatum {
    pub fn build(&self, s: f64, n: usize) -> FourierField {
        FourierField::real_from_fn(n, |k| match self {
            _ if k == 0 => C64::new(0.0, 0.0),
            ExtremalDatum::PowerLaw => C64::new((k as f64).powf(-s - 0.5), 0.0),
            ExtremalDatum::Spike if k == n => C64::new((n as f64).powf(-s) / 2f64.sqrt(), 0.0),
            ExtremalDatum::Spike => C64::new(0.0, 0.0),
        })
        .expect("finite")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub n: usize,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessResult {
    pub s: f64,
    pub s1: f64,
    pub datum: ExtremalDatum,
    pub points: Vec<LadderPoint>,
    /// Least-squares slope of `log norm` against `log N`.
    pub slope: f64,
    /// `s1 = 3s + 1`, where the slope is reported but carries no verdict.
    pub endpoint: bool,
}

/// Least-squares slope and intercept of `y` against `x`, with the standard error of the slope.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit("need at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    let se = if n > 2 { (rss / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok((slope, icept, se))
}

/// `‖ρ̃(u, 0)‖_{H^{s1}}`, i.e. the norm of `(2/3)|u_k|²u_k/k`, along a truncation ladder.
pub fn resonant_sharpness(s: f64, s1: f64, ladder: &[usize], datum: ExtremalDatum) -> Result<SharpnessResult> {
    if ladder.len() < 2 || ladder.contains(&0) {
        return Err(Error::LadderTooShort { min: 2, got: ladder.len() });
    }
    let points = ladder
        .iter()
        .map(|&n| {
            let u = datum.build(s, n);
            let rho = op_rho_tilde(&u, &FourierField::zeros(n));
            Ok(LadderPoint { n, norm: sobolev_norm(&rho, SobolevIndex::homogeneous(s1))? })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.norm.ln()).collect();
    let (slope, _, _) = linear_fit(&x, &y)?;
    Ok(SharpnessResult { s, s1, datum, points, slope, endpoint: (s1 - (3.0 * s + 1.0)).abs() < 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_form::op_b;
    use proptest::prelude::*;

    #[test]
    fn excluded_quadruples() {
        assert_eq!(multiplier_ratio([1, -1, 2, -2], 0.0, 0.9, 0.01), None);
        assert_eq!(multiplier_ratio([1, 2, -2, -1], 0.0, 0.9, 0.01), None);
        assert_eq!(multiplier_ratio([1, 1, 1, 1], 0.0, 0.9, 0.01), None);
        assert!(multiplier_ratio([1, 2, 3, -6], 0.0, 0.9, 0.01).is_some());
    }

    #[test]
    fn scan_matches_naive_enumeration() {
        let (s, s1, eps, k) = (0.0, 0.9, 0.01, 6);
        let fast = multiplier_scan(s, s1, eps, k).unwrap();
        let mut best = f64::NEG_INFINITY;
        for k1 in -k..=k {
            for k2 in -k..=k {
                for k3 in -k..=k {
                    let k4 = -(k1 + k2 + k3);
                    if k4.abs() <= k {
                        if let Some(r) = multiplier_ratio([k1, k2, k3, k4], s, s1, eps) {
                            best = best.max(r);
                        }
                    }
                }
            }
        }
        assert_eq!(fast.max_ratio, best);
        assert_eq!(multiplier_ratio(fast.argmax, s, s1, eps), Some(best));
        assert!(multiplier_scan(0.0, 0.9, 0.01, 1).is_err());
    }

    #[test]
    fn bilinear_cosine_example() {
        let u = FourierField::cosine(1, 1, 1.0);
        let r = bilinear_ratio(&u, &u, 0.0, 1.0).unwrap();
        assert!((r - 2f64.sqrt() / 3.0).abs() < 1e-15);
        let b = bilinear_full(&u, &u);
        assert!(b.max_abs_diff(&op_b(&u.resized(2), &u.resized(2), 0.0)) < 1e-16);
    }

    #[test]
    fn ensemble_is_deterministic() {
        let a = bilinear_ratio_ensemble(0.0, 1.0, 6, 32, 9).unwrap();
        let b = bilinear_ratio_ensemble(0.0, 1.0, 6, 32, 9).unwrap();
        assert_eq!(a, b);
        assert!(bilinear_ratio_ensemble(-0.6, 0.0, 1, 8, 0).is_err());
    }

    #[test]
    fn resonant_cosine_value() {
        let u = FourierField::cosine(4, 1, 1.0);
        let rho = op_rho_tilde(&u, &FourierField::zeros(4));
        assert!((rho.get(1).norm() - 1.0 / 12.0).abs() < 1e-16);
        assert_eq!(rho.get(2).norm(), 0.0);
    }

    #[test]
    fn spike_slope_is_exact() {
        for (s1, want) in [(0.5, -0.5), (1.5, 0.5)] {
            let r = resonant_sharpness(0.0, s1, &[64, 128, 256, 512], ExtremalDatum::Spike).unwrap();
            assert!((r.slope - want).abs() < 1e-10);
        }
        let e = resonant_sharpness(0.0, 1.0, &[8, 16], ExtremalDatum::PowerLaw).unwrap();
        assert!(e.endpoint);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (m, b, se) = linear_fit(&x, &y).unwrap();
        assert!((m - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15 && se < 1e-15);
    }

    proptest! {
        #[test]
        fn k2_k3_symmetry(k1 in -30i64..30, k2 in -30i64..30, k3 in -30i64..30, s in -0.4f64..1.0) {
            let k4 = -(k1 + k2 + k3);
            prop_assert_eq!(
                multiplier_ratio([k1, k2, k3, k4], s, 0.9, 0.01),
                multiplier_ratio([k1, k3, k2, k4], s, 0.9, 0.01)
            );
        }

        #[test]
        fn bilinear_homogeneous(seed in 0u64..100, a in 0.1f64..10.0) {
            let u = random_sobolev_data(0.0, 16, seed, 1.0).unwrap();
            let v = random_sobolev_data(0.0, 16, seed + 7, 1.0).unwrap();
            let r1 = bilinear_ratio(&u, &v, 0.0, 1.0).unwrap();
            let r2 = bilinear_ratio(&u.scale(a), &v, 0.0, 1.0).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-13 * r1);
        }
    }
}
