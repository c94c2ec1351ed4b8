//! Differentiation-by-parts operators for the KdV interaction representation, the resonant
//! decomposition, and numerical checks of the resulting identities.
//!
//! All operators act on fields supported on nonzero frequencies and return fields on
//! `max(N_in)` modes with the zero mode set to 0. `t = 0` gives the unmodulated versions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrator::{PotentialSpec, TrajectorySample};
use crate::spectral::{sobolev_norm, unit_phase, FourierField, SobolevIndex, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn nonzero(k: &[i64]) -> Result<()> {
    if k.contains(&0) {
        return Err(Error::ZeroFrequency(k.to_vec()));
    }
    Ok(())
}

/// `(-Σk_i³, 3(k1+k2)(k1+k3)(k2+k3))` for nonzero `k` with `Σk_i = 0`; the two agree.
pub fn four_freq_identity(k: [i64; 4]) -> Result<(i128, i128)> {
    nonzero(&k)?;
    if k.iter().sum::<i64>() != 0 {
        return Err(Error::NonzeroSum(k));
    }
    let [a, b, c, d] = k.map(i128::from);
    let cube = |x: i128| x.checked_mul(x).and_then(|y| y.checked_mul(x));
    let overflow = || Error::Overflow(k.to_vec());
    let lhs = [a, b, c, d]
        .iter()
        .try_fold(0i128, |acc, &x| cube(x).and_then(|y| acc.checked_sub(y)))
        .ok_or_else(overflow)?;
    let rhs = (a + b)
        .checked_mul(a + c)
        .and_then(|x| x.checked_mul(b + c))
        .and_then(|x| x.checked_mul(3))
        .ok_or_else(overflow)?;
    Ok((lhs, rhs))
}

/// `((k1+k2)³ - k1³ - k2³, 3(k1+k2)k1k2)`.
pub fn pair_identity(k1: i64, k2: i64) -> (i128, i128) {
    let (a, b) = (k1 as i128, k2 as i128);
    ((a + b).pow(3) - a.pow(3) - b.pow(3), 3 * (a + b) * a * b)
}

/// With `k = k2 + μ + ν`: `(k·k2 + μν, (k2+μ)(k2+ν))`.
pub fn shift_identity(k2: i64, mu: i64, nu: i64) -> (i128, i128) {
    let (b, m, n) = (k2 as i128, mu as i128, nu as i128);
    let k = b + m + n;
    (k * b + m * n, (b + m) * (b + n))
}

/// Classification of a nonzero triple by which pairwise sums vanish.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResonanceClass {
    /// `k1+k2 = 0`, `k3+k1 = 0`.
    S1,
    /// `k1+k2 = 0` only.
    S2,
    /// `k3+k1 = 0` only.
    S3,
    /// All pairwise sums nonzero.
    Nonresonant,
    /// `k2+k3 = 0`; such triples carry no weight after symmetrisation.
    Degenerate,
}

pub fn resonance_partition(k1: i64, k2: i64, k3: i64) -> Result<ResonanceClass> {
    nonzero(&[k1, k2, k3])?;
    let (a, b, c) = (k1 + k2 == 0, k3 + k1 == 0, k2 + k3 == 0);
    Ok(match (a, b, c) {
        (_, _, true) => ResonanceClass::Degenerate,
        (true, true, false) => ResonanceClass::S1,
        (true, false, false) => ResonanceClass::S2,
        (false, true, false) => ResonanceClass::S3,
        (false, false, false) => ResonanceClass::Nonresonant,
    })
}

fn out_modes(n: usize) -> Vec<i64> {
    let n = n as i64;
    (-n..=n).collect()
}

fn assemble(n: usize, values: Vec<C64>) -> FourierField {
    FourierField::new(n, values).expect("finite operator output")
}

/// `B(u,v)_k = -(1/3) Σ_{k1+k2=k} e^{-3ik k1 k2 t} u_{k1} v_{k2} / (k1 k2)`.
pub fn op_b(u: &FourierField, v: &FourierField, t: f64) -> FourierField {
    let n = u.n().max(v.n());
    let (nu, nv) = (u.n() as i64, v.n() as i64);
    let vals = out_modes(n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return ZERO;
            }
            let mut acc = ZERO;
            for k1 in (-nu..=nu).filter(|&j| j != 0) {
                let k2 = k - k1;
                if k2 == 0 || k2.abs() > nv {
                    continue;
                }
                let term = u.get(k1) * v.get(k2) / (k1 * k2) as f64;
                acc += if t == 0.0 { term } else { term * unit_phase(-3.0 * (k * k1 * k2) as f64, t) };
            }
            acc * (-1.0 / 3.0)
        })
        .collect();
    assemble(n, vals)
}

/// `R(u,v,w)_k = (i/3) Σ_{k1+k2+k3=k, P≠0} e^{-3itP} u_{k1} v_{k2} w_{k3} / k1` with
/// `P = (k1+k2)(k2+k3)(k3+k1)`.
pub fn op_r(u: &FourierField, v: &FourierField, w: &FourierField, t: f64) -> FourierField {
    let n = u.n().max(v.n()).max(w.n());
    let (nu, nv, nw) = (u.n() as i64, v.n() as i64, w.n() as i64);
    let vals = out_modes(n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return ZERO;
            }
            let mut acc = ZERO;
            for k1 in (-nu..=nu).filter(|&j| j != 0) {
                let a = u.get(k1) / k1 as f64;
                if a == ZERO {
                    continue;
                }
                for k2 in (-nv..=nv).filter(|&j| j != 0) {
                    let k3 = k - k1 - k2;
                    if k3 == 0 || k3.abs() > nw {
                        continue;
                    }
                    let p = (k1 + k2) * (k2 + k3) * (k3 + k1);
                    if p == 0 {
                        continue;
                    }
                    let term = a * v.get(k2) * w.get(k3);
                    acc += if t == 0.0 { term } else { term * unit_phase(-3.0 * p as f64, t) };
                }
            }
            acc * I / 3.0
        })
        .collect();
    assemble(n, vals)
}

/// `ρ(v,Λ)_k = (i/3)Λ_k Σ_{|j|≠|k|} Λ_j v_{-j}/j - (i/3)(Λ_{-k} + 2v_{-k})(Λ_k + v_k)v_k/k`.
pub fn op_rho(v: &FourierField, lam: &FourierField) -> FourierField {
    let n = v.n().max(lam.n());
    let ni = n as i64;
    let pairs: Vec<(i64, C64)> = (-ni..=ni)
        .filter(|&j| j != 0)
        .map(|j| (j, lam.get(j) * v.get(-j) / j as f64))
        .collect();
    let total: C64 = pairs.iter().map(|p| p.1).sum();
    let vals = out_modes(n)
        .into_iter()
        .map(|k| {
            if k == 0 {
                return ZERO;
            }
            // remove the |j| = |k| terms from the full sum
            let excl = lam.get(k) * v.get(-k) / k as f64 - lam.get(-k) * v.get(k) / k as f64;
            let x = total - excl;
            let lk = lam.get(k);
            let vk = v.get(k);
            let s1 = (lam.get(-k) + v.get(-k) * 2.0) * (lk + vk) * vk / k as f64;
            (lk * x - s1) * I / 3.0
        })
        .collect();
    assemble(n, vals)
}

/// The same resonant term in the original variables, `ρ̃(u, λ)`.
pub fn op_rho_tilde(u: &FourierField, lam: &FourierField) -> FourierField {
    op_rho(u, lam)
}

/// Brute-force `Σ (Λ+2v)_{k1}(Λ+v)_{k2} v_{k3} / k1` over the resonant sets `S1 ∪ S2 ∪ S3` with
/// `k1+k2+k3 = k`. Equals `3ρ_k / i`.
pub fn resonant_set_sum(v: &FourierField, lam: &FourierField, k: i64) -> C64 {
    let n = v.n().max(lam.n()) as i64;
    let a = lam.add(&v.scale(2.0));
    let b = lam.add(v);
    let mut acc = ZERO;
    for k1 in (-n..=n).filter(|&j| j != 0) {
        for k2 in (-n..=n).filter(|&j| j != 0) {
            let k3 = k - k1 - k2;
            if k3 == 0 || k3.abs() > n {
                continue;
            }
            let cls = resonance_partition(k1, k2, k3).expect("nonzero");
            if matches!(cls, ResonanceClass::S1 | ResonanceClass::S2 | ResonanceClass::S3) {
                acc += a.get(k1) * b.get(k2) * v.get(k3) / k1 as f64;
            }
        }
    }
    acc
}

/// `∂_t v_k = -ik Σ e^{-3ik k1 k2 t} (Λ+v)_{k1} v_{k2}` (β = 2 normalisation).
pub fn interaction_rhs(v: &FourierField, lam: &FourierField, t: f64) -> FourierField {
    let n = v.n().max(lam.n());
    let s = lam.add(v);
    let ni = n as i64;
    let vals = out_modes(n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return ZERO;
            }
            let mut acc = ZERO;
            for k1 in (-ni..=ni).filter(|&j| j != 0) {
                let k2 = k - k1;
                if k2 == 0 || k2.abs() > ni {
                    continue;
                }
                acc += s.get(k1) * v.get(k2) * unit_phase(-3.0 * (k * k1 * k2) as f64, t);
            }
            acc * C64::new(0.0, -(k as f64))
        })
        .collect();
    assemble(n, vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub max_abs_residual: f64,
    /// Largest coefficient among the individual terms.
    pub scale: f64,
    pub relative: f64,
}

/// Checks `∂_t[v + B(Λ+v, v)] = ρ + B(∂_tΛ, v) + R(Λ+2v, Λ+v, v)` at time `t`. The left side is
/// expanded by the product rule with `∂_t v` from [`interaction_rhs`]. Inputs must be supported in
/// `|k| ≤ N/3` so no term is truncated.
pub fn verify_normal_form_identity(
    v: &FourierField,
    lam: &FourierField,
    dlam: &FourierField,
    t: f64,
) -> Result<IdentityCheck> {
    let n = v.n();
    for (name, f) in [("v", v), ("Λ", lam), ("∂_tΛ", dlam)] {
        if 3 * f.support() > n {
            return Err(invalid(format!("{name} must be supported in |k| ≤ N/3")));
        }
        if !f.is_mean_zero() {
            return Err(Error::NotMeanZero("normal-form identity"));
        }
    }
    let (lam, dlam) = (lam.resized(n), dlam.resized(n));
    let dv = interaction_rhs(v, &lam, t);
    let s = lam.add(v);
    let ni = n as i64;
    // derivative of the phase inside B
    let phase_term = FourierField::from_fn(n, |k| {
        if k == 0 {
            return ZERO;
        }
        let mut acc = ZERO;
        for k1 in (-ni..=ni).filter(|&j| j != 0) {
            let k2 = k - k1;
            if k2 != 0 && k2.abs() <= ni {
                acc += s.get(k1) * v.get(k2) * unit_phase(-3.0 * (k * k1 * k2) as f64, t);
            }
        }
        acc * C64::new(0.0, k as f64)
    })?;
    let lhs_terms = [
        dv.clone(),
        phase_term,
        op_b(&dlam.add(&dv), v, t),
        op_b(&s, &dv, t),
    ];
    let rhs_terms = [
        op_rho(v, &lam),
        op_b(&dlam, v, t),
        op_r(&lam.add(&v.scale(2.0)), &s, v, t),
    ];
    let lhs = lhs_terms.iter().fold(FourierField::zeros(n), |a, b| a.add(b));
    let rhs = rhs_terms.iter().fold(FourierField::zeros(n), |a, b| a.add(b));
    let max_abs_residual = lhs.max_abs_diff(&rhs);
    let scale = lhs_terms.iter().chain(&rhs_terms).map(|f| f.max_abs()).fold(0.0, f64::max);
    Ok(IdentityCheck { max_abs_residual, scale, relative: max_abs_residual / scale.max(f64::MIN_POSITIVE) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelPoint {
    pub t: f64,
    pub residual: f64,
}

/// Residual of the integrated normal form
/// `u(t) = e^{tL}g - B(λ+u,u)(t) + e^{tL}B(λ+u,u)(0) + ∫₀ᵗ e^{(t-r)L}[B(α,u) + ρ̃(u,λ) + R(λ+2u,λ+u,u)](r) dr`
/// with `α = ∂_tλ - λ_xxx` and unmodulated operators, evaluated along a sampled trajectory.
///
/// The trajectory must start at `t = 0` with uniform spacing dividing `quadrature_dt`; the
/// integral uses composite Simpson on nodes spaced by `quadrature_dt`, and residuals are reported
/// (in `idx` norm) at every even node. A trajectory for general `β ≠ 0` is rescaled by `β/2`.
pub fn duhamel_residual(
    traj: &[TrajectorySample],
    pot: &PotentialSpec,
    beta: f64,
    quadrature_dt: f64,
    idx: SobolevIndex,
) -> Result<Vec<DuhamelPoint>> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(invalid("β must be nonzero"));
    }
    if traj.len() < 3 || traj[0].t != 0.0 {
        return Err(invalid("trajectory must start at t = 0 with at least 3 samples"));
    }
    if traj.iter().any(|s| s.momentum != 0.0) {
        return Err(Error::NotMeanZero("Duhamel residual"));
    }
    let spacing = traj[1].t - traj[0].t;
    if traj.windows(2).any(|w| ((w[1].t - w[0].t) - spacing).abs() > 1e-9 * spacing) {
        return Err(invalid("trajectory samples must be uniformly spaced"));
    }
    let ratio = quadrature_dt / spacing;
    let q = ratio.round();
    if q < 1.0 || (ratio - q).abs() > 1e-9 * ratio {
        return Err(Error::CoarseSampling { quadrature_dt, sample_dt: spacing });
    }
    let q = q as usize;
    let b = beta / 2.0;
    let n = traj[0].u.n();
    let nodes: Vec<&TrajectorySample> = traj.iter().step_by(q).collect();
    if nodes.len() < 3 {
        return Err(invalid("trajectory too short for one Simpson panel pair"));
    }

    let ops = |s: &TrajectorySample| {
        let u = s.u.scale(b);
        let lam = pot.field(s.t, n);
        let dlam = pot.time_derivative(s.t, n);
        let alpha = dlam.sub(&lam.map_modes(|k, c| c * C64::new(0.0, (k as f64).powi(3))));
        let lu = lam.add(&u);
        let f = op_b(&alpha, &u, 0.0)
            .add(&op_rho_tilde(&u, &lam))
            .add(&op_r(&lam.add(&u.scale(2.0)), &lu, &u, 0.0));
        let g = f.map_modes(|k, c| c * unit_phase(-(k as f64).powi(3), s.t));
        (u.clone(), op_b(&lu, &u, 0.0), g)
    };
    let evaluated: Vec<_> = nodes.par_iter().map(|s| ops(s)).collect();

    let (u0, b0, _) = &evaluated[0];
    let mut integral = FourierField::zeros(n);
    let mut out = Vec::new();
    let h = nodes[1].t - nodes[0].t;
    for m in 1..=(nodes.len() - 1) / 2 {
        let (i0, i1, i2) = (2 * m - 2, 2 * m - 1, 2 * m);
        let panel = evaluated[i0]
            .2
            .add(&evaluated[i1].2.scale(4.0))
            .add(&evaluated[i2].2)
            .scale(h / 3.0);
        integral = integral.add(&panel);
        let t = nodes[i2].t;
        let (ut, bt, _) = &evaluated[i2];
        let rot = |f: &FourierField| f.map_modes(|k, c| c * unit_phase((k as f64).powi(3), t));
        let res = ut.sub(&rot(u0)).add(bt).sub(&rot(b0)).sub(&rot(&integral));
        out.push(DuhamelPoint { t, residual: sobolev_norm(&res, idx)? / b.abs() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random_sobolev_data;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(n: usize, support: usize, seed: u64) -> FourierField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FourierField::from_fn(n, |k| {
            if k == 0 || k.unsigned_abs() as usize > support {
                ZERO
            } else {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        })
        .unwrap()
    }

    #[test]
    fn identity_examples() {
        assert_eq!(four_freq_identity([1, 2, -1, -2]).unwrap(), (0, 0));
        assert_eq!(four_freq_identity([3, -1, -1, -1]).unwrap(), (-24, -24));
        assert!(matches!(four_freq_identity([1, 1, 1, 1]), Err(Error::NonzeroSum(_))));
        assert!(matches!(four_freq_identity([0, 1, -1, 0]), Err(Error::ZeroFrequency(_))));
        assert_eq!(pair_identity(2, 3), (90, 90));
    }

    #[test]
    fn partition_examples() {
        use ResonanceClass::*;
        assert_eq!(resonance_partition(-1, 1, 1).unwrap(), S1);
        assert_eq!(resonance_partition(2, -2, 5).unwrap(), S2);
        assert_eq!(resonance_partition(2, 5, -2).unwrap(), S3);
        assert_eq!(resonance_partition(1, 2, 3).unwrap(), Nonresonant);
        assert_eq!(resonance_partition(1, 2, -2).unwrap(), Degenerate);
        assert!(resonance_partition(0, 1, 1).is_err());
    }

    #[test]
    fn b_of_cosines() {
        let u = FourierField::cosine(4, 1, 1.0);
        let b = op_b(&u, &u, 0.0);
        assert!((b.get(2) - C64::new(-1.0 / 12.0, 0.0)).norm() < 1e-16);
        assert!((b.get(-2) - C64::new(-1.0 / 12.0, 0.0)).norm() < 1e-16);
        assert_eq!(b.get(0), ZERO);
        let bt = op_b(&u, &u, 0.3);
        assert!(bt.is_real_approx());
    }

    #[test]
    fn rho_tilde_of_cosine() {
        let u = FourierField::cosine(4, 1, 1.0);
        let r = op_rho_tilde(&u, &FourierField::zeros(4));
        assert!((r.get(1) - C64::new(0.0, -1.0 / 12.0)).norm() < 1e-16);
        assert!((r.get(-1) - C64::new(0.0, 1.0 / 12.0)).norm() < 1e-16);
    }

    #[test]
    fn rho_cancellation() {
        let n = 32;
        let v = random_complex(n, 10, 1);
        let lam = random_complex(n, 10, 2);
        let rho = op_rho(&v, &lam);
        for k in -(n as i64)..=n as i64 {
            if k == 0 {
                continue;
            }
            let direct = resonant_set_sum(&v, &lam, k);
            let want = rho.get(k) * 3.0 / I;
            assert!((direct - want).norm() <= 1e-12 * want.norm().max(1.0), "k = {k}");
        }
    }

    #[test]
    fn normal_form_identity_random() {
        let n = 16;
        let v = random_sobolev_data(1.0, 5, 3, 0.5).unwrap().resized(n);
        let lam = random_sobolev_data(2.0, 5, 4, 0.3).unwrap().resized(n);
        let dlam = random_sobolev_data(1.0, 4, 5, 0.7).unwrap().resized(n);
        for t in [0.0, 0.37, 2.1] {
            let chk = verify_normal_form_identity(&v, &lam, &dlam, t).unwrap();
            assert!(chk.relative <= 1e-11, "t = {t}: {chk:?}");
        }
        let wide = random_sobolev_data(1.0, 8, 3, 0.5).unwrap().resized(n);
        assert!(verify_normal_form_identity(&wide, &lam, &dlam, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn four_freq_holds(a in -50i64..50, b in -50i64..50, c in -50i64..50) {
            let d = -(a + b + c);
            prop_assume!(a != 0 && b != 0 && c != 0 && d != 0);
            let (l, r) = four_freq_identity([a, b, c, d]).unwrap();
            prop_assert_eq!(l, r);
        }

        #[test]
        fn pair_and_shift_hold(a in -1000i64..1000, b in -1000i64..1000, c in -1000i64..1000) {
            let (l, r) = pair_identity(a, b);
            prop_assert_eq!(l, r);
            let (l, r) = shift_identity(a, b, c);
            prop_assert_eq!(l, r);
        }

        #[test]
        fn partition_is_exhaustive(a in -20i64..20, b in -20i64..20, c in -20i64..20) {
            prop_assume!(a != 0 && b != 0 && c != 0);
            let cls = resonance_partition(a, b, c).unwrap();
            let p = (a + b) * (b + c) * (c + a);
            prop_assert_eq!(cls == ResonanceClass::Nonresonant, p != 0);
        }

        #[test]
        fn operators_preserve_reality(seed in 0u64..200, t in 0.0f64..3.0) {
            let u = random_sobolev_data(0.5, 6, seed, 1.0).unwrap();
            let v = random_sobolev_data(0.5, 6, seed + 1, 1.0).unwrap();
            prop_assert!(op_b(&u, &v, t).is_real_approx());
            prop_assert!(op_r(&u, &v, &u, t).is_real_approx());
            prop_assert!(op_rho(&u, &v).is_real_approx());
        }
    }

    trait RealApprox {
        fn is_real_approx(&self) -> bool;
    }

    impl RealApprox for FourierField {
        fn is_real_approx(&self) -> bool {
            let n = self.n() as i64;
            (0..=n).all(|k| (self.get(-k) - self.get(k).conj()).norm() < 1e-13)
        }
    }
}
