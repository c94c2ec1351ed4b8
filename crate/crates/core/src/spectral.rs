//! Truncated Fourier series on the circle and the grid machinery around them.
//!
//! Convention: `u_k = (1/2π)∫ u e^{-ikx} dx`, so `u(x) = Σ u_k e^{ikx}`.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Extra decay exponent used by [`random_sobolev_data`] so that the data sit in `H^s` but in no
/// `H^{s+0.01}`.
pub const ROUGHNESS_MARGIN: f64 = 0.01;

/// `e^{i·freq·t}` with the argument reduced modulo 2π via an error-free product.
///
/// Integer frequencies at `t = 2π` give exactly 1, which keeps full revivals exact even for
/// `k³ ~ 10^{10}`.
pub fn unit_phase(freq: f64, t: f64) -> C64 {
    let tau = t / TAU;
    let p = freq * tau;
    let err = freq.mul_add(tau, -p);
    let theta = TAU * ((p - p.floor()) + err);
    C64::new(theta.cos(), theta.sin())
}

/// Coefficients `u_k` for `k ∈ [-N, N]`, stored at index `k + N`.
///
/// The `real` and `mean_zero` flags are established at construction by exact comparison and
/// cannot drift because the coefficients are immutable.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    n: usize,
    coeffs: Vec<C64>,
    real: bool,
    mean_zero: bool,
}

impl FourierField {
    pub fn new(n: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 2 * n + 1 {
            return Err(invalid(format!(
                "expected {} coefficients for N = {n}, got {}",
                2 * n + 1,
                coeffs.len()
            )));
        }
        for (i, c) in coeffs.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::NonFinite(i as i64 - n as i64));
            }
        }
        Ok(Self::from_vec_unchecked(n, coeffs))
    }

    fn from_vec_unchecked(n: usize, coeffs: Vec<C64>) -> Self {
        let real = coeffs[n].im == 0.0 && (1..=n).all(|k| coeffs[n - k] == coeffs[n + k].conj());
        let mean_zero = coeffs[n] == C64::new(0.0, 0.0);
        Self {
            n,
            coeffs,
            real,
            mean_zero,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_vec_unchecked(n, vec![C64::new(0.0, 0.0); 2 * n + 1])
    }

    /// Real field from its nonnegative modes `half[k]`, `k = 0..=N`; negative modes are the exact
    /// conjugates and the imaginary part of `half[0]` is dropped.
    pub fn from_half(half: &[C64]) -> Result<Self> {
        if half.is_empty() {
            return Err(invalid("empty half spectrum"));
        }
        let n = half.len() - 1;
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * n + 1];
        coeffs[n] = C64::new(half[0].re, 0.0);
        for k in 1..=n {
            coeffs[n + k] = half[k];
            coeffs[n - k] = half[k].conj();
        }
        Self::new(n, coeffs)
    }

    /// Real field with `u_k = f(k)` for `k ≥ 0`.
    pub fn real_from_fn(n: usize, mut f: impl FnMut(usize) -> C64) -> Result<Self> {
        let half: Vec<C64> = (0..=n).map(&mut f).collect();
        Self::from_half(&half)
    }

    /// General (possibly complex-valued) field with `u_k = f(k)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(i64) -> C64) -> Result<Self> {
        let ni = n as i64;
        Self::new(n, (-ni..=ni).map(&mut f).collect())
    }

    /// `amp · cos(kx)` on `N` modes.
    pub fn cosine(n: usize, k: usize, amp: f64) -> Self {
        assert!(k <= n, "mode {k} outside N = {n}");
        Self::real_from_fn(n, |j| {
            if j == k {
                if k == 0 {
                    C64::new(amp, 0.0)
                } else {
                    C64::new(amp / 2.0, 0.0)
                }
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .expect("finite")
    }

    /// `amp · sin(kx)` on `N` modes.
    pub fn sine(n: usize, k: usize, amp: f64) -> Self {
        assert!(k <= n && k > 0, "mode {k} invalid for N = {n}");
        Self::real_from_fn(n, |j| {
            if j == k {
                C64::new(0.0, -amp / 2.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .expect("finite")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// `u_k`, zero outside `[-N, N]`.
    pub fn get(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.n {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.n as i64) as usize]
        }
    }

    pub fn mean(&self) -> C64 {
        self.coeffs[self.n]
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        let n = self.n as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - n, c))
    }

    /// Coefficients for `k = 0..=N`.
    pub fn half(&self) -> Vec<C64> {
        self.coeffs[self.n..].to_vec()
    }

    /// Largest `|k|` with a nonzero coefficient (0 for the zero field).
    pub fn support(&self) -> usize {
        self.modes()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Zero-padded or truncated copy with `N = n`.
    pub fn resized(&self, n: usize) -> Self {
        let ni = n as i64;
        Self::from_vec_unchecked(n, (-ni..=ni).map(|k| self.get(k)).collect())
    }

    /// Applies `f(k, u_k)` to every mode. If the field is real the map is evaluated on `k ≥ 0`
    /// and mirrored, so `f` must satisfy `f(-k, conj c) = conj f(k, c)` for real inputs.
    pub fn map_modes(&self, f: impl Fn(i64, C64) -> C64) -> Self {
        if self.real {
            let half: Vec<C64> = (0..=self.n).map(|k| f(k as i64, self.get(k as i64))).collect();
            Self::from_half(&half).expect("finite map")
        } else {
            Self::from_vec_unchecked(self.n, self.modes().map(|(k, c)| f(k, c)).collect())
        }
    }

    /// Applies `f` to every mode without symmetry bookkeeping.
    pub fn map_complex(&self, f: impl Fn(i64, C64) -> C64) -> Self {
        Self::from_vec_unchecked(self.n, self.modes().map(|(k, c)| f(k, c)).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_modes(|_, c| c * a)
    }

    fn combine(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        let n = self.n.max(other.n);
        let ni = n as i64;
        Self::from_vec_unchecked(n, (-ni..=ni).map(|k| f(self.get(k), other.get(k))).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.combine(other, |x, y| x + y * a)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Plain-text dump, one `k re im` line per mode, 17 significant digits.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        for (k, c) in self.modes() {
            writeln!(s, "{k} {:.16e} {:.16e}", c.re, c.im).unwrap();
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let mut it = line.split_whitespace();
            let mut next = || it.next().ok_or_else(|| invalid(format!("short dump line `{line}`")));
            let k: i64 = next()?.parse().map_err(|_| invalid(format!("bad mode in `{line}`")))?;
            let re: f64 = next()?.parse().map_err(|_| invalid(format!("bad value in `{line}`")))?;
            let im: f64 = next()?.parse().map_err(|_| invalid(format!("bad value in `{line}`")))?;
            rows.push((k, C64::new(re, im)));
        }
        let n = rows.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * n + 1];
        for (k, c) in rows {
            coeffs[(k + n as i64) as usize] = c;
        }
        Self::new(n, coeffs)
    }
}

/// Mode count `N` and physical grid size `M` with `M ≥ 3N + 1`, enough to dealias quadratic
/// products of fields on `N` modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    m: usize,
}

impl GridSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::with_order(n, m, 2)
    }

    /// Grid able to dealias products of `order` fields, i.e. `M ≥ (order + 1)N + 1`.
    pub fn with_order(n: usize, m: usize, order: usize) -> Result<Self> {
        let min = (order + 1) * n + 1;
        if m < min {
            return Err(Error::GridBelowDealiasing { n, m, min });
        }
        Ok(Self { n, m })
    }

    /// Smallest power of two satisfying the quadratic dealiasing rule.
    pub fn for_modes(n: usize) -> Self {
        Self { n, m: (3 * n + 1).next_power_of_two() }
    }

    /// Smallest power of two satisfying the cubic dealiasing rule.
    pub fn for_cubic(n: usize) -> Self {
        Self { n, m: (4 * n + 1).next_power_of_two() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Grid points `x_j = 2πj/M`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|j| TAU * j as f64 / self.m as f64).collect()
    }
}

/// Sobolev index: weight `|k|` (homogeneous) or `1 + |k|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex {
    pub s: f64,
    pub homogeneous: bool,
}

impl SobolevIndex {
    pub fn homogeneous(s: f64) -> Self {
        Self { s, homogeneous: true }
    }

    pub fn inhomogeneous(s: f64) -> Self {
        Self { s, homogeneous: false }
    }

    pub fn weight(&self, k: i64) -> f64 {
        let a = k.unsigned_abs() as f64;
        if self.homogeneous {
            a.powf(self.s)
        } else {
            (1.0 + a).powf(self.s)
        }
    }
}

/// `(Σ w(k)^{2s} |u_k|²)^{1/2}`. The homogeneous norm needs a mean-zero field.
pub fn sobolev_norm(u: &FourierField, idx: SobolevIndex) -> Result<f64> {
    if idx.homogeneous && !u.is_mean_zero() {
        return Err(Error::NotMeanZero("homogeneous Sobolev norm"));
    }
    let mut acc = 0.0;
    for (k, c) in u.modes() {
        if k == 0 && idx.homogeneous {
            continue;
        }
        let w = idx.weight(k);
        acc += w * w * c.norm_sqr();
    }
    Ok(acc.sqrt())
}

/// Cached complex FFT pair of size `M`, normalised so that `inverse` evaluates `Σ u_k e^{ikx_j}`
/// and `forward` returns `u_k`.
#[derive(Clone)]
pub struct Dft {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dft({})", self.m)
    }
}

impl Dft {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Physical samples of the real field with half spectrum `half` (requires `M ≥ 2N+1`).
    pub fn half_to_phys(&self, half: &[C64], buf: &mut [C64], out: &mut [f64]) {
        self.load_half(half, buf);
        self.inv.process(buf);
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re;
        }
    }

    fn load_half(&self, half: &[C64], buf: &mut [C64]) {
        buf.fill(C64::new(0.0, 0.0));
        buf[0] = C64::new(half[0].re, 0.0);
        for (k, &c) in half.iter().enumerate().skip(1) {
            buf[k] = c;
            buf[self.m - k] = c.conj();
        }
    }

    /// Two real fields in one transform: returns samples of `a` and `b`.
    pub fn half_to_phys2(
        &self,
        a: &[C64],
        b: &[C64],
        buf: &mut [C64],
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        let i = C64::new(0.0, 1.0);
        buf.fill(C64::new(0.0, 0.0));
        buf[0] = C64::new(a[0].re, b[0].re);
        for k in 1..a.len().max(b.len()) {
            let ak = a.get(k).copied().unwrap_or_default();
            let bk = b.get(k).copied().unwrap_or_default();
            buf[k] = ak + i * bk;
            buf[self.m - k] = ak.conj() + i * bk.conj();
        }
        self.inv.process(buf);
        for j in 0..self.m {
            out_a[j] = buf[j].re;
            out_b[j] = buf[j].im;
        }
    }

    /// Half spectrum (`k = 0..=n`) of real samples.
    pub fn phys_to_half(&self, phys: &[f64], n: usize, buf: &mut [C64], out: &mut [C64]) {
        for (b, &p) in buf.iter_mut().zip(phys) {
            *b = C64::new(p, 0.0);
        }
        self.fwd.process(buf);
        let scale = 1.0 / self.m as f64;
        out[0] = C64::new(buf[0].re * scale, 0.0);
        for k in 1..=n {
            out[k] = buf[k] * scale;
        }
    }

    /// Complex samples `Σ u_k e^{ikx_j}` of a general field.
    pub fn field_to_phys(&self, u: &FourierField) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.m];
        for (k, c) in u.modes() {
            buf[k.rem_euclid(self.m as i64) as usize] += c;
        }
        self.inv.process(&mut buf);
        buf
    }

    /// Coefficients on `[-n, n]` of complex samples.
    pub fn phys_to_field(&self, phys: &[C64], n: usize) -> Result<FourierField> {
        let mut buf = phys.to_vec();
        self.fwd.process(&mut buf);
        let scale = 1.0 / self.m as f64;
        FourierField::from_fn(n, |k| buf[k.rem_euclid(self.m as i64) as usize] * scale)
    }
}

/// Physical samples of `u` on `grid`.
pub fn to_physical(u: &FourierField, grid: &GridSpec) -> Result<Vec<C64>> {
    if grid.n() < u.n() {
        return Err(Error::GridTooSmall { grid_modes: grid.n(), field_modes: u.n() });
    }
    Ok(Dft::new(grid.m()).field_to_phys(u))
}

/// Real samples of a real field on `grid`.
pub fn to_physical_real(u: &FourierField, grid: &GridSpec) -> Result<Vec<f64>> {
    if !u.is_real() {
        return Err(Error::NotReal("real transform"));
    }
    if grid.n() < u.n() {
        return Err(Error::GridTooSmall { grid_modes: grid.n(), field_modes: u.n() });
    }
    let dft = Dft::new(grid.m());
    let mut buf = vec![C64::new(0.0, 0.0); grid.m()];
    let mut out = vec![0.0; grid.m()];
    dft.half_to_phys(&u.half(), &mut buf, &mut out);
    Ok(out)
}

/// Coefficients on `grid.n()` modes of complex samples.
pub fn from_physical(samples: &[C64], grid: &GridSpec) -> Result<FourierField> {
    if samples.len() != grid.m() {
        return Err(invalid(format!("expected {} samples, got {}", grid.m(), samples.len())));
    }
    Dft::new(grid.m()).phys_to_field(samples, grid.n())
}

/// Coefficients of real samples; the result is exactly Hermitian.
pub fn from_physical_real(samples: &[f64], grid: &GridSpec) -> Result<FourierField> {
    if samples.len() != grid.m() {
        return Err(invalid(format!("expected {} samples, got {}", grid.m(), samples.len())));
    }
    let dft = Dft::new(grid.m());
    let mut buf = vec![C64::new(0.0, 0.0); grid.m()];
    let mut half = vec![C64::new(0.0, 0.0); grid.n() + 1];
    dft.phys_to_half(samples, grid.n(), &mut buf, &mut half);
    FourierField::from_half(&half)
}

/// Exact truncated convolution `(u∗v)_k = Σ_{k1+k2=k} u_{k1} v_{k2}` for `|k| ≤ max(N_u, N_v)`,
/// computed pseudo-spectrally on a dealiased grid.
pub fn convolve(u: &FourierField, v: &FourierField) -> FourierField {
    convolve_to(u, v, u.n().max(v.n()))
}

/// Convolution with output truncated to `n_out` modes.
pub fn convolve_to(u: &FourierField, v: &FourierField, n_out: usize) -> FourierField {
    let m = (u.n() + v.n() + n_out + 1).next_power_of_two().max(2);
    let dft = Dft::new(m);
    if u.is_real() && v.is_real() {
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
        dft.half_to_phys2(&u.half(), &v.half(), &mut buf, &mut a, &mut b);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut half = vec![C64::new(0.0, 0.0); n_out + 1];
        dft.phys_to_half(&prod, n_out, &mut buf, &mut half);
        FourierField::from_half(&half).expect("finite product")
    } else {
        let a = dft.field_to_phys(u);
        let b = dft.field_to_phys(v);
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        dft.phys_to_field(&prod, n_out).expect("finite product")
    }
}

/// Direct O(N²) convolution, output on `n_out` modes.
pub fn convolve_direct(u: &FourierField, v: &FourierField, n_out: usize) -> FourierField {
    let (nu, nv) = (u.n() as i64, v.n() as i64);
    FourierField::from_fn(n_out, |k| {
        let mut acc = C64::new(0.0, 0.0);
        for k1 in -nu..=nu {
            let k2 = k - k1;
            if k2.abs() <= nv {
                acc += u.get(k1) * v.get(k2);
            }
        }
        acc
    })
    .expect("finite product")
}

/// Real mean-zero datum with `|g_k| = A·|k|^{-s-1/2-0.01}` and uniform phases.
///
/// Phases are drawn for `k = 1, 2, …` in order from a ChaCha stream seeded by `seed`, so data
/// with the same seed and different `N` agree on their common modes.
pub fn random_sobolev_data(s: f64, n: usize, seed: u64, amplitude: f64) -> Result<FourierField> {
    if !s.is_finite() || !amplitude.is_finite() {
        return Err(invalid("non-finite s or amplitude"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FourierField::real_from_fn(n, |k| {
        if k == 0 {
            return C64::new(0.0, 0.0);
        }
        let phase: f64 = rng.gen::<f64>() * TAU;
        let mag = amplitude * (k as f64).powf(-s - 0.5 - ROUGHNESS_MARGIN);
        C64::from_polar(mag, phase)
    })
}

/// Splits off the mean: returns `(u - u_0, u_0)`.
pub fn project_mean_zero(u: &FourierField) -> (FourierField, C64) {
    let mean = u.mean();
    (u.map_modes(|k, c| if k == 0 { C64::new(0.0, 0.0) } else { c }), mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cosine_samples_and_norm() {
        let u = FourierField::cosine(1, 1, 1.0);
        assert_eq!(u.get(1), c(0.5, 0.0));
        assert_eq!(u.get(-1), c(0.5, 0.0));
        let grid = GridSpec::new(1, 16).unwrap();
        let x = to_physical_real(&u, &grid).unwrap();
        for (xj, p) in grid.points().iter().zip(&x) {
            assert!((xj.cos() - p).abs() < 1e-15);
        }
        let h0 = sobolev_norm(&u, SobolevIndex::homogeneous(0.0)).unwrap();
        assert!((h0 - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_norm_rejects_mean() {
        let u = FourierField::cosine(2, 0, 1.0);
        assert!(matches!(
            sobolev_norm(&u, SobolevIndex::homogeneous(1.0)),
            Err(Error::NotMeanZero(_))
        ));
        assert_eq!(sobolev_norm(&u, SobolevIndex::inhomogeneous(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn grid_rules() {
        assert!(matches!(GridSpec::new(10, 30), Err(Error::GridBelowDealiasing { .. })));
        assert!(GridSpec::new(10, 31).is_ok());
        assert_eq!(GridSpec::for_modes(512).m(), 2048);
        assert_eq!(GridSpec::for_cubic(128).m(), 1024);
        let u = FourierField::zeros(20);
        assert!(matches!(
            to_physical(&u, &GridSpec::for_modes(10)),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn cos_squared() {
        let u = FourierField::cosine(4, 1, 1.0);
        let w = convolve(&u, &u);
        assert!((w.get(0).re - 0.5).abs() < 1e-15);
        assert!((w.get(2).re - 0.25).abs() < 1e-15);
        assert!((w.get(-2).re - 0.25).abs() < 1e-15);
        assert!(w.get(1).norm() < 1e-16);
    }

    #[test]
    fn random_data_decay_and_nesting() {
        let s = 0.3;
        let g = random_sobolev_data(s, 4096, 11, 1.0).unwrap();
        assert!(g.is_real() && g.is_mean_zero());
        // log-log slope of |g_k|
        let (k1, k2) = (16.0f64, 4096.0f64);
        let slope = (g.get(4096).norm().ln() - g.get(16).norm().ln()) / (k2.ln() - k1.ln());
        assert!((slope + s + 0.5 + ROUGHNESS_MARGIN).abs() < 1e-12);
        let small = random_sobolev_data(s, 64, 11, 1.0).unwrap();
        assert_eq!(small, g.resized(64));
        assert_ne!(random_sobolev_data(s, 64, 12, 1.0).unwrap(), small);
    }

    #[test]
    fn dump_round_trip() {
        let g = random_sobolev_data(0.0, 16, 3, 0.7).unwrap();
        let back = FourierField::from_dump(&g.to_dump()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn unit_phase_exact_at_revival() {
        for k in [1i64, 17, 2047, 100_000] {
            let f = (k * k * k) as f64;
            assert_eq!(unit_phase(f, TAU), c(1.0, 0.0));
        }
        let z = unit_phase(3.0, 0.25);
        assert!((z - C64::from_polar(1.0, 0.75)).norm() < 1e-15);
    }

    #[test]
    fn project_mean() {
        let u = FourierField::cosine(3, 0, 2.5).add(&FourierField::sine(3, 2, 1.0));
        let (v, m) = project_mean_zero(&u);
        assert_eq!(m, c(2.5, 0.0));
        assert!(v.is_mean_zero() && v.is_real());
    }

    fn arb_real_field(n: usize) -> impl Strategy<Value = FourierField> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n + 1).prop_map(|v| {
            let half: Vec<C64> = v.into_iter().map(|(a, b)| c(a, b)).collect();
            FourierField::from_half(&half).unwrap()
        })
    }

    fn arb_field(n: usize) -> impl Strategy<Value = FourierField> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * n + 1).prop_map(move |v| {
            FourierField::new(n, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(u in arb_field(12)) {
            let grid = GridSpec::for_modes(12);
            let x = to_physical(&u, &grid).unwrap();
            let back = from_physical(&x, &grid).unwrap();
            prop_assert!(back.max_abs_diff(&u) <= 1e-12 * u.max_abs().max(1.0));
            let mean_sq: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / grid.m() as f64;
            let h0 = sobolev_norm(&u, SobolevIndex::inhomogeneous(0.0)).unwrap();
            prop_assert!((mean_sq.sqrt() - h0).abs() <= 1e-12 * h0.max(1.0));
        }

        #[test]
        fn real_fields_sample_real(u in arb_real_field(10)) {
            prop_assert!(u.is_real());
            let grid = GridSpec::for_modes(10);
            let x = to_physical(&u, &grid).unwrap();
            prop_assert!(x.iter().all(|z| z.im.abs() < 1e-13));
            let back = from_physical_real(&to_physical_real(&u, &grid).unwrap(), &grid).unwrap();
            prop_assert!(back.is_real());
            prop_assert!(back.max_abs_diff(&u) < 1e-13);
        }

        #[test]
        fn convolution_matches_direct(u in arb_field(7), v in arb_real_field(5)) {
            let fast = convolve(&u, &v);
            let slow = convolve_direct(&u, &v, 7);
            prop_assert!(fast.max_abs_diff(&slow) < 1e-12);
            let r = convolve(&v, &v);
            prop_assert!(r.is_real());
            prop_assert!(r.max_abs_diff(&convolve_direct(&v, &v, 5)) < 1e-12);
        }
    }
}
