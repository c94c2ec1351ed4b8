//! Pseudo-spectral time stepping for
//! `u_t + u_xxx + ∂_x(λu) + β u u_x = 0` (KdV with potential) and for the focusing mKdV
//! `v_t + v_xxx = 6 v² v_x`, optionally in the frame that removes `6⟨v²⟩v_x`.
//!
//! Both schemes are classical RK4 applied in the interaction variables `v_k = e^{-iω_k t} u_k`
//! referenced to the start of each step, written in the equivalent integrating-factor form.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linear::LinearOp;
use crate::spectral::{
    project_mean_zero, to_physical_real, unit_phase, Dft, FourierField, GridSpec, SobolevIndex, C64,
};

/// Any coefficient above this magnitude aborts the run.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Upper bound on `dt · N · (advection speed)` accepted before a run starts. Integrating-factor
/// RK4 loses stability well inside the classical RK4 interval once the dispersive phase per step is
/// large; 0.15 sits below the smallest failing value observed for smooth data.
pub const STABILITY_LIMIT: f64 = 0.15;

/// Relative L² drift at which an unforced run is declared unstable. The truncated flows conserve
/// L² exactly, so drift is pure time-stepping error; the weak high-mode instability of
/// integrating-factor RK4 shows up here long before the blow-up guard fires.
pub const L2_DRIFT_LIMIT: f64 = 1e-6;

/// Relative tolerance of the fixed point that recovers `u` from the normal-form variable.
const NF_TOL: f64 = 1e-15;
const NF_MAX_ITER: usize = 200;

/// `a e^{iωt}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeHarmonic {
    pub re: f64,
    pub im: f64,
    pub omega: f64,
}

impl TimeHarmonic {
    fn value(&self, t: f64) -> C64 {
        C64::new(self.re, self.im) * unit_phase(self.omega, t)
    }
}

/// One positive mode of the potential; the `-k` mode is the conjugate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialMode {
    pub k: usize,
    pub terms: Vec<TimeHarmonic>,
}

/// Real mean-zero potential `λ(x,t)` given as a finite Fourier series in `x` whose coefficients
/// are finite sums of time harmonics, so `∂_t λ` is available in closed form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub modes: Vec<PotentialMode>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `amp · cos(k(x - speed·t))`.
    pub fn traveling_cosine(amp: f64, k: usize, speed: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("potential must be mean-zero (k ≥ 1)"));
        }
        Ok(Self {
            modes: vec![PotentialMode {
                k,
                terms: vec![TimeHarmonic { re: amp / 2.0, im: 0.0, omega: -(k as f64) * speed }],
            }],
        })
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.terms.iter().all(|h| h.re == 0.0 && h.im == 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.modes {
            if m.k == 0 {
                return Err(invalid("potential must be mean-zero (k ≥ 1)"));
            }
            if m.terms.iter().any(|h| !(h.re.is_finite() && h.im.is_finite() && h.omega.is_finite())) {
                return Err(invalid("non-finite potential coefficient"));
            }
        }
        Ok(())
    }

    fn coeff_half(&self, t: f64, n: usize, derivative: bool) -> Vec<C64> {
        let mut half = vec![C64::new(0.0, 0.0); n + 1];
        for m in self.modes.iter().filter(|m| m.k <= n) {
            for h in &m.terms {
                let v = h.value(t);
                half[m.k] += if derivative { v * C64::new(0.0, h.omega) } else { v };
            }
        }
        half
    }

    /// `λ(t)` on `n` modes.
    pub fn field(&self, t: f64, n: usize) -> FourierField {
        FourierField::from_half(&self.coeff_half(t, n, false)).expect("finite potential")
    }

    /// `∂_t λ(t)` on `n` modes.
    pub fn time_derivative(&self, t: f64, n: usize) -> FourierField {
        FourierField::from_half(&self.coeff_half(t, n, true)).expect("finite potential")
    }

    /// `Σ_k |k||λ_k(t)|`, an upper bound for `‖λ_x(t)‖_∞` that is attained by single-mode
    /// potentials.
    pub fn lipschitz_bound(&self, t: f64) -> f64 {
        let n = self.modes.iter().map(|m| m.k).max().unwrap_or(0);
        let half = self.coeff_half(t, n, false);
        2.0 * half.iter().enumerate().map(|(k, c)| k as f64 * c.norm()).sum::<f64>()
    }

    /// `Σ_k |λ_k(t)|`, an upper bound for `‖λ(t)‖_∞`.
    pub fn sup_bound(&self, t: f64) -> f64 {
        let n = self.modes.iter().map(|m| m.k).max().unwrap_or(0);
        2.0 * self.coeff_half(t, n, false).iter().map(|c| c.norm()).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Integrating-factor RK4 in the original variables.
    Ifrk4,
    /// Integrating-factor RK4 applied to `z = u + (β/2)B(u,u)`, in which the quadratic interaction
    /// has been removed. Only for KdV without potential.
    NormalFormIfrk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    Kdv,
    /// `v_t + v_xxx = 6 v² v_x`.
    Mkdv,
    /// `w_t + w_xxx = 6 (w² - ⟨w²⟩) w_x`.
    MkdvGalilean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub equation: Equation,
    pub beta: f64,
    /// Spatial mean of the original KdV datum, removed by [`gauge_mean`].
    pub mean: f64,
    pub dealias: bool,
    /// Homogeneous Sobolev indices recorded with every sample.
    pub diagnostics: Vec<f64>,
}

impl SolverConfig {
    pub fn kdv(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::Ifrk4,
            equation: Equation::Kdv,
            beta: 2.0,
            mean: 0.0,
            dealias: true,
            diagnostics: vec![1.0],
        }
    }

    pub fn mkdv(dt: f64, t_end: f64) -> Self {
        Self { equation: Equation::Mkdv, beta: 0.0, ..Self::kdv(dt, t_end) }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_diagnostics(mut self, s: Vec<f64>) -> Self {
        self.diagnostics = s;
        self
    }

    /// Linear part `L = -∂³ + c∂` including the transport produced by the mean gauge.
    pub fn linear_op(&self) -> LinearOp {
        match self.equation {
            Equation::Kdv => LinearOp { c: -self.beta * self.mean },
            _ => LinearOp::airy(),
        }
    }

    pub fn grid(&self, n: usize) -> GridSpec {
        match (self.dealias, self.equation) {
            (false, _) => GridSpec::with_order(n, (2 * n + 1).next_power_of_two(), 1).expect("valid"),
            (true, Equation::Kdv) => GridSpec::for_modes(n),
            (true, _) => GridSpec::for_cubic(n),
        }
    }

    /// `dt · N · speed`, where `speed` bounds the advection velocity of the nonlinearity.
    pub fn stability_score(&self, g: &FourierField, pot: &PotentialSpec) -> Result<f64> {
        let samples = to_physical_real(g, &GridSpec::for_modes(g.n()))?;
        let sup = samples.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let speed = match self.equation {
            Equation::Kdv => self.beta.abs() * sup + pot.sup_bound(0.0),
            _ => 6.0 * sup * sup,
        };
        Ok(self.dt * g.n() as f64 * speed)
    }

    fn validate(&self, g: &FourierField, pot: &PotentialSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        if !self.t_end.is_finite() || !self.beta.is_finite() || !self.mean.is_finite() {
            return Err(invalid("non-finite solver parameter"));
        }
        pot.validate()?;
        if self.equation != Equation::Kdv && !pot.is_zero() {
            return Err(invalid("the mKdV branch does not take a potential"));
        }
        if self.scheme == Scheme::NormalFormIfrk4 {
            if self.equation != Equation::Kdv || !pot.is_zero() {
                return Err(invalid("normal-form scheme needs KdV without potential"));
            }
            if self.beta == 0.0 {
                return Err(invalid("normal-form scheme needs β ≠ 0"));
            }
        }
        let score = self.stability_score(g, pot)?;
        if score > STABILITY_LIMIT {
            return Err(Error::StepTooLarge { dt: self.dt, score, limit: STABILITY_LIMIT });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// Mean-zero state.
    pub u: FourierField,
    /// `u_0` of the original (ungauged) variable.
    pub momentum: f64,
    pub l2: f64,
    /// Homogeneous `H^s` norms for `SolverConfig::diagnostics`.
    pub norms: Vec<f64>,
}

/// Splits a real KdV datum into its mean-zero part and mean. The returned operator is the linear
/// part of the gauged equation, `c = -β·mean`.
pub fn gauge_mean(g: &FourierField, beta: f64) -> Result<(FourierField, f64, LinearOp)> {
    if !g.is_real() {
        return Err(Error::NotReal("gauge_mean"));
    }
    let (g0, m) = project_mean_zero(g);
    Ok((g0, m.re, LinearOp::new(-beta * m.re)?))
}

struct Pseudo {
    n: usize,
    m: usize,
    dft: Dft,
    buf: Vec<C64>,
    pa: Vec<f64>,
    pb: Vec<f64>,
    ha: Vec<C64>,
}

impl Pseudo {
    fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            dft: Dft::new(m),
            buf: vec![C64::new(0.0, 0.0); m],
            pa: vec![0.0; m],
            pb: vec![0.0; m],
            ha: vec![C64::new(0.0, 0.0); n + 1],
        }
    }
}

fn ik(k: usize) -> C64 {
    C64::new(0.0, k as f64)
}

/// Nonlinear part (everything except `iω_k u_k`) on half spectra.
struct Nonlinear<'a> {
    eq: Equation,
    beta: f64,
    mean: f64,
    pot: &'a PotentialSpec,
    ps: Pseudo,
}

impl Nonlinear<'_> {
    fn eval(&mut self, u: &[C64], t: f64, out: &mut [C64]) {
        let n = self.ps.n;
        let ps = &mut self.ps;
        match self.eq {
            Equation::Kdv => {
                let lam = self.pot.coeff_half(t, n, false);
                let b = self.beta / 2.0;
                ps.dft.half_to_phys2(u, &lam, &mut ps.buf, &mut ps.pa, &mut ps.pb);
                for j in 0..ps.m {
                    ps.pa[j] *= ps.pb[j] + b * ps.pa[j];
                }
                ps.dft.phys_to_half(&ps.pa, n, &mut ps.buf, &mut ps.ha);
                out[0] = C64::new(0.0, 0.0);
                for k in 1..=n {
                    out[k] = -ik(k) * (ps.ha[k] + lam[k] * self.mean);
                }
            }
            Equation::Mkdv | Equation::MkdvGalilean => {
                ps.dft.half_to_phys(u, &mut ps.buf, &mut ps.pa);
                for x in ps.pa.iter_mut() {
                    *x = *x * *x * *x;
                }
                ps.dft.phys_to_half(&ps.pa, n, &mut ps.buf, &mut ps.ha);
                let mu = if self.eq == Equation::MkdvGalilean { l2_sq(u) } else { 0.0 };
                out[0] = C64::new(0.0, 0.0);
                for k in 1..=n {
                    out[k] = ik(k) * (ps.ha[k] * 2.0 - u[k] * (6.0 * mu));
                }
            }
        }
    }
}

fn l2_sq(half: &[C64]) -> f64 {
    half[0].norm_sqr() + 2.0 * half[1..].iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Normal-form variable `z = u + b·B(u,u)` with `b = β/2` and `B(u,u) = (1/3)Π_N[(∂⁻¹u)²]`.
struct NormalForm {
    b: f64,
    ps: Pseudo,
    inv: Vec<C64>,
    w: Vec<C64>,
}

impl NormalForm {
    fn antideriv(u: &[C64], out: &mut [C64]) {
        out[0] = C64::new(0.0, 0.0);
        for k in 1..u.len() {
            out[k] = u[k] / ik(k);
        }
    }

    /// `b·B(u,u)` into `out`.
    fn correction(&mut self, u: &[C64], out: &mut [C64]) {
        let n = self.ps.n;
        Self::antideriv(u, &mut self.inv);
        let ps = &mut self.ps;
        ps.dft.half_to_phys(&self.inv, &mut ps.buf, &mut ps.pa);
        for x in ps.pa.iter_mut() {
            *x *= *x;
        }
        ps.dft.phys_to_half(&ps.pa, n, &mut ps.buf, out);
        out[0] = C64::new(0.0, 0.0);
        for c in out[1..].iter_mut() {
            *c *= self.b / 3.0;
        }
    }

    /// Solves `u + b·B(u,u) = z` by fixed-point iteration starting from `u`.
    fn recover(&mut self, z: &[C64], u: &mut [C64], t: f64) -> Result<()> {
        let mut corr = vec![C64::new(0.0, 0.0); z.len()];
        let scale = z.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for _ in 0..NF_MAX_ITER {
            self.correction(u, &mut corr);
            let mut change = 0.0f64;
            for k in 0..z.len() {
                let next = z[k] - corr[k];
                change = change.max((next - u[k]).norm());
                u[k] = next;
            }
            if change <= NF_TOL * scale {
                return Ok(());
            }
        }
        Err(Error::Unstable { t, k: 0, magnitude: scale })
    }

    /// Cubic remainder `∂_t z - iω z = -(2/3) b² Π_N[w ∂⁻¹u]`, `w = Π_N(u²)` with `w_0 = 0`.
    fn cubic(&mut self, u: &[C64], out: &mut [C64]) {
        let n = self.ps.n;
        Self::antideriv(u, &mut self.inv);
        let ps = &mut self.ps;
        ps.dft.half_to_phys2(u, &self.inv, &mut ps.buf, &mut ps.pa, &mut ps.pb);
        for x in ps.pa.iter_mut() {
            *x *= *x;
        }
        ps.dft.phys_to_half(&ps.pa, n, &mut ps.buf, &mut self.w);
        self.w[0] = C64::new(0.0, 0.0);
        ps.dft.half_to_phys(&self.w, &mut ps.buf, &mut ps.pa);
        for j in 0..ps.m {
            ps.pa[j] *= ps.pb[j];
        }
        ps.dft.phys_to_half(&ps.pa, n, &mut ps.buf, out);
        out[0] = C64::new(0.0, 0.0);
        let f = -2.0 / 3.0 * self.b * self.b;
        for c in out[1..].iter_mut() {
            *c *= f;
        }
    }
}

struct Stepper<'a> {
    omega: Vec<f64>,
    nl: Nonlinear<'a>,
    nf: Option<NormalForm>,
    /// Physical-variable state when the normal form is active.
    u_phys: Vec<C64>,
    e_half: Vec<C64>,
    e_full: Vec<C64>,
    h_cached: f64,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl<'a> Stepper<'a> {
    fn new(n: usize, m: usize, cfg: &SolverConfig, pot: &'a PotentialSpec) -> Self {
        let op = cfg.linear_op();
        let zero = vec![C64::new(0.0, 0.0); n + 1];
        let nf = (cfg.scheme == Scheme::NormalFormIfrk4).then(|| NormalForm {
            b: cfg.beta / 2.0,
            ps: Pseudo::new(n, m),
            inv: zero.clone(),
            w: zero.clone(),
        });
        Self {
            omega: (0..=n).map(|k| op.frequency(k as i64)).collect(),
            nl: Nonlinear { eq: cfg.equation, beta: cfg.beta, mean: cfg.mean, pot, ps: Pseudo::new(n, m) },
            nf,
            u_phys: zero.clone(),
            e_half: zero.clone(),
            e_full: zero.clone(),
            h_cached: f64::NAN,
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            tmp: zero,
        }
    }

    fn rhs(&mut self, y: &[C64], t: f64, out: &mut [C64]) -> Result<()> {
        match &mut self.nf {
            None => self.nl.eval(y, t, out),
            Some(nf) => {
                nf.recover(y, &mut self.u_phys, t)?;
                nf.cubic(&self.u_phys, out);
            }
        }
        Ok(())
    }

    fn set_step(&mut self, h: f64) {
        if h.to_bits() != self.h_cached.to_bits() {
            for (k, &w) in self.omega.iter().enumerate() {
                self.e_half[k] = unit_phase(w, h / 2.0);
                self.e_full[k] = unit_phase(w, h);
            }
            self.h_cached = h;
        }
    }

    fn step(&mut self, y: &mut [C64], t: f64, h: f64) -> Result<()> {
        self.set_step(h);
        let n1 = y.len();
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        let (e, e2) = (self.e_half.clone(), self.e_full.clone());

        self.rhs(y, t, &mut k[0])?;
        for j in 0..n1 {
            k[0][j] *= h;
            tmp[j] = e[j] * (y[j] + k[0][j] * 0.5);
        }
        self.rhs(&tmp, t + h / 2.0, &mut k[1])?;
        for j in 0..n1 {
            k[1][j] *= h;
            tmp[j] = e[j] * y[j] + k[1][j] * 0.5;
        }
        self.rhs(&tmp, t + h / 2.0, &mut k[2])?;
        for j in 0..n1 {
            k[2][j] *= h;
            tmp[j] = e2[j] * y[j] + e[j] * k[2][j];
        }
        self.rhs(&tmp, t + h, &mut k[3])?;
        for j in 0..n1 {
            k[3][j] *= h;
            y[j] = e2[j] * y[j]
                + (e2[j] * k[0][j] + e[j] * (k[1][j] + k[2][j]) * 2.0 + k[3][j]) / 6.0;
        }
        self.k = k;
        self.tmp = tmp;
        Ok(())
    }

    /// Physical state for output.
    fn physical(&mut self, y: &[C64], t: f64) -> Result<Vec<C64>> {
        match &mut self.nf {
            None => Ok(y.to_vec()),
            Some(nf) => {
                nf.recover(y, &mut self.u_phys, t)?;
                Ok(self.u_phys.clone())
            }
        }
    }
}

fn guard(y: &[C64], t: f64) -> Result<()> {
    for (k, c) in y.iter().enumerate() {
        let a = c.norm();
        if !a.is_finite() || a > BLOWUP_THRESHOLD {
            return Err(Error::Unstable { t, k: k as i64, magnitude: a });
        }
    }
    Ok(())
}

fn sample(t: f64, half: Vec<C64>, cfg: &SolverConfig) -> Result<TrajectorySample> {
    let u = FourierField::from_half(&half)?;
    let l2 = l2_sq(&half).sqrt();
    let norms = cfg
        .diagnostics
        .iter()
        .map(|&s| crate::spectral::sobolev_norm(&u, SobolevIndex::homogeneous(s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySample { t, momentum: cfg.mean + u.mean().re, u, l2, norms })
}

/// Integrates from `t = 0` and records the state at each of `sample_times`, which must be
/// monotone and lie between 0 and `cfg.t_end`. Each interval is split into equal substeps no
/// longer than `cfg.dt`.
pub fn evolve(
    g: &FourierField,
    pot: &PotentialSpec,
    cfg: &SolverConfig,
    sample_times: &[f64],
) -> Result<Vec<TrajectorySample>> {
    if !g.is_real() {
        return Err(Error::NotReal("evolve"));
    }
    if !g.is_mean_zero() {
        return Err(Error::NotMeanZero("evolve (apply gauge_mean first)"));
    }
    cfg.validate(g, pot)?;
    let (lo, hi) = if cfg.t_end >= 0.0 { (0.0, cfg.t_end) } else { (cfg.t_end, 0.0) };
    if sample_times.iter().any(|&t| !(lo..=hi).contains(&t)) {
        return Err(invalid("sample time outside [0, t_end]"));
    }
    let inc = sample_times.windows(2).all(|w| w[1] >= w[0]);
    let dec = sample_times.windows(2).all(|w| w[1] <= w[0]);
    if !(inc || dec) {
        return Err(invalid("sample times must be monotone"));
    }

    let n = g.n();
    let grid = cfg.grid(n);
    let mut stepper = Stepper::new(n, grid.m(), cfg, pot);
    let mut y = g.half();
    if let Some(nf) = &mut stepper.nf {
        stepper.u_phys.clone_from(&y);
        let mut corr = vec![C64::new(0.0, 0.0); n + 1];
        nf.correction(&y, &mut corr);
        for k in 0..=n {
            y[k] += corr[k];
        }
    }

    let l0 = l2_sq(&g.half()).sqrt();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &target in sample_times {
        let dist = target - t;
        let nsub = (dist.abs() / cfg.dt - 1e-9).ceil().max(0.0) as usize;
        if nsub > 0 {
            let h = dist / nsub as f64;
            for i in 0..nsub {
                stepper.step(&mut y, t + i as f64 * h, h)?;
                guard(&y, t + (i + 1) as f64 * h)?;
            }
        }
        t = target;
        let phys = stepper.physical(&y, t)?;
        let smp = sample(t, phys, cfg)?;
        if pot.is_zero() {
            let drift = (smp.l2 - l0).abs() / l0.max(f64::MIN_POSITIVE);
            if drift > L2_DRIFT_LIMIT {
                return Err(Error::Drift { t, drift });
            }
        }
        out.push(smp);
    }
    Ok(out)
}

/// `∂_t u_k = iω_k u_k - ik Σ (λ_{k1} + (β/2)u_{k1}) u_{k2} - ik·mean·λ_k` for a mean-zero real
/// state, with `ω_k = k³ - β·mean·k`.
pub fn rhs_kdv(u: &FourierField, pot: &PotentialSpec, t: f64, beta: f64, mean: f64) -> Result<FourierField> {
    let cfg = SolverConfig { beta, mean, ..SolverConfig::kdv(1.0, 0.0) };
    rhs_generic(u, pot, t, &cfg)
}

/// `∂_t v_k = ik³ v_k + 2ik (v³)_k`, or with `-6ik⟨v²⟩v_k` added in the Galilean frame.
pub fn rhs_mkdv(v: &FourierField, galilean: bool) -> Result<FourierField> {
    let eq = if galilean { Equation::MkdvGalilean } else { Equation::Mkdv };
    let cfg = SolverConfig { equation: eq, ..SolverConfig::mkdv(1.0, 0.0) };
    rhs_generic(v, &PotentialSpec::zero(), 0.0, &cfg)
}

fn rhs_generic(u: &FourierField, pot: &PotentialSpec, t: f64, cfg: &SolverConfig) -> Result<FourierField> {
    if !u.is_real() {
        return Err(Error::NotReal("rhs"));
    }
    if !u.is_mean_zero() {
        return Err(Error::NotMeanZero("rhs"));
    }
    let n = u.n();
    let grid = cfg.grid(n);
    let mut nl = Nonlinear { eq: cfg.equation, beta: cfg.beta, mean: cfg.mean, pot, ps: Pseudo::new(n, grid.m()) };
    let half = u.half();
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    nl.eval(&half, t, &mut out);
    let op = cfg.linear_op();
    for k in 1..=n {
        out[k] += C64::new(0.0, op.frequency(k as i64)) * half[k];
    }
    FourierField::from_half(&out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallPoint {
    pub t: f64,
    pub l2: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub momentum_drift: f64,
    pub max_abs_mean_mode: f64,
    /// Largest `|‖u(t)‖ - ‖u(0)‖| / ‖u(0)‖`; only meaningful without potential.
    pub l2_relative_drift: Option<f64>,
    /// `‖u(t)‖ ≤ ‖u(0)‖ exp(∫₀ᵗ ‖λ_x‖_∞)` at every sample (with potential).
    pub gronwall: Option<Vec<GronwallPoint>>,
}

/// Composite Simpson rule for `∫_a^b f` on an even number of panels.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(2) + panels % 2;
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

pub fn conservation_report(traj: &[TrajectorySample], pot: &PotentialSpec) -> Result<ConservationReport> {
    let first = traj.first().ok_or_else(|| invalid("empty trajectory"))?;
    let momentum_drift = traj.iter().map(|s| (s.momentum - first.momentum).abs()).fold(0.0, f64::max);
    let max_abs_mean_mode = traj.iter().map(|s| s.u.mean().norm()).fold(0.0, f64::max);
    if pot.is_zero() {
        let l0 = first.l2.max(f64::MIN_POSITIVE);
        let drift = traj.iter().map(|s| (s.l2 - first.l2).abs() / l0).fold(0.0, f64::max);
        return Ok(ConservationReport {
            momentum_drift,
            max_abs_mean_mode,
            l2_relative_drift: Some(drift),
            gronwall: None,
        });
    }
    let mut pts = Vec::with_capacity(traj.len());
    let mut integral = 0.0;
    let mut prev_t = first.t;
    for s in traj {
        let span = (s.t - prev_t).abs();
        let panels = ((span * 64.0).ceil() as usize).max(2);
        integral += simpson(|r| pot.lipschitz_bound(r), prev_t.min(s.t), prev_t.max(s.t), panels);
        prev_t = s.t;
        let bound = first.l2 * integral.exp();
        pts.push(GronwallPoint { t: s.t, l2: s.l2, bound, holds: s.l2 <= bound * (1.0 + 1e-12) });
    }
    Ok(ConservationReport { momentum_drift, max_abs_mean_mode, l2_relative_drift: None, gronwall: Some(pts) })
}
