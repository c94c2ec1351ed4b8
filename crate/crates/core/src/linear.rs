//! Linear Airy flow `∂_t u = -∂³u + c∂u`, Talbot profiles and a discrete jump metric.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{to_physical_real, unit_phase, Dft, FourierField, GridSpec, C64};

/// `L = -∂³ + c∂`, whose symbol gives `e^{tL}` the multiplier `e^{i(k³ + ck)t}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearOp {
    pub c: f64,
}

impl LinearOp {
    pub fn airy() -> Self {
        Self { c: 0.0 }
    }

    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(invalid("non-finite transport coefficient"));
        }
        Ok(Self { c })
    }

    /// Dispersion frequency `k³ + ck`.
    pub fn frequency(&self, k: i64) -> f64 {
        let k3 = (k as f64).powi(3);
        if self.c == 0.0 {
            k3
        } else {
            k3 + self.c * k as f64
        }
    }

    pub fn phase(&self, k: i64, t: f64) -> C64 {
        unit_phase(self.frequency(k), t)
    }
}

/// `e^{tL} g`.
pub fn airy_evolve(g: &FourierField, t: f64, op: LinearOp) -> FourierField {
    g.map_modes(|k, c| c * op.phase(k, t))
}

/// Truncated Fourier series of `sign(sin x)`: `u_k = 2/(iπk)` for odd `k`.
pub fn square_wave(n: usize) -> FourierField {
    FourierField::real_from_fn(n, |k| {
        if k % 2 == 1 {
            C64::new(0.0, -2.0 / (PI * k as f64))
        } else {
            C64::new(0.0, 0.0)
        }
    })
    .expect("finite")
}

/// Real samples of `e^{tL} g` on `grid`.
pub fn talbot_profile(g: &FourierField, op: LinearOp, t: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    if !g.is_real() {
        return Err(Error::NotReal("talbot_profile"));
    }
    to_physical_real(&airy_evolve(g, t, op), grid)
}

/// Band-limited resampling of periodic samples to `m` points.
///
/// Modes with `|k| < m/2` are kept. A Nyquist mode of the input is split symmetrically when
/// upsampling; `m` equal to the input length returns the samples unchanged.
pub fn resample(samples: &[f64], m: usize) -> Result<Vec<f64>> {
    let len = samples.len();
    if len == 0 || m == 0 {
        return Err(invalid("resample needs nonempty input and output"));
    }
    if m == len {
        return Ok(samples.to_vec());
    }
    let src = Dft::new(len);
    let data: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    let keep = (len - 1) / 2;
    let coeffs = src.phys_to_field(&data, len / 2)?;
    let kmax = if m > len { len / 2 } else { (m - 1) / 2 };
    let split_nyquist = m > len && len.is_multiple_of(2);
    let half: Vec<C64> = (0..=kmax)
        .map(|k| {
            if k > keep && split_nyquist {
                // coefficient at ±len/2 is aliased onto one bin; share it
                C64::new(coeffs.get(k as i64).re / 2.0, 0.0)
            } else {
                coeffs.get(k as i64)
            }
        })
        .collect();
    let field = FourierField::from_half(&half)?;
    let dst = Dft::new(m);
    let mut buf = vec![C64::new(0.0, 0.0); m];
    let mut out = vec![0.0; m];
    dst.half_to_phys(&field.half(), &mut buf, &mut out);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub m: usize,
    pub gap: f64,
}

/// Largest jump between neighbouring samples (periodically) after resampling `samples` to each
/// resolution in the increasing `ladder`.
pub fn jump_metric(samples: &[f64], ladder: &[usize]) -> Result<Vec<JumpSample>> {
    if ladder.is_empty() {
        return Err(Error::LadderTooShort { min: 1, got: 0 });
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("resolution ladder must be strictly increasing"));
    }
    ladder
        .iter()
        .map(|&m| {
            let f = resample(samples, m)?;
            let gap = (0..m).map(|j| (f[(j + 1) % m] - f[j]).abs()).fold(0.0, f64::max);
            Ok(JumpSample { m, gap })
        })
        .collect()
}
