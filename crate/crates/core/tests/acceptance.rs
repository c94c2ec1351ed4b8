//! End-to-end acceptance checks, one test per criterion. Each prints a single
//! `criterion NN: PASS|FAIL ...` line to the uncaptured stderr before asserting.

use std::f64::consts::TAU;
use std::io::Write;
use std::time::Instant;

use kdvlab::config::parse_config;
use kdvlab::estimates::{multiplier_scan, resonant_sharpness, ExtremalDatum};
use kdvlab::integrator::{conservation_report, evolve, PotentialSpec, Scheme, SolverConfig};
use kdvlab::linear::{airy_evolve, jump_metric, square_wave, talbot_profile, LinearOp};
use kdvlab::normal_form::{
    duhamel_residual, four_freq_identity, op_rho, pair_identity, resonant_set_sum, verify_normal_form_identity,
};
use kdvlab::runner::run_suite;
use kdvlab::smoothing::{miura, miura_inverse, miura_kdv_defect, resolution_stability_study, LadderSpec};
use kdvlab::spectral::{random_sobolev_data, FourierField, GridSpec, SobolevIndex, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, ok: bool, detail: String) {
    let line = format!("criterion {n:>2}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    // bypass the harness capture so every line lands in the log
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

#[test]
fn c01_algebraic_identities() {
    let start = Instant::now();
    let (mut cases, mut bad) = (0u64, 0u64);
    for a in (-30i64..=30).filter(|&x| x != 0) {
        for b in (-30i64..=30).filter(|&x| x != 0) {
            for c in (-30i64..=30).filter(|&x| x != 0) {
                let d = -(a + b + c);
                if d == 0 || d.abs() > 30 {
                    continue;
                }
                let (l, r) = four_freq_identity([a, b, c, d]).unwrap();
                cases += 1;
                bad += u64::from(l != r);
            }
        }
    }
    let mut pair_bad = 0u64;
    for a in -100i64..=100 {
        for b in -100i64..=100 {
            let (l, r) = pair_identity(a, b);
            pair_bad += u64::from(l != r);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        bad == 0 && pair_bad == 0 && cases == 140_540 && secs < 10.0,
        format!("{cases} quadruples, {bad} failures; pair failures {pair_bad}; {secs:.2}s"),
    );
}

#[test]
fn c02_normal_form_identity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let v = random_sobolev_data(1.0, 5, 3 * seed, 0.5).unwrap().resized(16);
        let lam = random_sobolev_data(3.0, 5, 3 * seed + 1, 0.3).unwrap().resized(16);
        let dlam = random_sobolev_data(3.0, 5, 3 * seed + 2, 0.7).unwrap().resized(16);
        for t in [0.0, 0.37, 1.9] {
            worst = worst.max(verify_normal_form_identity(&v, &lam, &dlam, t).unwrap().relative);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(2, worst <= 1e-11 && secs < 30.0, format!("max relative residual {worst:.3e}; {secs:.2}s"));
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize, support: usize) -> FourierField {
    FourierField::from_fn(n, |k| {
        if k == 0 || k.unsigned_abs() as usize > support {
            C64::new(0.0, 0.0)
        } else {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }
    })
    .unwrap()
}

#[test]
fn c03_rho_cancellation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 32;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v = random_complex(&mut rng, n, n / 3);
        let lam = random_complex(&mut rng, n, n / 3);
        let rho = op_rho(&v, &lam);
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for k in (-(n as i64)..=n as i64).filter(|&k| k != 0) {
            let want = rho.get(k) * 3.0 / C64::new(0.0, 1.0);
            err = err.max((resonant_set_sum(&v, &lam, k) - want).norm());
            scale = scale.max(want.norm());
        }
        worst = worst.max(err / scale);
    }
    report(3, worst <= 1e-12, format!("max relative mismatch {worst:.3e} over 100 pairs"));
}

#[test]
fn c04_duhamel_convergence() {
    let start = Instant::now();
    let n = 32;
    let g = FourierField::cosine(n, 1, 1.0);
    let dt = 1.0 / 4096.0;
    let cfg = SolverConfig::kdv(dt, 1.0);
    let times: Vec<f64> = (0..=4096).map(|i| i as f64 * dt).collect();
    let traj = evolve(&g, &PotentialSpec::zero(), &cfg, &times).unwrap();
    let residuals: Vec<f64> = [64.0, 128.0, 256.0, 512.0]
        .iter()
        .map(|&q| {
            duhamel_residual(&traj, &PotentialSpec::zero(), cfg.beta, 1.0 / q, SobolevIndex::homogeneous(1.0))
                .unwrap()
                .iter()
                .map(|p| p.residual)
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        ratios.iter().all(|&r| r >= 12.0) && secs < 120.0,
        format!("H1 residuals {}, ratios {ratios:.1?}; {secs:.1}s", sci(&residuals)),
    );
}

#[test]
fn c05_conservation() {
    let n = 128;
    let g = FourierField::cosine(n, 1, 1.0).add(&random_sobolev_data(2.0, n, 5, 0.2).unwrap());
    let times: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
    let cfg = SolverConfig::kdv(6.25e-5, 10.0);
    let free = conservation_report(&evolve(&g, &PotentialSpec::zero(), &cfg, &times).unwrap(), &PotentialSpec::zero())
        .unwrap();
    let drift = free.l2_relative_drift.unwrap();

    let pot = PotentialSpec::traveling_cosine(0.1, 1, 1.0).unwrap();
    let traj = evolve(&g, &pot, &cfg, &times).unwrap();
    let forced = conservation_report(&traj, &pot).unwrap();
    let l0 = traj[0].l2;
    let explicit = traj.iter().all(|s| s.l2 <= l0 * (0.1 * s.t).exp() * (1.0 + 1e-12));
    let gronwall = forced.gronwall.as_ref().unwrap().iter().all(|p| p.holds);
    let ok = free.max_abs_mean_mode <= 1e-15
        && free.momentum_drift <= 1e-15
        && drift <= 1e-8
        && forced.max_abs_mean_mode <= 1e-15
        && explicit
        && gronwall;
    report(
        5,
        ok,
        format!(
            "|u_0| max {:.1e}, L2 drift {drift:.2e}; with potential |u_0| max {:.1e}, Gronwall bound holds: {}",
            free.max_abs_mean_mode,
            forced.max_abs_mean_mode,
            explicit && gronwall
        ),
    );
}

#[test]
fn c06_multiplier_scan() {
    let start = Instant::now();
    let ks = [10, 20, 40, 80];
    let low: Vec<f64> = ks.iter().map(|&k| multiplier_scan(0.0, 0.9, 0.01, k).unwrap().max_ratio).collect();
    let flat = low[2] <= low[1] * 1.01 && low[3] <= low[2] * 1.01;
    let a = multiplier_scan(0.0, 1.2, 0.01, 10).unwrap().max_ratio;
    let b = multiplier_scan(0.0, 1.2, 0.01, 80).unwrap().max_ratio;
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        flat && b >= 2.0 * a && secs < 300.0,
        format!("s1=0.9 maxima {low:.5?}; s1=1.2 K=80/K=10 = {:.3}; {secs:.1}s", b / a),
    );
}

#[test]
fn c07_kdv_smoothing_ladder() {
    let start = Instant::now();
    let spec = LadderSpec {
        s: 0.0,
        s1: vec![0.9, 1.5],
        ladder: vec![128, 256, 512],
        seed: 1,
        amplitude: 0.003,
        solver: SolverConfig::kdv(1e-3, 5.0).with_scheme(Scheme::NormalFormIfrk4).with_diagnostics(Vec::new()),
        sample_times: (1..=10).map(|i| 0.5 * i as f64).collect(),
    };
    let study = resolution_stability_study(&spec).unwrap();
    let smooth = &study.verdicts[0];
    let rough = &study.verdicts[1];
    let min_rough = study.pairs.last().unwrap().diff_change.iter().cloned().fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    let ok = smooth.smoothing_consistent && rough.max_diff_change >= 0.25 && secs < 600.0;
    report(
        7,
        ok,
        format!(
            "256->512: s1=0.9 diff change {:.4} u change {:.3}; s1=1.5 diff change {:.3}..{:.3}; {secs:.1}s",
            smooth.max_diff_change, smooth.min_u_change, min_rough, rough.max_diff_change
        ),
    );
}

#[test]
fn c08_resonant_sharpness() {
    let ladder = [64, 128, 256, 512, 1024];
    let low = resonant_sharpness(0.0, 0.5, &ladder, ExtremalDatum::Spike).unwrap().slope;
    let high = resonant_sharpness(0.0, 1.5, &ladder, ExtremalDatum::Spike).unwrap().slope;
    let pl = resonant_sharpness(0.0, 1.5, &ladder, ExtremalDatum::PowerLaw).unwrap().slope;
    report(
        8,
        low <= 0.05 && high >= 0.4,
        format!("spike slopes s1=0.5: {low:.4}, s1=1.5: {high:.4} (power-law datum at s1=1.5: {pl:.4})"),
    );
}

#[test]
fn c09_miura_pipeline() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut all_converged = true;
    for seed in 0..50u64 {
        let w = random_sobolev_data(1.0, 24, 100 + seed, 0.05).unwrap();
        let inv = miura_inverse(&miura(&w).unwrap(), 1e-13).unwrap();
        all_converged &= inv.converged;
        if let Some(back) = inv.w {
            worst = worst.max(back.max_abs_diff(&w));
        }
    }
    let roundtrip = all_converged && worst <= 1e-10;

    let n = 32;
    let g = FourierField::cosine(n, 1, 0.5).add(&FourierField::sine(n, 2, 0.15));
    let d = miura_kdv_defect(&g, 1.0, &[1e-3, 5e-4, 2.5e-4], 3.125e-5).unwrap();
    let ratios: Vec<f64> = d.windows(2).map(|w| w[0].defect / w[1].defect).collect();
    let fourth = ratios.iter().all(|&r| r >= 2f64.powf(3.5));

    let spec = LadderSpec {
        s: 1.0,
        s1: vec![1.8],
        ladder: vec![32, 64, 128],
        seed: 1,
        amplitude: 0.1,
        solver: SolverConfig::mkdv(2.5e-6, 0.25).with_diagnostics(Vec::new()),
        sample_times: (1..=5).map(|i| 0.05 * i as f64).collect(),
    };
    let v = resolution_stability_study(&spec).unwrap().verdicts.remove(0);
    let secs = start.elapsed().as_secs_f64();
    report(
        9,
        roundtrip && fourth && v.smoothing_consistent,
        format!(
            "round trip max error {worst:.2e}; defect ratios {ratios:.2?}; mKdV 64->128 diff change {:.4} u change {:.3}; {secs:.1}s",
            v.max_diff_change, v.min_u_change
        ),
    );
}

#[test]
fn c10_talbot() {
    let n = 2047;
    let g = square_wave(n);
    let grid = GridSpec::new(n, 8192).unwrap();
    let ladder = [1024, 2048, 4096];
    let gaps = |t: f64| -> Vec<f64> {
        let prof = talbot_profile(&g, LinearOp::airy(), t, &grid).unwrap();
        jump_metric(&prof, &ladder).unwrap().iter().map(|j| j.gap).collect()
    };
    let rational = gaps(TAU / 3.0);
    let stable = rational.windows(2).all(|w| (w[1] - w[0]).abs() <= 0.1 * w[0])
        && (rational[2] - rational[0]).abs() <= 0.1 * rational[0];
    let irrational = gaps(TAU * (2f64.sqrt() - 1.0));
    let decay = irrational[0] / irrational[2];
    let revival = airy_evolve(&g, TAU, LinearOp::airy()).max_abs_diff(&g);
    report(
        10,
        stable && decay >= 3.0 && revival <= 1e-12,
        format!(
            "t=2pi/3 gaps {rational:.4?}; irrational gaps {irrational:.4?} decay {decay:.2}x (need 3x); revival error {revival:.1e}"
        ),
    );
}

#[test]
fn c11_determinism() {
    let text = r#"
experiments = ["identity-suite", "bilinear-ensemble", "evolve", "smoothing"]
seed = 11

[normalform-check]
trials = 4

[four-freq-sweep]
K = 8
pair_k = 10

[bilinear-ensemble]
trials = 5
ladder = [32, 64]

[evolve]
datum = "random"
n = 32
s = 1.0
amplitude = 0.5
horizon = 0.2
samples = 4

[smoothing]
ladder = [16, 32, 64]
horizon = 0.2
samples = 2
assert = false
"#;
    let plan = parse_config(text).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let read = |dir: &std::path::Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.json")
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    for d in &dirs {
        run_suite(&plan, d.path()).unwrap();
    }
    let (a, b) = (read(dirs[0].path()), read(dirs[1].path()));
    let csvs = a.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    let mut other = plan.clone();
    other.seed = 12;
    let c = tempfile::tempdir().unwrap();
    run_suite(&other, c.path()).unwrap();
    let seed_matters = read(c.path()) != a;
    report(
        11,
        a == b && csvs >= 8 && seed_matters,
        format!("{} files ({csvs} CSV) byte-identical across reruns: {}; other seed differs: {seed_matters}", a.len(), a == b),
    );
}
