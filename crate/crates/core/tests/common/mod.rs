//! Independent oracles shared by the integration tests and the acceptance run.
//! Nothing here calls into the crate's numerics; only data containers are reused.
#![allow(dead_code, clippy::excessive_precision)]

use nalgebra::DMatrix;
use nlps_aft::{PriorConfig, PriorFamily, SurvivalDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod on `[a, b]`, started from `pieces` equal panels.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, pieces: usize, rel_tol: f64) -> f64 {
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / pieces as f64;
            let hi = a + (b - a) * (i + 1) as f64 / pieces as f64;
            let (v, e) = gk15(f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..20_000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs().max(1e-300) {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// ∫ f over the real line via x = c + s·t/(1−t²), t ∈ (−1, 1).
pub fn integrate_real_line(f: &mut dyn FnMut(f64) -> f64, center: f64, scale: f64, rel_tol: f64) -> f64 {
    let mut g = |t: f64| {
        let d = 1.0 - t * t;
        if d <= 0.0 {
            return 0.0;
        }
        let x = center + scale * t / d;
        let v = f(x) * scale * (1.0 + t * t) / (d * d);
        if v.is_finite() { v } else { 0.0 }
    };
    integrate(&mut g, -1.0, 1.0, 32, rel_tol)
}

/// ∫ f over (0, ∞) via x = s·t/(1−t), t ∈ (0, 1).
pub fn integrate_half_line(f: &mut dyn FnMut(f64) -> f64, scale: f64, rel_tol: f64) -> f64 {
    let mut g = |t: f64| {
        let d = 1.0 - t;
        if d <= 0.0 || t <= 0.0 {
            return 0.0;
        }
        let v = f(scale * t / d) * scale / (d * d);
        if v.is_finite() { v } else { 0.0 }
    };
    integrate(&mut g, 0.0, 1.0, 32, rel_tol)
}

/// One-coordinate non-local prior density written straight from the textbook forms.
pub fn prior_density_1d(b: f64, cfg: &PriorConfig) -> f64 {
    let w = cfg.phi * cfg.tau;
    let normal = (-b * b / (2.0 * w)).exp() / (2.0 * PI * w).sqrt();
    match cfg.family {
        PriorFamily::Pmom => {
            let r = cfg.order_r as i32;
            let odd: f64 = (1..=r).map(|l| (2 * l - 1) as f64).product();
            b.powi(2 * r) / (w.powi(r) * odd) * normal
        }
        PriorFamily::Pimom => {
            if b == 0.0 {
                return 0.0;
            }
            let v = cfg.shape_v;
            (0.5 * v * w.ln() - ln_gamma(0.5 * v) - (v + 1.0) * b.abs().ln() - w / (b * b)).exp()
        }
        PriorFamily::Pemom => {
            if b == 0.0 {
                return 0.0;
            }
            (2f64.sqrt() - w / (b * b)).exp() * normal
        }
    }
}

pub fn log_prior_density(beta: &[f64], cfg: &PriorConfig) -> f64 {
    beta.iter().map(|&b| prior_density_1d(b, cfg).ln()).sum()
}

pub fn standard_normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uncensored log-normal AFT data with standard-normal design.
pub fn gaussian_dataset(n: usize, beta: &[f64], mu: f64, sigma: f64, seed: u64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = standard_normal_matrix(&mut rng, n, beta.len());
    let times = (0..n)
        .map(|i| {
            let eta: f64 = mu + (0..beta.len()).map(|j| x[(i, j)] * beta[j]).sum::<f64>();
            let e: f64 = rng.sample(StandardNormal);
            (eta + sigma * e).exp()
        })
        .collect();
    SurvivalDataset::new(x, times, vec![1; n]).unwrap()
}

/// AFT data with independent exponential censoring at roughly `censor_rate`.
pub fn censored_dataset(n: usize, beta: &[f64], censor_rate: f64, seed: u64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = standard_normal_matrix(&mut rng, n, beta.len());
    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = (0..beta.len()).map(|j| x[(i, j)] * beta[j]).sum();
        let e: f64 = rng.sample(StandardNormal);
        let t = (eta + e).exp();
        let u: f64 = rng.random();
        if u < censor_rate {
            let frac: f64 = rng.random::<f64>().max(1e-3);
            times.push(t * frac);
            status.push(0);
        } else {
            times.push(t);
            status.push(1);
        }
    }
    if status.iter().all(|&s| s == 0) {
        status[0] = 1;
    }
    SurvivalDataset::new(x, times, status).unwrap()
}

/// Ordinary least squares of `y` on `[1, X]`: (coefficients, residual sum of squares).
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> (Vec<f64>, f64) {
    let n = x.nrows();
    let k = x.ncols() + 1;
    let design = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let yv = nalgebra::DVector::from_column_slice(y);
    let coef = design.clone().svd(true, true).solve(&yv, 1e-12).expect("full-rank design");
    let resid = &yv - &design * &coef;
    (coef.iter().copied().collect(), resid.norm_squared())
}

fn log_profile_core(n: usize, s: f64) -> f64 {
    // ∫∫ (2π)^{-n/2} σ^{-n} e^{-(S + n(μ-μ̂)²)/(2σ²)} dμ d(log σ)
    let nf = n as f64;
    -0.5 * nf * (2.0 * PI).ln() + 0.5 * (2.0 * PI / nf).ln() + (0.5f64).ln() + ln_gamma(0.5 * (nf - 1.0))
        - 0.5 * (nf - 1.0) * (0.5 * s).ln()
}

/// Two-stage marginal-likelihood oracle for uncensored data with one or two
/// coefficients: (μ, log σ) integrated in closed form, β by adaptive quadrature.
pub fn log_marginal_oracle(data: &SurvivalDataset, model: &[usize], cfg: &PriorConfig) -> f64 {
    assert!(data.events().iter().all(|&e| e), "oracle needs uncensored data");
    let n = data.n();
    let y = data.log_times();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let cols: Vec<Vec<f64>> = model
        .iter()
        .map(|&j| {
            let c = data.column(j);
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let k = cols.len();
    let syy: f64 = yc.iter().map(|v| v * v).sum();
    let sxy: Vec<f64> = cols.iter().map(|c| c.iter().zip(&yc).map(|(a, b)| a * b).sum()).collect();
    let sxx: Vec<Vec<f64>> = cols
        .iter()
        .map(|a| cols.iter().map(|b| a.iter().zip(b).map(|(u, v)| u * v).sum()).collect())
        .collect();
    let rss = |b: &[f64]| -> f64 {
        let mut s = syy;
        for i in 0..k {
            s -= 2.0 * b[i] * sxy[i];
            for j in 0..k {
                s += b[i] * b[j] * sxx[i][j];
            }
        }
        s
    };
    let log_f = |b: &[f64]| log_profile_core(n, rss(b)) + log_prior_density(b, cfg);

    let (coef, _) = ols(&DMatrix::from_fn(n, k, |i, j| data.column(model[j])[i]), y);
    let bhat: Vec<f64> = coef[1..].to_vec();
    let reference = log_f(&bhat);
    let scale = 0.25;
    let tol = 1e-9;
    let integral = match k {
        1 => {
            let mut f = |b: f64| (log_f(&[b]) - reference).exp();
            integrate_real_line(&mut f, bhat[0], scale, tol)
        }
        2 => {
            let mut outer = |b1: f64| {
                let mut inner = |b2: f64| (log_f(&[b1, b2]) - reference).exp();
                integrate_real_line(&mut inner, bhat[1], scale, tol)
            };
            integrate_real_line(&mut outer, bhat[0], scale, tol)
        }
        _ => panic!("oracle handles one or two coefficients"),
    };
    reference + integral.ln()
}

/// Log marginal of the intercept-only model on uncensored data at its Laplace
/// approximation, computed from the closed-form mode.
pub fn empty_model_laplace_closed_form(data: &SurvivalDataset) -> f64 {
    let y = data.log_times();
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let s2 = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    // loglik at (m, σ̂); Hessian in (μ, log σ) is diag(−n/σ̂², −2n).
    let ll = -0.5 * n * (2.0 * PI * s2).ln() - 0.5 * n;
    let log_det = (n / s2).ln() + (2.0 * n).ln();
    ll + (2.0 * PI).ln() - 0.5 * log_det
}

/// Central-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
