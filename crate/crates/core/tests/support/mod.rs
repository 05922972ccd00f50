//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

/// Optimum of the ν-SVR dual by exhaustive enumeration of active sets.
///
/// Over `β = α - α*` the problem is `max -1/2 βᵀKβ + βᵀy` subject to
/// `Σβ = 0`, `|β_i| <= C/ℓ` and `Σ|β_i| <= Cν`. Every variable is either 0,
/// at `+C/ℓ`, at `-C/ℓ`, or free; the L1 budget is either slack or tight
/// (then free variables need a sign). For each combination the stationarity
/// conditions are a square linear system, solved by SVD pseudo-inverse;
/// feasible solutions are scored and the best objective returned with its β.
pub fn brute_force_nu_svr(gram: &[f64], y: &[f64], c: f64, nu: f64) -> (f64, Vec<f64>) {
    let l = y.len();
    let u = c / l as f64;
    let budget = c * nu;
    let k = |i: usize, j: usize| gram[i * l + j];
    let tol = 1e-10;
    let mut best = (f64::NEG_INFINITY, vec![0.0; l]);

    // states: 0 zero, 1 +u, 2 -u, 3 free (+ when the budget is tight), 4 free -
    let total = 5usize.pow(l as u32);
    let mut state = vec![0u8; l];
    for code in 0..total {
        let mut c_ = code;
        for s in state.iter_mut() {
            *s = (c_ % 5) as u8;
            c_ /= 5;
        }
        let bound = state.iter().filter(|&&s| s == 1 || s == 2).count();
        if bound as f64 * u > budget + tol {
            continue;
        }
        let has_neg_free = state.contains(&4);
        for tight in [false, true] {
            if !tight && has_neg_free {
                continue;
            }
            let free: Vec<usize> = (0..l).filter(|&i| state[i] >= 3).collect();
            let mut beta = vec![0.0; l];
            for i in 0..l {
                beta[i] = match state[i] {
                    1 => u,
                    2 => -u,
                    _ => 0.0,
                };
            }
            let m = free.len();
            if m > 0 {
                let n = m + 1 + tight as usize;
                let mut a = DMatrix::<f64>::zeros(n, n);
                let mut b = DVector::<f64>::zeros(n);
                for (r, &i) in free.iter().enumerate() {
                    for (cc, &j) in free.iter().enumerate() {
                        a[(r, cc)] = k(i, j);
                    }
                    a[(r, m)] = 1.0;
                    if tight {
                        a[(r, m + 1)] = if state[i] == 3 { 1.0 } else { -1.0 };
                    }
                    b[r] = y[i] - (0..l).map(|j| k(i, j) * beta[j]).sum::<f64>();
                }
                for (cc, _) in free.iter().enumerate() {
                    a[(m, cc)] = 1.0;
                }
                b[m] = -beta.iter().sum::<f64>();
                if tight {
                    for (cc, &j) in free.iter().enumerate() {
                        a[(m + 1, cc)] = if state[j] == 3 { 1.0 } else { -1.0 };
                    }
                    b[m + 1] = budget - bound as f64 * u;
                }
                let Ok(z) = a.clone().svd(true, true).solve(&b, 1e-13) else {
                    continue;
                };
                if (&a * &z - &b).amax() > 1e-9 {
                    continue;
                }
                for (r, &i) in free.iter().enumerate() {
                    beta[i] = z[r];
                }
                let ok = free.iter().all(|&i| {
                    let v = beta[i];
                    match (tight, state[i]) {
                        (true, 3) => v >= -tol && v <= u + tol,
                        (true, _) => v <= tol && v >= -u - tol,
                        _ => v.abs() <= u + tol,
                    }
                });
                if !ok {
                    continue;
                }
            }
            if beta.iter().sum::<f64>().abs() > 1e-9 || beta.iter().map(|v| v.abs()).sum::<f64>() > budget + 1e-9 {
                continue;
            }
            let obj = dual_objective(gram, y, &beta);
            if obj > best.0 {
                best = (obj, beta);
            }
        }
    }
    best
}

pub fn dual_objective(gram: &[f64], y: &[f64], beta: &[f64]) -> f64 {
    let l = y.len();
    let mut quad = 0.0;
    for i in 0..l {
        for j in 0..l {
            quad += beta[i] * beta[j] * gram[i * l + j];
        }
    }
    -0.5 * quad + beta.iter().zip(y).map(|(b, v)| b * v).sum::<f64>()
}

pub fn min_eigenvalue(gram: &[f64], l: usize) -> f64 {
    let m = DMatrix::from_row_slice(l, l, gram);
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Kernel values straight from their textbook definitions.
pub fn reference_kernel(kind: &str, gamma: f64, coef0: f64, degree: i32, x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    match kind {
        "linear" => dot,
        "polynomial" => (gamma * dot + coef0).powi(degree),
        "sigmoid" => (gamma * dot + coef0).tanh(),
        "rbf" => (-gamma * x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp(),
        _ => unreachable!(),
    }
}

/// Log mel energies by framing, windowing, an O(N²) DFT and a triangular
/// filterbank, written independently of the library.
pub fn reference_lfbe(samples: &[f64], sr: f64, win: usize, hop: usize, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let window: Vec<f64> = (0..win)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (win as f64 - 1.0)).cos())
        .collect();
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sr / 2.0);
    let pts: Vec<f64> = (0..n_mels + 2).map(|i| inv(top * i as f64 / (n_mels as f64 + 1.0))).collect();
    let n_bins = n_fft / 2 + 1;

    let mut out = Vec::new();
    let mut start = 0;
    while start + win <= samples.len() {
        let frame: Vec<f64> = (0..win).map(|n| samples[start + n] * window[n]).collect();
        let power: Vec<f64> = (0..n_bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in frame.iter().enumerate() {
                    let ang = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re * re + im * im
            })
            .collect();
        let row = (0..n_mels)
            .map(|m| {
                let (a, b, c) = (pts[m], pts[m + 1], pts[m + 2]);
                let e: f64 = (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * sr / n_fft as f64;
                        let w = if f < a || f > c {
                            0.0
                        } else if f <= b {
                            (f - a) / (b - a)
                        } else {
                            (c - f) / (c - b)
                        };
                        w * power[k]
                    })
                    .sum();
                e.max(1e-10).ln()
            })
            .collect();
        out.push(row);
        start += hop;
    }
    out
}

/// Average ranks by counting: `1 + #less + (#equal - 1) / 2`.
pub fn naive_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub struct SvrInstance {
    pub kernel: csat_core::csat::Kernel,
    pub x: csat_core::nn::Matrix,
    pub y: Vec<f64>,
    pub gram: Vec<f64>,
    pub c: f64,
    pub nu: f64,
}

/// Random small regression problem for kernel `kind`, redrawn until the
/// Gram matrix is positive semidefinite. Sigmoid instances live in ℓ
/// dimensions with a small gamma so that acceptance is likely.
pub fn random_svr_instance<R: rand::Rng>(rng: &mut R, kind: &str, l: usize) -> SvrInstance {
    use csat_core::csat::Kernel;
    loop {
        let d = if kind == "sigmoid" { l } else { rng.random_range(1..=3) };
        let data: Vec<f64> = (0..l * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = csat_core::nn::Matrix::from_vec(l, d, data).unwrap();
        let y: Vec<f64> = (0..l).map(|_| rng.random_range(1.0..5.0)).collect();
        let (kernel, gamma, coef0, degree) = match kind {
            "linear" => (Kernel::Linear, 0.0, 0.0, 1),
            "polynomial" => {
                let (g, c0, dg) = (rng.random_range(0.3..1.5), rng.random_range(0.0..1.0), rng.random_range(2..=3));
                (Kernel::Polynomial { gamma: g, coef0: c0, degree: dg as u32 }, g, c0, dg)
            }
            "sigmoid" => {
                let (g, c0) = (rng.random_range(0.02..0.3), rng.random_range(0.0..0.2));
                (Kernel::Sigmoid { gamma: g, coef0: c0 }, g, c0, 1)
            }
            _ => {
                let g = rng.random_range(0.2..2.0);
                (Kernel::Rbf { gamma: g }, g, 0.0, 1)
            }
        };
        let mut gram = vec![0.0; l * l];
        for i in 0..l {
            for j in 0..l {
                gram[i * l + j] = reference_kernel(kind, gamma, coef0, degree, x.row(i), x.row(j));
            }
        }
        if min_eigenvalue(&gram, l) < -1e-12 {
            continue;
        }
        let c = [0.5, 1.0, 4.0, 20.0][rng.random_range(0..4)];
        let nu = rng.random_range(0.1..1.0);
        return SvrInstance { kernel, x, y, gram, c, nu };
    }
}
