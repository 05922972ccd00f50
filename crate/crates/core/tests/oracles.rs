mod support;

use csat_core::audio::{frame_signal, stack_context, AudioConfig, LfbeExtractor};
use csat_core::csat::svr::gram_matrix;
use csat_core::csat::{fit_nu_svr, kernel_eval, SvrParams};
use csat_core::metrics::average_ranks;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::*;

const KERNELS: [&str; 4] = ["linear", "polynomial", "sigmoid", "rbf"];

#[test]
fn svr_dual_matches_enumerated_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut count = 0;
    for _ in 0..6 {
        for kind in KERNELS {
            let l = 3 + count % 6;
            let inst = random_svr_instance(&mut rng, kind, l);
            let params = SvrParams {
                nu: inst.nu,
                c: inst.c,
                ..Default::default()
            };
            let (_, sol) = fit_nu_svr(&inst.x, &inst.y, inst.kernel, &params).unwrap();
            let (oracle, _) = brute_force_nu_svr(&inst.gram, &inst.y, inst.c, inst.nu);
            let beta = sol.coefficients();
            let ours = dual_objective(&inst.gram, &inst.y, &beta);
            assert!(
                (ours - oracle).abs() <= 1e-6,
                "{kind} l={l} C={} nu={}: solver {ours} vs oracle {oracle}",
                inst.c,
                inst.nu
            );
            assert!((sol.objective - ours).abs() < 1e-9);
            assert!(beta.iter().sum::<f64>().abs() <= 1e-8);
            count += 1;
        }
    }
    assert!(count >= 20);
}

#[test]
fn library_kernels_match_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in KERNELS {
        let inst = random_svr_instance(&mut rng, kind, 6);
        let ours = gram_matrix(&inst.kernel, &inst.x);
        for (a, b) in ours.iter().zip(&inst.gram) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(kernel_eval(&inst.kernel, inst.x.row(0), inst.x.row(1)).unwrap(), ours[1]);
    }
}

fn check_lfbe(samples: &[f64], sr: u32) {
    let cfg = AudioConfig::default();
    let ex = LfbeExtractor::new(&cfg, sr).unwrap();
    let frames = frame_signal(samples, sr, &cfg).unwrap();
    let ours = ex.compute_lfbe(&frames).unwrap();
    let reference = reference_lfbe(
        samples,
        sr as f64,
        cfg.window_samples(sr),
        cfg.hop_samples(sr),
        cfg.n_fft,
        cfg.n_mels,
    );
    assert_eq!(ours.frames.rows(), reference.len());
    for (t, row) in reference.iter().enumerate() {
        for (a, b) in ours.frames.row(t).iter().zip(row) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-300), "frame {t}: {a} vs {b}");
        }
    }
    let stacked = stack_context(&ours);
    assert_eq!(stacked.frames.rows(), reference.len());
    assert_eq!(stacked.frames.cols(), 120);
}

#[test]
fn lfbe_matches_direct_dft_reference() {
    for sr in [8000u32, 16000] {
        let n = sr as usize / 10;
        let tone: Vec<f64> = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / sr as f64).sin())
            .collect();
        check_lfbe(&tone, sr);
        let mut rng = ChaCha8Rng::seed_from_u64(sr as u64);
        let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..0.3)).collect();
        check_lfbe(&noise, sr);
        check_lfbe(&vec![0.0; n], sr);
    }
}

#[test]
fn average_ranks_match_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        assert_eq!(average_ranks(&x), naive_ranks(&x));
    }
}

#[test]
fn nu_bounds_errors_and_support_vectors() {
    use csat_core::csat::Kernel;
    use csat_core::nn::Matrix;
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for nu in [0.2, 0.5, 0.8] {
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }] {
            let l = 50;
            let data: Vec<f64> = (0..l * 2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x = Matrix::from_vec(l, 2, data).unwrap();
            let y: Vec<f64> = x
                .iter_rows()
                .map(|r| 3.0 + r[0] - 0.5 * r[1] * r[1] + rng.random_range(-1.0..1.0))
                .collect();
            let params = SvrParams { nu, ..Default::default() };
            let (m, sol) = fit_nu_svr(&x, &y, kernel, &params).unwrap();
            let outside = x
                .iter_rows()
                .zip(&y)
                .filter(|(r, t)| (*t - m.decision_value(r).unwrap()).abs() > sol.epsilon + 1e-7)
                .count() as f64
                / l as f64;
            let sv = m.support_vector_count() as f64 / l as f64;
            assert!(outside <= nu, "nu {nu}: {outside} outside the tube");
            assert!(nu <= sv + 1.0 / l as f64, "nu {nu}: only {sv} support vectors");
        }
    }
}
