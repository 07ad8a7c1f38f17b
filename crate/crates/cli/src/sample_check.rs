//! The `sample-check` subcommand: surfaces the sampler invariants.

use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use vortex_core::matrix::{CMatrix, StabilizerHaarSampler};
use vortex_core::scalar::C64;

const RESIDUAL_TOL: f64 = 1e-10;

pub fn cmd_sample_check(n: usize, k: usize, seed: u64, trials: usize) -> ExitCode {
    if k >= n {
        eprintln!("error: need k < N, got k={k}, N={n}");
        return ExitCode::from(2);
    }
    let fixed: Vec<Vec<C64>> = (0..k)
        .map(|i| {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect();
    let sampler = match StabilizerHaarSampler::new(n, fixed.clone(), seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut worst_unitarity: f64 = 0.0;
    let mut worst_stabilizer: f64 = 0.0;
    let mut mean = CMatrix::zeros(n);
    for _ in 0..trials.max(1) {
        let u = sampler.sample_with(&mut rng);
        worst_unitarity = worst_unitarity.max(u.unitarity_residual());
        worst_stabilizer = worst_stabilizer.max(sampler.stabilizer_residual(&u));
        for i in 0..n {
            for j in 0..n {
                let v = mean.get(i, j) + u.get(i, j);
                mean.set(i, j, v);
            }
        }
    }
    let t = trials.max(1) as f64;
    // E[U] is the projector onto the fixed subspace; the complement block
    // averages to zero at rate sqrt(m/trials) in Frobenius norm.
    let mut projector = CMatrix::zeros(n);
    for v in &fixed {
        projector.add_outer(Complex64::new(1.0, 0.0), v, v);
    }
    for i in 0..n {
        for j in 0..n {
            let v = mean.get(i, j) / t - projector.get(i, j);
            mean.set(i, j, v);
        }
    }
    let mean_residual = mean.frobenius_norm();
    let m = (n - k) as f64;
    let mean_tol = 4.0 * (m / t).sqrt();

    println!("dimension N = {n}, fixed vectors k = {k}, samples = {}", trials.max(1));
    println!("worst unitarity residual   ||U*U - I||_F = {worst_unitarity:.3e} (tol {RESIDUAL_TOL:.0e})");
    println!("worst stabilizer residual  max ||U v - v|| = {worst_stabilizer:.3e} (tol {RESIDUAL_TOL:.0e})");
    println!("mean-projector residual    ||mean(U) - P||_F = {mean_residual:.3e} (tol {mean_tol:.3e})");

    if worst_unitarity > RESIDUAL_TOL || worst_stabilizer > RESIDUAL_TOL || mean_residual > mean_tol
    {
        eprintln!("sample-check: residuals exceed tolerances");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
