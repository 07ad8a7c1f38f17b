// Checks E[<VBV* u, u>] = (Tr B - <Bv, v>)/(N-1) for V Haar in Stab(v).
use num::complex::Complex64;
use rand::SeedableRng;
use vortex_core::matrix::{EnsembleKind, StabilizerHaarSampler};

fn main() {
    let n = 64usize;
    let trials = 40000usize;
    let b = EnsembleKind::TwoSpectrum { values: vec![3.0, -1.0] }.build(n).unwrap();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    v[1] = Complex64::new(1.0, 0.0); // e2
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = Complex64::new(1.0, 0.0); // e1
    let sampler = StabilizerHaarSampler::new(n, vec![v.clone()], 99).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12345);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum2 = 0.0;
    for _ in 0..trials {
        let big_v = sampler.sample_with(&mut rng);
        let rot = big_v.mul(&b).mul(&big_v.adjoint());
        let x = rot.matvec(&u);
        let val: Complex64 = u.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
        sum += val;
        sum2 += val.norm_sqr();
    }
    let mean = sum / trials as f64;
    let var = sum2 / trials as f64 - mean.norm_sqr();
    let tr_b = b.trace();
    let phi_v = Complex64::new(-1.0, 0.0);
    let exact = (tr_b - phi_v) / (n as f64 - 1.0);
    println!("empirical mean = {:.6} +- {:.6}", mean.re, (var / trials as f64).sqrt());
    println!("exact          = {:.6}", exact.re);
}
