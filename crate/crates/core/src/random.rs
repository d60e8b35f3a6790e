//! Seeded random states and unitaries for tests and scans.
//!
//! All entry points take an explicit ChaCha8 generator so every caller is
//! reproducible from a single u64 seed.

use ndarray::{Array1, Array2};
use ndarray_linalg::QR;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::qops::{kron, trace, C64, DensityMatrix, SystemLayout};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u = rng.random::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Ginibre matrix: iid standard complex Gaussian entries.
pub fn random_complex_matrix(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |_| C64::new(gaussian(rng), gaussian(rng)))
}

/// Haar-like unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let g = random_complex_matrix(n, rng);
    let (q, r) = g.qr().expect("qr failed");
    // absorb the diagonal phases of R so the distribution is phase balanced
    let mut u = q;
    for j in 0..n {
        let d = r[[j, j]];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            u[[i, j]] *= phase;
        }
    }
    u
}

/// Full-rank random state G G^dag / tr on the given layout.
pub fn random_density(layout: &SystemLayout, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let n = layout.total_dim();
    let g = random_complex_matrix(n, rng);
    let gd = g.t().mapv(|z| z.conj());
    let m = g.dot(&gd);
    let tr = trace(&m.view());
    let data = m.mapv(|z| z / tr.re);
    DensityMatrix::new(layout.clone(), data).expect("random state failed validation")
}

/// Haar-random pure state on the given layout.
pub fn random_pure(layout: &SystemLayout, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let n = layout.total_dim();
    let psi = Array1::from_shape_fn(n, |_| C64::new(gaussian(rng), gaussian(rng)));
    DensityMatrix::from_pure(layout.clone(), psi.view()).expect("random pure state failed")
}

/// Raw 2x2 random state.
pub fn random_single_qubit_density(rng: &mut ChaCha8Rng) -> Array2<C64> {
    let g = random_complex_matrix(2, rng);
    let gd = g.t().mapv(|z| z.conj());
    let m = g.dot(&gd);
    let tr = trace(&m.view());
    m.mapv(|z| z / tr.re)
}

/// Product of independent single-qubit states on a fresh ("a", "b") layout.
pub fn random_product_pair(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let ra = random_single_qubit_density(rng);
    let rb = random_single_qubit_density(rng);
    let layout = SystemLayout::qubits(&["a", "b"]).expect("static layout");
    DensityMatrix::new(layout, kron(&ra, &rb)).expect("product state failed validation")
}
