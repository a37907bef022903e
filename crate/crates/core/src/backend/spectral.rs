//! Exact diagonalization of the discrete `Δ_ω`: 2-D FFT on the periodic torus
//! stencil, dense symmetric eigen-decomposition for the zonal ℙ¹ operator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(super) enum Spectral {
    Torus {
        n: usize,
        /// symbol per wavenumber, row-major `(ky, kx)`
        symbol: Vec<f64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Zonal {
        eigenvalues: Vec<f64>,
        /// columns are orthonormal eigenvectors
        vectors: DMatrix<f64>,
    },
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Spectral::Torus { n, .. } => write!(f, "Spectral::Torus({n})"),
            Spectral::Zonal { eigenvalues, .. } => write!(f, "Spectral::Zonal({})", eigenvalues.len()),
        }
    }
}

impl Spectral {
    pub(super) fn torus(n: usize, coef: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let one_d: Vec<f64> = (0..n)
            .map(|k| 2.0 * (std::f64::consts::TAU * k as f64 / n as f64).cos() - 2.0)
            .collect();
        let mut symbol = vec![0.0; n * n];
        for ky in 0..n {
            for kx in 0..n {
                symbol[ky * n + kx] = coef * (one_d[kx] + one_d[ky]);
            }
        }
        symbol[0] = 0.0;
        Spectral::Torus {
            n,
            symbol,
            forward,
            inverse,
        }
    }

    pub(super) fn zonal(face: &[f64], weights: &[f64]) -> Self {
        let n = weights.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        // W^{-1/2} K W^{-1/2}; weights are uniform so this is L itself
        for (i, c) in face.iter().enumerate() {
            let s = c / (weights[i] * weights[i + 1]).sqrt();
            a[(i, i)] -= c / weights[i];
            a[(i + 1, i + 1)] -= c / weights[i + 1];
            a[(i, i + 1)] += s;
            a[(i + 1, i)] += s;
        }
        let eig = a.symmetric_eigen();
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let mut vectors = eig.eigenvectors;
        // The kernel is spanned by W^{1/2}·1; pin it exactly.
        let kernel = eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        eigenvalues[kernel] = 0.0;
        let total: f64 = weights.iter().sum();
        let k: DVector<f64> = DVector::from_iterator(n, weights.iter().map(|w| (w / total).sqrt()));
        vectors.set_column(kernel, &k);
        // move the constant mode to the front
        eigenvalues.swap(0, kernel);
        vectors.swap_columns(0, kernel);
        // re-orthogonalize the rest against the pinned kernel
        for j in 1..n {
            let c = vectors.column(j).dot(&k);
            let col = vectors.column(j) - &k * c;
            let nrm = col.norm();
            vectors.set_column(j, &(col / nrm));
        }
        Spectral::Zonal { eigenvalues, vectors }
    }

    pub(super) fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Spectral::Torus { symbol, .. } => symbol.clone(),
            Spectral::Zonal { eigenvalues, .. } => eigenvalues.clone(),
        }
    }

    pub(super) fn apply<F: Fn(f64) -> f64>(&self, f: &[f64], phi: F) -> Vec<f64> {
        match self {
            Spectral::Torus {
                n,
                symbol,
                forward,
                inverse,
            } => {
                let n = *n;
                let mut buf: Vec<Complex64> = f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
                fft2(&mut buf, n, forward.as_ref());
                for (b, s) in buf.iter_mut().zip(symbol) {
                    *b *= phi(*s);
                }
                fft2(&mut buf, n, inverse.as_ref());
                let scale = 1.0 / (n * n) as f64;
                buf.iter().map(|c| c.re * scale).collect()
            }
            Spectral::Zonal { eigenvalues, vectors } => {
                let x = DVector::from_column_slice(f);
                let mut coef = vectors.tr_mul(&x);
                for (c, l) in coef.iter_mut().zip(eigenvalues) {
                    *c *= phi(*l);
                }
                (vectors * coef).iter().copied().collect()
            }
        }
    }
}

fn fft2(buf: &mut [Complex64], n: usize, plan: &dyn Fft<f64>) {
    // rows
    plan.process(buf);
    // columns
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = buf[y * n + x];
        }
        plan.process(&mut col);
        for y in 0..n {
            buf[y * n + x] = col[y];
        }
    }
}
