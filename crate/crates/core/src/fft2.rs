//! Two-dimensional FFT plumbing for the spectral derivative scheme,
//! built on batched 1-D transforms with an explicit transpose.
//!
//! Plans are cached globally per grid size; all transforms are complex,
//! and real field pairs are packed as re + i*im to halve the work.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridDims;

/// Derivative symbols in Fourier space. First derivatives zero the Nyquist
/// mode (the standard odd-derivative convention); pure second derivatives
/// keep it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sym {
    D1,
    D2,
    D11,
    D12,
    D22,
}

pub struct SpectralPlan {
    dims: GridDims,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    kd1: Vec<f64>,
    kd2: Vec<f64>,
    ksq1: Vec<f64>,
    ksq2: Vec<f64>,
}

fn wavenumbers(n: usize) -> (Vec<f64>, Vec<f64>) {
    // signed mode numbers scaled by 2*pi on the unit-period domain
    let mut kd = vec![0.0; n];
    let mut ksq = vec![0.0; n];
    for m in 0..n {
        let signed = if 2 * m <= n {
            m as f64
        } else {
            m as f64 - n as f64
        };
        let k = 2.0 * std::f64::consts::PI * signed;
        ksq[m] = k * k;
        kd[m] = if n % 2 == 0 && m == n / 2 { 0.0 } else { k };
    }
    (kd, ksq)
}

fn plan_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<SpectralPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SpectralPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl SpectralPlan {
    pub fn get(dims: GridDims) -> Arc<SpectralPlan> {
        let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
        if let Some(plan) = cache.get(&(dims.n1, dims.n2)) {
            return Arc::clone(plan);
        }
        let mut planner = FftPlanner::new();
        let (kd1, ksq1) = wavenumbers(dims.n1);
        let (kd2, ksq2) = wavenumbers(dims.n2);
        let plan = Arc::new(SpectralPlan {
            dims,
            fwd1: planner.plan_fft_forward(dims.n1),
            inv1: planner.plan_fft_inverse(dims.n1),
            fwd2: planner.plan_fft_forward(dims.n2),
            inv2: planner.plan_fft_inverse(dims.n2),
            kd1,
            kd2,
            ksq1,
            ksq2,
        });
        cache.insert((dims.n1, dims.n2), Arc::clone(&plan));
        plan
    }

    /// Forward transform of a row-major complex field. The returned spectrum
    /// is stored transposed: index kj * n1 + ki.
    pub fn forward(&self, field: &[Complex64]) -> Vec<Complex64> {
        let (n1, n2) = (self.dims.n1, self.dims.n2);
        assert_eq!(field.len(), n1 * n2);
        let mut rows = field.to_vec();
        let mut scratch = vec![Complex64::default(); self.fwd2.get_inplace_scratch_len()];
        self.fwd2.process_with_scratch(&mut rows, &mut scratch);
        let mut spec_t = vec![Complex64::default(); n1 * n2];
        transpose(&rows, n1, n2, &mut spec_t);
        scratch.resize(self.fwd1.get_inplace_scratch_len(), Complex64::default());
        self.fwd1.process_with_scratch(&mut spec_t, &mut scratch);
        spec_t
    }

    /// Multiply a transposed spectrum by a derivative symbol, inverse
    /// transform, and return the row-major (normalized) result.
    pub fn apply_inverse(&self, spec_t: &[Complex64], sym: Sym) -> Vec<Complex64> {
        let (n1, n2) = (self.dims.n1, self.dims.n2);
        assert_eq!(spec_t.len(), n1 * n2);
        let mut buf = vec![Complex64::default(); n1 * n2];
        for kj in 0..n2 {
            let row = &spec_t[kj * n1..(kj + 1) * n1];
            let out = &mut buf[kj * n1..(kj + 1) * n1];
            match sym {
                // multiplication by i*k rotates: (a + bi) * ik = -kb + i*ka
                Sym::D1 => {
                    for ki in 0..n1 {
                        let k = self.kd1[ki];
                        let z = row[ki];
                        out[ki] = Complex64::new(-k * z.im, k * z.re);
                    }
                }
                Sym::D2 => {
                    let k = self.kd2[kj];
                    for ki in 0..n1 {
                        let z = row[ki];
                        out[ki] = Complex64::new(-k * z.im, k * z.re);
                    }
                }
                Sym::D11 => {
                    for ki in 0..n1 {
                        out[ki] = row[ki] * (-self.ksq1[ki]);
                    }
                }
                Sym::D22 => {
                    let f = -self.ksq2[kj];
                    for ki in 0..n1 {
                        out[ki] = row[ki] * f;
                    }
                }
                Sym::D12 => {
                    let k2 = self.kd2[kj];
                    for ki in 0..n1 {
                        out[ki] = row[ki] * (-self.kd1[ki] * k2);
                    }
                }
            }
        }
        let mut scratch = vec![Complex64::default(); self.inv1.get_inplace_scratch_len()];
        self.inv1.process_with_scratch(&mut buf, &mut scratch);
        let mut rows = vec![Complex64::default(); n1 * n2];
        transpose(&buf, n2, n1, &mut rows);
        scratch.resize(self.inv2.get_inplace_scratch_len(), Complex64::default());
        self.inv2.process_with_scratch(&mut rows, &mut scratch);
        let norm = 1.0 / (n1 * n2) as f64;
        for z in rows.iter_mut() {
            *z *= norm;
        }
        rows
    }
}

/// dst[(c, r)] = src[(r, c)] for an n_rows x n_cols row-major source.
fn transpose(src: &[Complex64], n_rows: usize, n_cols: usize, dst: &mut [Complex64]) {
    for r in 0..n_rows {
        for c in 0..n_cols {
            dst[c * n_rows + r] = src[r * n_cols + c];
        }
    }
}

/// Pack two real fields into one complex field.
pub fn pack(re: &[f64], im: &[f64]) -> Vec<Complex64> {
    re.iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect()
}

/// Split a complex field back into its real and imaginary parts.
pub fn unpack(z: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (
        z.iter().map(|c| c.re).collect(),
        z.iter().map(|c| c.im).collect(),
    )
}
