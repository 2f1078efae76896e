//! Periodic derivative operators on grid fields: a spectral scheme (exact
//! on resolved trigonometric data) and 4th-order central differences.

use crate::ambient::Vec4;
use crate::fft2::{pack, unpack, SpectralPlan, Sym};
use crate::grid::GridDims;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Scheme {
    Spectral,
    Central4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Spectral => "spectral",
            Scheme::Central4 => "central4",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::error::HflowError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spectral" => Ok(Scheme::Spectral),
            "central4" => Ok(Scheme::Central4),
            other => Err(crate::error::HflowError::config(format!(
                "unknown scheme '{other}' (expected spectral or central4)"
            ))),
        }
    }
}

/// All derivative fields of a 4-component periodic field that the geometry
/// pipeline consumes: first derivatives and the three second derivatives.
pub struct Vec4Derivs {
    pub d1: Vec<Vec4>,
    pub d2: Vec<Vec4>,
    pub d11: Vec<Vec4>,
    pub d12: Vec<Vec4>,
    pub d22: Vec<Vec4>,
}

#[derive(Clone, Copy)]
pub struct DerivOps {
    pub scheme: Scheme,
    pub dims: GridDims,
}

impl DerivOps {
    pub fn new(scheme: Scheme, dims: GridDims) -> Self {
        DerivOps { scheme, dims }
    }

    /// First derivatives (d1, d2) of a scalar field.
    pub fn grad_scalar(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.scheme {
            Scheme::Central4 => (self.stencil_d1(f), self.stencil_d2(f)),
            Scheme::Spectral => {
                let plan = SpectralPlan::get(self.dims);
                let zero = vec![0.0; f.len()];
                let spec = plan.forward(&pack(f, &zero));
                let (d1, _) = unpack(&plan.apply_inverse(&spec, Sym::D1));
                let (d2, _) = unpack(&plan.apply_inverse(&spec, Sym::D2));
                (d1, d2)
            }
        }
    }

    /// First derivatives of two scalar fields, packed into one complex
    /// transform in the spectral case.
    #[allow(clippy::type_complexity)]
    pub fn grad_scalar_pair(
        &self,
        a: &[f64],
        b: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        match self.scheme {
            Scheme::Central4 => (
                self.stencil_d1(a),
                self.stencil_d2(a),
                self.stencil_d1(b),
                self.stencil_d2(b),
            ),
            Scheme::Spectral => {
                let plan = SpectralPlan::get(self.dims);
                let spec = plan.forward(&pack(a, b));
                let (a1, b1) = unpack(&plan.apply_inverse(&spec, Sym::D1));
                let (a2, b2) = unpack(&plan.apply_inverse(&spec, Sym::D2));
                (a1, a2, b1, b2)
            }
        }
    }

    pub fn d1_scalar(&self, f: &[f64]) -> Vec<f64> {
        match self.scheme {
            Scheme::Central4 => self.stencil_d1(f),
            Scheme::Spectral => {
                let plan = SpectralPlan::get(self.dims);
                let zero = vec![0.0; f.len()];
                let spec = plan.forward(&pack(f, &zero));
                unpack(&plan.apply_inverse(&spec, Sym::D1)).0
            }
        }
    }

    pub fn d2_scalar(&self, f: &[f64]) -> Vec<f64> {
        match self.scheme {
            Scheme::Central4 => self.stencil_d2(f),
            Scheme::Spectral => {
                let plan = SpectralPlan::get(self.dims);
                let zero = vec![0.0; f.len()];
                let spec = plan.forward(&pack(f, &zero));
                unpack(&plan.apply_inverse(&spec, Sym::D2)).0
            }
        }
    }

    /// First and second derivatives of a 4-component periodic field. The
    /// spectral path packs components (0,1) and (2,3) into two complex
    /// transforms.
    pub fn vec4_derivs(&self, p: &[Vec4]) -> Vec4Derivs {
        match self.scheme {
            Scheme::Spectral => {
                let plan = SpectralPlan::get(self.dims);
                let n = p.len();
                let comp = |c: usize| -> Vec<f64> { p.iter().map(|v| v[c]).collect() };
                let (c0, c1, c2, c3) = (comp(0), comp(1), comp(2), comp(3));
                let spec_a = plan.forward(&pack(&c0, &c1));
                let spec_b = plan.forward(&pack(&c2, &c3));
                let assemble = |sym: Sym| -> Vec<Vec4> {
                    let za = plan.apply_inverse(&spec_a, sym);
                    let zb = plan.apply_inverse(&spec_b, sym);
                    let mut out = vec![[0.0; 4]; n];
                    for k in 0..n {
                        out[k] = [za[k].re, za[k].im, zb[k].re, zb[k].im];
                    }
                    out
                };
                Vec4Derivs {
                    d1: assemble(Sym::D1),
                    d2: assemble(Sym::D2),
                    d11: assemble(Sym::D11),
                    d12: assemble(Sym::D12),
                    d22: assemble(Sym::D22),
                }
            }
            Scheme::Central4 => {
                let d1 = self.stencil_d1_vec(p);
                let d2 = self.stencil_d2_vec(p);
                Vec4Derivs {
                    d12: self.stencil_d2_vec(&d1),
                    d1,
                    d2,
                    d11: self.stencil_d11_vec(p),
                    d22: self.stencil_d22_vec(p),
                }
            }
        }
    }

    fn stencil_d1(&self, f: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let inv = 1.0 / (12.0 / d.n1 as f64);
        let mut out = vec![0.0; f.len()];
        for i in 0..d.n1 {
            let ip1 = d.wrap1(i as isize + 1);
            let ip2 = d.wrap1(i as isize + 2);
            let im1 = d.wrap1(i as isize - 1);
            let im2 = d.wrap1(i as isize - 2);
            for j in 0..d.n2 {
                out[d.idx(i, j)] = (-f[d.idx(ip2, j)] + 8.0 * f[d.idx(ip1, j)]
                    - 8.0 * f[d.idx(im1, j)]
                    + f[d.idx(im2, j)])
                    * inv;
            }
        }
        out
    }

    fn stencil_d2(&self, f: &[f64]) -> Vec<f64> {
        let d = self.dims;
        let inv = 1.0 / (12.0 / d.n2 as f64);
        let mut out = vec![0.0; f.len()];
        for i in 0..d.n1 {
            for j in 0..d.n2 {
                let jp1 = d.wrap2(j as isize + 1);
                let jp2 = d.wrap2(j as isize + 2);
                let jm1 = d.wrap2(j as isize - 1);
                let jm2 = d.wrap2(j as isize - 2);
                out[d.idx(i, j)] = (-f[d.idx(i, jp2)] + 8.0 * f[d.idx(i, jp1)]
                    - 8.0 * f[d.idx(i, jm1)]
                    + f[d.idx(i, jm2)])
                    * inv;
            }
        }
        out
    }

    fn stencil_d1_vec(&self, p: &[Vec4]) -> Vec<Vec4> {
        let d = self.dims;
        let inv = d.n1 as f64 / 12.0;
        let mut out = vec![[0.0; 4]; p.len()];
        for i in 0..d.n1 {
            let ip1 = d.wrap1(i as isize + 1);
            let ip2 = d.wrap1(i as isize + 2);
            let im1 = d.wrap1(i as isize - 1);
            let im2 = d.wrap1(i as isize - 2);
            for j in 0..d.n2 {
                let o = &mut out[i * d.n2 + j];
                for c in 0..4 {
                    o[c] = (-p[d.idx(ip2, j)][c] + 8.0 * p[d.idx(ip1, j)][c]
                        - 8.0 * p[d.idx(im1, j)][c]
                        + p[d.idx(im2, j)][c])
                        * inv;
                }
            }
        }
        out
    }

    fn stencil_d2_vec(&self, p: &[Vec4]) -> Vec<Vec4> {
        let d = self.dims;
        let inv = d.n2 as f64 / 12.0;
        let mut out = vec![[0.0; 4]; p.len()];
        for i in 0..d.n1 {
            for j in 0..d.n2 {
                let jp1 = d.wrap2(j as isize + 1);
                let jp2 = d.wrap2(j as isize + 2);
                let jm1 = d.wrap2(j as isize - 1);
                let jm2 = d.wrap2(j as isize - 2);
                let o = &mut out[d.idx(i, j)];
                for c in 0..4 {
                    o[c] = (-p[d.idx(i, jp2)][c] + 8.0 * p[d.idx(i, jp1)][c]
                        - 8.0 * p[d.idx(i, jm1)][c]
                        + p[d.idx(i, jm2)][c])
                        * inv;
                }
            }
        }
        out
    }

    fn stencil_d11_vec(&self, p: &[Vec4]) -> Vec<Vec4> {
        let d = self.dims;
        let inv = (d.n1 as f64) * (d.n1 as f64) / 12.0;
        let mut out = vec![[0.0; 4]; p.len()];
        for i in 0..d.n1 {
            let ip1 = d.wrap1(i as isize + 1);
            let ip2 = d.wrap1(i as isize + 2);
            let im1 = d.wrap1(i as isize - 1);
            let im2 = d.wrap1(i as isize - 2);
            for j in 0..d.n2 {
                let o = &mut out[d.idx(i, j)];
                for c in 0..4 {
                    o[c] = (-p[d.idx(ip2, j)][c] + 16.0 * p[d.idx(ip1, j)][c]
                        - 30.0 * p[d.idx(i, j)][c]
                        + 16.0 * p[d.idx(im1, j)][c]
                        - p[d.idx(im2, j)][c])
                        * inv;
                }
            }
        }
        out
    }

    fn stencil_d22_vec(&self, p: &[Vec4]) -> Vec<Vec4> {
        let d = self.dims;
        let inv = (d.n2 as f64) * (d.n2 as f64) / 12.0;
        let mut out = vec![[0.0; 4]; p.len()];
        for i in 0..d.n1 {
            for j in 0..d.n2 {
                let jp1 = d.wrap2(j as isize + 1);
                let jp2 = d.wrap2(j as isize + 2);
                let jm1 = d.wrap2(j as isize - 1);
                let jm2 = d.wrap2(j as isize - 2);
                let o = &mut out[d.idx(i, j)];
                for c in 0..4 {
                    o[c] = (-p[d.idx(i, jp2)][c] + 16.0 * p[d.idx(i, jp1)][c]
                        - 30.0 * p[d.idx(i, j)][c]
                        + 16.0 * p[d.idx(i, jm1)][c]
                        - p[d.idx(i, jm2)][c])
                        * inv;
                }
            }
        }
        out
    }
}
