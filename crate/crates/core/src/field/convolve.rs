use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Geometry, LatticeField};
use crate::error::{Error, Result};

/// A convolution backend. On graphs every backend is the matrix product.
pub trait Convolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn convolve(&self, f: &LatticeField, g: &LatticeField) -> Result<LatticeField>;
}

/// Cyclic convolution by discrete Fourier transform.
#[derive(Debug, Default, Clone, Copy)]
pub struct SpectralConvolver;

/// Cyclic convolution by the defining double sum, parallel over outputs.
#[derive(Debug, Default, Clone, Copy)]
pub struct DirectConvolver;

type Factory = fn() -> Box<dyn Convolver>;

const REGISTRY: &[(&str, Factory)] =
    &[("spectral", || Box::new(SpectralConvolver)), ("direct", || Box::new(DirectConvolver))];

pub fn convolver_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn convolver(name: &str) -> Result<Box<dyn Convolver>> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, f)| f())
        .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
}

fn matrix_product(f: &LatticeField, g: &LatticeField) -> Result<LatticeField> {
    let p = f.matrix()?.dot(&g.matrix()?);
    Ok(LatticeField::from_parts(f.geometry(), p.into_iter().collect()))
}

impl Convolver for DirectConvolver {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn convolve(&self, f: &LatticeField, g: &LatticeField) -> Result<LatticeField> {
        f.same_geometry(g)?;
        match f.geometry() {
            Geometry::Graph { .. } => matrix_product(f, g),
            Geometry::Torus { .. } => {
                let n = f.len();
                let out: Vec<f64> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let x = f.coords(i);
                        let mut s = 0.0;
                        for j in 0..n {
                            let fy = f.values()[j];
                            if fy == 0.0 {
                                continue;
                            }
                            let y = f.coords(j);
                            let d: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                            s += fy * g.at(&d);
                        }
                        s
                    })
                    .collect();
                Ok(LatticeField::from_parts(f.geometry(), out))
            }
        }
    }
}

/// In-place multidimensional transform over a `side^d` array whose first
/// axis varies fastest.
pub(crate) fn fft_nd(data: &mut [Complex<f64>], dimension: usize, side: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(side) } else { planner.plan_fft_forward(side) };
    let n = data.len();
    let mut stride = 1;
    for _ in 0..dimension {
        let block = stride * side;
        let lines: Vec<(usize, usize)> =
            (0..n / block).flat_map(|b| (0..stride).map(move |o| (b * block, o))).collect();
        let mut scratch = vec![Complex::new(0.0, 0.0); side];
        for (base, off) in lines {
            for (k, s) in scratch.iter_mut().enumerate() {
                *s = data[base + off + k * stride];
            }
            plan.process(&mut scratch);
            for (k, s) in scratch.iter().enumerate() {
                data[base + off + k * stride] = *s;
            }
        }
        stride = block;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

pub(crate) fn forward(f: &LatticeField, dimension: usize, side: usize) -> Vec<Complex<f64>> {
    let mut a: Vec<Complex<f64>> = f.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_nd(&mut a, dimension, side, false);
    a
}

/// Real part of the inverse transform; roundoff negatives are clamped to zero.
pub(crate) fn inverse_real(mut a: Vec<Complex<f64>>, geometry: Geometry) -> LatticeField {
    let Geometry::Torus { dimension, side } = geometry else { unreachable!("spectral fields live on tori") };
    fft_nd(&mut a, dimension, side, true);
    LatticeField::from_parts(geometry, a.into_iter().map(|z| z.re.max(0.0)).collect())
}

impl Convolver for SpectralConvolver {
    fn name(&self) -> &'static str {
        "spectral"
    }

    fn convolve(&self, f: &LatticeField, g: &LatticeField) -> Result<LatticeField> {
        f.same_geometry(g)?;
        match f.geometry() {
            Geometry::Graph { .. } => matrix_product(f, g),
            Geometry::Torus { dimension, side } => {
                let a = forward(f, dimension, side);
                let b = forward(g, dimension, side);
                let prod = a.into_iter().zip(b).map(|(x, y)| x * y).collect();
                Ok(inverse_real(prod, f.geometry()))
            }
        }
    }
}
