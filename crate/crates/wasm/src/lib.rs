//! Browser bindings for the parametrized test function: point selection,
//! noisy reconstruction and the selection-norm curve.
//!
//! The `try_*` methods carry the logic and are what the native tests call;
//! the exported methods only convert errors for JavaScript.

use odeim::experiments::{add_noise, ToyConfig, ToySetup};
use odeim::interpolant::Interpolant;
use odeim::linalg::Vector;
use odeim::models::toy_function;
use odeim::selection::{select, Method};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Reconstruction of one parameter from noisy samples.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub truth: Vec<f64>,
    pub approximation: Vec<f64>,
    pub points: Vec<usize>,
    pub relative_error: f64,
}

#[wasm_bindgen]
pub struct ToyDemo {
    setup: ToySetup,
    max_n: usize,
}

impl ToyDemo {
    pub fn try_new(grid_size: usize, training: usize, max_n: usize) -> odeim::Result<ToyDemo> {
        let setup = ToySetup::new(
            &ToyConfig {
                grid_size,
                training,
                test: 1,
            },
            max_n,
        )?;
        Ok(ToyDemo { setup, max_n })
    }

    fn interpolant(&self, method: &str, n: usize, m: usize, seed: u64) -> odeim::Result<Interpolant> {
        let method: Method = method.parse()?;
        let basis = self.setup.basis(n)?;
        let points = select(method, &basis, m, seed)?;
        Interpolant::new(basis, points)
    }

    pub fn try_select(&self, method: &str, n: usize, m: usize, seed: u64) -> odeim::Result<Vec<usize>> {
        Ok(self.interpolant(method, n, m, seed)?.points().indices().to_vec())
    }

    pub fn try_reconstruct(
        &self,
        method: &str,
        n: usize,
        m: usize,
        parameter: f64,
        sigma: f64,
        seed: u64,
    ) -> odeim::Result<Reconstruction> {
        let interp = self.interpolant(method, n, m, seed)?;
        let truth = toy_function(self.setup.spec(), parameter)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = add_noise(&interp.sample(&truth), sigma, &mut rng)?;
        let (_, approx) = interp.approximate(&samples)?;
        let relative_error = (&truth - &approx).norm() / truth.norm();
        Ok(Reconstruction {
            truth: truth.iter().copied().collect(),
            approximation: approx.iter().copied().collect(),
            points: interp.points().indices().to_vec(),
            relative_error,
        })
    }

    /// `||(P^T U)^+||_2` for `n = 1..=max_n`, with `m = ceil(factor n)` for
    /// the oversampling methods; `NaN` where the selection is singular.
    pub fn try_selection_norm_curve(&self, method: &str, factor: f64, seed: u64) -> odeim::Result<Vec<f64>> {
        let parsed: Method = method.parse()?;
        if !(factor >= 1.0) {
            return Err(odeim::Error::InvalidArgument(format!("factor must be >= 1, got {factor}")));
        }
        let big_n = self.setup.spec().grid_size;
        Ok((1..=self.max_n)
            .map(|n| {
                let m = if parsed.oversamples() {
                    ((factor * n as f64).ceil() as usize).min(big_n)
                } else {
                    n
                };
                self.interpolant(method, n, m, seed)
                    .map_or(f64::NAN, |i| i.selection_norm())
            })
            .collect())
    }
}

fn js(err: odeim::Error) -> JsError {
    JsError::new(&err.to_string())
}

#[wasm_bindgen]
impl ToyDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(grid_size: usize, training: usize, max_n: usize) -> Result<ToyDemo, JsError> {
        Self::try_new(grid_size, training, max_n).map_err(js)
    }

    #[wasm_bindgen(getter, js_name = maxN)]
    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn grid(&self) -> Vec<f64> {
        self.setup.spec().grid().iter().copied().collect()
    }

    pub fn evaluate(&self, parameter: f64) -> Result<Vec<f64>, JsError> {
        let v: Vector = toy_function(self.setup.spec(), parameter).map_err(js)?;
        Ok(v.iter().copied().collect())
    }

    pub fn select(&self, method: &str, n: usize, m: usize, seed: u64) -> Result<Vec<u32>, JsError> {
        let points = self.try_select(method, n, m, seed).map_err(js)?;
        Ok(points.into_iter().map(|i| i as u32).collect())
    }

    /// Flat array: the approximation, followed by the relative error.
    pub fn reconstruct(
        &self,
        method: &str,
        n: usize,
        m: usize,
        parameter: f64,
        sigma: f64,
        seed: u64,
    ) -> Result<Vec<f64>, JsError> {
        let r = self.try_reconstruct(method, n, m, parameter, sigma, seed).map_err(js)?;
        let mut out = r.approximation;
        out.push(r.relative_error);
        Ok(out)
    }

    #[wasm_bindgen(js_name = selectionNormCurve)]
    pub fn selection_norm_curve(&self, method: &str, factor: f64, seed: u64) -> Result<Vec<f64>, JsError> {
        self.try_selection_norm_curve(method, factor, seed).map_err(js)
    }
}

#[wasm_bindgen(js_name = methodNames)]
pub fn method_names() -> Vec<String> {
    Method::ALL.iter().map(|m| m.name().to_string()).collect()
}
