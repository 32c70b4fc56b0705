use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Equidistant grid on `domain` (endpoints included) and the admissible parameter interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyFunctionSpec {
    pub grid_size: usize,
    pub domain: (f64, f64),
    pub parameter_domain: (f64, f64),
}

impl Default for ToyFunctionSpec {
    fn default() -> Self {
        Self::with_grid(8192)
    }
}

impl ToyFunctionSpec {
    pub fn with_grid(grid_size: usize) -> Self {
        Self {
            grid_size,
            domain: (-2.0 * PI, 2.0 * PI),
            parameter_domain: (1.0, 3.0),
        }
    }

    pub fn grid(&self) -> Vector {
        linspace(self.domain.0, self.domain.1, self.grid_size)
    }

    /// `count` equidistant parameters spanning the parameter domain.
    pub fn training_parameters(&self, count: usize) -> Vec<f64> {
        linspace(self.parameter_domain.0, self.parameter_domain.1, count)
            .iter()
            .copied()
            .collect()
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, count: usize) -> Vector {
    match count {
        0 => Vector::zeros(0),
        1 => Vector::from_element(1, lo),
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            Vector::from_fn(count, |i, _| if i == count - 1 { hi } else { lo + step * i as f64 })
        }
    }
}

/// `1e-4 xi (sin(xi x) + sin(2 pi xi x) + sin(pi xi x)) + 1e-6 exp(-(x - xi)^2 / 5e-5)`
pub fn toy_value(x: f64, xi: f64) -> f64 {
    1e-4 * xi * ((xi * x).sin() + (2.0 * PI * xi * x).sin() + (PI * xi * x).sin())
        + 1e-6 * (-(x - xi).powi(2) / 5e-5).exp()
}

pub fn toy_function(spec: &ToyFunctionSpec, xi: f64) -> Result<Vector> {
    let (lo, hi) = spec.parameter_domain;
    if !(xi >= lo && xi <= hi) {
        return Err(Error::InvalidArgument(format!(
            "parameter {xi} outside [{lo}, {hi}]"
        )));
    }
    Ok(spec.grid().map(|x| toy_value(x, xi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_values() {
        assert_eq!(toy_value(0.0, 1.0), 0.0);
        let expected = 1e-4 * 1f64.sin() + 1e-6;
        assert!((toy_value(1.0, 1.0) - expected).abs() < 1e-18);
        assert!((toy_value(1.0, 1.0) - 8.51471e-5).abs() < 1e-10);
    }

    #[test]
    fn grid_includes_endpoints() {
        let spec = ToyFunctionSpec::with_grid(11);
        let x = spec.grid();
        assert_eq!(x[0], -2.0 * PI);
        assert_eq!(x[10], 2.0 * PI);
        assert!((x[5]).abs() < 1e-15);
        assert_eq!(spec.training_parameters(3), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn vector_matches_scalar() {
        let spec = ToyFunctionSpec::with_grid(512);
        let x = spec.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xi = 2.3;
        let f = toy_function(&spec, xi).unwrap();
        for _ in 0..10 {
            let i = rng.random_range(0..512);
            assert_eq!(f[i], toy_value(x[i], xi));
        }
        assert!(toy_function(&spec, 3.5).is_err());
    }
}
