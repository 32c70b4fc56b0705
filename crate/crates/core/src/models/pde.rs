//! Finite-difference diffusion-reaction model on the unit square:
//! `Laplace(u) + f(u; xi) = 100 sin(2 pi x1) sin(2 pi x2)` with homogeneous
//! Dirichlet boundary conditions.

use std::f64::consts::PI;

use super::newton::{newton_armijo, NewtonConfig, NewtonReport, NonlinearSystem};
use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, Matrix, Vector};

/// `(xi1, xi2)`
pub type Parameter = [f64; 2];

/// Admissible parameters lie in `[-PARAMETER_BOUND, PARAMETER_BOUND]^2`.
pub const PARAMETER_BOUND: f64 = PI / 2.0;

fn reaction_coefficient(xi: Parameter) -> f64 {
    (0.1 * xi[0].sin() + 2.0) * (-2.7 * xi[0] * xi[0]).exp()
}

/// `f(u) = (0.1 sin xi1 + 2) exp(-2.7 xi1^2) (exp(1.8 xi2 u) - 1)` and its
/// derivative in `u`, componentwise.
pub fn reaction(u: &Vector, xi: Parameter) -> Result<(Vector, Vector)> {
    let coef = reaction_coefficient(xi);
    let rate = 1.8 * xi[1];
    let mut value = Vector::zeros(u.len());
    let mut derivative = Vector::zeros(u.len());
    for i in 0..u.len() {
        value[i] = coef * (rate * u[i]).exp_m1();
        derivative[i] = coef * rate * (rate * u[i]).exp();
    }
    if value.iter().chain(derivative.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok((value, derivative))
}

/// `f` only, without the derivative.
pub fn reaction_value(u: &Vector, xi: Parameter) -> Result<Vector> {
    let coef = reaction_coefficient(xi);
    let rate = 1.8 * xi[1];
    let value = u.map(|v| coef * (rate * v).exp_m1());
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(value)
}

pub fn check_parameter(xi: Parameter) -> Result<()> {
    if xi.iter().all(|v| v.abs() <= PARAMETER_BOUND + 1e-12) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "parameter ({}, {}) outside [-pi/2, pi/2]^2",
            xi[0], xi[1]
        )))
    }
}

/// Interior-node discretization with mesh width `h = 1 / divisions`.
///
/// Node `(i, j)` sits at `((i + 1) h, (j + 1) h)` and has flat index `i + j * side`.
#[derive(Debug, Clone)]
pub struct FullOrderModel {
    divisions: usize,
    side: usize,
    h: f64,
    forcing: Vector,
}

impl FullOrderModel {
    pub fn new(divisions: usize) -> Result<Self> {
        if divisions < 4 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs at least 4 divisions, got {divisions}"
            )));
        }
        let side = divisions - 1;
        let h = 1.0 / divisions as f64;
        let forcing = Vector::from_fn(side * side, |k, _| {
            let (x1, x2) = (((k % side) + 1) as f64 * h, ((k / side) + 1) as f64 * h);
            100.0 * (2.0 * PI * x1).sin() * (2.0 * PI * x2).sin()
        });
        Ok(Self {
            divisions,
            side,
            h,
            forcing,
        })
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    /// Interior nodes per direction.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn mesh_width(&self) -> f64 {
        self.h
    }

    /// Full dimension `N = side^2`.
    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn forcing(&self) -> &Vector {
        &self.forcing
    }

    pub fn coordinates(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.side, k / self.side);
        ((i + 1) as f64 * self.h, (j + 1) as f64 * self.h)
    }

    /// Flat index of the interior node nearest to `(x1, x2)`.
    pub fn nearest_node(&self, x1: f64, x2: f64) -> usize {
        let snap = |x: f64| ((x / self.h).round() as i64 - 1).clamp(0, self.side as i64 - 1) as usize;
        snap(x1) + snap(x2) * self.side
    }

    /// Nodes nearest to `(0.25 i, 0.2 j)`, `i = 1..=3`, `j = 1..=4`, with `i` outermost.
    pub fn output_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(12);
        for i in 1..=3 {
            for j in 1..=4 {
                out.push(self.nearest_node(0.25 * i as f64, 0.2 * j as f64));
            }
        }
        out
    }

    /// Five-point Laplacian with zero boundary values, scaled by `1/h^2`.
    ///
    /// Written as a sum of neighbor differences to keep cancellation small.
    pub fn apply_laplacian(&self, x: &Vector) -> Vector {
        let s = self.side;
        let inv_h2 = 1.0 / (self.h * self.h);
        Vector::from_fn(s * s, |k, _| {
            let (i, j) = (k % s, k / s);
            let c = x[k];
            let west = if i > 0 { x[k - 1] } else { 0.0 };
            let east = if i + 1 < s { x[k + 1] } else { 0.0 };
            let south = if j > 0 { x[k - s] } else { 0.0 };
            let north = if j + 1 < s { x[k + s] } else { 0.0 };
            (((west - c) + (east - c)) + ((south - c) + (north - c))) * inv_h2
        })
    }

    /// `A V` column by column.
    pub fn apply_laplacian_columns(&self, v: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(v.nrows(), v.ncols());
        for (j, col) in v.column_iter().enumerate() {
            out.set_column(j, &self.apply_laplacian(&col.into_owned()));
        }
        out
    }

    /// Dense Laplacian; intended for small meshes and tests.
    pub fn laplacian_dense(&self) -> Matrix {
        let n = self.dim();
        let mut a = Matrix::zeros(n, n);
        self.for_each_stencil_entry(|r, c, v| a[(r, c)] += v);
        a
    }

    fn for_each_stencil_entry(&self, mut visit: impl FnMut(usize, usize, f64)) {
        let s = self.side;
        let inv_h2 = 1.0 / (self.h * self.h);
        for k in 0..s * s {
            let (i, j) = (k % s, k / s);
            visit(k, k, -4.0 * inv_h2);
            if i > 0 {
                visit(k, k - 1, inv_h2);
            }
            if i + 1 < s {
                visit(k, k + 1, inv_h2);
            }
            if j > 0 {
                visit(k, k - s, inv_h2);
            }
            if j + 1 < s {
                visit(k, k + s, inv_h2);
            }
        }
    }

    /// `A x + f(x) - b`
    pub fn residual(&self, x: &Vector, xi: Parameter) -> Result<Vector> {
        let f = reaction_value(x, xi)?;
        Ok(self.apply_laplacian(x) + f - &self.forcing)
    }

    /// `(A + diag(f'(x))) v`
    pub fn jacobian_times(&self, x: &Vector, xi: Parameter, v: &Vector) -> Result<Vector> {
        let (_, df) = reaction(x, xi)?;
        Ok(self.apply_laplacian(v) + df.component_mul(v))
    }

    /// Banded `A + diag(f'(x))`, half-bandwidth `side`.
    pub fn jacobian_band(&self, x: &Vector, xi: Parameter) -> Result<BandMatrix> {
        let (_, df) = reaction(x, xi)?;
        let mut band = BandMatrix::zeros(self.dim(), self.side, self.side);
        self.for_each_stencil_entry(|r, c, v| band.add(r, c, v));
        for (k, d) in df.iter().enumerate() {
            band.add(k, k, *d);
        }
        Ok(band)
    }

    /// Newton-Armijo solve from the zero state.
    pub fn solve(&self, xi: Parameter, cfg: &NewtonConfig) -> Result<NewtonReport> {
        self.solve_from(xi, Vector::zeros(self.dim()), cfg)
    }

    pub fn solve_from(&self, xi: Parameter, initial: Vector, cfg: &NewtonConfig) -> Result<NewtonReport> {
        check_parameter(xi)?;
        if initial.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, expected {}",
                initial.len(),
                self.dim()
            )));
        }
        newton_armijo(&FullSystem { model: self, xi }, initial, cfg)
    }
}

struct FullSystem<'a> {
    model: &'a FullOrderModel,
    xi: Parameter,
}

impl NonlinearSystem for FullSystem<'_> {
    fn residual(&self, x: &Vector) -> Result<Vector> {
        self.model.residual(x, self.xi)
    }

    fn newton_direction(&self, x: &Vector, r: &Vector) -> Result<Vector> {
        let lu = self.model.jacobian_band(x, self.xi)?.factor()?;
        let mut dx: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut dx);
        Ok(Vector::from_vec(dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reaction_values() {
        let zero = Vector::zeros(3);
        for xi in [[0.3, -1.2], [-1.5, 1.5]] {
            let (v, _) = reaction(&zero, xi).unwrap();
            assert_eq!(v, Vector::zeros(3));
        }
        let (v, _) = reaction(&Vector::from_element(1, 1.0), [0.0, 1.0]).unwrap();
        assert!((v[0] - 2.0 * (1.8f64.exp() - 1.0)).abs() < 1e-13);
        assert!((v[0] - 10.0993).abs() < 1e-4);
        assert!(matches!(reaction(&Vector::from_element(1, 1e3), [0.0, 1.0]), Err(Error::Overflow)));
    }

    #[test]
    fn reaction_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let xi = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let u = Vector::from_element(1, rng.random_range(-2.0..2.0));
            let eps = 1e-6;
            let (_, d) = reaction(&u, xi).unwrap();
            let up = reaction_value(&u.add_scalar(eps), xi).unwrap()[0];
            let down = reaction_value(&u.add_scalar(-eps), xi).unwrap()[0];
            let fd = (up - down) / (2.0 * eps);
            assert!((fd - d[0]).abs() <= 1e-6 * d[0].abs().max(1e-3));
        }
    }

    #[test]
    fn laplacian_matches_dense_stencil() {
        let model = FullOrderModel::new(4).unwrap();
        assert_eq!(model.dim(), 9);
        let h2 = 1.0 / 16.0;
        // explicit 9x9 assembly on the 3x3 interior
        let mut oracle = Matrix::zeros(9, 9);
        for j in 0..3i32 {
            for i in 0..3i32 {
                let k = (i + 3 * j) as usize;
                oracle[(k, k)] = -4.0 / h2;
                for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (ni, nj) = (i + di, j + dj);
                    if (0..3).contains(&ni) && (0..3).contains(&nj) {
                        oracle[(k, (ni + 3 * nj) as usize)] = 1.0 / h2;
                    }
                }
            }
        }
        assert_eq!(model.laplacian_dense(), oracle);
        let c = Vector::from_element(9, 2.0);
        let applied = model.apply_laplacian(&c);
        assert!((applied - &oracle * c).norm() < 1e-12);
        // centre node of a constant field: all four neighbors interior
        assert_eq!(model.apply_laplacian(&Vector::from_element(9, 2.0))[4], 0.0);
        assert_eq!(model.apply_laplacian(&Vector::from_element(9, 2.0))[0], -2.0 * 2.0 / h2);
    }

    #[test]
    fn laplacian_is_symmetric_negative_definite() {
        let model = FullOrderModel::new(8).unwrap();
        let a = model.laplacian_dense();
        assert_eq!((&a - a.transpose()).norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = Vector::from_fn(model.dim(), |_, _| rng.random_range(-1.0..1.0));
            assert!(x.dot(&model.apply_laplacian(&x)) < 0.0);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let model = FullOrderModel::new(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let xi = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let x = Vector::from_fn(model.dim(), |_, _| rng.random_range(-1.0..1.0));
            let v = Vector::from_fn(model.dim(), |_, _| rng.random_range(-1.0..1.0));
            let eps = 1e-6;
            let fd = (model.residual(&(&x + &v * eps), xi).unwrap()
                - model.residual(&(&x - &v * eps), xi).unwrap())
                / (2.0 * eps);
            let jv = model.jacobian_times(&x, xi, &v).unwrap();
            assert!((&fd - &jv).norm() <= 1e-5 * jv.norm());
            let band = model.jacobian_band(&x, xi).unwrap();
            let dense = Matrix::from_fn(model.dim(), model.dim(), |r, c| band.get(r, c));
            assert!((dense * &v - jv).norm() <= 1e-12 * v.norm() / model.mesh_width().powi(2));
        }
    }

    #[test]
    fn linear_limit_matches_direct_solve() {
        let model = FullOrderModel::new(12).unwrap();
        let report = model.solve([0.7, 0.0], &NewtonConfig::default()).unwrap();
        let direct = model.laplacian_dense().lu().solve(model.forcing()).unwrap();
        assert!((report.solution - direct).norm() < 1e-10);
    }

    #[test]
    fn nonlinear_solve_converges_and_refines() {
        let cfg = NewtonConfig::default();
        let xi = [0.3, 0.4];
        let coarse_model = FullOrderModel::new(16).unwrap();
        let fine_model = FullOrderModel::new(32).unwrap();
        let coarse = coarse_model.solve(xi, &cfg).unwrap();
        let fine = fine_model.solve(xi, &cfg).unwrap();
        assert!(coarse.residual_norm < 1e-10 && fine.residual_norm < 1e-10);
        // coarse node (i, j) coincides with fine node (2i + 1, 2j + 1)
        let mut max_diff = 0.0f64;
        let mut max_u = 0.0f64;
        for k in 0..coarse_model.dim() {
            let (i, j) = (k % 15, k / 15);
            let kf = (2 * i + 1) + (2 * j + 1) * 31;
            max_diff = max_diff.max((coarse.solution[k] - fine.solution[kf]).abs());
            max_u = max_u.max(coarse.solution[k].abs());
        }
        let h = coarse_model.mesh_width();
        assert!(max_diff < 10.0 * h * h * max_u, "{max_diff} vs {}", h * h * max_u);
    }

    #[test]
    fn output_nodes_are_nearest() {
        let model = FullOrderModel::new(64).unwrap();
        let idx = model.output_indices();
        assert_eq!(idx.len(), 12);
        let (x1, x2) = model.coordinates(idx[0]);
        assert!((x1 - 0.25).abs() < 1e-12);
        assert!((x2 - 0.203125).abs() < 1e-12);
        let model = FullOrderModel::new(5).unwrap();
        for &k in &model.output_indices() {
            assert!(k < model.dim());
        }
    }
}
