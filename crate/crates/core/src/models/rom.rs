//! POD-Galerkin reduced models, optionally hyper-reduced.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::newton::{newton_armijo, NewtonConfig, NonlinearSystem};
use super::pde::{check_parameter, reaction, reaction_value, FullOrderModel, Parameter};
use crate::error::{Error, Result};
use crate::interpolant::Interpolant;
use crate::linalg::{Matrix, Vector};
use crate::pod::{pod_basis, Basis, SnapshotMatrix};

/// Precomputed operators of the hyper-reduced nonlinear term
/// `V^T f(V x) ~ E f(V_p x)`.
#[derive(Debug, Clone)]
pub struct HyperReduction {
    interpolant: Interpolant,
    /// `E = V^T U (P^T U)^+` (r x m).
    projected: Matrix,
    /// `V_p`, the rows of `V` at the sampling points (m x r).
    sampled_state_basis: Matrix,
}

impl HyperReduction {
    pub fn interpolant(&self) -> &Interpolant {
        &self.interpolant
    }

    pub fn projected(&self) -> &Matrix {
        &self.projected
    }

    pub fn sampled_state_basis(&self) -> &Matrix {
        &self.sampled_state_basis
    }
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    reduced_linear: Matrix,
    reduced_forcing: Vector,
    state_basis: Basis,
    hyper_reduction: Option<HyperReduction>,
    output_map: Matrix,
}

/// Galerkin projection onto a given orthonormal `V`.
pub fn project(model: &FullOrderModel, state_basis: Basis) -> Result<ReducedModel> {
    if state_basis.full_dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, model has dimension {}",
            state_basis.full_dim(),
            model.dim()
        )));
    }
    let v = state_basis.u();
    let reduced_linear = v.tr_mul(&model.apply_laplacian_columns(v));
    let reduced_forcing = v.tr_mul(model.forcing());
    let output_map = state_basis.rows(&model.output_indices());
    Ok(ReducedModel {
        reduced_linear,
        reduced_forcing,
        state_basis,
        hyper_reduction: None,
        output_map,
    })
}

/// POD basis of dimension `r` from state snapshots, then Galerkin projection.
pub fn build_rom(model: &FullOrderModel, snapshots: &SnapshotMatrix, r: usize) -> Result<ReducedModel> {
    project(model, pod_basis(snapshots, r)?)
}

/// Replaces the nonlinear term by its sampled regression through `interp`.
pub fn attach_hyper_reduction(mut rom: ReducedModel, interp: Interpolant) -> Result<ReducedModel> {
    let v = rom.state_basis.u();
    if interp.basis().full_dim() != v.nrows() {
        return Err(Error::Dimension(format!(
            "interpolant basis has {} rows, state basis has {}",
            interp.basis().full_dim(),
            v.nrows()
        )));
    }
    let projected = v.tr_mul(interp.basis().u()) * interp.pseudo_inverse();
    let sampled_state_basis = rom.state_basis.rows(interp.points().indices());
    rom.hyper_reduction = Some(HyperReduction {
        interpolant: interp,
        projected,
        sampled_state_basis,
    });
    Ok(rom)
}

/// Additive Gaussian perturbation of the nonlinear evaluations, drawn once
/// per reduced solve.
pub struct Noise<'a, R: Rng> {
    pub sigma: f64,
    pub rng: &'a mut R,
}

#[derive(Debug, Clone)]
pub struct RomSolution {
    pub state: Vector,
    pub outputs: Vector,
    pub iterations: usize,
    pub residual_norm: f64,
}

impl ReducedModel {
    pub fn reduced_linear(&self) -> &Matrix {
        &self.reduced_linear
    }

    pub fn reduced_forcing(&self) -> &Vector {
        &self.reduced_forcing
    }

    pub fn state_basis(&self) -> &Basis {
        &self.state_basis
    }

    pub fn hyper_reduction(&self) -> Option<&HyperReduction> {
        self.hyper_reduction.as_ref()
    }

    pub fn output_map(&self) -> &Matrix {
        &self.output_map
    }

    pub fn dim(&self) -> usize {
        self.state_basis.dim()
    }

    /// Number of nonlinear evaluations per residual: `m` if hyper-reduced, else `N`.
    pub fn evaluation_count(&self) -> usize {
        match &self.hyper_reduction {
            Some(h) => h.sampled_state_basis.nrows(),
            None => self.state_basis.full_dim(),
        }
    }

    fn lift(&self, x: &Vector) -> Vector {
        match &self.hyper_reduction {
            Some(h) => &h.sampled_state_basis * x,
            None => self.state_basis.u() * x,
        }
    }

    fn lift_basis(&self) -> &Matrix {
        match &self.hyper_reduction {
            Some(h) => &h.sampled_state_basis,
            None => self.state_basis.u(),
        }
    }

    fn project_nonlinear(&self, values: &Vector) -> Vector {
        match &self.hyper_reduction {
            Some(h) => &h.projected * values,
            None => self.state_basis.u().tr_mul(values),
        }
    }

    /// Reduced residual with an additive perturbation of the nonlinear evaluations.
    pub fn residual_with(&self, x: &Vector, xi: Parameter, perturbation: Option<&Vector>) -> Result<Vector> {
        let mut f = reaction_value(&self.lift(x), xi)?;
        if let Some(p) = perturbation {
            f += p;
        }
        Ok(&self.reduced_linear * x + self.project_nonlinear(&f) - &self.reduced_forcing)
    }

    pub fn residual(&self, x: &Vector, xi: Parameter) -> Result<Vector> {
        self.residual_with(x, xi, None)
    }

    /// Dense reduced Jacobian `A~ + W diag(f'(L x)) L` with `L` the lifting
    /// rows and `W` the matching projection.
    pub fn jacobian(&self, x: &Vector, xi: Parameter) -> Result<Matrix> {
        let lift = self.lift_basis();
        let (_, df) = reaction(&(lift * x), xi)?;
        let mut scaled = lift.clone();
        for (mut row, d) in scaled.row_iter_mut().zip(df.iter()) {
            row *= *d;
        }
        let nonlinear = match &self.hyper_reduction {
            Some(h) => &h.projected * scaled,
            None => self.state_basis.u().tr_mul(&scaled),
        };
        Ok(&self.reduced_linear + nonlinear)
    }

    pub fn outputs(&self, x: &Vector) -> Vector {
        &self.output_map * x
    }

    /// Lifts a reduced state to the full grid.
    pub fn reconstruct(&self, x: &Vector) -> Vector {
        self.state_basis.u() * x
    }
}

struct ReducedSystem<'a> {
    rom: &'a ReducedModel,
    xi: Parameter,
    perturbation: Option<Vector>,
}

impl NonlinearSystem for ReducedSystem<'_> {
    fn residual(&self, x: &Vector) -> Result<Vector> {
        self.rom.residual_with(x, self.xi, self.perturbation.as_ref())
    }

    fn newton_direction(&self, x: &Vector, r: &Vector) -> Result<Vector> {
        let j = self.rom.jacobian(x, self.xi)?;
        j.lu()
            .solve(&(-r))
            .ok_or_else(|| Error::Singular("reduced Jacobian".into()))
    }
}

/// Reduced Newton solve from zero. With `noise`, one Gaussian vector is drawn
/// over the evaluated components and added to every nonlinear evaluation of
/// this solve.
pub fn solve_rom<R: Rng>(
    rom: &ReducedModel,
    xi: Parameter,
    cfg: &NewtonConfig,
    noise: Option<Noise<'_, R>>,
) -> Result<RomSolution> {
    check_parameter(xi)?;
    let perturbation = match noise {
        Some(Noise { sigma, rng }) if sigma > 0.0 => {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidArgument(format!("noise level {sigma}: {e}")))?;
            Some(Vector::from_fn(rom.evaluation_count(), |_, _| normal.sample(rng)))
        }
        Some(Noise { sigma, .. }) if sigma < 0.0 || !sigma.is_finite() => {
            return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {sigma}")))
        }
        _ => None,
    };
    let system = ReducedSystem { rom, xi, perturbation };
    let report = newton_armijo(&system, Vector::zeros(rom.dim()), cfg)?;
    Ok(RomSolution {
        outputs: rom.outputs(&report.solution),
        state: report.solution,
        iterations: report.iterations,
        residual_norm: report.residual_norm,
    })
}
