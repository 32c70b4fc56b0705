//! The parametrized toy function and the 2D diffusion-reaction model.

pub mod newton;
pub mod pde;
pub mod rom;
pub mod toy;

pub use newton::{newton_armijo, NewtonConfig, NewtonReport, NonlinearSystem};
pub use pde::{reaction, reaction_value, FullOrderModel, Parameter, PARAMETER_BOUND};
pub use rom::{
    attach_hyper_reduction, build_rom, project, solve_rom, HyperReduction, Noise, ReducedModel,
    RomSolution,
};
pub use toy::{toy_function, toy_value, ToyFunctionSpec};

use crate::error::Result;
use crate::parallel::par_map;
use crate::pod::SnapshotMatrix;

/// Full-model solutions and their nonlinear terms at each parameter.
#[derive(Debug, Clone)]
pub struct PdeSnapshots {
    pub parameters: Vec<Parameter>,
    pub states: SnapshotMatrix,
    pub nonlinear: SnapshotMatrix,
}

pub fn generate_snapshots(
    model: &FullOrderModel,
    parameters: &[Parameter],
    cfg: &NewtonConfig,
) -> Result<PdeSnapshots> {
    let solved = par_map(parameters, |&xi| -> Result<_> {
        let x = model.solve(xi, cfg)?.solution;
        let f = reaction_value(&x, xi)?;
        Ok((x, f))
    });
    let mut states = Vec::with_capacity(parameters.len());
    let mut nonlinear = Vec::with_capacity(parameters.len());
    for item in solved {
        let (x, f) = item?;
        states.push(x);
        nonlinear.push(f);
    }
    Ok(PdeSnapshots {
        parameters: parameters.to_vec(),
        states: SnapshotMatrix::from_columns(&states)?,
        nonlinear: SnapshotMatrix::from_columns(&nonlinear)?,
    })
}

/// `count x count` tensor grid over `[-bound, bound]^2`, first coordinate fastest.
pub fn parameter_grid(count: usize, bound: f64) -> Vec<Parameter> {
    let axis = toy::linspace(-bound, bound, count);
    let mut out = Vec::with_capacity(count * count);
    for b in axis.iter() {
        for a in axis.iter() {
            out.push([*a, *b]);
        }
    }
    out
}

/// Cell midpoints of a uniform `count x count` partition of `[-bound, bound]^2`.
pub fn midpoint_grid(count: usize, bound: f64) -> Vec<Parameter> {
    let h = 2.0 * bound / count as f64;
    let axis: Vec<f64> = (0..count).map(|k| -bound + (k as f64 + 0.5) * h).collect();
    let mut out = Vec::with_capacity(count * count);
    for b in &axis {
        for a in &axis {
            out.push([*a, *b]);
        }
    }
    out
}
