use crate::error::{Error, Result};
use crate::linalg::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_iters: usize,
    /// Absolute tolerance on `||R(x)||_2`.
    pub residual_tol: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            residual_tol: 1e-10,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            max_backtracks: 30,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "armijo_c must lie in (0, 1), got {}",
                self.armijo_c
            )));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "armijo_shrink must lie in (0, 1), got {}",
                self.armijo_shrink
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidArgument("residual_tol must be positive".into()));
        }
        Ok(())
    }
}

/// A square system `R(x) = 0` with a Jacobian solve.
pub trait NonlinearSystem {
    fn residual(&self, x: &Vector) -> Result<Vector>;

    /// Solves `J(x) dx = -r`.
    fn newton_direction(&self, x: &Vector, r: &Vector) -> Result<Vector>;
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub solution: Vector,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Newton's method with backtracking on the merit `||R||^2 / 2`.
///
/// A step `t` is accepted once `||R(x + t dx)||^2 <= (1 - 2 c t) ||R(x)||^2`.
/// Trial points whose residual cannot be evaluated (overflow) are treated as
/// failing the condition.
pub fn newton_armijo<S: NonlinearSystem + ?Sized>(
    system: &S,
    initial: Vector,
    cfg: &NewtonConfig,
) -> Result<NewtonReport> {
    cfg.validate()?;
    let mut x = initial;
    let mut r = system.residual(&x)?;
    let mut norm2 = r.norm_squared();
    for iteration in 0..=cfg.max_iters {
        if norm2.sqrt() <= cfg.residual_tol {
            return Ok(NewtonReport {
                solution: x,
                iterations: iteration,
                residual_norm: norm2.sqrt(),
            });
        }
        if iteration == cfg.max_iters {
            break;
        }
        let dx = system.newton_direction(&x, &r)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial = &x + &dx * t;
            if let Ok(rt) = system.residual(&trial) {
                let nt = rt.norm_squared();
                if nt <= (1.0 - 2.0 * cfg.armijo_c * t) * norm2 {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            t *= cfg.armijo_shrink;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                x = trial;
                r = rt;
                norm2 = nt;
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations: iteration + 1,
                    residual: norm2.sqrt(),
                })
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: norm2.sqrt(),
    })
}
