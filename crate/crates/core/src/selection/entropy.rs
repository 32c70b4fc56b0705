use std::collections::HashSet;

use super::{check_oversampling, PointSet};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::pod::Basis;

/// Entropies of the columns of `R1^{-1} R` from the pivoted QR of `u^T`.
#[derive(Debug, Clone)]
pub struct EntropyProfile {
    /// One entry per column, in pivot order.
    pub entropies: Vec<f64>,
    pub qr_pivots: Vec<usize>,
}

/// Shannon entropy (natural log) of `|column| / sum(|column|)`, with `0 ln 0 = 0`.
///
/// A zero column has entropy 0.
pub fn normalized_entropy<'a>(column: impl IntoIterator<Item = &'a f64> + Clone) -> f64 {
    let total: f64 = column.clone().into_iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    -column
        .into_iter()
        .map(|v| v.abs() / total)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

pub fn column_entropies(basis: &Basis) -> Result<EntropyProfile> {
    let n = basis.dim();
    let qr = linalg::pivoted_qr(&basis.u().transpose())?;
    let r1 = qr.r.view((0, 0), (n, n)).into_owned();
    if let Some(k) = (0..n).find(|&k| r1[(k, k)] == 0.0) {
        return Err(Error::Singular(format!(
            "leading triangular block of the pivoted QR is singular at {k}"
        )));
    }
    let r_tilde: Matrix = r1
        .solve_upper_triangular(&qr.r)
        .ok_or_else(|| Error::Singular("leading triangular block is singular".into()))?;
    let entropies = r_tilde
        .column_iter()
        .map(|c| normalized_entropy(c.iter()))
        .collect();
    Ok(EntropyProfile {
        entropies,
        qr_pivots: qr.pivots,
    })
}

/// QDEIM points, then the pivot-mapped columns of highest entropy.
pub fn odeim_c(basis: &Basis, m: usize) -> Result<PointSet> {
    check_oversampling(basis, m)?;
    let n = basis.dim();
    let profile = column_entropies(basis)?;
    let mut order: Vec<usize> = (0..profile.entropies.len()).collect();
    // stable sort keeps the smaller column first on ties
    order.sort_by(|&a, &b| profile.entropies[b].total_cmp(&profile.entropies[a]));
    let mut points: Vec<usize> = profile.qr_pivots[..n].to_vec();
    let mut taken: HashSet<usize> = points.iter().copied().collect();
    for col in order {
        if points.len() == m {
            break;
        }
        let p = profile.qr_pivots[col];
        if taken.insert(p) {
            points.push(p);
        }
    }
    PointSet::new(points, basis.full_dim())
}
