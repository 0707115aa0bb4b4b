use super::{Gradients, ModelParameters};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Running averages `E[g²]` and `E[Δx²]` for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAccumulators {
    pub sq_grad: Matrix,
    pub sq_delta: Matrix,
}

impl DenseAccumulators {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseAccumulators {
            sq_grad: Matrix::zeros(rows, cols),
            sq_delta: Matrix::zeros(rows, cols),
        }
    }

    fn like(m: &Matrix) -> Self {
        Self::zeros(m.rows(), m.cols())
    }

    fn check(&self, m: &Matrix, name: &str) -> Result<()> {
        if self.sq_grad.shape() != m.shape() || self.sq_delta.shape() != m.shape() {
            return Err(Error::ShapeMismatch(format!(
                "adadelta state for {name} is {:?}, parameters are {:?}",
                self.sq_grad.shape(),
                m.shape()
            )));
        }
        Ok(())
    }
}

/// Per-parameter Adadelta state. Embedding tables are updated lazily, so
/// rows that never receive a gradient keep their zero accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub words: DenseAccumulators,
    pub ctx_entities: DenseAccumulators,
    pub targets: DenseAccumulators,
    pub projection: Option<DenseAccumulators>,
}

impl AdadeltaState {
    pub fn new(params: &ModelParameters) -> Self {
        AdadeltaState {
            words: DenseAccumulators::like(&params.words),
            ctx_entities: DenseAccumulators::like(&params.ctx_entities),
            targets: DenseAccumulators::like(&params.targets),
            projection: params.projection.as_ref().map(DenseAccumulators::like),
        }
    }
}

#[inline]
fn update_slice(x: &mut [f64], sq_grad: &mut [f64], sq_delta: &mut [f64], g: &[f64], rho: f64, eps: f64) {
    for i in 0..x.len() {
        let gi = g[i];
        sq_grad[i] = rho * sq_grad[i] + (1.0 - rho) * gi * gi;
        let delta = -((sq_delta[i] + eps).sqrt() / (sq_grad[i] + eps).sqrt()) * gi;
        sq_delta[i] = rho * sq_delta[i] + (1.0 - rho) * delta * delta;
        x[i] += delta;
    }
}

fn update_rows(
    table: &mut Matrix,
    acc: &mut DenseAccumulators,
    rows: &super::SparseRows,
    rho: f64,
    eps: f64,
    name: &str,
) -> Result<()> {
    acc.check(table, name)?;
    for (id, g) in rows.iter() {
        let r = id as usize;
        if r >= table.rows() || g.len() != table.cols() {
            return Err(Error::ShapeMismatch(format!(
                "{name} gradient row {id} (width {}) does not fit {:?}",
                g.len(),
                table.shape()
            )));
        }
        update_slice(
            table.row_mut(r),
            acc.sq_grad.row_mut(r),
            acc.sq_delta.row_mut(r),
            g,
            rho,
            eps,
        );
    }
    Ok(())
}

/// One Adadelta step. Only rows present in `grads` are touched.
pub fn adadelta_update(
    params: &mut ModelParameters,
    state: &mut AdadeltaState,
    grads: &Gradients,
    rho: f64,
    eps: f64,
) -> Result<()> {
    update_rows(&mut params.words, &mut state.words, &grads.words, rho, eps, "words")?;
    update_rows(
        &mut params.ctx_entities,
        &mut state.ctx_entities,
        &grads.ctx_entities,
        rho,
        eps,
        "ctx_entities",
    )?;
    update_rows(&mut params.targets, &mut state.targets, &grads.targets, rho, eps, "targets")?;
    if let Some(g) = &grads.projection {
        let (w, acc) = match (&mut params.projection, &mut state.projection) {
            (Some(w), Some(acc)) => (w, acc),
            _ => return Err(Error::ShapeMismatch("projection gradient without a projection".into())),
        };
        acc.check(w, "projection")?;
        if g.shape() != w.shape() {
            return Err(Error::ShapeMismatch(format!(
                "projection gradient is {:?}, parameters are {:?}",
                g.shape(),
                w.shape()
            )));
        }
        update_slice(
            w.as_mut_slice(),
            acc.sq_grad.as_mut_slice(),
            acc.sq_delta.as_mut_slice(),
            g.as_slice(),
            rho,
            eps,
        );
    }
    Ok(())
}
