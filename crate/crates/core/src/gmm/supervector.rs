use super::{GmmModel, Scaling};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Concatenated component means of an adapted model, `K * D` values in
/// component order.
#[derive(Clone, Debug, PartialEq)]
pub struct Supervector<T> {
    pub values: Vec<T>,
    pub scaling: Scaling,
}

impl<T> Supervector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `plain`: `m_1 | m_2 | ... | m_K`.
/// `kl`: `sqrt(w_k) * v_k^(-1/2) * m_k` per component, with `w` and `v` from the UBM.
pub fn supervector<T: Real>(
    model: &GmmModel<T>,
    ubm: &GmmModel<T>,
    scaling: Scaling,
) -> Result<Supervector<T>> {
    if model.n_components() != ubm.n_components() || model.dim() != ubm.dim() {
        return Err(Error::ShapeMismatch(format!(
            "model {}x{} vs UBM {}x{}",
            model.n_components(),
            model.dim(),
            ubm.n_components(),
            ubm.dim()
        )));
    }
    let values = match scaling {
        Scaling::Plain => model.means().iter().copied().collect(),
        Scaling::Kl => model
            .means()
            .indexed_iter()
            .map(|((k, d), &m)| ubm.weights()[k].sqrt() * m / ubm.variances()[[k, d]].sqrt())
            .collect(),
    };
    Ok(Supervector { values, scaling })
}
