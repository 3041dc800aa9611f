use super::tensor::{Scalar, Tensor};

/// A fixed, ordered collection of parameter tensors.
///
/// Gradient and optimizer-moment containers are values of the same type,
/// so `zeros_like` doubles as the gradient constructor.
pub trait Parameters<F: Scalar> {
    fn named_params(&self) -> Vec<(String, &Tensor<F>)>;

    fn params_mut(&mut self) -> Vec<&mut Tensor<F>>;

    fn zeros_like(&self) -> Self
    where
        Self: Sized;

    /// `(param index, row)` pairs that the optimizer never updates.
    fn frozen_rows(&self) -> Vec<(usize, usize)> {
        Vec::new()
    }

    fn params(&self) -> Vec<&Tensor<F>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|t| t.is_finite())
    }

    /// `self += other`, tensor by tensor.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.params();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            super::linalg::add_assign(dst.data_mut(), s.data());
        }
    }
}
