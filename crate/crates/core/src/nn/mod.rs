//! Minimal dense-tensor engine for the U-Nets: `C × H × W` tensors, 3×3 and
//! 1×1 same-padded convolutions lowered to GEMM, 2×2 max pooling and
//! nearest-neighbour upsampling, each with its backward pass.
//!
//! Everything is generic over [`Scalar`] so the training path runs in `f32`
//! while gradient checks run the identical code in `f64`.

mod ops;
mod scalar;

pub use ops::{
    col2im3, concat_channels, conv_backward, conv_forward, im2col3, maxpool2_backward, maxpool2_forward,
    split_channels, upsample2_backward, upsample2_forward, ConvShape, PoolIndex,
};
pub use scalar::Scalar;

/// Channel-major `c × h × w` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length");
        Tensor { c, h, w, data }
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }
}
