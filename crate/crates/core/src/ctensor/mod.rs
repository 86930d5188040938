//! Split-plane complex tensors and the complex-valued network operators.

mod activation;
mod conv;
pub(crate) mod gemm;
pub mod io;
mod linear;
mod norm;
mod pool;
mod tensor;

pub use activation::{complex_activation, Activation, LEAKY_SLOPE};
pub use conv::{complex_conv2d, complex_conv_transpose2d, ComplexConvWeights, ConvGeom};
pub use io::{read_cxt1, write_cxt1};
pub use linear::{complex_linear, ComplexLinearWeights};
pub use norm::{complex_group_norm, inv_sqrt_2x2, GroupNormParams, WhiteningMatrix};
pub use pool::complex_max_pool2d;
pub use tensor::ComplexTensor;

pub(crate) use activation::activation_backward;
pub(crate) use conv::{
    conv2d_backward, conv2d_forward, conv_transpose2d_backward, conv_transpose2d_forward,
};
pub(crate) use linear::{
    linear_backward_bias, linear_backward_input, linear_backward_weight, linear_forward,
};
pub(crate) use norm::{group_norm_backward, group_norm_forward, GroupNormCache};
pub(crate) use pool::max_pool_backward;
