//! Denoising and contrast pre-processing.
//!
//! All filters work on `f64` copies of the samples and round back to the
//! input bit depth once, at the end.

mod contrast;
mod diffusion;
pub(crate) mod gaussian;
mod nlm;
mod smooth;

pub use contrast::contrast_stretch;
pub use diffusion::{
    anisotropic_diffusion, anisotropic_diffusion_field, anisotropic_diffusion_monitored,
    AdParams, STEP_WEIGHT,
};
pub use gaussian::gaussian_blur_3d;
pub use nlm::{
    estimate_noise_sigma, nlm_denoise_field, nlm_filter, nlm_filter_monitored, NlmParams,
};
pub use smooth::{smooth, SmoothMethod};
