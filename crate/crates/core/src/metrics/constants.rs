//! Published constants of the tone-mapped image quality index.

/// Weight of structural fidelity in `Q = a·S^α + (1 − a)·N^β`.
pub const A: f64 = 0.8012;
pub const ALPHA: f64 = 0.3046;
pub const BETA: f64 = 0.7088;

/// Per-scale exponents of the multi-scale structural fidelity (finest first).
pub const SCALE_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Spatial frequency (cycles/degree) assumed at each scale, finest first.
pub const SCALE_FREQUENCIES: [f64; 5] = [16.0, 8.0, 4.0, 2.0, 1.0];

/// Stabilizers of the local structural similarity.
pub const C1: f64 = 0.01;
pub const C2: f64 = 10.0;

/// Gaussian window of the local statistics.
pub const WINDOW_SIZE: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;

/// Range the HDR luminance is stretched to before comparison.
pub const HDR_RANGE: f64 = 4_294_967_295.0;
/// Range of the LDR luminance.
pub const LDR_RANGE: f64 = 255.0;

/// Gaussian prior of mean brightness (8-bit scale).
pub const BRIGHTNESS_MEAN: f64 = 115.94;
pub const BRIGHTNESS_STD: f64 = 27.99;

/// Beta prior of mean local contrast, after dividing by [`CONTRAST_SCALE`].
pub const CONTRAST_BETA_A: f64 = 4.4;
pub const CONTRAST_BETA_B: f64 = 10.1;
pub const CONTRAST_SCALE: f64 = 64.29;

/// Block side used for the local contrast estimate.
pub const CONTRAST_BLOCK: usize = 11;

/// Contrast sensitivity at spatial frequency `f`.
pub fn csf(f: f64) -> f64 {
    100.0 * 2.6 * (0.0192 + 0.114 * f) * (-(0.114 * f).powf(1.1)).exp()
}

/// Luminance weights used when scoring RGB images.
pub const RGB_TO_Y: [f64; 3] = [0.2126, 0.7152, 0.0722];
