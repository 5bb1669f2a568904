//! Saliency extraction from projected views.
//!
//! A view is reduced to a coarse grid by block averaging, its DCT sign
//! pattern is taken as an image signature, and the squared inverse transform
//! of that signature is the saliency map. The sign pattern is invariant to
//! positive rescaling of the input, which makes the maps comparable across
//! renderings.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::projection::{to_grayscale, ProjectionView};
use crate::Grid;

/// Block-averaged image at `1/scale` resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DownsampledImage {
    pub data: Grid,
    pub scale: usize,
}

/// Elementwise sign of the DCT spectrum; entries are -1, 0, or +1.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    pub data: Grid,
}

impl SignatureMatrix {
    /// Number of nonzero sign entries.
    pub fn support(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }
}

/// Nonnegative saliency map, same dimensions as the downsampled image.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub data: Grid,
    pub scale: usize,
}

/// Box-filter downsampling: each output pixel is the mean of its
/// `scale x scale` source block. Trailing rows/columns beyond the largest
/// multiple of `scale` are truncated.
pub fn downsample(img: &Grid, scale: usize) -> Result<DownsampledImage> {
    if scale == 0 {
        return Err(Error::InvalidParams("downsampling scale must be positive".into()));
    }
    let (rows, cols) = img.dim();
    if rows < scale || cols < scale {
        return Err(Error::ScaleTooLarge { rows, cols, scale });
    }
    let out_rows = rows / scale;
    let out_cols = cols / scale;
    let norm = (scale * scale) as f64;
    let data = Grid::from_shape_fn((out_rows, out_cols), |(i, j)| {
        let mut sum = 0.0;
        for di in 0..scale {
            for dj in 0..scale {
                sum += img[[i * scale + di, j * scale + dj]];
            }
        }
        sum / norm
    });
    Ok(DownsampledImage { data, scale })
}

/// Orthonormal DCT-II basis matrix of size `n x n`.
fn dct_basis(n: usize) -> Grid {
    let mut basis = Array2::zeros((n, n));
    if n == 0 {
        return basis;
    }
    let dc = (1.0 / n as f64).sqrt();
    let ac = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let amp = if k == 0 { dc } else { ac };
        for j in 0..n {
            let angle = std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64;
            basis[[k, j]] = amp * angle.cos();
        }
    }
    basis
}

/// Orthonormal 2D DCT-II, applied separably to rows then columns.
pub fn dct2(x: &Grid) -> Grid {
    let (m, n) = x.dim();
    let row_basis = dct_basis(m);
    let col_basis = dct_basis(n);
    row_basis.dot(x).dot(&col_basis.t())
}

/// Exact inverse of [`dct2`].
pub fn idct2(x: &Grid) -> Grid {
    let (m, n) = x.dim();
    let row_basis = dct_basis(m);
    let col_basis = dct_basis(n);
    row_basis.t().dot(x).dot(&col_basis)
}

/// Relative magnitude below which a DCT coefficient counts as zero.
///
/// The transform is evaluated in floating point, so coefficients that are
/// mathematically zero come back as rounding residue around 1e-16 of the
/// spectrum peak; their sign is noise, not signal.
const SIGN_ZERO_REL_TOL: f64 = 1e-10;

/// Elementwise sign of the DCT spectrum of a downsampled image.
pub fn signature(d: &DownsampledImage) -> SignatureMatrix {
    let spectrum = dct2(&d.data);
    let max_abs = spectrum.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = SIGN_ZERO_REL_TOL * max_abs;
    let data = spectrum.mapv(|v| {
        if v > tol {
            1.0
        } else if v < -tol {
            -1.0
        } else {
            0.0
        }
    });
    SignatureMatrix { data }
}

/// Saliency map: squared inverse DCT of the image signature.
pub fn saliency_map(d: &DownsampledImage) -> SaliencyMap {
    let sig = signature(d);
    let recon = idct2(&sig.data);
    SaliencyMap {
        data: &recon * &recon,
        scale: d.scale,
    }
}

/// Full per-view pipeline: grayscale, block downsample, saliency map.
pub fn extract_view_saliency(view: &ProjectionView, scale: usize) -> Result<SaliencyMap> {
    let gray = to_grayscale(view);
    let down = downsample(&gray, scale)?;
    Ok(saliency_map(&down))
}
