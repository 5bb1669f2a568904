//! The receiver-side quality computation.
//!
//! Per view: structural similarity between the jointly normalized saliency
//! maps, raised to a content weight derived from Sobel spatial variation.
//! The pooled similarity is multiplied by the mean histogram correlation to
//! give the final score Q.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::payload::ReferencePayload;
use crate::pointcloud::PointCloud;
use crate::projection::{render_views, to_grayscale, Axis, RenderParams};
use crate::saliency::{downsample, saliency_map, SaliencyMap};
use crate::Grid;

/// Lower clamp applied to the per-view similarity before exponentiation;
/// real powers of non-positive bases are undefined.
pub const SSIM_CLAMP_EPS: f64 = 1e-6;

/// Sliding-window parameters for the structural similarity computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsimParams {
    pub window: usize,
    pub window_sigma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        // Canonical constants for unit dynamic range: (0.01*L)^2, (0.03*L)^2.
        Self {
            window: 11,
            window_sigma: 1.5,
            c1: 1e-4,
            c2: 9e-4,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "SSIM window {} must be odd and at least 3",
                self.window
            )));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::InvalidParams("SSIM constants must be positive".into()));
        }
        Ok(())
    }
}

/// Knobs for [`score`]; the two booleans mirror the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    pub use_weighting: bool,
    pub use_histogram: bool,
    pub bins: usize,
    pub ssim: SsimParams,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            use_weighting: true,
            use_histogram: true,
            bins: 64,
            ssim: SsimParams::default(),
        }
    }
}

/// Per-view breakdown of the score.
#[derive(Debug, Clone, Serialize)]
pub struct ViewScore {
    pub axis: Axis,
    /// Mean local structural similarity of the normalized saliency maps.
    #[serde(rename = "S")]
    pub s: f64,
    /// Content weight: |std(Sobel(distorted)) - std(Sobel(reference))|.
    pub w: f64,
    /// Contribution to the pooled similarity; `clamp(S)^w`, or raw S when
    /// weighting is disabled.
    pub weighted: f64,
    /// Pearson correlation of the two saliency histograms.
    pub hist_corr: f64,
}

/// Parameters echoed into the report for reproducibility.
#[derive(Debug, Clone, Serialize)]
pub struct ReportParams {
    pub render: RenderParams,
    pub scale: u16,
    pub bins: usize,
}

/// Full scoring output: Q plus every per-view intermediate.
#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "S_w")]
    pub s_w: f64,
    #[serde(rename = "H_c")]
    pub h_c: f64,
    pub views: Vec<ViewScore>,
    pub flags: BTreeSet<String>,
    pub params: ReportParams,
}

/// Scales both maps by their joint maximum so the SSIM constants see a known
/// dynamic range. Returns true when the joint maximum was zero.
pub fn joint_normalize(reference: &SaliencyMap, distorted: &SaliencyMap) -> Result<(Grid, Grid, bool)> {
    let (rr, rc) = reference.data.dim();
    let (dr, dc) = distorted.data.dim();
    if (rr, rc) != (dr, dc) {
        return Err(Error::DimensionMismatch(rr, rc, dr, dc));
    }
    let joint_max = reference
        .data
        .iter()
        .chain(distorted.data.iter())
        .fold(0.0f64, |acc, v| acc.max(*v));
    if joint_max == 0.0 {
        return Ok((Grid::zeros((rr, rc)), Grid::zeros((rr, rc)), true));
    }
    Ok((
        reference.data.mapv(|v| v / joint_max),
        distorted.data.mapv(|v| v / joint_max),
        false,
    ))
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let center = (window as f64 - 1.0) / 2.0;
    let mut kernel: Vec<f64> = (0..window)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

/// Symmetric reflection index (the edge sample is repeated once).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let i = if i < 0 { -i - 1 } else { i };
    let i = if i >= n { 2 * n - 1 - i } else { i };
    i as usize
}

/// Separable windowed weighted mean with symmetric-reflection borders.
fn windowed_mean(x: &Grid, kernel: &[f64]) -> Grid {
    let (rows, cols) = x.dim();
    let c = (kernel.len() / 2) as i64;

    let mut tmp = Grid::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * x[[i, reflect(j as i64 + t as i64 - c, cols)]];
            }
            tmp[[i, j]] = acc;
        }
    }
    let mut out = Grid::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for (t, k) in kernel.iter().enumerate() {
                acc += k * tmp[[reflect(i as i64 + t as i64 - c, rows), j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Mean local structural similarity between two equal-size grids in `[0,1]`.
pub fn ssim_scalar(a: &Grid, b: &Grid, params: &SsimParams) -> Result<f64> {
    params.validate()?;
    let (rows, cols) = a.dim();
    let (br, bc) = b.dim();
    if (rows, cols) != (br, bc) {
        return Err(Error::DimensionMismatch(rows, cols, br, bc));
    }
    if rows < params.window || cols < params.window {
        return Err(Error::MapSmallerThanWindow {
            rows,
            cols,
            window: params.window,
        });
    }

    let kernel = gaussian_kernel(params.window, params.window_sigma);
    let mu_a = windowed_mean(a, &kernel);
    let mu_b = windowed_mean(b, &kernel);
    let e_aa = windowed_mean(&(a * a), &kernel);
    let e_bb = windowed_mean(&(b * b), &kernel);
    let e_ab = windowed_mean(&(a * b), &kernel);

    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let (ma, mb) = (mu_a[[i, j]], mu_b[[i, j]]);
            let var_a = e_aa[[i, j]] - ma * ma;
            let var_b = e_bb[[i, j]] - mb * mb;
            let cov = e_ab[[i, j]] - ma * mb;
            let num = (2.0 * ma * mb + params.c1) * (2.0 * cov + params.c2);
            let den = (ma * ma + mb * mb + params.c1) * (var_a + var_b + params.c2);
            total += num / den;
        }
    }
    Ok(total / (rows * cols) as f64)
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Population standard deviation of the Sobel gradient magnitude.
pub fn sobel_spatial_std(gray: &Grid) -> Result<f64> {
    let (rows, cols) = gray.dim();
    if rows < 3 || cols < 3 {
        return Err(Error::ImageTooSmall);
    }
    let mut magnitude = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (di, row) in (-1i64..=1).zip(0usize..) {
                for (dj, col) in (-1i64..=1).zip(0usize..) {
                    let v = gray[[reflect(i as i64 + di, rows), reflect(j as i64 + dj, cols)]];
                    gx += SOBEL_X[row][col] * v;
                    gy += SOBEL_Y[row][col] * v;
                }
            }
            magnitude.push((gx * gx + gy * gy).sqrt());
        }
    }
    let n = magnitude.len() as f64;
    let mean = magnitude.iter().sum::<f64>() / n;
    let var = magnitude.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Absolute spatial-variation difference between a stored reference scalar
/// and a distorted grayscale view.
pub fn content_weight(sobel_std_ref: f64, gray_dist: &Grid) -> Result<f64> {
    Ok((sobel_spatial_std(gray_dist)? - sobel_std_ref).abs())
}

/// Uniform-bin histogram over `[0, 1]`; the last bin is right-closed.
pub fn histogram(map: &Grid, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for v in map.iter() {
        let idx = ((v * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
}

/// Sample Pearson correlation. For zero-variance input: 1 when the vectors
/// are elementwise equal, 0 otherwise; the second return marks that case.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<(f64, bool)> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    let n = u.len() as f64;
    let mean_u = u.iter().sum::<f64>() / n;
    let mean_v = v.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_u = 0.0;
    let mut var_v = 0.0;
    for (a, b) in u.iter().zip(v.iter()) {
        let (du, dv) = (a - mean_u, b - mean_v);
        cov += du * dv;
        var_u += du * du;
        var_v += dv * dv;
    }
    if var_u == 0.0 || var_v == 0.0 {
        let equal = u.iter().zip(v.iter()).all(|(a, b)| a == b);
        return Ok((if equal { 1.0 } else { 0.0 }, true));
    }
    Ok((cov / (var_u.sqrt() * var_v.sqrt()), false))
}

/// Contribution of one view to the pooled similarity.
fn weighted_similarity(s: f64, w: f64) -> f64 {
    s.clamp(SSIM_CLAMP_EPS, 1.0).powf(w)
}

struct ViewOutcome {
    score: ViewScore,
    clamped: bool,
    degenerate_saliency: bool,
    degenerate_histogram: bool,
}

/// Scores a distorted cloud against a reference payload.
pub fn score(
    payload: &ReferencePayload,
    distorted: &PointCloud,
    opts: &ScoreOptions,
) -> Result<QualityReport> {
    if opts.bins < 2 {
        return Err(Error::InvalidParams("histogram needs at least 2 bins".into()));
    }
    let set = render_views(distorted, &payload.render_params)?;
    let scale = payload.scale as usize;

    let outcomes: Vec<ViewOutcome> = Axis::ALL
        .par_iter()
        .map(|axis| -> Result<ViewOutcome> {
            let view = set.view(*axis);
            let record = payload.view(*axis);
            let gray = to_grayscale(view);
            let dist_saliency = saliency_map(&downsample(&gray, scale)?);

            let (norm_ref, norm_dist, degenerate_saliency) =
                joint_normalize(&record.saliency, &dist_saliency)?;
            let s = ssim_scalar(&norm_ref, &norm_dist, &opts.ssim)?;

            let (w, weighted, clamped) = if opts.use_weighting {
                let w = content_weight(record.sobel_std, &gray)?;
                (w, weighted_similarity(s, w), s < SSIM_CLAMP_EPS)
            } else {
                (0.0, s, false)
            };

            let hist_ref: Vec<f64> = histogram(&norm_ref, opts.bins)
                .into_iter()
                .map(|c| c as f64)
                .collect();
            let hist_dist: Vec<f64> = histogram(&norm_dist, opts.bins)
                .into_iter()
                .map(|c| c as f64)
                .collect();
            let (hist_corr, degenerate_histogram) = pearson(&hist_ref, &hist_dist)?;

            Ok(ViewOutcome {
                score: ViewScore {
                    axis: *axis,
                    s,
                    w,
                    weighted,
                    hist_corr,
                },
                clamped,
                degenerate_saliency,
                degenerate_histogram,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let s_w = outcomes.iter().map(|o| o.score.weighted).sum::<f64>() / n;
    let h_c = if opts.use_histogram {
        outcomes.iter().map(|o| o.score.hist_corr).sum::<f64>() / n
    } else {
        1.0
    };
    let q = s_w * h_c;

    let mut flags = BTreeSet::new();
    let clamp_count = outcomes.iter().filter(|o| o.clamped).count();
    if clamp_count > 0 {
        flags.insert(format!("ssim-clamped:{clamp_count}"));
    }
    if outcomes.iter().any(|o| o.degenerate_saliency) {
        flags.insert("degenerate-saliency".to_string());
    }
    if outcomes.iter().any(|o| o.degenerate_histogram) {
        flags.insert("degenerate-histogram".to_string());
    }
    if !opts.use_weighting {
        flags.insert("no-weighting".to_string());
    }
    if !opts.use_histogram {
        flags.insert("no-histogram".to_string());
    }
    if distorted.colorless() {
        flags.insert("colorless-distorted".to_string());
    }

    Ok(QualityReport {
        q,
        s_w,
        h_c,
        views: outcomes.into_iter().map(|o| o.score).collect(),
        flags,
        params: ReportParams {
            render: payload.render_params,
            scale: payload.scale,
            bins: opts.bins,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rows: usize, cols: usize, seed: u64) -> Grid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_shape_fn((rows, cols), |_| rng.gen::<f64>())
    }

    fn map(data: Grid) -> SaliencyMap {
        SaliencyMap { data, scale: 16 }
    }

    /// Direct per-pixel windowed evaluation with an explicit 2D Gaussian
    /// window; independent of the separable implementation.
    fn ssim_oracle(a: &Grid, b: &Grid, p: &SsimParams) -> f64 {
        let k1 = gaussian_kernel(p.window, p.window_sigma);
        let c = (p.window / 2) as i64;
        let (rows, cols) = a.dim();
        let mut total = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let (mut ma, mut mb, mut eaa, mut ebb, mut eab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (t, kt) in k1.iter().enumerate() {
                    for (u, ku) in k1.iter().enumerate() {
                        let wgt = kt * ku;
                        let ri = reflect(i as i64 + t as i64 - c, rows);
                        let cj = reflect(j as i64 + u as i64 - c, cols);
                        let (av, bv) = (a[[ri, cj]], b[[ri, cj]]);
                        ma += wgt * av;
                        mb += wgt * bv;
                        eaa += wgt * av * av;
                        ebb += wgt * bv * bv;
                        eab += wgt * av * bv;
                    }
                }
                let (va, vb, cab) = (eaa - ma * ma, ebb - mb * mb, eab - ma * mb);
                total += ((2.0 * ma * mb + p.c1) * (2.0 * cab + p.c2))
                    / ((ma * ma + mb * mb + p.c1) * (va + vb + p.c2));
            }
        }
        total / (rows * cols) as f64
    }

    /// Hand-expanded 3x3 taps, written tap by tap rather than via kernel
    /// tables.
    fn sobel_std_oracle(gray: &Grid) -> f64 {
        let (rows, cols) = gray.dim();
        let at = |i: i64, j: i64| gray[[reflect(i, rows), reflect(j, cols)]];
        let mut mags = Vec::new();
        for i in 0..rows as i64 {
            for j in 0..cols as i64 {
                let gx = -at(i - 1, j - 1) + at(i - 1, j + 1) - 2.0 * at(i, j - 1)
                    + 2.0 * at(i, j + 1)
                    - at(i + 1, j - 1)
                    + at(i + 1, j + 1);
                let gy = -at(i - 1, j - 1) - 2.0 * at(i - 1, j) - at(i - 1, j + 1)
                    + at(i + 1, j - 1)
                    + 2.0 * at(i + 1, j)
                    + at(i + 1, j + 1);
                mags.push((gx * gx + gy * gy).sqrt());
            }
        }
        let n = mags.len() as f64;
        let mean = mags.iter().sum::<f64>() / n;
        (mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n).sqrt()
    }

    /// Raw expectation form of the correlation.
    fn pearson_oracle(u: &[f64], v: &[f64]) -> f64 {
        let n = u.len() as f64;
        let e = |xs: &[f64]| xs.iter().sum::<f64>() / n;
        let euv = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / n;
        let eu2 = u.iter().map(|a| a * a).sum::<f64>() / n;
        let ev2 = v.iter().map(|a| a * a).sum::<f64>() / n;
        (euv - e(u) * e(v)) / ((eu2 - e(u) * e(u)).sqrt() * (ev2 - e(v) * e(v)).sqrt())
    }

    #[test]
    fn joint_normalize_scales_by_joint_max() {
        let a = map(Grid::from_shape_vec((1, 2), vec![4.0, 1.0]).unwrap());
        let b = map(Grid::from_shape_vec((1, 2), vec![2.0, 0.5]).unwrap());
        let (na, nb, degenerate) = joint_normalize(&a, &b).unwrap();
        assert!(!degenerate);
        assert_eq!(na, Grid::from_shape_vec((1, 2), vec![1.0, 0.25]).unwrap());
        assert_eq!(nb, Grid::from_shape_vec((1, 2), vec![0.5, 0.125]).unwrap());
    }

    #[test]
    fn joint_normalize_identical_and_degenerate() {
        let a = map(random_grid(4, 4, 1));
        let (na, nb, _) = joint_normalize(&a, &a.clone()).unwrap();
        assert_eq!(na, nb);

        let z = map(Grid::zeros((4, 4)));
        let (na, nb, degenerate) = joint_normalize(&z, &z.clone()).unwrap();
        assert!(degenerate);
        assert!(na.iter().all(|v| *v == 0.0) && nb.iter().all(|v| *v == 0.0));

        let other = map(Grid::zeros((3, 3)));
        assert!(matches!(
            joint_normalize(&z, &other),
            Err(Error::DimensionMismatch(4, 4, 3, 3))
        ));
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        let a = random_grid(16, 16, 2);
        assert_eq!(ssim_scalar(&a, &a, &SsimParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn ssim_constant_pair_closed_form() {
        let p = SsimParams::default();
        let a = Grid::from_elem((16, 16), 0.3);
        let b = Grid::from_elem((16, 16), 0.7);
        let expect = (2.0 * 0.3 * 0.7 + p.c1) / (0.3f64.powi(2) + 0.7f64.powi(2) + p.c1);
        let got = ssim_scalar(&a, &b, &p).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-9);
        // Frozen from the closed form above.
        assert_abs_diff_eq!(got, 0.724185, epsilon = 1e-6);
    }

    #[test]
    fn ssim_matches_windowed_oracle() {
        let p = SsimParams::default();
        for seed in 0..3 {
            let a = random_grid(32, 32, 100 + seed);
            let b = random_grid(32, 32, 200 + seed);
            let got = ssim_scalar(&a, &b, &p).unwrap();
            let expect = ssim_oracle(&a, &b, &p);
            assert_abs_diff_eq!(got, expect, epsilon = 1e-9);
            assert!((-1.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn ssim_rejects_small_maps() {
        let a = Grid::zeros((8, 8));
        assert!(matches!(
            ssim_scalar(&a, &a.clone(), &SsimParams::default()),
            Err(Error::MapSmallerThanWindow { window: 11, .. })
        ));
    }

    #[test]
    fn sobel_std_of_constant_is_zero() {
        let g = Grid::from_elem((8, 8), 0.4);
        assert_eq!(sobel_spatial_std(&g).unwrap(), 0.0);
    }

    #[test]
    fn sobel_std_matches_oracle_on_step_edge() {
        let g = Grid::from_shape_fn((16, 16), |(_, j)| if j < 8 { 0.2 } else { 0.8 });
        let got = sobel_spatial_std(&g).unwrap();
        assert!(got > 0.0);
        assert_abs_diff_eq!(got, sobel_std_oracle(&g), epsilon = 1e-12);
    }

    #[test]
    fn sobel_std_matches_oracle_on_random_grids() {
        for seed in 0..5 {
            let g = random_grid(32, 32, 300 + seed);
            assert_abs_diff_eq!(
                sobel_spatial_std(&g).unwrap(),
                sobel_std_oracle(&g),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn sobel_std_is_shift_invariant() {
        let g = random_grid(16, 16, 8);
        let shifted = g.mapv(|v| v + 0.25);
        assert_abs_diff_eq!(
            sobel_spatial_std(&g).unwrap(),
            sobel_spatial_std(&shifted).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sobel_rejects_tiny_images() {
        assert!(matches!(
            sobel_spatial_std(&Grid::zeros((2, 5))),
            Err(Error::ImageTooSmall)
        ));
    }

    #[test]
    fn content_weight_examples() {
        let g = random_grid(16, 16, 9);
        let std = sobel_spatial_std(&g).unwrap();
        assert_eq!(content_weight(std, &g).unwrap(), 0.0);

        let other = random_grid(16, 16, 10);
        let other_std = sobel_spatial_std(&other).unwrap();
        let w1 = content_weight(std, &other).unwrap();
        let w2 = content_weight(other_std, &g).unwrap();
        assert_abs_diff_eq!(w1, (other_std - std).abs(), epsilon = 0.0);
        assert_abs_diff_eq!(w1, w2, epsilon = 0.0);
    }

    #[test]
    fn histogram_boundaries() {
        let zeros = Grid::zeros((8, 8));
        let counts = histogram(&zeros, 64);
        assert_eq!(counts[0], 64);
        assert!(counts[1..].iter().all(|c| *c == 0));

        let ones = Grid::from_elem((4, 4), 1.0);
        let counts = histogram(&ones, 64);
        assert_eq!(counts[63], 16);
        assert_eq!(counts.iter().sum::<u64>(), 16);
    }

    #[test]
    fn histogram_matches_binning_oracle() {
        let g = random_grid(32, 32, 4);
        let bins = 64;
        let counts = histogram(&g, bins);
        let mut expect = vec![0u64; bins];
        for v in g.iter() {
            let mut placed = false;
            for k in 0..bins {
                let lo = k as f64 / bins as f64;
                let hi = (k + 1) as f64 / bins as f64;
                let inside = if k + 1 == bins {
                    *v >= lo && *v <= 1.0
                } else {
                    *v >= lo && *v < hi
                };
                if inside {
                    expect[k] += 1;
                    placed = true;
                    break;
                }
            }
            assert!(placed);
        }
        assert_eq!(counts, expect);
        assert_eq!(counts.iter().sum::<u64>(), 1024);
    }

    #[test]
    fn pearson_examples() {
        let u = [1.0, 2.0, 3.0, 4.0];
        let (r, d) = pearson(&u, &u).unwrap();
        assert!(!d);
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);

        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let (r, _) = pearson(&u, &neg).unwrap();
        assert_abs_diff_eq!(r, -1.0, epsilon = 1e-12);

        let v = [2.0, 4.0, 6.0, 9.0];
        let (r, _) = pearson(&u, &v).unwrap();
        assert_abs_diff_eq!(r, pearson_oracle(&u, &v), epsilon = 1e-12);
    }

    #[test]
    fn pearson_degenerate_rule() {
        let c = [5.0, 5.0, 5.0];
        let (r, d) = pearson(&c, &c).unwrap();
        assert_eq!((r, d), (1.0, true));
        let (r, d) = pearson(&c, &[5.0, 5.0, 6.0]).unwrap();
        assert_eq!((r, d), (0.0, true));
        assert!(matches!(
            pearson(&c, &[1.0]),
            Err(Error::LengthMismatch(3, 1))
        ));
    }

    #[test]
    fn weighted_similarity_monotone_in_weight() {
        let s = 0.9;
        let sweep: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|w| weighted_similarity(s, *w))
            .collect();
        assert_eq!(sweep[0], 1.0);
        for pair in sweep.windows(2) {
            assert!(pair[1] < pair[0], "{pair:?} not strictly decreasing");
        }
    }

    fn test_cloud(n: usize, seed: u64) -> PointCloud {
        use crate::pointcloud::Point;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                Point::new(
                    rng.gen::<f64>(),
                    rng.gen::<f64>() * 2.0,
                    rng.gen::<f64>(),
                    rng.gen(),
                    rng.gen(),
                    rng.gen(),
                )
            })
            .collect();
        PointCloud::from_points(points).unwrap()
    }

    #[test]
    fn self_comparison_scores_one() {
        use crate::payload::extract_reference;
        let pc = test_cloud(2000, 77);
        let params = RenderParams {
            resolution: 256,
            ..RenderParams::default()
        };
        let payload = extract_reference(&pc, &params, 16).unwrap();
        let report = score(&payload, &pc, &ScoreOptions::default()).unwrap();

        assert_abs_diff_eq!(report.q, 1.0, epsilon = 1e-9);
        assert_eq!(report.s_w, 1.0);
        for view in &report.views {
            assert_eq!(view.s, 1.0);
            assert_eq!(view.w, 0.0);
            assert_eq!(view.weighted, 1.0);
        }
        // The clamp never fires on the identity pair.
        assert!(!report.flags.iter().any(|f| f.starts_with("ssim-clamped")));
        assert_eq!(report.q, report.s_w * report.h_c);
    }

    #[test]
    fn scoring_is_deterministic() {
        use crate::payload::extract_reference;
        let reference = test_cloud(1500, 78);
        let distorted = test_cloud(1500, 79);
        let params = RenderParams {
            resolution: 256,
            ..RenderParams::default()
        };
        let payload = extract_reference(&reference, &params, 16).unwrap();
        let a = score(&payload, &distorted, &ScoreOptions::default()).unwrap();
        let b = score(&payload, &distorted, &ScoreOptions::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn double_ablation_reduces_to_mean_similarity() {
        use crate::payload::extract_reference;
        let reference = test_cloud(1500, 80);
        let distorted = test_cloud(1500, 81);
        let params = RenderParams {
            resolution: 256,
            ..RenderParams::default()
        };
        let payload = extract_reference(&reference, &params, 16).unwrap();
        let opts = ScoreOptions {
            use_weighting: false,
            use_histogram: false,
            ..ScoreOptions::default()
        };
        let report = score(&payload, &distorted, &opts).unwrap();
        let mean_s = report.views.iter().map(|v| v.s).sum::<f64>() / 6.0;
        assert_abs_diff_eq!(report.q, mean_s, epsilon = 1e-15);
        assert_eq!(report.h_c, 1.0);
        assert!(report.flags.contains("no-weighting"));
        assert!(report.flags.contains("no-histogram"));
        assert!(report.views.iter().all(|v| v.w == 0.0));
    }
}
