//! Hessian-based multiscale vesselness (tubularity) measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Single-channel map with values in `[0, 1]`, same size as the source image.
pub type TubularityMap = RasterImage;

/// Which ridges count as tubular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    #[default]
    BrightOnDark,
    DarkOnBright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubularityParams {
    /// Gaussian standard deviations in pixels.
    pub scales: Vec<f64>,
    /// Blobness sensitivity.
    pub beta: f64,
    /// Structureness sensitivity; `None` uses half the maximum Hessian norm
    /// at each scale.
    pub c_norm: Option<f64>,
    pub polarity: Polarity,
}

impl Default for TubularityParams {
    fn default() -> Self {
        Self {
            scales: vec![1.0, 2.0, 3.0, 4.0],
            beta: 0.5,
            c_norm: None,
            polarity: Polarity::BrightOnDark,
        }
    }
}

impl TubularityParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidParameter("tubularity scales must be non-empty".into()));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("tubularity scale must be > 0, got {s}")));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if let Some(c) = self.c_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("c_norm must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

/// Scale-normalized second derivatives of a Gaussian-smoothed image.
#[derive(Debug, Clone)]
pub struct Hessian {
    pub width: usize,
    pub height: usize,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

/// Sampled Gaussian and its first two derivatives on `[-r, r]`, `r = ceil(4σ)`.
///
/// Each kernel is normalized so that correlating it with `1`, `x` and `x²/2`
/// reproduces the corresponding derivative exactly; truncation then cannot
/// bias responses on locally polynomial images.
pub(crate) struct DerivativeKernels {
    pub radius: usize,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl DerivativeKernels {
    pub fn new(sigma: f64) -> Self {
        let radius = (4.0 * sigma).ceil().max(1.0) as usize;
        let s2 = sigma * sigma;
        let offsets: Vec<f64> = (-(radius as i64)..=radius as i64).map(|k| k as f64).collect();
        let g: Vec<f64> = offsets.iter().map(|k| (-k * k / (2.0 * s2)).exp()).collect();

        let g_sum: f64 = g.iter().sum();
        let d0: Vec<f64> = g.iter().map(|v| v / g_sum).collect();

        let raw1: Vec<f64> = offsets.iter().zip(&g).map(|(k, g)| k / s2 * g).collect();
        let m1: f64 = offsets.iter().zip(&raw1).map(|(k, v)| k * v).sum();
        let d1 = raw1.iter().map(|v| v / m1).collect();

        let raw2: Vec<f64> = offsets
            .iter()
            .zip(&g)
            .map(|(k, g)| (k * k / (s2 * s2) - 1.0 / s2) * g)
            .collect();
        let mean2 = raw2.iter().sum::<f64>() / raw2.len() as f64;
        let centered: Vec<f64> = raw2.iter().map(|v| v - mean2).collect();
        let m2: f64 = offsets.iter().zip(&centered).map(|(k, v)| k * k / 2.0 * v).sum();
        let d2 = centered.iter().map(|v| v / m2).collect();

        Self { radius, d0, d1, d2 }
    }
}

fn correlate_rows(src: &[f64], width: usize, height: usize, kernel: &[f64], radius: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    let r = radius as i64;
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        let dst = &mut out[y * width..(y + 1) * width];
        for (x, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, k) in kernel.iter().enumerate() {
                let sx = (x as i64 + i as i64 - r).clamp(0, width as i64 - 1) as usize;
                acc += row[sx] * k;
            }
            *d = acc;
        }
    }
    out
}

fn correlate_cols(src: &[f64], width: usize, height: usize, kernel: &[f64], radius: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    let r = radius as i64;
    for y in 0..height {
        let dst = &mut out[y * width..(y + 1) * width];
        for (i, k) in kernel.iter().enumerate() {
            let sy = (y as i64 + i as i64 - r).clamp(0, height as i64 - 1) as usize;
            let row = &src[sy * width..(sy + 1) * width];
            for (d, s) in dst.iter_mut().zip(row) {
                *d += s * k;
            }
        }
    }
    out
}

/// Second-order Gaussian derivative responses, scale-normalized by `σ²`,
/// with replicated borders.
pub fn gaussian_hessian(img: &RasterImage, sigma: f64) -> Result<Hessian> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if img.channels() != 1 {
        return Err(Error::InvalidParameter("gaussian_hessian needs a single-channel image".into()));
    }
    let (w, h) = (img.width(), img.height());
    let k = DerivativeKernels::new(sigma);
    let src = img.data();

    let rx0 = correlate_rows(src, w, h, &k.d0, k.radius);
    let rx1 = correlate_rows(src, w, h, &k.d1, k.radius);
    let rx2 = correlate_rows(src, w, h, &k.d2, k.radius);
    let norm = sigma * sigma;
    let scale = |v: Vec<f64>| v.into_iter().map(|x| x * norm).collect::<Vec<_>>();

    Ok(Hessian {
        width: w,
        height: h,
        xx: scale(correlate_cols(&rx2, w, h, &k.d0, k.radius)),
        xy: scale(correlate_cols(&rx1, w, h, &k.d1, k.radius)),
        yy: scale(correlate_cols(&rx0, w, h, &k.d2, k.radius)),
    })
}

/// Eigenvalues of `[[xx, xy], [xy, yy]]` ordered so that `|λ1| <= |λ2|`.
pub fn sorted_eigenvalues(xx: f64, xy: f64, yy: f64) -> (f64, f64) {
    let mean = 0.5 * (xx + yy);
    let half_diff = 0.5 * (xx - yy);
    let disc = half_diff.hypot(xy);
    let (a, b) = (mean - disc, mean + disc);
    if a.abs() <= b.abs() {
        (a, b)
    } else {
        (b, a)
    }
}

/// Vesselness response for one eigenvalue pair.
pub fn ridge_response(l1: f64, l2: f64, beta: f64, c: f64, polarity: Polarity) -> f64 {
    let wrong_sign = match polarity {
        Polarity::BrightOnDark => l2 >= 0.0,
        Polarity::DarkOnBright => l2 <= 0.0,
    };
    if wrong_sign {
        return 0.0;
    }
    let rb = l1 / l2;
    let s2 = l1 * l1 + l2 * l2;
    (-(rb * rb) / (2.0 * beta * beta)).exp() * (1.0 - (-s2 / (2.0 * c * c)).exp())
}

const FLAT_TOLERANCE: f64 = 1e-9;

fn single_scale(img: &RasterImage, sigma: f64, params: &TubularityParams) -> Result<Vec<f64>> {
    let hess = gaussian_hessian(img, sigma)?;
    let eig: Vec<(f64, f64)> = (0..hess.xx.len())
        .map(|i| sorted_eigenvalues(hess.xx[i], hess.xy[i], hess.yy[i]))
        .collect();
    let c = match params.c_norm {
        Some(c) => c,
        None => {
            let max_s = eig
                .iter()
                .map(|(a, b)| (a * a + b * b).sqrt())
                .fold(0.0, f64::max);
            // round-off on flat images must not be amplified into structure
            if max_s <= FLAT_TOLERANCE {
                return Ok(vec![0.0; eig.len()]);
            }
            0.5 * max_s
        }
    };
    Ok(eig
        .iter()
        .map(|&(l1, l2)| ridge_response(l1, l2, params.beta, c, params.polarity))
        .collect())
}

/// Per-pixel maximum of the single-scale responses, before rescaling.
pub fn vesselness_unscaled(img: &RasterImage, params: &TubularityParams) -> Result<RasterImage> {
    params.validate()?;
    if img.channels() != 1 {
        return Err(Error::InvalidParameter("vesselness needs a single-channel image".into()));
    }
    let per_scale: Vec<Vec<f64>> = params
        .scales
        .par_iter()
        .map(|&s| single_scale(img, s, params))
        .collect::<Result<_>>()?;
    let mut best = vec![0.0f64; img.width() * img.height()];
    for responses in &per_scale {
        for (b, r) in best.iter_mut().zip(responses) {
            *b = b.max(*r);
        }
    }
    RasterImage::from_vec(img.width(), img.height(), 1, best)
}

/// Multiscale vesselness rescaled so the image maximum is 1.
pub fn vesselness(img: &RasterImage, params: &TubularityParams) -> Result<TubularityMap> {
    let mut map = vesselness_unscaled(img, params)?;
    let max = map.max_value();
    if max > 0.0 {
        for v in map.data_mut() {
            *v /= max;
        }
    }
    map.clamp_unit();
    Ok(map)
}
