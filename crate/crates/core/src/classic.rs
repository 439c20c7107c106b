//! Classical derivative-based edge detectors: first-order gradient
//! operators (Roberts, Sobel, Scharr), Laplacian zero crossings, and Canny.
//!
//! All functions work on single-channel images with values in `[0, 1]` and
//! are pure; callers may fan them out across images freely.

#[derive(Debug, thiserror::Error)]
pub enum ClassicError {
    #[error("unknown operator {0:?}; valid: sobel, scharr, roberts")]
    UnknownOperator(String),
    #[error("invalid thresholds: low {low} must be < high {high}, both in [0,1]")]
    BadThresholds { low: f64, high: f64 },
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("image {h}x{w} too small for a 3x3 operator")]
    TooSmall { h: usize, w: usize },
}

/// Grayscale image, `values[row * width + col]` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
}

impl GrayImage {
    pub fn new(h: usize, w: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), h * w);
        GrayImage { h, w, values }
    }

    pub fn constant(h: usize, w: usize, v: f64) -> Self {
        Self::new(h, w, vec![v; h * w])
    }

    fn at(&self, i: isize, j: isize) -> f64 {
        // zero padding
        if i < 0 || j < 0 || i >= self.h as isize || j >= self.w as isize {
            0.0
        } else {
            self.values[i as usize * self.w + j as usize]
        }
    }
}

/// Binary edge mask with the same layout as `GrayImage`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<bool>,
}

impl BinaryMap {
    pub fn new(h: usize, w: usize, values: Vec<bool>) -> Self {
        assert_eq!(values.len(), h * w);
        BinaryMap { h, w, values }
    }

    pub fn empty(h: usize, w: usize) -> Self {
        Self::new(h, w, vec![false; h * w])
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientOperator {
    Sobel,
    Scharr,
    Roberts,
}

impl std::str::FromStr for GradientOperator {
    type Err = ClassicError;

    fn from_str(s: &str) -> Result<Self, ClassicError> {
        match s {
            "sobel" => Ok(GradientOperator::Sobel),
            "scharr" => Ok(GradientOperator::Scharr),
            "roberts" => Ok(GradientOperator::Roberts),
            other => Err(ClassicError::UnknownOperator(other.to_string())),
        }
    }
}

fn correlate3(img: &GrayImage, kernel: &[f64; 9]) -> Vec<f64> {
    let mut out = vec![0.0; img.h * img.w];
    for i in 0..img.h as isize {
        for j in 0..img.w as isize {
            let mut acc = 0.0;
            for ki in -1..=1 {
                for kj in -1..=1 {
                    acc += kernel[((ki + 1) * 3 + kj + 1) as usize] * img.at(i + ki, j + kj);
                }
            }
            out[i as usize * img.w + j as usize] = acc;
        }
    }
    out
}

fn raw_gradients(img: &GrayImage, operator: GradientOperator) -> (Vec<f64>, Vec<f64>) {
    match operator {
        GradientOperator::Sobel => (
            correlate3(img, &[-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0]),
            correlate3(img, &[-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0]),
        ),
        GradientOperator::Scharr => (
            correlate3(img, &[-3.0, 0.0, 3.0, -10.0, 0.0, 10.0, -3.0, 0.0, 3.0]),
            correlate3(img, &[-3.0, -10.0, -3.0, 0.0, 0.0, 0.0, 3.0, 10.0, 3.0]),
        ),
        GradientOperator::Roberts => {
            // 2x2 diagonal differences, anchored at the top-left pixel.
            let mut gx = vec![0.0; img.h * img.w];
            let mut gy = vec![0.0; img.h * img.w];
            for i in 0..img.h as isize {
                for j in 0..img.w as isize {
                    gx[i as usize * img.w + j as usize] = img.at(i, j) - img.at(i + 1, j + 1);
                    gy[i as usize * img.w + j as usize] = img.at(i, j + 1) - img.at(i + 1, j);
                }
            }
            (gx, gy)
        }
    }
}

/// `sqrt(Gx^2 + Gy^2)` with zero padding, min-max normalized to `[0, 1]`
/// per image so it plugs into the same threshold sweep as network outputs.
pub fn gradient_magnitude(img: &GrayImage, operator: GradientOperator) -> Result<GrayImage, ClassicError> {
    if img.h < 3 || img.w < 3 {
        return Err(ClassicError::TooSmall { h: img.h, w: img.w });
    }
    let (gx, gy) = raw_gradients(img, operator);
    let mut mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let min = mag.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > min {
        for v in &mut mag {
            *v = (*v - min) / (max - min);
        }
    } else {
        mag.fill(0.0);
    }
    Ok(GrayImage::new(img.h, img.w, mag))
}

/// Signed 4-neighbor Laplacian response with zero padding.
pub fn laplacian_response(img: &GrayImage) -> GrayImage {
    let lap = correlate3(img, &[0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0]);
    GrayImage::new(img.h, img.w, lap)
}

/// A pixel is an edge iff some 4-neighbor has the opposite sign and the
/// absolute difference is at least `magnitude_floor`.
pub fn zero_crossings(signed: &GrayImage, magnitude_floor: f64) -> BinaryMap {
    let mut out = vec![false; signed.h * signed.w];
    for i in 0..signed.h as isize {
        for j in 0..signed.w as isize {
            let v = signed.at(i, j);
            if v == 0.0 {
                continue;
            }
            for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let ni = i + di;
                let nj = j + dj;
                if ni < 0 || nj < 0 || ni >= signed.h as isize || nj >= signed.w as isize {
                    continue;
                }
                let nv = signed.at(ni, nj);
                if v * nv < 0.0 && (v - nv).abs() >= magnitude_floor {
                    out[i as usize * signed.w + j as usize] = true;
                    break;
                }
            }
        }
    }
    BinaryMap::new(signed.h, signed.w, out)
}

pub(crate) fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-(k as f64 * k as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    // Separable, clamped borders so flat regions stay flat.
    let clamp_at = |img: &GrayImage, i: isize, j: isize| {
        let ci = i.clamp(0, img.h as isize - 1);
        let cj = j.clamp(0, img.w as isize - 1);
        img.values[ci as usize * img.w + cj as usize]
    };
    let mut tmp = vec![0.0; img.h * img.w];
    for i in 0..img.h as isize {
        for j in 0..img.w as isize {
            let mut acc = 0.0;
            for (idx, k) in kernel.iter().enumerate() {
                acc += k * clamp_at(img, i, j + idx as isize - radius);
            }
            tmp[i as usize * img.w + j as usize] = acc;
        }
    }
    let tmp = GrayImage::new(img.h, img.w, tmp);
    let mut out = vec![0.0; img.h * img.w];
    for i in 0..img.h as isize {
        for j in 0..img.w as isize {
            let mut acc = 0.0;
            for (idx, k) in kernel.iter().enumerate() {
                acc += k * clamp_at(&tmp, i + idx as isize - radius, j);
            }
            out[i as usize * img.w + j as usize] = acc;
        }
    }
    GrayImage::new(img.h, img.w, out)
}

/// Gaussian blur, Sobel gradients, orientation-quantized non-maximum
/// suppression, then 8-connected hysteresis.
pub fn canny(img: &GrayImage, sigma: f64, low: f64, high: f64) -> Result<BinaryMap, ClassicError> {
    if !(0.0..1.0).contains(&low) || !(low < high && high <= 1.0) {
        return Err(ClassicError::BadThresholds { low, high });
    }
    if sigma <= 0.0 {
        return Err(ClassicError::BadSigma(sigma));
    }
    let blurred = gaussian_blur(img, sigma);
    // Replicate-padded Sobel: image borders of flat regions must not fire.
    let (h_, w_) = (blurred.h as isize, blurred.w as isize);
    let clamp_at = |i: isize, j: isize| {
        blurred.values[(i.clamp(0, h_ - 1) as usize) * blurred.w + j.clamp(0, w_ - 1) as usize]
    };
    let mut gx = vec![0.0; img.h * img.w];
    let mut gy = vec![0.0; img.h * img.w];
    for i in 0..h_ {
        for j in 0..w_ {
            let idx = i as usize * img.w + j as usize;
            gx[idx] = -clamp_at(i - 1, j - 1) + clamp_at(i - 1, j + 1) - 2.0 * clamp_at(i, j - 1)
                + 2.0 * clamp_at(i, j + 1)
                - clamp_at(i + 1, j - 1)
                + clamp_at(i + 1, j + 1);
            gy[idx] = -clamp_at(i - 1, j - 1) - 2.0 * clamp_at(i - 1, j) - clamp_at(i - 1, j + 1)
                + clamp_at(i + 1, j - 1)
                + 2.0 * clamp_at(i + 1, j)
                + clamp_at(i + 1, j + 1);
        }
    }
    let (h, w) = (img.h, img.w);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    // Guard against pure rounding dust on flat images.
    if max < 1e-9 {
        return Ok(BinaryMap::empty(h, w));
    }
    let mag: Vec<f64> = mag.iter().map(|v| v / max).collect();

    // NMS along one of four quantized directions.
    let get = |m: &[f64], i: isize, j: isize| {
        if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
            0.0
        } else {
            m[i as usize * w + j as usize]
        }
    };
    let mut thin = vec![0.0; h * w];
    for i in 0..h as isize {
        for j in 0..w as isize {
            let idx = i as usize * w + j as usize;
            let m = mag[idx];
            if m == 0.0 {
                continue;
            }
            let angle = gy[idx].atan2(gx[idx]).to_degrees().rem_euclid(180.0);
            let (d1, d2) = if !(22.5..157.5).contains(&angle) {
                ((0, 1), (0, -1))
            } else if angle < 67.5 {
                ((1, 1), (-1, -1))
            } else if angle < 112.5 {
                ((1, 0), (-1, 0))
            } else {
                ((1, -1), (-1, 1))
            };
            let a = get(&mag, i + d1.0, j + d1.1);
            let b = get(&mag, i + d2.0, j + d2.1);
            // Strict on the forward neighbor, non-strict on the backward one:
            // exactly one survivor on ties and plateaus.
            if m > a && m >= b {
                thin[idx] = m;
            }
        }
    }

    // Hysteresis: seed from strong pixels, grow through weak ones (8-connected).
    let mut out = vec![false; h * w];
    let mut stack = Vec::new();
    for idx in 0..h * w {
        if thin[idx] >= high && !out[idx] {
            out[idx] = true;
            stack.push(idx);
            while let Some(p) = stack.pop() {
                let (pi, pj) = ((p / w) as isize, (p % w) as isize);
                for di in -1..=1isize {
                    for dj in -1..=1isize {
                        let (ni, nj) = (pi + di, pj + dj);
                        if ni < 0 || nj < 0 || ni >= h as isize || nj >= w as isize {
                            continue;
                        }
                        let n = ni as usize * w + nj as usize;
                        if !out[n] && thin[n] >= low {
                            out[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    // Directional NMS still leaves 2x2 staircase clusters where the
    // quantized direction flips near 22.5 degrees; a final thinning pass
    // guarantees a single-pixel-wide result.
    Ok(crate::eval::morphological_thin(&BinaryMap::new(h, w, out)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vertical_step(h: usize, w: usize, col: usize) -> GrayImage {
        let mut v = vec![0.0; h * w];
        for i in 0..h {
            for j in col..w {
                v[i * w + j] = 1.0;
            }
        }
        GrayImage::new(h, w, v)
    }

    #[test]
    fn constant_image_has_zero_gradient() {
        let img = GrayImage::constant(5, 5, 0.4);
        for op in [GradientOperator::Sobel, GradientOperator::Scharr, GradientOperator::Roberts] {
            let g = gradient_magnitude(&img, op).unwrap();
            // Interior is zero; normalization maps border padding artifacts
            // but a constant interior must stay at the minimum.
            assert_eq!(g.values[2 * 5 + 2], 0.0, "{op:?}");
        }
    }

    #[test]
    fn vertical_step_peaks_at_the_step() {
        let img = vertical_step(7, 8, 4);
        let g = gradient_magnitude(&img, GradientOperator::Sobel).unwrap();
        // Interior row: equal maximal responses flanking column 4, zero far
        // away (borders see the zero padding and are excluded).
        let row = 3;
        assert!(g.values[row * 8 + 3] > 0.5);
        assert_eq!(g.values[row * 8 + 3], g.values[row * 8 + 4]);
        assert_eq!(g.values[row * 8 + 1], 0.0);
        assert_eq!(g.values[row * 8 + 6], 0.0);
    }

    #[test]
    fn sobel_matches_naive_loop_oracle() {
        let vals: Vec<f64> = (0..49).map(|i| ((i * 2654435761u64 as usize) % 100) as f64 / 100.0).collect();
        let img = GrayImage::new(7, 7, vals);
        let g = gradient_magnitude(&img, GradientOperator::Sobel).unwrap();
        // Naive oracle with separate normalization bookkeeping.
        let kx = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
        let ky = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];
        let mut raw = vec![0.0; 49];
        for i in 0..7isize {
            for j in 0..7isize {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for ki in -1..=1isize {
                    for kj in -1..=1isize {
                        let v = img.at(i + ki, j + kj);
                        gx += kx[((ki + 1) * 3 + kj + 1) as usize] * v;
                        gy += ky[((ki + 1) * 3 + kj + 1) as usize] * v;
                    }
                }
                raw[(i * 7 + j) as usize] = (gx * gx + gy * gy).sqrt();
            }
        }
        let max = raw.iter().cloned().fold(0.0, f64::max);
        let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        for (a, r) in g.values.iter().zip(&raw) {
            assert!((a - (r - min) / (max - min)).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_operator_name() {
        assert!("prewitt".parse::<GradientOperator>().is_err());
        assert!("sobel".parse::<GradientOperator>().is_ok());
    }

    #[test]
    fn laplacian_step_has_opposite_flanks_and_thin_crossings() {
        let img = vertical_step(5, 6, 3);
        let lap = laplacian_response(&img);
        let row = 2;
        assert_eq!(lap.values[row * 6 + 2], 1.0);
        assert_eq!(lap.values[row * 6 + 3], -1.0);
        let zc = zero_crossings(&lap, 0.0);
        // Interior rows mark a thin line at the sign change.
        assert!(zc.values[row * 6 + 2] && zc.values[row * 6 + 3]);
        assert!(!zc.values[row * 6 + 0]);
    }

    #[test]
    fn constant_image_has_no_zero_crossings() {
        let img = GrayImage::constant(6, 6, 0.8);
        let lap = laplacian_response(&img);
        // Interior is exactly zero; borders see padding but have no
        // opposite-signed interior partner above the floor 2.0.
        let zc = zero_crossings(&lap, 2.0);
        assert_eq!(zc.count(), 0);
    }

    #[test]
    fn magnitude_floor_suppresses_noise_crossings() {
        // Seeded noise on a constant image.
        let mut state = 12345u64;
        let mut noise = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64 - 1.0) * 0.1
        };
        let vals: Vec<f64> = (0..400).map(|_| 0.5 + noise()).collect();
        let img = GrayImage::new(20, 20, vals);
        let lap = laplacian_response(&img);
        let loose = zero_crossings(&lap, 0.0).count();
        let strict = zero_crossings(&lap, 0.5).count();
        assert!(loose > 50, "expected many spurious crossings, got {loose}");
        assert!(strict < loose, "floor must reduce the count: {strict} vs {loose}");
    }

    #[test]
    fn canny_on_constant_image_is_empty() {
        let img = GrayImage::constant(16, 16, 0.3);
        let edges = canny(&img, 1.0, 0.1, 0.3).unwrap();
        assert_eq!(edges.count(), 0);
    }

    #[test]
    fn canny_vertical_step_is_single_pixel_wide() {
        let img = vertical_step(16, 16, 8);
        let edges = canny(&img, 1.0, 0.1, 0.3).unwrap();
        for i in 4..12 {
            let row: Vec<usize> = (0..16).filter(|&j| edges.values[i * 16 + j]).collect();
            assert_eq!(row.len(), 1, "row {i}: {row:?}");
        }
    }

    #[test]
    fn canny_rejects_bad_threshold_ordering() {
        let img = GrayImage::constant(8, 8, 0.0);
        assert!(canny(&img, 1.0, 0.5, 0.2).is_err());
        assert!(canny(&img, 0.0, 0.1, 0.2).is_err());
    }

    #[test]
    fn operators_are_translation_equivariant_on_interiors() {
        let vals: Vec<f64> = (0..144).map(|i| ((i * 31) % 17) as f64 / 17.0).collect();
        let img = GrayImage::new(12, 12, vals.clone());
        // Shift by 2 pixels right/down.
        let mut shifted = vec![0.0; 144];
        for i in 2..12 {
            for j in 2..12 {
                shifted[i * 12 + j] = vals[(i - 2) * 12 + (j - 2)];
            }
        }
        let shifted = GrayImage::new(12, 12, shifted);
        let a = laplacian_response(&img);
        let b = laplacian_response(&shifted);
        // Compare interior crops: a[i][j] == b[i+2][j+2] away from borders.
        for i in 1..8 {
            for j in 1..8 {
                assert_eq!(a.values[i * 12 + j], b.values[(i + 2) * 12 + (j + 2)]);
            }
        }
    }

    #[test]
    fn laplacian_of_affine_image_is_zero_on_interior() {
        let vals: Vec<f64> = (0..100)
            .map(|idx| {
                let (i, j) = (idx / 10, idx % 10);
                0.03 * i as f64 + 0.01 * j as f64 + 0.2
            })
            .collect();
        let lap = laplacian_response(&GrayImage::new(10, 10, vals));
        for i in 1..9 {
            for j in 1..9 {
                assert!(lap.values[i * 10 + j].abs() < 1e-12);
            }
        }
    }
}
