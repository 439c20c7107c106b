//! Synthetic dataset generation, augmentation, and on-disk ingestion.
//!
//! Synthetic samples are compositions of 2-5 anti-aliased filled shapes
//! (convex polygons and ellipses) with distinct mean intensities over a flat
//! background, plus additive Gaussian noise. The ground truth is the exact
//! 1-pixel occlusion boundary of the composition: the label map sampled at
//! pixel centers, marked where a pixel's label differs from its east or
//! south neighbor, then settled with one thinning pass so every stored map
//! is a fixed point of `morphological_thin`.

use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classic::{BinaryMap, GrayImage};
use crate::eval::{morphological_thin, GroundTruthSet};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("image error on {path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("no ground truth found for image id '{id}'")]
    MissingGroundTruth { id: String },
    #[error("crop {ch}x{cw} does not fit the valid {vh}x{vw} region after rotation")]
    CropTooLarge { ch: usize, cw: usize, vh: usize, vw: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One image/label pair. The image is 3-channel CHW in [0,1].
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub id: String,
    pub h: usize,
    pub w: usize,
    pub image: Vec<f64>,
    pub gt: GroundTruthSet,
}

impl SamplePair {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.image[c * self.h * self.w..(c + 1) * self.h * self.w]
    }
}

/// Augmentation scheme: rotation from a fixed set of angles, a crop, and an
/// optional horizontal flip, applied identically to image and labels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Degrees. Default: 24 evenly spaced angles, multiples of 15.
    pub rotation_angles: Vec<f64>,
    pub crop_size: (usize, usize),
    pub flip_prob: f64,
}

impl AugmentConfig {
    pub fn identity(size: usize) -> Self {
        AugmentConfig { rotation_angles: vec![0.0], crop_size: (size, size), flip_prob: 0.0 }
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_angles: (0..24).map(|k| 15.0 * k as f64).collect(),
            // Largest multiple of 8 (the encoder's downsampling factor) that
            // fits the 45-px valid region of a rotated 64-px image.
            crop_size: (40, 40),
            flip_prob: 0.5,
        }
    }
}

#[derive(Clone)]
enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64, rot: f64 },
    Polygon { verts: Vec<(f64, f64)> },
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        match self {
            Shape::Ellipse { cy, cx, ry, rx, rot } => {
                let (dy, dx) = (y - cy, x - cx);
                let (s, c) = rot.sin_cos();
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                (u / rx) * (u / rx) + (v / ry) * (v / ry) <= 1.0
            }
            Shape::Polygon { verts } => {
                // Convex, counter-clockwise ordered: inside iff on the same
                // side of every edge.
                let n = verts.len();
                for i in 0..n {
                    let (y0, x0) = verts[i];
                    let (y1, x1) = verts[(i + 1) % n];
                    let cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
                    if cross < 0.0 {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Annotator imprecision: the same outline, traced slightly off. A small
    /// translation plus an isotropic rescale keeps polygons convex.
    fn jitter(&self, rng: &mut ChaCha8Rng, sigma: f64) -> Shape {
        let dy = sigma * standard_normal(rng);
        let dx = sigma * standard_normal(rng);
        let scale = 1.0 + 0.04 * standard_normal(rng);
        match self {
            Shape::Ellipse { cy, cx, ry, rx, rot } => Shape::Ellipse {
                cy: cy + dy,
                cx: cx + dx,
                ry: (ry * scale).max(1.0),
                rx: (rx * scale).max(1.0),
                rot: *rot,
            },
            Shape::Polygon { verts } => {
                let n = verts.len() as f64;
                let my = verts.iter().map(|v| v.0).sum::<f64>() / n;
                let mx = verts.iter().map(|v| v.1).sum::<f64>() / n;
                Shape::Polygon {
                    verts: verts
                        .iter()
                        .map(|&(y, x)| {
                            (my + (y - my) * scale + dy, mx + (x - mx) * scale + dx)
                        })
                        .collect(),
                }
            }
        }
    }
}

fn random_shape(rng: &mut ChaCha8Rng, size: f64) -> Shape {
    let cy = rng.random_range(0.2 * size..0.8 * size);
    let cx = rng.random_range(0.2 * size..0.8 * size);
    let rmin = 0.06 * size;
    let rmax = 0.16 * size;
    if rng.random_bool(0.5) {
        Shape::Ellipse {
            cy,
            cx,
            ry: rng.random_range(rmin..rmax),
            rx: rng.random_range(rmin..rmax),
            rot: rng.random_range(0.0..std::f64::consts::PI),
        }
    } else {
        let k = rng.random_range(3..=5usize);
        let r = rng.random_range(rmin..rmax);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let mut verts: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                let a = phase + std::f64::consts::TAU * i as f64 / k as f64;
                let rr = r * rng.random_range(0.7..1.0);
                (cy + rr * a.sin(), cx + rr * a.cos())
            })
            .collect();
        // Order counter-clockwise around the centroid for the convex test.
        let my = verts.iter().map(|v| v.0).sum::<f64>() / k as f64;
        let mx = verts.iter().map(|v| v.1).sum::<f64>() / k as f64;
        verts.sort_by(|a, b| {
            let aa = (a.0 - my).atan2(a.1 - mx);
            let ab = (b.0 - my).atan2(b.1 - mx);
            aa.partial_cmp(&ab).unwrap()
        });
        Shape::Polygon { verts }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn generate_one(size: usize, seed: u64, index: u64) -> SamplePair {
    const SUB: usize = 4; // supersampling grid per pixel axis
    for attempt in 0u64.. {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed ^ index.wrapping_mul(0x9e3779b97f4a7c15) ^ attempt.wrapping_mul(0xd1b54a32d192ed03),
        );
        let n_shapes = rng.random_range(2..=5usize);
        let shapes: Vec<Shape> = (0..n_shapes).map(|_| random_shape(&mut rng, size as f64)).collect();
        // Distinct mean intensities from a coarse grid: background + shapes.
        let mut levels: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
        levels.shuffle(&mut rng);
        let bg = levels[0];
        let shade: Vec<f64> = levels[1..=n_shapes].to_vec();
        // Small per-channel tint so the three channels are not identical.
        let tints: Vec<[f64; 3]> = (0..=n_shapes)
            .map(|_| {
                [
                    rng.random_range(-0.04..0.04),
                    rng.random_range(-0.04..0.04),
                    rng.random_range(-0.04..0.04),
                ]
            })
            .collect();

        // Each sample carries three independent annotations, each traced from
        // a slightly perturbed copy of the shapes: ground truth carries
        // realistic annotator imprecision (mostly within a pixel of the
        // rendered occlusion boundary), while the image below renders the
        // true shapes. The first annotation is the training target; scoring
        // matches against all of them.
        let topmost_in = |set: &[Shape], y: f64, x: f64| -> usize {
            // Later shapes occlude earlier ones; 0 is background.
            for (si, s) in set.iter().enumerate().rev() {
                if s.contains(y, x) {
                    return si + 1;
                }
            }
            0
        };
        let topmost = |y: f64, x: f64| topmost_in(&shapes, y, x);

        let mut annots = Vec::with_capacity(3);
        for _ in 0..3 {
            let gt_shapes: Vec<Shape> = shapes.iter().map(|s| s.jitter(&mut rng, 0.6)).collect();
            // Labels at pixel centers define this annotator's occlusion boundary.
            let mut labels = vec![0usize; size * size];
            for i in 0..size {
                for j in 0..size {
                    labels[i * size + j] = topmost_in(&gt_shapes, i as f64 + 0.5, j as f64 + 0.5);
                }
            }
            let mut edge = vec![false; size * size];
            for i in 0..size {
                for j in 0..size {
                    let l = labels[i * size + j];
                    if (j + 1 < size && labels[i * size + j + 1] != l)
                        || (i + 1 < size && labels[(i + 1) * size + j] != l)
                    {
                        edge[i * size + j] = true;
                    }
                }
            }
            annots.push(morphological_thin(&BinaryMap::new(size, size, edge)));
        }
        if annots
            .iter()
            .any(|m| m.count() == 0 || m.count() as f64 / (size * size) as f64 >= 0.10)
        {
            continue; // degenerate composition; redraw
        }

        // Anti-aliased rendering: average shape color over subsamples.
        let mut image = vec![0.0; 3 * size * size];
        for i in 0..size {
            for j in 0..size {
                let mut acc = [0.0f64; 3];
                for sy in 0..SUB {
                    for sx in 0..SUB {
                        let y = i as f64 + (sy as f64 + 0.5) / SUB as f64;
                        let x = j as f64 + (sx as f64 + 0.5) / SUB as f64;
                        let l = topmost(y, x);
                        let base = if l == 0 { bg } else { shade[l - 1] };
                        for c in 0..3 {
                            acc[c] += base + tints[l][c];
                        }
                    }
                }
                for c in 0..3 {
                    image[c * size * size + i * size + j] = acc[c] / (SUB * SUB) as f64;
                }
            }
        }
        // Optical softness then sensor noise: intensity ramps span a couple
        // of pixels, so localizing the 1-px boundary is the hard part.
        let blur_sigma = rng.random_range(0.8..1.5);
        for c in 0..3 {
            let chan = GrayImage::new(
                size,
                size,
                image[c * size * size..(c + 1) * size * size].to_vec(),
            );
            let soft = crate::classic::gaussian_blur(&chan, blur_sigma);
            for (dst, &v) in image[c * size * size..(c + 1) * size * size]
                .iter_mut()
                .zip(&soft.values)
            {
                *dst = (v + 0.03 * standard_normal(&mut rng)).clamp(0.0, 1.0);
            }
        }
        return SamplePair {
            id: format!("{index:05}"),
            h: size,
            w: size,
            image,
            gt: GroundTruthSet::new(annots).expect("three equal-size annotator maps"),
        };
    }
    unreachable!()
}

/// Deterministic pure function of (n, size, seed); parallel across samples
/// with per-sample derived RNG streams.
pub fn gen_synthetic(n: usize, size: usize, seed: u64) -> Result<Vec<SamplePair>, DataError> {
    if n < 1 {
        return Err(DataError::InvalidArgument("n must be >= 1".into()));
    }
    if size < 32 {
        return Err(DataError::InvalidArgument("size must be >= 32".into()));
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| generate_one(size, seed, i))
        .collect())
}

fn snap(v: f64) -> f64 {
    // Exact right angles: kill the ~1e-16 residue of sin/cos at multiples of
    // 90 degrees so those paths are pixel-exact.
    if v.abs() < 1e-12 {
        0.0
    } else if (v - 1.0).abs() < 1e-12 {
        1.0
    } else if (v + 1.0).abs() < 1e-12 {
        -1.0
    } else {
        v
    }
}

fn rotate_bilinear(src: &[f64], h: usize, w: usize, sin: f64, cos: f64) -> Vec<f64> {
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (dy, dx) = (i as f64 - cy, j as f64 - cx);
            // Inverse map: rotate output coordinates by -angle.
            let sy = cy + cos * dy + sin * dx;
            let sx = cx - sin * dy + cos * dx;
            let y0 = sy.floor();
            let x0 = sx.floor();
            let (fy, fx) = (sy - y0, sx - x0);
            let get = |yy: isize, xx: isize| {
                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                    0.0
                } else {
                    src[yy as usize * w + xx as usize]
                }
            };
            let (i0, j0) = (y0 as isize, x0 as isize);
            out[i * w + j] = get(i0, j0) * (1.0 - fy) * (1.0 - fx)
                + get(i0, j0 + 1) * (1.0 - fy) * fx
                + get(i0 + 1, j0) * fy * (1.0 - fx)
                + get(i0 + 1, j0 + 1) * fy * fx;
        }
    }
    out
}

fn rotate_nearest_bool(src: &[bool], h: usize, w: usize, sin: f64, cos: f64) -> Vec<bool> {
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = vec![false; h * w];
    for i in 0..h {
        for j in 0..w {
            let (dy, dx) = (i as f64 - cy, j as f64 - cx);
            let sy = (cy + cos * dy + sin * dx).round();
            let sx = (cx - sin * dy + cos * dx).round();
            if sy >= 0.0 && sx >= 0.0 && (sy as usize) < h && (sx as usize) < w {
                out[i * w + j] = src[sy as usize * w + sx as usize];
            }
        }
    }
    out
}

/// Side of the centered axis-aligned square guaranteed free of rotation
/// fill-in for a `size`-pixel canvas rotated by `angle_deg`.
pub fn valid_region(size: usize, angle_deg: f64) -> usize {
    let rad = angle_deg.to_radians();
    let span = snap(rad.sin()).abs() + snap(rad.cos()).abs();
    (size as f64 / span).floor() as usize
}

/// Rotate (image bilinear, labels nearest + re-thin), crop the same window
/// inside the rotation-valid region, and flip together or not.
pub fn augment<R: Rng>(
    pair: &SamplePair,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<SamplePair, DataError> {
    let (h, w) = (pair.h, pair.w);
    let angle = cfg.rotation_angles[rng.random_range(0..cfg.rotation_angles.len())];
    let rad = angle.to_radians();
    let (sin, cos) = (snap(rad.sin()), snap(rad.cos()));
    let (ch, cw) = cfg.crop_size;
    let valid = valid_region(h.min(w), angle);
    if ch > valid || cw > valid {
        return Err(DataError::CropTooLarge { ch, cw, vh: valid, vw: valid });
    }
    // The valid square is centered; crops may slide anywhere inside it.
    let top0 = (h - valid) / 2;
    let left0 = (w - valid) / 2;
    let top = top0 + rng.random_range(0..=valid - ch);
    let left = left0 + rng.random_range(0..=valid - cw);
    let flip = rng.random_bool(cfg.flip_prob);

    let mut image = Vec::with_capacity(3 * ch * cw);
    for c in 0..3 {
        let rot = rotate_bilinear(pair.channel(c), h, w, sin, cos);
        for i in 0..ch {
            for j in 0..cw {
                let jj = if flip { cw - 1 - j } else { j };
                image.push(rot[(top + i) * w + (left + jj)]);
            }
        }
    }
    let maps = pair
        .gt
        .maps()
        .iter()
        .map(|m| {
            let rot = rotate_nearest_bool(&m.values, h, w, sin, cos);
            let mut vals = Vec::with_capacity(ch * cw);
            for i in 0..ch {
                for j in 0..cw {
                    let jj = if flip { cw - 1 - j } else { j };
                    vals.push(rot[(top + i) * w + (left + jj)]);
                }
            }
            morphological_thin(&BinaryMap::new(ch, cw, vals))
        })
        .collect();
    Ok(SamplePair {
        id: pair.id.clone(),
        h: ch,
        w: cw,
        image,
        gt: GroundTruthSet::new(maps).expect("annotator maps share crop dimensions"),
    })
}

/// Write a sample as images/<id>.png (8-bit RGB) plus gt/<id>.png or
/// gt/<id>.a<k>.png (8-bit grayscale, 255 = edge) for multiple annotators.
pub fn save_sample(pair: &SamplePair, dir: &Path) -> Result<(), DataError> {
    let img_dir = dir.join("images");
    let gt_dir = dir.join("gt");
    for d in [&img_dir, &gt_dir] {
        std::fs::create_dir_all(d).map_err(|e| DataError::Io { path: d.clone(), source: e })?;
    }
    let mut rgb = image::RgbImage::new(pair.w as u32, pair.h as u32);
    for i in 0..pair.h {
        for j in 0..pair.w {
            let px: [u8; 3] = std::array::from_fn(|c| {
                (pair.channel(c)[i * pair.w + j] * 255.0).round().clamp(0.0, 255.0) as u8
            });
            rgb.put_pixel(j as u32, i as u32, image::Rgb(px));
        }
    }
    let img_path = img_dir.join(format!("{}.png", pair.id));
    rgb.save(&img_path).map_err(|e| DataError::Image { path: img_path, source: e })?;
    let multi = pair.gt.maps().len() > 1;
    for (k, m) in pair.gt.maps().iter().enumerate() {
        let mut g = image::GrayImage::new(pair.w as u32, pair.h as u32);
        for i in 0..pair.h {
            for j in 0..pair.w {
                g.put_pixel(j as u32, i as u32, image::Luma([if m.values[i * pair.w + j] { 255 } else { 0 }]));
            }
        }
        let name = if multi { format!("{}.a{}.png", pair.id, k) } else { format!("{}.png", pair.id) };
        let p = gt_dir.join(name);
        g.save(&p).map_err(|e| DataError::Image { path: p, source: e })?;
    }
    Ok(())
}

/// Load pairs from images/<id>.png with gt/<id>.png or gt/<id>.a<k>.png
/// (pixel > 127 means edge), sorted by id. An empty or missing images/
/// directory yields an empty list.
pub fn load_dataset(dir: &Path) -> Result<Vec<SamplePair>, DataError> {
    let img_dir = dir.join("images");
    if !img_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut ids: Vec<String> = std::fs::read_dir(&img_dir)
        .map_err(|e| DataError::Io { path: img_dir.clone(), source: e })?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_suffix(".png").map(str::to_owned)
        })
        .collect();
    ids.sort();
    let gt_dir = dir.join("gt");
    ids.iter()
        .map(|id| {
            let img_path = img_dir.join(format!("{id}.png"));
            let img = image::open(&img_path)
                .map_err(|e| DataError::Image { path: img_path.clone(), source: e })?
                .to_rgb8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let mut data = vec![0.0; 3 * h * w];
            for i in 0..h {
                for j in 0..w {
                    let px = img.get_pixel(j as u32, i as u32);
                    for c in 0..3 {
                        data[c * h * w + i * w + j] = px.0[c] as f64 / 255.0;
                    }
                }
            }
            let mut maps = Vec::new();
            let single = gt_dir.join(format!("{id}.png"));
            if single.is_file() {
                maps.push(load_binary_png(&single)?);
            } else {
                for k in 0.. {
                    let p = gt_dir.join(format!("{id}.a{k}.png"));
                    if !p.is_file() {
                        break;
                    }
                    maps.push(load_binary_png(&p)?);
                }
            }
            if maps.is_empty() {
                return Err(DataError::MissingGroundTruth { id: id.clone() });
            }
            Ok(SamplePair {
                id: id.clone(),
                h,
                w,
                image: data,
                gt: GroundTruthSet::new(maps)
                    .map_err(|e| DataError::InvalidArgument(e.to_string()))?,
            })
        })
        .collect()
}

fn load_binary_png(path: &Path) -> Result<BinaryMap, DataError> {
    let img = image::open(path)
        .map_err(|e| DataError::Image { path: path.to_path_buf(), source: e })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut vals = vec![false; h * w];
    for i in 0..h {
        for j in 0..w {
            vals[i * w + j] = img.get_pixel(j as u32, i as u32).0[0] > 127;
        }
    }
    Ok(BinaryMap::new(h, w, vals))
}

/// Probability map written as 8-bit grayscale, round(p * 255).
pub fn save_probmap(p: &GrayImage, path: &Path) -> Result<(), DataError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| DataError::Io { path: parent.to_path_buf(), source: e })?;
    }
    let mut g = image::GrayImage::new(p.w as u32, p.h as u32);
    for i in 0..p.h {
        for j in 0..p.w {
            let v = (p.values[i * p.w + j] * 255.0).round().clamp(0.0, 255.0) as u8;
            g.put_pixel(j as u32, i as u32, image::Luma([v]));
        }
    }
    g.save(path).map_err(|e| DataError::Image { path: path.to_path_buf(), source: e })
}

/// Read back an 8-bit probability map as values in [0,1].
pub fn load_probmap(path: &Path) -> Result<GrayImage, DataError> {
    let img = image::open(path)
        .map_err(|e| DataError::Image { path: path.to_path_buf(), source: e })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut vals = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            vals[i * w + j] = img.get_pixel(j as u32, i as u32).0[0] as f64 / 255.0;
        }
    }
    Ok(GrayImage::new(h, w, vals))
}
