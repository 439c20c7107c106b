//! Resampling, pooling, and layout ops: bilinear upsampling, global average
//! pooling, fully connected layers, channel/batch concatenation and slicing.

use super::{Result, Tensor, TensorError};

/// Bilinear sample weights for one output coordinate under the
/// half-pixel-centers (align-corners-off) convention.
fn bilinear_taps(out_idx: usize, scale: usize, in_dim: usize) -> [(usize, f64); 2] {
    let src = (out_idx as f64 + 0.5) / scale as f64 - 0.5;
    let floor = src.floor();
    let frac = src - floor;
    let i0 = (floor.max(0.0) as usize).min(in_dim - 1);
    let i1 = (i0 + 1).min(in_dim - 1);
    // Clamped edge samples: both taps may land on the same pixel.
    if floor < 0.0 {
        [(0, 1.0), (0, 0.0)]
    } else {
        [(i0, 1.0 - frac), (i1, frac)]
    }
}

impl Tensor {
    /// Integer-factor bilinear upsampling, half-pixel-centers convention.
    pub fn upsample_bilinear(&self, scale: usize) -> Result<Tensor> {
        if scale == 0 {
            return Err(TensorError::InvalidArgument {
                op: "upsample_bilinear",
                detail: "scale must be >= 1".into(),
            });
        }
        let [n, c, h, w] = self.shape();
        if scale == 1 {
            // Identity, but still a recorded node so gradients flow.
            let input = self.clone();
            return Ok(Tensor::result(self.shape(), self.data(), vec![self.clone()], move |g| {
                input.accumulate_grad(g);
            }));
        }
        let (oh, ow) = (h * scale, w * scale);
        let ytaps: Vec<[(usize, f64); 2]> = (0..oh).map(|i| bilinear_taps(i, scale, h)).collect();
        let xtaps: Vec<[(usize, f64); 2]> = (0..ow).map(|j| bilinear_taps(j, scale, w)).collect();
        let xd = self.data();
        let mut out = vec![0.0; n * c * oh * ow];
        for plane in 0..n * c {
            let src = &xd[plane * h * w..(plane + 1) * h * w];
            let dst = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for (iy, wy) in ytaps[oy] {
                        for (ix, wx) in xtaps[ox] {
                            acc += wy * wx * src[iy * w + ix];
                        }
                    }
                    dst[oy * ow + ox] = acc;
                }
            }
        }
        let input = self.clone();
        Ok(Tensor::result([n, c, oh, ow], out, vec![self.clone()], move |gout| {
            let mut gx = vec![0.0; n * c * h * w];
            for plane in 0..n * c {
                let src = &gout[plane * oh * ow..(plane + 1) * oh * ow];
                let dst = &mut gx[plane * h * w..(plane + 1) * h * w];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = src[oy * ow + ox];
                        for (iy, wy) in ytaps[oy] {
                            for (ix, wx) in xtaps[ox] {
                                dst[iy * w + ix] += wy * wx * g;
                            }
                        }
                    }
                }
            }
            input.accumulate_grad(&gx);
        }))
    }

    /// Spatial mean per channel: `[N,C,H,W] -> [N,C,1,1]`.
    pub fn global_avg_pool(&self) -> Tensor {
        let [n, c, h, w] = self.shape();
        let hw = (h * w) as f64;
        let xd = self.data();
        let out: Vec<f64> = xd.chunks(h * w).map(|p| p.iter().sum::<f64>() / hw).collect();
        let input = self.clone();
        Tensor::result([n, c, 1, 1], out, vec![self.clone()], move |gout| {
            let mut gx = vec![0.0; n * c * h * w];
            for (plane, g) in gout.iter().enumerate() {
                gx[plane * h * w..(plane + 1) * h * w].fill(g / hw);
            }
            input.accumulate_grad(&gx);
        })
    }

    /// Affine map on per-item feature vectors: input `[N,F,1,1]`, weight
    /// `[F_out,F,1,1]`, bias `[F_out,1,1,1]`. Implemented as a 1x1 conv.
    pub fn fully_connected(&self, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let [_, f, h, w] = self.shape();
        if h != 1 || w != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "fully_connected",
                detail: format!("expected [N,F,1,1], got {:?}", self.shape()),
            });
        }
        let ws = weight.shape();
        if ws[1] != f || ws[2] != 1 || ws[3] != 1 {
            return Err(TensorError::ShapeMismatch {
                op: "fully_connected",
                detail: format!("weight {:?} incompatible with {f} input features", ws),
            });
        }
        self.conv2d(weight, bias, super::ConvSpec::default())
    }

    /// Stack along the channel axis; all inputs must share `N,H,W`.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_channels",
                detail: "no tensors to concatenate".into(),
            });
        }
        let [n, _, h, w] = parts[0].shape();
        let mut c_total = 0;
        for p in parts {
            let s = p.shape();
            if s[0] != n || s[2] != h || s[3] != w {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    detail: format!("{:?} vs leading {:?}", s, parts[0].shape()),
                });
            }
            c_total += s[1];
        }
        let hw = h * w;
        let mut out = vec![0.0; n * c_total * hw];
        let mut offset = 0;
        for p in parts {
            let c = p.shape()[1];
            p.with_data(|d| {
                for ni in 0..n {
                    let src = &d[ni * c * hw..(ni + 1) * c * hw];
                    let dst = &mut out[(ni * c_total + offset) * hw..][..c * hw];
                    dst.copy_from_slice(src);
                }
            });
            offset += c;
        }
        let owned: Vec<Tensor> = parts.to_vec();
        Ok(Tensor::result([n, c_total, h, w], out, owned.clone(), move |gout| {
            let mut offset = 0;
            for p in &owned {
                let c = p.shape()[1];
                let mut gp = vec![0.0; n * c * hw];
                for ni in 0..n {
                    let src = &gout[(ni * c_total + offset) * hw..][..c * hw];
                    gp[ni * c * hw..(ni + 1) * c * hw].copy_from_slice(src);
                }
                p.accumulate_grad(&gp);
                offset += c;
            }
        }))
    }

    /// Extract batch item `n` as a `[1,C,H,W]` tensor.
    pub fn slice_batch(&self, n: usize) -> Result<Tensor> {
        let [nn, c, h, w] = self.shape();
        if n >= nn {
            return Err(TensorError::InvalidArgument {
                op: "slice_batch",
                detail: format!("index {n} out of range for batch {nn}"),
            });
        }
        let per = c * h * w;
        let data = self.with_data(|d| d[n * per..(n + 1) * per].to_vec());
        let input = self.clone();
        Ok(Tensor::result([1, c, h, w], data, vec![self.clone()], move |g| {
            let mut gx = vec![0.0; nn * per];
            gx[n * per..(n + 1) * per].copy_from_slice(g);
            input.accumulate_grad(&gx);
        }))
    }

    /// Stack `[1,C,H,W]` tensors along the batch axis.
    pub fn concat_batch(parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_batch",
                detail: "no tensors to concatenate".into(),
            });
        }
        let [_, c, h, w] = parts[0].shape();
        let per = c * h * w;
        let mut out = Vec::with_capacity(parts.len() * per);
        for p in parts {
            let s = p.shape();
            if s != [1, c, h, w] {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_batch",
                    detail: format!("{:?} vs expected [1,{c},{h},{w}]", s),
                });
            }
            p.with_data(|d| out.extend_from_slice(d));
        }
        let owned: Vec<Tensor> = parts.to_vec();
        let n = parts.len();
        Ok(Tensor::result([n, c, h, w], out, owned.clone(), move |gout| {
            for (i, p) in owned.iter().enumerate() {
                p.accumulate_grad(&gout[i * per..(i + 1) * per]);
            }
        }))
    }

    /// Extract element `(n, c, 0, 0)` as a scalar tensor (routing weights).
    pub fn slice_scalar(&self, n: usize, c: usize) -> Result<Tensor> {
        let [nn, cc, h, w] = self.shape();
        if n >= nn || c >= cc {
            return Err(TensorError::InvalidArgument {
                op: "slice_scalar",
                detail: format!("({n},{c}) out of range for shape {:?}", self.shape()),
            });
        }
        let idx = (n * cc + c) * h * w;
        let v = self.with_data(|d| d[idx]);
        let input = self.clone();
        let total = self.numel();
        Ok(Tensor::result([1, 1, 1, 1], vec![v], vec![self.clone()], move |g| {
            let mut gx = vec![0.0; total];
            gx[idx] = g[0];
            input.accumulate_grad(&gx);
        }))
    }
}
