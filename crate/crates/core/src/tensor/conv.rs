//! 2-D convolution (cross-correlation) with stride, zero padding, dilation
//! and grouping, plus its reverse-mode gradients.
//!
//! Forward and backward are im2col + small matmuls, parallelized over the
//! batch with rayon. No kernel flip: this is the modern-network convention
//! and the test oracle uses the same one.

use rayon::prelude::*;

use super::{Result, Shape, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub groups: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        ConvSpec { stride: 1, padding: 0, dilation: 1, groups: 1 }
    }
}

impl ConvSpec {
    pub fn new(stride: usize, padding: usize, dilation: usize, groups: usize) -> Self {
        ConvSpec { stride, padding, dilation, groups }
    }

    pub fn same(dilation: usize) -> Self {
        // 3x3 kernel keeps spatial size when padding equals dilation.
        ConvSpec { stride: 1, padding: dilation, dilation, groups: 1 }
    }

    pub fn out_dim(&self, input: usize, kernel: usize) -> usize {
        (input + 2 * self.padding - self.dilation * (kernel - 1) - 1) / self.stride + 1
    }
}

/// Row-major matmul: `out[m x n] += a[m x k] * b[k x n]`.
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m x n] += a^T[m x k] * b[k x n]` where `a` is stored `k x m`.
fn matmul_at_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    for kk in 0..k {
        let arow = &a[kk * m..(kk + 1) * m];
        let brow = &b[kk * n..(kk + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

struct Geometry {
    spec: ConvSpec,
    cin_g: usize,
    cout_g: usize,
    kh: usize,
    kw: usize,
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn col_rows(&self) -> usize {
        self.cin_g * self.kh * self.kw
    }

    fn col_len(&self) -> usize {
        self.oh * self.ow
    }

    /// Unfold one group of one batch item into a `[cin_g*kh*kw, oh*ow]` matrix.
    fn im2col(&self, x: &[f64], col: &mut [f64]) {
        let (h, w, ow) = (self.h, self.w, self.ow);
        let l = self.col_len();
        col.fill(0.0);
        for c in 0..self.cin_g {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &mut col[(c * self.kh * self.kw + ki * self.kw + kj) * l..][..l];
                    for oy in 0..self.oh {
                        let iy = (oy * self.spec.stride + ki * self.spec.dilation) as isize
                            - self.spec.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut row[oy * ow..(oy + 1) * ow];
                        for ox in 0..ow {
                            let ix = (ox * self.spec.stride + kj * self.spec.dilation) as isize
                                - self.spec.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Fold a column-gradient matrix back onto the input plane (accumulating).
    fn col2im(&self, col: &[f64], x_grad: &mut [f64]) {
        let (h, w, ow) = (self.h, self.w, self.ow);
        let l = self.col_len();
        for c in 0..self.cin_g {
            let plane = &mut x_grad[c * h * w..(c + 1) * h * w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = &col[(c * self.kh * self.kw + ki * self.kw + kj) * l..][..l];
                    for oy in 0..self.oh {
                        let iy = (oy * self.spec.stride + ki * self.spec.dilation) as isize
                            - self.spec.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        let src = &row[oy * ow..(oy + 1) * ow];
                        for ox in 0..ow {
                            let ix = (ox * self.spec.stride + kj * self.spec.dilation) as isize
                                - self.spec.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn validate(x: Shape, w: Shape, bias: Option<&Tensor>, spec: &ConvSpec) -> Result<Geometry> {
    let [_, cin, h, hh] = x;
    let (height, width) = (h, hh);
    let [cout, wcin, kh, kw] = w;
    let err = |detail: String| TensorError::ShapeMismatch { op: "conv2d", detail };
    if spec.groups == 0 || spec.stride == 0 || spec.dilation == 0 {
        return Err(TensorError::InvalidArgument {
            op: "conv2d",
            detail: "stride, dilation and groups must be >= 1".into(),
        });
    }
    if cin % spec.groups != 0 {
        return Err(err(format!("input channels {cin} not divisible by groups {}", spec.groups)));
    }
    if cout % spec.groups != 0 {
        return Err(err(format!("output channels {cout} not divisible by groups {}", spec.groups)));
    }
    if wcin != cin / spec.groups {
        return Err(err(format!(
            "weight expects {wcin} input channels per group, input supplies {}",
            cin / spec.groups
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout, 1, 1, 1] {
            return Err(err(format!("bias shape {:?}, expected [{cout},1,1,1]", b.shape())));
        }
    }
    let span_h = spec.dilation * (kh - 1) + 1;
    let span_w = spec.dilation * (kw - 1) + 1;
    if height + 2 * spec.padding < span_h || width + 2 * spec.padding < span_w {
        return Err(err(format!(
            "padded input {}x{} smaller than dilated kernel {span_h}x{span_w}",
            height + 2 * spec.padding,
            width + 2 * spec.padding
        )));
    }
    Ok(Geometry {
        spec: *spec,
        cin_g: cin / spec.groups,
        cout_g: cout / spec.groups,
        kh,
        kw,
        h: height,
        w: width,
        oh: spec.out_dim(height, kh),
        ow: spec.out_dim(width, kw),
    })
}

impl Tensor {
    pub fn conv2d(&self, weight: &Tensor, bias: Option<&Tensor>, spec: ConvSpec) -> Result<Tensor> {
        let xs = self.shape();
        let ws = weight.shape();
        let geo = validate(xs, ws, bias, &spec)?;
        let [n, cin, ..] = xs;
        let cout = ws[0];
        let (oh, ow) = (geo.oh, geo.ow);
        let groups = spec.groups;
        let xd = self.data();
        let wd = weight.data();
        let bd = bias.map(|b| b.data());

        let in_item = cin * geo.h * geo.w;
        let out_item = cout * oh * ow;
        let rows = geo.col_rows();
        let l = geo.col_len();

        let mut out = vec![0.0; n * out_item];
        out.par_chunks_mut(out_item).enumerate().for_each(|(ni, o)| {
            let xi = &xd[ni * in_item..(ni + 1) * in_item];
            let mut col = vec![0.0; rows * l];
            for g in 0..groups {
                geo.im2col(&xi[g * geo.cin_g * geo.h * geo.w..], &mut col);
                let wslab = &wd[g * geo.cout_g * rows..(g + 1) * geo.cout_g * rows];
                let oslab = &mut o[g * geo.cout_g * l..(g + 1) * geo.cout_g * l];
                matmul_acc(wslab, &col, oslab, geo.cout_g, rows, l);
            }
            if let Some(b) = &bd {
                for c in 0..cout {
                    let bc = b[c];
                    for v in &mut o[c * l..(c + 1) * l] {
                        *v += bc;
                    }
                }
            }
        });

        let x_t = self.clone();
        let w_t = weight.clone();
        let b_t = bias.cloned();
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        Ok(Tensor::result([n, cout, oh, ow], out, parents, move |gout| {
            let xd = x_t.data();
            let wd = w_t.data();
            let geo = &geo;
            // Per-item input gradients plus per-item weight partials, reduced
            // after the parallel section.
            let results: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
                .into_par_iter()
                .map(|ni| {
                    let xi = &xd[ni * in_item..(ni + 1) * in_item];
                    let gi = &gout[ni * out_item..(ni + 1) * out_item];
                    let mut col = vec![0.0; rows * l];
                    let mut colg = vec![0.0; rows * l];
                    let mut gx = vec![0.0; in_item];
                    let mut gw = vec![0.0; wd.len()];
                    for g in 0..groups {
                        geo.im2col(&xi[g * geo.cin_g * geo.h * geo.w..], &mut col);
                        let gslab = &gi[g * geo.cout_g * l..(g + 1) * geo.cout_g * l];
                        // dW = dY * col^T
                        let gwslab = &mut gw[g * geo.cout_g * rows..(g + 1) * geo.cout_g * rows];
                        for oc in 0..geo.cout_g {
                            let gr = &gslab[oc * l..(oc + 1) * l];
                            let wrow = &mut gwslab[oc * rows..(oc + 1) * rows];
                            for r in 0..rows {
                                let crow = &col[r * l..(r + 1) * l];
                                let mut acc = 0.0;
                                for (gv, cv) in gr.iter().zip(crow) {
                                    acc += gv * cv;
                                }
                                wrow[r] += acc;
                            }
                        }
                        // dCol = W^T * dY, then fold back.
                        colg.fill(0.0);
                        let wslab = &wd[g * geo.cout_g * rows..(g + 1) * geo.cout_g * rows];
                        matmul_at_acc(wslab, gslab, &mut colg, rows, geo.cout_g, l);
                        geo.col2im(&colg, &mut gx[g * geo.cin_g * geo.h * geo.w..]);
                    }
                    (gx, gw)
                })
                .collect();

            let mut gx_all = vec![0.0; n * in_item];
            let mut gw_all = vec![0.0; wd.len()];
            for (ni, (gx, gw)) in results.into_iter().enumerate() {
                gx_all[ni * in_item..(ni + 1) * in_item].copy_from_slice(&gx);
                for (a, b) in gw_all.iter_mut().zip(&gw) {
                    *a += b;
                }
            }
            x_t.accumulate_grad(&gx_all);
            w_t.accumulate_grad(&gw_all);
            if let Some(b) = &b_t {
                let mut gb = vec![0.0; cout];
                for ni in 0..n {
                    let gi = &gout[ni * out_item..(ni + 1) * out_item];
                    for (c, gbc) in gb.iter_mut().enumerate() {
                        *gbc += gi[c * l..(c + 1) * l].iter().sum::<f64>();
                    }
                }
                b.accumulate_grad(&gb);
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;

    #[test]
    fn ones_kernel_counts_overlap() {
        let x = Tensor::from_vec([1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let w = Tensor::from_vec([1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let y = x.conv2d(&w, None, ConvSpec::new(1, 1, 1, 1)).unwrap();
        assert_eq!(y.shape(), [1, 1, 3, 3]);
        assert_eq!(y.data(), vec![4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn identity_1x1_kernel() {
        let vals: Vec<f64> = (0..32).map(|i| i as f64 * 0.3 - 4.0).collect();
        let x = Tensor::from_vec([2, 1, 4, 4], vals.clone()).unwrap();
        let w = Tensor::from_vec([1, 1, 1, 1], vec![1.0]).unwrap();
        let y = x.conv2d(&w, None, ConvSpec::default()).unwrap();
        assert_eq!(y.data(), vals);
    }

    #[test]
    fn rejects_bad_group_split() {
        let x = Tensor::zeros([1, 3, 4, 4]);
        let w = Tensor::zeros([2, 3, 3, 3]);
        let err = x.conv2d(&w, None, ConvSpec::new(1, 1, 1, 2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("channels"), "unexpected message: {msg}");
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let xv: Vec<f64> = (0..36).map(|i| ((i * 7919) % 13) as f64 * 0.1 - 0.6).collect();
        let wv: Vec<f64> = (0..36).map(|i| ((i * 104729) % 11) as f64 * 0.1 - 0.5).collect();
        let x = Tensor::from_vec([1, 2, 3, 6], xv).unwrap();
        let spec = ConvSpec::new(1, 1, 1, 1);
        // w.r.t. input
        let wt = Tensor::from_vec([2, 2, 3, 3], wv.clone()).unwrap();
        let err = grad_check(|x| x.conv2d(&wt, None, spec).unwrap().powf(2.0).sum(), &x, 1e-5);
        assert!(err < 1e-8, "input fd error {err}");
        // w.r.t. weight
        let xc = x.clone();
        let w = Tensor::from_vec([2, 2, 3, 3], wv).unwrap();
        let err = grad_check(|w| xc.conv2d(w, None, spec).unwrap().powf(2.0).sum(), &w, 1e-5);
        assert!(err < 1e-8, "weight fd error {err}");
        // w.r.t. bias
        let b = Tensor::from_vec([2, 1, 1, 1], vec![0.3, -0.2]).unwrap();
        let err = grad_check(|b| xc.conv2d(&wt, Some(b), spec).unwrap().powf(2.0).sum(), &b, 1e-5);
        assert!(err < 1e-8, "bias fd error {err}");
    }

    #[test]
    fn dilated_grouped_gradients() {
        let xv: Vec<f64> = (0..96).map(|i| ((i * 31) % 17) as f64 * 0.05 - 0.4).collect();
        let x = Tensor::from_vec([2, 4, 4, 3], xv).unwrap();
        let spec = ConvSpec::new(1, 2, 2, 4);
        let w = Tensor::from_vec([4, 1, 3, 3], (0..36).map(|i| (i as f64 * 0.07).sin()).collect()).unwrap();
        let xc = x.clone();
        let err = grad_check(|w| xc.conv2d(w, None, spec).unwrap().powf(2.0).sum(), &w, 1e-5);
        assert!(err < 1e-8, "depthwise weight fd error {err}");
        let err = grad_check(|x| x.conv2d(&w, None, spec).unwrap().powf(2.0).sum(), &x, 1e-5);
        assert!(err < 1e-8, "depthwise input fd error {err}");
    }
}
