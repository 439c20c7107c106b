//! Batch normalization over `N,H,W` per channel, with gradients for the
//! train-mode normalization path and the eval-mode affine path.

use super::{Result, Tensor, TensorError};

impl Tensor {
    /// Train-mode batch norm. Normalizes each channel over `N*H*W`, applies
    /// the affine `gamma * xhat + beta`, and updates the running statistics
    /// in place: `running = (1 - momentum) * running + momentum * batch`.
    /// Batch variance is the biased (population) estimate everywhere.
    pub fn batchnorm2d_train(
        &self,
        gamma: &Tensor,
        beta: &Tensor,
        running_mean: &mut [f64],
        running_var: &mut [f64],
        momentum: f64,
        eps: f64,
    ) -> Result<Tensor> {
        let [n, c, h, w] = self.shape();
        check_affine(c, gamma, beta)?;
        check_eps(eps)?;
        let m = (n * h * w) as f64;
        let xd = self.data();
        let gd = gamma.data();
        let bd = beta.data();

        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for_each_channel(n, c, h, w, |ch, idx| mean[ch] += xd[idx]);
        for v in &mut mean {
            *v /= m;
        }
        for_each_channel(n, c, h, w, |ch, idx| {
            let d = xd[idx] - mean[ch];
            var[ch] += d * d;
        });
        for v in &mut var {
            *v /= m;
        }
        for ch in 0..c {
            running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * mean[ch];
            running_var[ch] = (1.0 - momentum) * running_var[ch] + momentum * var[ch];
        }

        let std: Vec<f64> = var.iter().map(|v| (v + eps).sqrt()).collect();
        let mut xhat = vec![0.0; xd.len()];
        let mut out = vec![0.0; xd.len()];
        for_each_channel(n, c, h, w, |ch, idx| {
            let xh = (xd[idx] - mean[ch]) / std[ch];
            xhat[idx] = xh;
            out[idx] = gd[ch] * xh + bd[ch];
        });

        let x_t = self.clone();
        let g_t = gamma.clone();
        let b_t = beta.clone();
        Ok(Tensor::result(
            [n, c, h, w],
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |gout| {
                let gd = g_t.data();
                let mut sum_dy = vec![0.0; c];
                let mut sum_dy_xhat = vec![0.0; c];
                for_each_channel(n, c, h, w, |ch, idx| {
                    sum_dy[ch] += gout[idx];
                    sum_dy_xhat[ch] += gout[idx] * xhat[idx];
                });
                let mut gx = vec![0.0; xhat.len()];
                for_each_channel(n, c, h, w, |ch, idx| {
                    gx[idx] = gd[ch] / std[ch]
                        * (gout[idx] - sum_dy[ch] / m - xhat[idx] * sum_dy_xhat[ch] / m);
                });
                x_t.accumulate_grad(&gx);
                g_t.accumulate_grad(&sum_dy_xhat);
                b_t.accumulate_grad(&sum_dy);
            },
        ))
    }

    /// Eval-mode batch norm using frozen running statistics.
    pub fn batchnorm2d_eval(
        &self,
        gamma: &Tensor,
        beta: &Tensor,
        running_mean: &[f64],
        running_var: &[f64],
        eps: f64,
    ) -> Result<Tensor> {
        let [n, c, h, w] = self.shape();
        check_affine(c, gamma, beta)?;
        check_eps(eps)?;
        let xd = self.data();
        let gd = gamma.data();
        let bd = beta.data();
        let std: Vec<f64> = running_var.iter().map(|v| (v + eps).sqrt()).collect();
        let mut xhat = vec![0.0; xd.len()];
        let mut out = vec![0.0; xd.len()];
        for_each_channel(n, c, h, w, |ch, idx| {
            let xh = (xd[idx] - running_mean[ch]) / std[ch];
            xhat[idx] = xh;
            out[idx] = gd[ch] * xh + bd[ch];
        });
        let x_t = self.clone();
        let g_t = gamma.clone();
        let b_t = beta.clone();
        Ok(Tensor::result(
            [n, c, h, w],
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |gout| {
                let gd = g_t.data();
                let mut gx = vec![0.0; xhat.len()];
                let mut ggamma = vec![0.0; c];
                let mut gbeta = vec![0.0; c];
                for_each_channel(n, c, h, w, |ch, idx| {
                    gx[idx] = gout[idx] * gd[ch] / std[ch];
                    ggamma[ch] += gout[idx] * xhat[idx];
                    gbeta[ch] += gout[idx];
                });
                x_t.accumulate_grad(&gx);
                g_t.accumulate_grad(&ggamma);
                b_t.accumulate_grad(&gbeta);
            },
        ))
    }
}

fn check_affine(c: usize, gamma: &Tensor, beta: &Tensor) -> Result<()> {
    for (name, t) in [("gamma", gamma), ("beta", beta)] {
        if t.shape() != [c, 1, 1, 1] {
            return Err(TensorError::ShapeMismatch {
                op: "batchnorm2d",
                detail: format!("{name} has shape {:?}, expected [{c},1,1,1]", t.shape()),
            });
        }
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps <= 0.0 {
        return Err(TensorError::InvalidArgument { op: "batchnorm2d", detail: "eps must be > 0".into() });
    }
    Ok(())
}

fn for_each_channel(n: usize, c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize)) {
    let hw = h * w;
    for ni in 0..n {
        for ch in 0..c {
            let base = (ni * c + ch) * hw;
            for i in 0..hw {
                f(ch, base + i);
            }
        }
    }
}
