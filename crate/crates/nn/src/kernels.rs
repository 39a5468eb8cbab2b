//! Raw kernels over NCHW buffers.

/// Geometry of a 2-D convolution or pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window {
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        assert!(
            h + 2 * self.pad >= self.kh && w + 2 * self.pad >= self.kw,
            "window {self:?} larger than padded input {h}x{w}"
        );
        (
            (h + 2 * self.pad - self.kh) / self.stride + 1,
            (w + 2 * self.pad - self.kw) / self.stride + 1,
        )
    }

    fn source(&self, o: usize, k: usize, len: usize) -> Option<usize> {
        let i = (o * self.stride + k) as isize - self.pad as isize;
        (i >= 0 && (i as usize) < len).then_some(i as usize)
    }
}

/// `c[m×n] = a[m×k] · b[k×n] + beta·c`; operands given with row and column
/// strides so transposes are free.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        for v in &mut c[..m * n] {
            *v *= beta;
        }
        return;
    }
    assert!((m - 1) * rsa + (k - 1) * csa < a.len(), "lhs out of bounds");
    assert!((k - 1) * rsb + (n - 1) * csb < b.len(), "rhs out of bounds");
    // SAFETY: bounds of all three operands are checked above and the output
    // does not alias the inputs (distinct borrows).
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds `x[n,c,h,w]` into `col[c·kh·kw, n·ho·wo]`.
pub(crate) fn im2col(x: &[f32], (n, c, h, w): (usize, usize, usize, usize), win: Window) -> Vec<f32> {
    let (ho, wo) = win.out_size(h, w);
    let p = ho * wo;
    let np = n * p;
    let mut col = vec![0.0; c * win.kh * win.kw * np];
    for ci in 0..c {
        for ki in 0..win.kh {
            for kj in 0..win.kw {
                let row = ((ci * win.kh + ki) * win.kw + kj) * np;
                for b in 0..n {
                    let src = &x[(b * c + ci) * h * w..][..h * w];
                    let dst = &mut col[row + b * p..][..p];
                    for oy in 0..ho {
                        let Some(iy) = win.source(oy, ki, h) else { continue };
                        let srow = &src[iy * w..][..w];
                        let drow = &mut dst[oy * wo..][..wo];
                        for (ox, d) in drow.iter_mut().enumerate() {
                            if let Some(ix) = win.source(ox, kj, w) {
                                *d = srow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: accumulates `col` back into `dx`.
pub(crate) fn col2im(col: &[f32], (n, c, h, w): (usize, usize, usize, usize), win: Window, dx: &mut [f32]) {
    let (ho, wo) = win.out_size(h, w);
    let p = ho * wo;
    let np = n * p;
    for ci in 0..c {
        for ki in 0..win.kh {
            for kj in 0..win.kw {
                let row = ((ci * win.kh + ki) * win.kw + kj) * np;
                for b in 0..n {
                    let dst = &mut dx[(b * c + ci) * h * w..][..h * w];
                    let src = &col[row + b * p..][..p];
                    for oy in 0..ho {
                        let Some(iy) = win.source(oy, ki, h) else { continue };
                        let srow = &src[oy * wo..][..wo];
                        let drow = &mut dst[iy * w..][..w];
                        for (ox, &s) in srow.iter().enumerate() {
                            if let Some(ix) = win.source(ox, kj, w) {
                                drow[ix] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `[n, o, p]` ↔ `[o, n·p]`.
pub(crate) fn nop_to_onp(x: &[f32], n: usize, o: usize, p: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        for oc in 0..o {
            out[oc * n * p + b * p..][..p].copy_from_slice(&x[(b * o + oc) * p..][..p]);
        }
    }
    out
}

pub(crate) fn onp_to_nop(x: &[f32], n: usize, o: usize, p: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for b in 0..n {
        for oc in 0..o {
            out[(b * o + oc) * p..][..p].copy_from_slice(&x[oc * n * p + b * p..][..p]);
        }
    }
    out
}

/// Dense convolution, `w[o, c, kh, kw]`, no bias.
pub(crate) fn conv_forward(
    x: &[f32],
    dims: (usize, usize, usize, usize),
    w: &[f32],
    o: usize,
    win: Window,
) -> Vec<f32> {
    let (n, c, h, wd) = dims;
    let (ho, wo) = win.out_size(h, wd);
    let k = c * win.kh * win.kw;
    let np = n * ho * wo;
    let col = im2col(x, dims, win);
    let mut out = vec![0.0; o * np];
    gemm(o, k, np, w, (k, 1), &col, (np, 1), 0.0, &mut out);
    onp_to_nop(&out, n, o, ho * wo)
}

/// Returns `(dx, dw)` for [`conv_forward`].
pub(crate) fn conv_backward(
    x: &[f32],
    dims: (usize, usize, usize, usize),
    w: &[f32],
    o: usize,
    win: Window,
    dy: &[f32],
    need_dx: bool,
) -> (Option<Vec<f32>>, Vec<f32>) {
    let (n, c, h, wd) = dims;
    let (ho, wo) = win.out_size(h, wd);
    let k = c * win.kh * win.kw;
    let np = n * ho * wo;
    let dy_t = nop_to_onp(dy, n, o, ho * wo);
    let col = im2col(x, dims, win);
    let mut dw = vec![0.0; o * k];
    gemm(o, np, k, &dy_t, (np, 1), &col, (1, np), 0.0, &mut dw);
    let dx = need_dx.then(|| {
        let mut dcol = col;
        gemm(k, o, np, w, (1, k), &dy_t, (np, 1), 0.0, &mut dcol);
        let mut dx = vec![0.0; x.len()];
        col2im(&dcol, dims, win, &mut dx);
        dx
    });
    (dx, dw)
}

/// Depthwise convolution, `w[c, 1, kh, kw]`.
pub(crate) fn depthwise_forward(x: &[f32], (n, c, h, wd): (usize, usize, usize, usize), w: &[f32], win: Window) -> Vec<f32> {
    let (ho, wo) = win.out_size(h, wd);
    let kk = win.kh * win.kw;
    let mut out = vec![0.0; n * c * ho * wo];
    for b in 0..n {
        for ci in 0..c {
            let src = &x[(b * c + ci) * h * wd..][..h * wd];
            let ker = &w[ci * kk..][..kk];
            let dst = &mut out[(b * c + ci) * ho * wo..][..ho * wo];
            for ki in 0..win.kh {
                for kj in 0..win.kw {
                    let kv = ker[ki * win.kw + kj];
                    for oy in 0..ho {
                        let Some(iy) = win.source(oy, ki, h) else { continue };
                        for ox in 0..wo {
                            if let Some(ix) = win.source(ox, kj, wd) {
                                dst[oy * wo + ox] += kv * src[iy * wd + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn depthwise_backward(
    x: &[f32],
    (n, c, h, wd): (usize, usize, usize, usize),
    w: &[f32],
    win: Window,
    dy: &[f32],
) -> (Vec<f32>, Vec<f32>) {
    let (ho, wo) = win.out_size(h, wd);
    let kk = win.kh * win.kw;
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    for b in 0..n {
        for ci in 0..c {
            let base = (b * c + ci) * h * wd;
            let g = &dy[(b * c + ci) * ho * wo..][..ho * wo];
            for ki in 0..win.kh {
                for kj in 0..win.kw {
                    let kv = w[ci * kk + ki * win.kw + kj];
                    let mut acc = 0.0;
                    for oy in 0..ho {
                        let Some(iy) = win.source(oy, ki, h) else { continue };
                        for ox in 0..wo {
                            if let Some(ix) = win.source(ox, kj, wd) {
                                let gv = g[oy * wo + ox];
                                acc += gv * x[base + iy * wd + ix];
                                dx[base + iy * wd + ix] += gv * kv;
                            }
                        }
                    }
                    dw[ci * kk + ki * win.kw + kj] += acc;
                }
            }
        }
    }
    (dx, dw)
}

/// Max pooling; returns the output and the flat input index of each maximum.
/// Padding never wins.
pub(crate) fn max_pool(x: &[f32], (n, c, h, w): (usize, usize, usize, usize), win: Window) -> (Vec<f32>, Vec<u32>) {
    let (ho, wo) = win.out_size(h, w);
    let mut out = vec![0.0; n * c * ho * wo];
    let mut arg = vec![0u32; out.len()];
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f32::NEG_INFINITY;
                let mut best_i = usize::MAX;
                for ki in 0..win.kh {
                    let Some(iy) = win.source(oy, ki, h) else { continue };
                    for kj in 0..win.kw {
                        let Some(ix) = win.source(ox, kj, w) else { continue };
                        let v = x[base + iy * w + ix];
                        if best_i == usize::MAX || v > best {
                            best = v;
                            best_i = base + iy * w + ix;
                        }
                    }
                }
                let o = (plane * ho + oy) * wo + ox;
                out[o] = best;
                arg[o] = best_i as u32;
            }
        }
    }
    (out, arg)
}

/// Average pooling without padding.
pub(crate) fn avg_pool(x: &[f32], (n, c, h, w): (usize, usize, usize, usize), win: Window) -> Vec<f32> {
    let (ho, wo) = win.out_size(h, w);
    let scale = 1.0 / (win.kh * win.kw) as f32;
    let mut out = vec![0.0; n * c * ho * wo];
    for plane in 0..n * c {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0;
                for ki in 0..win.kh {
                    for kj in 0..win.kw {
                        acc += x[plane * h * w + (oy * win.stride + ki) * w + ox * win.stride + kj];
                    }
                }
                out[(plane * ho + oy) * wo + ox] = acc * scale;
            }
        }
    }
    out
}

pub(crate) fn avg_pool_backward(dy: &[f32], (n, c, h, w): (usize, usize, usize, usize), win: Window) -> Vec<f32> {
    let (ho, wo) = win.out_size(h, w);
    let scale = 1.0 / (win.kh * win.kw) as f32;
    let mut dx = vec![0.0; n * c * h * w];
    for plane in 0..n * c {
        for oy in 0..ho {
            for ox in 0..wo {
                let g = dy[(plane * ho + oy) * wo + ox] * scale;
                for ki in 0..win.kh {
                    for kj in 0..win.kw {
                        dx[plane * h * w + (oy * win.stride + ki) * w + ox * win.stride + kj] += g;
                    }
                }
            }
        }
    }
    dx
}
