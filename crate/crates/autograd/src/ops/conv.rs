use crate::ops::linalg::gemm;
use crate::tensor::Tensor;
use crate::var::Var;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Unfolds one sample `[cin, h, w]` into columns `[cin·kh·kw, ho·wo]`.
fn im2col(x: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let p = g.p();
    let mut row = 0;
    for ci in 0..g.cin {
        let plane = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let out_row = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *o = if ix < 0 || ix >= g.w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into `[cin, h, w]`.
fn col2im(cols: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let p = g.p();
    let mut row = 0;
    for ci in 0..g.cin {
        let plane = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            dst[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

impl Var {
    /// 2-D cross-correlation of `[n, cin, h, w]` input with `[cout, cin, kh, kw]`
    /// weights, zero padding, optional `[cout]` bias.
    pub fn conv2d(&self, weight: &Var, bias: Option<&Var>, stride: usize, pad: usize) -> Result<Var> {
        let (n, cin, h, w) = self.value().dims4()?;
        let (cout, wcin, kh, kw) = weight.value().dims4()?;
        if wcin != cin {
            return Err(Error::Shape(format!(
                "conv2d input has {cin} channels, weight expects {wcin}"
            )));
        }
        if let Some(b) = bias {
            if b.shape() != [cout] {
                return Err(Error::Shape(format!("conv2d bias shape {:?}", b.shape())));
            }
        }
        if stride == 0 || h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(Error::Shape(format!(
                "conv2d kernel {kh}x{kw} stride {stride} does not fit {h}x{w} (pad {pad})"
            )));
        }
        let g = ConvGeom {
            cin,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            ho: (h + 2 * pad - kh) / stride + 1,
            wo: (w + 2 * pad - kw) / stride + 1,
        };
        let (k, p) = (g.k(), g.p());
        let x = self.value().data();
        let wt = weight.value().data();
        let mut out = vec![0.0; n * cout * p];
        let mut cols = if g.is_pointwise() { Vec::new() } else { vec![0.0; k * p] };
        for s in 0..n {
            let xs = &x[s * cin * h * w..(s + 1) * cin * h * w];
            let o = &mut out[s * cout * p..(s + 1) * cout * p];
            if let Some(b) = bias {
                for (c, chunk) in o.chunks_mut(p).enumerate() {
                    chunk.fill(b.value().data()[c]);
                }
            }
            let beta = if bias.is_some() { 1.0 } else { 0.0 };
            if g.is_pointwise() {
                gemm(cout, k, p, wt, false, xs, false, beta, o);
            } else {
                im2col(xs, &g, &mut cols);
                gemm(cout, k, p, wt, false, &cols, false, beta, o);
            }
        }
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        Ok(Var::from_op(
            Tensor::from_vec(&[n, cout, g.ho, g.wo], out)?,
            parents,
            Box::new(move |grad, parents, _| {
                let gd = grad.data();
                let x = parents[0].value().data();
                let wt = parents[1].value().data();
                let want_x = parents[0].requires_grad();
                let want_w = parents[1].requires_grad();
                let mut dx = want_x.then(|| vec![0.0; n * cin * h * w]);
                let mut dw = want_w.then(|| vec![0.0; cout * k]);
                let mut cols = vec![0.0; k * p];
                for s in 0..n {
                    let gs = &gd[s * cout * p..(s + 1) * cout * p];
                    let xs = &x[s * cin * h * w..(s + 1) * cin * h * w];
                    if let Some(dw) = dw.as_mut() {
                        if g.is_pointwise() {
                            gemm(cout, p, k, gs, false, xs, true, 1.0, dw);
                        } else {
                            im2col(xs, &g, &mut cols);
                            gemm(cout, p, k, gs, false, &cols, true, 1.0, dw);
                        }
                    }
                    if let Some(dx) = dx.as_mut() {
                        let dxs = &mut dx[s * cin * h * w..(s + 1) * cin * h * w];
                        if g.is_pointwise() {
                            gemm(k, cout, p, wt, true, gs, false, 1.0, dxs);
                        } else {
                            gemm(k, cout, p, wt, true, gs, false, 0.0, &mut cols);
                            col2im(&cols, &g, dxs);
                        }
                    }
                }
                let mut grads = vec![
                    dx.map(|d| Tensor::from_vec(parents[0].shape(), d).expect("shape")),
                    dw.map(|d| Tensor::from_vec(parents[1].shape(), d).expect("shape")),
                ];
                if parents.len() == 3 {
                    let db = parents[2].requires_grad().then(|| {
                        let mut db = vec![0.0; cout];
                        for s in 0..n {
                            for (c, d) in db.iter_mut().enumerate() {
                                let off = (s * cout + c) * p;
                                *d += gd[off..off + p].iter().sum::<f64>();
                            }
                        }
                        Tensor::from_vec(&[cout], db).expect("shape")
                    });
                    grads.push(db);
                }
                grads
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution.
    fn naive(x: &Tensor, w: &Tensor, b: &[f64], stride: usize, pad: usize) -> Tensor {
        let (n, cin, h, wd) = x.dims4().unwrap();
        let (cout, _, kh, kw) = w.dims4().unwrap();
        let ho = (h + 2 * pad - kh) / stride + 1;
        let wo = (wd + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; n * cout * ho * wo];
        for s in 0..n {
            for co in 0..cout {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = b[co];
                        for ci in 0..cin {
                            for ki in 0..kh {
                                for kj in 0..kw {
                                    let iy = (oy * stride + ki) as isize - pad as isize;
                                    let ix = (ox * stride + kj) as isize - pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        acc += x.at(&[s, ci, iy as usize, ix as usize])
                                            * w.at(&[co, ci, ki, kj]);
                                    }
                                }
                            }
                        }
                        out[((s * cout + co) * ho + oy) * wo + ox] = acc;
                    }
                }
            }
        }
        Tensor::from_vec(&[n, cout, ho, wo], out).unwrap()
    }

    fn seq(shape: &[usize], scale: f64) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) * scale).collect()).unwrap()
    }

    #[test]
    fn matches_naive_convolution() {
        for &(k, stride, pad) in &[(3, 1, 1), (4, 2, 1), (1, 1, 0), (3, 2, 0)] {
            let x = seq(&[2, 3, 7, 6], 0.1);
            let w = seq(&[4, 3, k, k], 0.05);
            let b = [0.1, -0.2, 0.3, 0.0];
            let y = Var::constant(x.clone())
                .conv2d(
                    &Var::constant(w.clone()),
                    Some(&Var::constant(Tensor::from_vec(&[4], b.to_vec()).unwrap())),
                    stride,
                    pad,
                )
                .unwrap();
            let r = naive(&x, &w, &b, stride, pad);
            assert_eq!(y.shape(), r.shape());
            for (a, b) in y.value().data().iter().zip(r.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = seq(&[1, 2, 5, 5], 0.1);
        let w = seq(&[3, 2, 3, 3], 0.07);
        let b = Tensor::from_vec(&[3], vec![0.1, 0.2, -0.1]).unwrap();
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
            let y = Var::constant(x.clone())
                .conv2d(&Var::constant(w.clone()), Some(&Var::constant(b.clone())), 2, 1)
                .unwrap();
            y.value().data().iter().enumerate().map(|(i, v)| v * v * (1.0 + i as f64 * 0.01)).sum()
        };
        let xv = Var::leaf(x.clone());
        let wv = Var::leaf(w.clone());
        let bv = Var::leaf(b.clone());
        let y = xv.conv2d(&wv, Some(&bv), 2, 1).unwrap();
        let weights = Tensor::from_vec(
            y.shape(),
            (0..y.value().numel()).map(|i| 1.0 + i as f64 * 0.01).collect(),
        )
        .unwrap();
        let l = y.square().mul(&Var::constant(weights)).unwrap().sum();
        let g = l.backward().unwrap();
        let eps = 1e-6;
        for (t, gv, which) in [(&x, g.get(&xv).unwrap(), 0), (&w, g.get(&wv).unwrap(), 1), (&b, g.get(&bv).unwrap(), 2)] {
            for i in 0..t.numel() {
                let mut p = t.clone();
                p.data_mut()[i] += eps;
                let mut m = t.clone();
                m.data_mut()[i] -= eps;
                let (fp, fm) = match which {
                    0 => (loss(&p, &w, &b), loss(&m, &w, &b)),
                    1 => (loss(&x, &p, &b), loss(&x, &m, &b)),
                    _ => (loss(&x, &w, &p), loss(&x, &w, &m)),
                };
                let fd = (fp - fm) / (2.0 * eps);
                assert!((fd - gv.data()[i]).abs() < 1e-6, "param {which} idx {i}: {fd} vs {}", gv.data()[i]);
            }
        }
    }
}
