//! Operations over the two trailing (spatial) dimensions; leading dimensions are
//! treated as independent planes.

use crate::tensor::Tensor;
use crate::var::Var;
use crate::{Error, Result};

fn planes(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::Shape(format!("need at least 2 dims, got {shape:?}")));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    Ok((shape[..shape.len() - 2].iter().product(), h, w))
}

fn with_spatial(shape: &[usize], h: usize, w: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    let nd = s.len();
    s[nd - 2] = h;
    s[nd - 1] = w;
    s
}

/// Number of window positions along one axis.
fn positions(len: usize, k: usize, step: usize) -> usize {
    (len - k) / step + 1
}

/// PyTorch-style (`align_corners = false`) source coordinate for bilinear resampling.
fn bilinear_taps(out: usize, inp: usize) -> Vec<(usize, usize, f64)> {
    let scale = inp as f64 / out as f64;
    (0..out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(inp - 1);
            let i1 = (i0 + 1).min(inp - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

impl Var {
    /// Non-overlapping `k×k` average pooling; trailing rows/columns that do not fill
    /// a window are dropped.
    pub fn avg_pool2d(&self, k: usize) -> Result<Var> {
        let (np, h, w) = planes(self.shape())?;
        if k == 0 || h < k || w < k {
            return Err(Error::Shape(format!("avg_pool2d({k}) on {h}x{w}")));
        }
        let (ho, wo) = (h / k, w / k);
        let inv = 1.0 / (k * k) as f64;
        let x = self.value().data();
        let mut out = vec![0.0; np * ho * wo];
        for p in 0..np {
            let src = &x[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
            for oy in 0..ho {
                for dy in 0..k {
                    let row = &src[(oy * k + dy) * w..(oy * k + dy + 1) * w];
                    for ox in 0..wo {
                        dst[oy * wo + ox] += row[ox * k..ox * k + k].iter().sum::<f64>();
                    }
                }
            }
            for v in dst.iter_mut() {
                *v *= inv;
            }
        }
        Ok(Var::from_op(
            Tensor::from_vec(&with_spatial(self.shape(), ho, wo), out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut dx = vec![0.0; np * h * w];
                for p in 0..np {
                    for y in 0..ho * k {
                        for x in 0..wo * k {
                            dx[p * h * w + y * w + x] = g[p * ho * wo + (y / k) * wo + x / k] * inv;
                        }
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }

    /// Bilinear resize of the spatial dimensions (half-pixel centers, edge clamped).
    pub fn upsample_bilinear(&self, out_h: usize, out_w: usize) -> Result<Var> {
        let (np, h, w) = planes(self.shape())?;
        if h == 0 || w == 0 || out_h == 0 || out_w == 0 {
            return Err(Error::Shape("bilinear resize of empty plane".into()));
        }
        let ty = bilinear_taps(out_h, h);
        let tx = bilinear_taps(out_w, w);
        let x = self.value().data();
        let mut out = vec![0.0; np * out_h * out_w];
        for p in 0..np {
            let src = &x[p * h * w..(p + 1) * h * w];
            for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
                for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                    let top = src[y0 * w + x0] * (1.0 - lx) + src[y0 * w + x1] * lx;
                    let bot = src[y1 * w + x0] * (1.0 - lx) + src[y1 * w + x1] * lx;
                    out[p * out_h * out_w + oy * out_w + ox] = top * (1.0 - ly) + bot * ly;
                }
            }
        }
        Ok(Var::from_op(
            Tensor::from_vec(&with_spatial(self.shape(), out_h, out_w), out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut dx = vec![0.0; np * h * w];
                for p in 0..np {
                    let d = &mut dx[p * h * w..(p + 1) * h * w];
                    for (oy, &(y0, y1, ly)) in ty.iter().enumerate() {
                        for (ox, &(x0, x1, lx)) in tx.iter().enumerate() {
                            let gv = g[p * out_h * out_w + oy * out_w + ox];
                            d[y0 * w + x0] += gv * (1.0 - ly) * (1.0 - lx);
                            d[y0 * w + x1] += gv * (1.0 - ly) * lx;
                            d[y1 * w + x0] += gv * ly * (1.0 - lx);
                            d[y1 * w + x1] += gv * ly * lx;
                        }
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }

    /// Mean over every `k×k` window taken with the given step ("valid" positions only).
    pub fn box_mean(&self, k: usize, step: usize) -> Result<Var> {
        let (np, h, w) = planes(self.shape())?;
        if k == 0 || step == 0 || h < k || w < k {
            return Err(Error::Shape(format!("box_mean({k}) on {h}x{w}")));
        }
        let (ho, wo) = (positions(h, k, step), positions(w, k, step));
        let inv = 1.0 / (k * k) as f64;
        let x = self.value().data();
        let mut out = vec![0.0; np * ho * wo];
        for p in 0..np {
            let src = &x[p * h * w..(p + 1) * h * w];
            // Column sums of height k, then a horizontal window sum.
            let mut colsum = vec![0.0; w];
            for oy in 0..ho {
                colsum.fill(0.0);
                for dy in 0..k {
                    let row = &src[(oy * step + dy) * w..(oy * step + dy + 1) * w];
                    for (c, v) in colsum.iter_mut().zip(row) {
                        *c += v;
                    }
                }
                for ox in 0..wo {
                    let s: f64 = colsum[ox * step..ox * step + k].iter().sum();
                    out[p * ho * wo + oy * wo + ox] = s * inv;
                }
            }
        }
        Ok(Var::from_op(
            Tensor::from_vec(&with_spatial(self.shape(), ho, wo), out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut dx = vec![0.0; np * h * w];
                for p in 0..np {
                    let d = &mut dx[p * h * w..(p + 1) * h * w];
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let gv = g[p * ho * wo + oy * wo + ox] * inv;
                            for dy in 0..k {
                                let row = &mut d[(oy * step + dy) * w..(oy * step + dy + 1) * w];
                                for v in &mut row[ox * step..ox * step + k] {
                                    *v += gv;
                                }
                            }
                        }
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }

    /// Per-window Pearson correlation `cov / (σ₁σ₂ + eps)` between `self` and
    /// `other` over `k×k` windows with the given step. Windows where either input
    /// is constant yield 0 with zero gradient.
    pub fn patch_pearson(&self, other: &Var, k: usize, step: usize, eps: f64) -> Result<Var> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "patch_pearson shapes {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (np, h, w) = planes(self.shape())?;
        if k == 0 || step == 0 || h < k || w < k {
            return Err(Error::Shape(format!("patch_pearson({k}) on {h}x{w}")));
        }
        let (ho, wo) = (positions(h, k, step), positions(w, k, step));
        let n = (k * k) as f64;
        let window_stats = move |a: &[f64], b: &[f64], y0: usize, x0: usize| {
            let (mut sa, mut sb) = (0.0, 0.0);
            for dy in 0..k {
                for dx in 0..k {
                    let i = (y0 + dy) * w + x0 + dx;
                    sa += a[i];
                    sb += b[i];
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut va, mut vb, mut c) = (0.0, 0.0, 0.0);
            for dy in 0..k {
                for dx in 0..k {
                    let i = (y0 + dy) * w + x0 + dx;
                    let (da, db) = (a[i] - ma, b[i] - mb);
                    va += da * da;
                    vb += db * db;
                    c += da * db;
                }
            }
            (ma, mb, va / n, vb / n, c / n)
        };
        let (xa, xb) = (self.value().data(), other.value().data());
        let mut out = vec![0.0; np * ho * wo];
        for p in 0..np {
            let (a, b) = (&xa[p * h * w..(p + 1) * h * w], &xb[p * h * w..(p + 1) * h * w]);
            for oy in 0..ho {
                for ox in 0..wo {
                    let (_, _, va, vb, c) = window_stats(a, b, oy * step, ox * step);
                    out[p * ho * wo + oy * wo + ox] = if va > 0.0 && vb > 0.0 {
                        c / ((va * vb).sqrt() + eps)
                    } else {
                        0.0
                    };
                }
            }
        }
        Ok(Var::from_op(
            Tensor::from_vec(&with_spatial(self.shape(), ho, wo), out)?,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents, _| {
                let (xa, xb) = (parents[0].value().data(), parents[1].value().data());
                let g = g.data();
                let mut da = vec![0.0; np * h * w];
                let mut db = vec![0.0; np * h * w];
                for p in 0..np {
                    let (a, b) = (&xa[p * h * w..(p + 1) * h * w], &xb[p * h * w..(p + 1) * h * w]);
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let gv = g[p * ho * wo + oy * wo + ox];
                            let (y0, x0) = (oy * step, ox * step);
                            let (ma, mb, va, vb, c) = window_stats(a, b, y0, x0);
                            if gv == 0.0 || !(va > 0.0 && vb > 0.0) {
                                continue;
                            }
                            let s = (va * vb).sqrt();
                            let den = s + eps;
                            // d rho/d a_i = [(b_i - mb)/n · den - c · vb (a_i - ma)/(n s)] / den²
                            let inv_den2 = 1.0 / (den * den);
                            for dy in 0..k {
                                for dx in 0..k {
                                    let i = (y0 + dy) * w + x0 + dx;
                                    let (ca, cb) = (a[i] - ma, b[i] - mb);
                                    let ga = (cb / n * den - c * vb * ca / (n * s)) * inv_den2;
                                    let gb = (ca / n * den - c * va * cb / (n * s)) * inv_den2;
                                    da[p * h * w + i] += gv * ga;
                                    db[p * h * w + i] += gv * gb;
                                }
                            }
                        }
                    }
                }
                vec![
                    parents[0]
                        .requires_grad()
                        .then(|| Tensor::from_vec(parents[0].shape(), da).expect("shape")),
                    parents[1]
                        .requires_grad()
                        .then(|| Tensor::from_vec(parents[1].shape(), db).expect("shape")),
                ]
            }),
        ))
    }
}
