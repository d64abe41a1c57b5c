use crate::tensor::{numel, Tensor};
use crate::var::Var;
use crate::{Error, Result};

/// Splits a shape around `axis` into (outer, n, inner) extents.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

fn reduced_shape(shape: &[usize], axis: usize, keepdim: bool) -> Vec<usize> {
    let mut s = shape.to_vec();
    if keepdim {
        s[axis] = 1;
    } else {
        s.remove(axis);
    }
    s
}

fn check_axis(shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::Shape(format!("axis {axis} out of range for {shape:?}")));
    }
    Ok(())
}

impl Var {
    /// Sum of all elements as a scalar.
    pub fn sum(&self) -> Var {
        let value = Tensor::scalar(self.value().sum());
        Var::from_op(
            value,
            vec![self.clone()],
            Box::new(|g, parents, _| vec![Some(Tensor::full(parents[0].shape(), g.item()))]),
        )
    }

    pub fn mean(&self) -> Var {
        let n = self.value().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Var> {
        check_axis(self.shape(), axis)?;
        let (outer, n, inner) = split_axis(self.shape(), axis);
        let x = self.value().data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let src = &x[(o * n + k) * inner..(o * n + k + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let shape = reduced_shape(self.shape(), axis, keepdim);
        Ok(Var::from_op(
            Tensor::from_vec(&shape, out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut dx = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for k in 0..n {
                        dx[(o * n + k) * inner..(o * n + k + 1) * inner]
                            .copy_from_slice(&g[o * inner..(o + 1) * inner]);
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Result<Var> {
        check_axis(self.shape(), axis)?;
        let n = self.shape()[axis] as f64;
        Ok(self.sum_axis(axis, keepdim)?.scale(1.0 / n))
    }

    /// Maximum along `axis`; the gradient goes to the first maximal element.
    pub fn max_axis(&self, axis: usize, keepdim: bool) -> Result<Var> {
        check_axis(self.shape(), axis)?;
        let (outer, n, inner) = split_axis(self.shape(), axis);
        if n == 0 {
            return Err(Error::Shape("max over an empty axis".into()));
        }
        let x = self.value().data();
        let mut out = vec![f64::NEG_INFINITY; outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                for i in 0..inner {
                    let v = x[(o * n + k) * inner + i];
                    let slot = o * inner + i;
                    if v > out[slot] || k == 0 {
                        out[slot] = v;
                        arg[slot] = k;
                    }
                }
            }
        }
        let shape = reduced_shape(self.shape(), axis, keepdim);
        Ok(Var::from_op(
            Tensor::from_vec(&shape, out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut dx = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let slot = o * inner + i;
                        dx[(o * n + arg[slot]) * inner + i] += g[slot];
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }

    /// Numerically stable `ln(sum(exp(x)))` along `axis`.
    pub fn logsumexp_axis(&self, axis: usize, keepdim: bool) -> Result<Var> {
        check_axis(self.shape(), axis)?;
        let (outer, n, inner) = split_axis(self.shape(), axis);
        let x = self.value().data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| x[(o * n + k) * inner + i];
                let m = (0..n).map(at).fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = (0..n).map(|k| (at(k) - m).exp()).sum();
                out[o * inner + i] = m + s.ln();
            }
        }
        let shape = reduced_shape(self.shape(), axis, keepdim);
        Ok(Var::from_op(
            Tensor::from_vec(&shape, out)?,
            vec![self.clone()],
            Box::new(move |g, parents, out| {
                let x = parents[0].value().data();
                let (g, out) = (g.data(), out.data());
                let mut dx = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let slot = o * inner + i;
                        for k in 0..n {
                            let at = (o * n + k) * inner + i;
                            dx[at] = g[slot] * (x[at] - out[slot]).exp();
                        }
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_axis_middle() {
        let x = Var::leaf(Tensor::from_vec(&[2, 3, 2], (0..12).map(f64::from).collect()).unwrap());
        let s = x.sum_axis(1, false).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.value().data(), &[6.0, 9.0, 24.0, 27.0]);
        let g = s.sum().backward().unwrap();
        assert!(g.get(&x).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn max_axis_routes_gradient() {
        let x = Var::leaf(Tensor::from_vec(&[2, 3], vec![1.0, 5.0, 2.0, 7.0, 0.0, 7.0]).unwrap());
        let m = x.max_axis(1, false).unwrap();
        assert_eq!(m.value().data(), &[5.0, 7.0]);
        let g = m.sum().backward().unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn logsumexp_is_stable() {
        let x = Var::leaf(Tensor::from_vec(&[3], vec![1e4, 1e4, -1e4]).unwrap());
        let l = x.logsumexp_axis(0, false).unwrap();
        assert!((l.item() - (1e4 + 2f64.ln())).abs() < 1e-9);
        let g = l.backward().unwrap();
        let d = g.get(&x).unwrap().data().to_vec();
        assert!((d[0] - 0.5).abs() < 1e-12 && d[2] == 0.0);
    }
}
