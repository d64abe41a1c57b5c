use crate::ops::reduce::split_axis;
use crate::tensor::{broadcast_shape, broadcast_to, numel, strides, Tensor};
use crate::var::Var;
use crate::{Error, Result};

impl Var {
    pub fn reshape(&self, shape: &[usize]) -> Result<Var> {
        let value = self.value().reshape(shape)?;
        Ok(Var::from_op(
            value,
            vec![self.clone()],
            Box::new(|g, parents, _| vec![Some(g.clone().reshaped(parents[0].shape()))]),
        ))
    }

    /// Broadcasts to `shape` following numpy rules.
    pub fn expand(&self, shape: &[usize]) -> Result<Var> {
        let target = broadcast_shape(self.shape(), shape)?;
        if target != shape {
            return Err(Error::Shape(format!("cannot expand {:?} to {shape:?}", self.shape())));
        }
        Ok(Var::from_op(
            broadcast_to(self.value(), shape),
            vec![self.clone()],
            Box::new(|g, parents, _| vec![Some(g.sum_to_shape(parents[0].shape()))]),
        ))
    }

    /// Reorders dimensions: output dim `i` is input dim `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Var> {
        let shape = self.shape().to_vec();
        let nd = shape.len();
        let mut check = axes.to_vec();
        check.sort_unstable();
        if check != (0..nd).collect::<Vec<_>>() {
            return Err(Error::Shape(format!("bad permutation {axes:?} for {shape:?}")));
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
        let value = permute_tensor(self.value(), axes, &out_shape);
        let mut inverse = vec![0; nd];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        Ok(Var::from_op(
            value,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                vec![Some(permute_tensor(g, &inverse, parents[0].shape()))]
            }),
        ))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::Shape(format!("narrow({axis}, {start}, {len}) on {shape:?}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let x = self.value().data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&x[(o * n + start) * inner..(o * n + start + len) * inner]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        Ok(Var::from_op(
            Tensor::from_vec(&out_shape, out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let mut dx = vec![0.0; outer * n * inner];
                let g = g.data();
                for o in 0..outer {
                    dx[(o * n + start) * inner..(o * n + start + len) * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(vars: &[Var], axis: usize) -> Result<Var> {
        let first = vars.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let base = first.shape().to_vec();
        if axis >= base.len() {
            return Err(Error::Shape(format!("concat axis {axis} for {base:?}")));
        }
        let mut sizes = Vec::with_capacity(vars.len());
        for v in vars {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::Shape(format!("concat {:?} with {:?}", base, s)));
            }
            sizes.push(s[axis]);
        }
        let total: usize = sizes.iter().sum();
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &n) in vars.iter().zip(&sizes) {
                out.extend_from_slice(&v.value().data()[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let mut out_shape = base;
        out_shape[axis] = total;
        Ok(Var::from_op(
            Tensor::from_vec(&out_shape, out)?,
            vars.to_vec(),
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut offset = 0;
                let mut grads = Vec::with_capacity(parents.len());
                for (p, &n) in parents.iter().zip(&sizes) {
                    if p.requires_grad() {
                        let mut d = Vec::with_capacity(outer * n * inner);
                        for o in 0..outer {
                            let s = (o * total + offset) * inner;
                            d.extend_from_slice(&g[s..s + n * inner]);
                        }
                        grads.push(Some(Tensor::from_vec(p.shape(), d).expect("shape")));
                    } else {
                        grads.push(None);
                    }
                    offset += n;
                }
                grads
            }),
        ))
    }

    /// Gathers entries `indices` along `axis` (repeats allowed).
    pub fn index_select(&self, axis: usize, indices: &[usize]) -> Result<Var> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::Shape(format!("index_select axis {axis} for {shape:?}")));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= shape[axis]) {
            return Err(Error::Shape(format!("index {bad} out of range for {shape:?} axis {axis}")));
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let m = indices.len();
        let x = self.value().data();
        let mut out = Vec::with_capacity(outer * m * inner);
        for o in 0..outer {
            for &k in indices {
                out.extend_from_slice(&x[(o * n + k) * inner..(o * n + k + 1) * inner]);
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = m;
        let indices = indices.to_vec();
        Ok(Var::from_op(
            Tensor::from_vec(&out_shape, out)?,
            vec![self.clone()],
            Box::new(move |g, parents, _| {
                let g = g.data();
                let mut dx = vec![0.0; outer * n * inner];
                for o in 0..outer {
                    for (j, &k) in indices.iter().enumerate() {
                        let src = &g[(o * m + j) * inner..(o * m + j + 1) * inner];
                        let dst = &mut dx[(o * n + k) * inner..(o * n + k + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
                vec![Some(Tensor::from_vec(parents[0].shape(), dx).expect("shape"))]
            }),
        ))
    }
}

pub(crate) fn permute_tensor(t: &Tensor, axes: &[usize], out_shape: &[usize]) -> Tensor {
    let in_strides = strides(t.shape());
    let nd = axes.len();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let n = numel(out_shape);
    let x = t.data();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; nd];
    let mut src = 0usize;
    for _ in 0..n {
        out.push(x[src]);
        for d in (0..nd).rev() {
            idx[d] += 1;
            src += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            src -= src_strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    Tensor::from_vec(out_shape, out).expect("permute shape")
}
