use crate::tensor::Tensor;
use crate::var::Var;
use crate::{Error, Result};

/// `c = a·b + beta·c` for row-major operands. `a` is `m×k` (stored `k×m` when
/// `ta`), `b` is `k×n` (stored `n×k` when `tb`), `c` is `m×n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths are checked above and the strides address only
    // elements inside the m×k, k×n and m×n extents.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Var {
    /// Matrix product of two 2-D vars.
    pub fn matmul(&self, other: &Var) -> Result<Var> {
        let (m, k) = match self.shape() {
            &[m, k] => (m, k),
            s => return Err(Error::Shape(format!("matmul lhs must be 2-D, got {s:?}"))),
        };
        let n = match other.shape() {
            &[k2, n] if k2 == k => n,
            s => return Err(Error::Shape(format!("matmul [{m}, {k}] x {s:?}"))),
        };
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value().data(), false, other.value().data(), false, 0.0, &mut out);
        Ok(Var::from_op(
            Tensor::from_vec(&[m, n], out)?,
            vec![self.clone(), other.clone()],
            Box::new(move |g, parents, _| {
                let (a, b) = (&parents[0], &parents[1]);
                let da = a.requires_grad().then(|| {
                    let mut d = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, b.value().data(), true, 0.0, &mut d);
                    Tensor::from_vec(&[m, k], d).expect("shape")
                });
                let db = b.requires_grad().then(|| {
                    let mut d = vec![0.0; k * n];
                    gemm(k, m, n, a.value().data(), true, g.data(), false, 0.0, &mut d);
                    Tensor::from_vec(&[k, n], d).expect("shape")
                });
                vec![da, db]
            }),
        ))
    }
}
