use crate::tensor::{broadcast_shape, broadcast_to, Tensor};
use crate::var::Var;
use crate::Result;

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
        }
    }
}

fn binary(a: &Var, b: &Var, op: BinOp) -> Result<Var> {
    let shape = broadcast_shape(a.shape(), b.shape())?;
    let value = if a.shape() == b.shape() {
        a.value().zip_map(b.value(), |x, y| op.apply(x, y))
    } else {
        let ab = broadcast_to(a.value(), &shape);
        let bb = broadcast_to(b.value(), &shape);
        ab.zip_map(&bb, |x, y| op.apply(x, y))
    };
    Ok(Var::from_op(
        value,
        vec![a.clone(), b.clone()],
        Box::new(move |g, parents, out| {
            let (pa, pb) = (&parents[0], &parents[1]);
            let sa = pa.shape();
            let sb = pb.shape();
            let want_a = pa.requires_grad();
            let want_b = pb.requires_grad();
            match op {
                BinOp::Add => vec![
                    want_a.then(|| g.sum_to_shape(sa)),
                    want_b.then(|| g.sum_to_shape(sb)),
                ],
                BinOp::Sub => vec![
                    want_a.then(|| g.sum_to_shape(sa)),
                    want_b.then(|| g.map(|v| -v).sum_to_shape(sb)),
                ],
                BinOp::Mul => {
                    let shape = g.shape();
                    vec![
                        want_a.then(|| {
                            g.zip_map(&broadcast_to(pb.value(), shape), |g, y| g * y).sum_to_shape(sa)
                        }),
                        want_b.then(|| {
                            g.zip_map(&broadcast_to(pa.value(), shape), |g, x| g * x).sum_to_shape(sb)
                        }),
                    ]
                }
                BinOp::Div => {
                    let shape = g.shape();
                    let bb = broadcast_to(pb.value(), shape);
                    vec![
                        want_a.then(|| g.zip_map(&bb, |g, y| g / y).sum_to_shape(sa)),
                        want_b.then(|| {
                            let t = g.zip_map(out, |g, o| g * o);
                            t.zip_map(&bb, |t, y| -t / y).sum_to_shape(sb)
                        }),
                    ]
                }
            }
        }),
    ))
}

/// Elementwise unary op given the forward map and the derivative as a function of
/// `(input, output)`.
fn unary(x: &Var, f: impl Fn(f64) -> f64, df: impl Fn(f64, f64) -> f64 + 'static) -> Var {
    let value = x.value().map(f);
    Var::from_op(
        value,
        vec![x.clone()],
        Box::new(move |g, parents, out| {
            let x = parents[0].value().data();
            let data = g
                .data()
                .iter()
                .zip(x)
                .zip(out.data())
                .map(|((&g, &x), &o)| g * df(x, o))
                .collect();
            vec![Some(Tensor::from_vec(g.shape(), data).expect("same shape"))]
        }),
    )
}

impl Var {
    /// Broadcasting addition.
    pub fn add(&self, other: &Var) -> Result<Var> {
        binary(self, other, BinOp::Add)
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        binary(self, other, BinOp::Sub)
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        binary(self, other, BinOp::Mul)
    }

    pub fn div(&self, other: &Var) -> Result<Var> {
        binary(self, other, BinOp::Div)
    }

    pub fn scale(&self, c: f64) -> Var {
        unary(self, move |x| c * x, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Var {
        unary(self, move |x| x + c, |_, _| 1.0)
    }

    pub fn neg(&self) -> Var {
        self.scale(-1.0)
    }

    pub fn square(&self) -> Var {
        unary(self, |x| x * x, |x, _| 2.0 * x)
    }

    pub fn exp(&self) -> Var {
        unary(self, f64::exp, |_, o| o)
    }

    pub fn ln(&self) -> Var {
        unary(self, f64::ln, |x, _| 1.0 / x)
    }

    /// Square root whose derivative is taken as zero at (and below) zero, so exact
    /// zeros such as the spread of a constant signal stay differentiable.
    pub fn sqrt(&self) -> Var {
        unary(self, |x| x.max(0.0).sqrt(), |_, o| if o > 0.0 { 0.5 / o } else { 0.0 })
    }

    /// Absolute value with subgradient 0 at 0.
    pub fn abs(&self) -> Var {
        unary(self, f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn sigmoid(&self) -> Var {
        unary(
            self,
            |x| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            },
            |_, o| o * (1.0 - o),
        )
    }

    pub fn leaky_relu(&self, slope: f64) -> Var {
        unary(self, move |x| if x > 0.0 { x } else { slope * x }, move |x, _| if x > 0.0 { 1.0 } else { slope })
    }

    pub fn powf(&self, p: f64) -> Var {
        unary(self, move |x| x.powf(p), move |x, _| p * x.powf(p - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_mul_gradients() {
        let a = Var::leaf(Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let b = Var::leaf(Tensor::from_vec(&[3], vec![1.0, 10.0, 100.0]).unwrap());
        let y = a.mul(&b).unwrap().sum();
        let g = y.backward().unwrap();
        assert_eq!(g.get(&a).unwrap().data(), &[1.0, 10.0, 100.0, 1.0, 10.0, 100.0]);
        assert_eq!(g.get(&b).unwrap().data(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn constants_do_not_record() {
        let a = Var::constant(Tensor::ones(&[3]));
        let y = a.exp().sum();
        assert!(!y.requires_grad());
        assert!(y.backward().unwrap().is_empty());
    }

    #[test]
    fn sqrt_at_zero_has_zero_gradient() {
        let a = Var::leaf(Tensor::from_vec(&[2], vec![0.0, 4.0]).unwrap());
        let g = a.sqrt().sum().backward().unwrap();
        assert_eq!(g.get(&a).unwrap().data(), &[0.0, 0.25]);
    }

    #[test]
    fn shared_subexpression_accumulates() {
        let a = Var::leaf(Tensor::scalar(3.0));
        let y = a.mul(&a).unwrap().add(&a).unwrap();
        let g = y.backward().unwrap();
        assert_eq!(g.get(&a).unwrap().item(), 7.0);
    }
}
