use std::cell::Cell;

use autograd::Var;

use crate::error::{Error, Result};

thread_local! {
    static BUFFERS_CREATED: Cell<u64> = const { Cell::new(0) };
}

/// Channels taken from the previous frame: `floor(β·C)`.
pub fn split_size(beta: f64, channels: usize) -> usize {
    // The small bias keeps products such as 0.1·30 from rounding down.
    (beta * channels as f64 + 1e-9).floor() as usize
}

/// Replaces the last `floor(β·C)` channels of `ft` with those of `ft_prev`.
pub fn tfr_apply(ft: &Var, ft_prev: &Var, beta: f64) -> Result<Var> {
    if ft.shape() != ft_prev.shape() {
        return Err(Error::ShapeMismatch(format!(
            "current features {:?} vs previous {:?}",
            ft.shape(),
            ft_prev.shape()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("split ratio must lie in [0, 1], got {beta}")));
    }
    let c = ft.value().dims4()?.1;
    let s = split_size(beta, c);
    if s == 0 {
        if beta > 0.0 {
            return Err(Error::BetaTooSmall { beta, channels: c });
        }
        return Ok(ft.clone());
    }
    if s == c {
        return Ok(ft_prev.clone());
    }
    Ok(Var::concat(&[ft.narrow(1, 0, c - s)?, ft_prev.narrow(1, c - s, s)?], 1)?)
}

/// Previous-frame feature slices for every replacement site of one stream.
#[derive(Debug)]
pub struct TemporalBuffer {
    beta: f64,
    slots: Vec<Option<Var>>,
    frames: u64,
}

impl TemporalBuffer {
    pub fn new(sites: usize, beta: f64) -> Self {
        BUFFERS_CREATED.with(|c| c.set(c.get() + 1));
        Self { beta, slots: vec![None; sites], frames: 0 }
    }

    /// Buffers constructed on this thread so far.
    pub fn instances_created() -> u64 {
        BUFFERS_CREATED.with(Cell::get)
    }

    pub fn sites(&self) -> usize {
        self.slots.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Frames completed since the stream started.
    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn reset(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
        self.frames = 0;
    }

    pub(crate) fn finish_frame(&mut self) {
        self.frames += 1;
    }

    /// Applies replacement at `site` and stores the current frame's slice for the
    /// next frame. An empty slot means the frame replaces with its own features.
    pub(crate) fn exchange(&mut self, site: usize, ft: &Var) -> Result<Var> {
        let n = self.slots.len();
        let slot = self
            .slots
            .get_mut(site)
            .ok_or_else(|| Error::BufferShapeMismatch(format!("site {site} of {n}")))?;
        let (b, c, h, w) = ft.value().dims4()?;
        let s = split_size(self.beta, c);
        if s == 0 {
            return Err(Error::BetaTooSmall { beta: self.beta, channels: c });
        }
        let current = ft.narrow(1, c - s, s)?;
        let out = match slot.as_ref() {
            None => ft.clone(),
            Some(prev) if prev.shape() == [b, s, h, w] => {
                if s == c {
                    prev.clone()
                } else {
                    Var::concat(&[ft.narrow(1, 0, c - s)?, prev.clone()], 1)?
                }
            }
            Some(prev) => {
                return Err(Error::BufferShapeMismatch(format!(
                    "site {site} holds {:?}, frame has {:?}",
                    prev.shape(),
                    [b, s, h, w]
                )))
            }
        };
        *slot = Some(current);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use autograd::Tensor;

    #[test]
    fn split_sizes() {
        assert_eq!(split_size(1.0 / 32.0, 32), 1);
        assert_eq!(split_size(0.1, 30), 3);
        assert_eq!(split_size(1.0 / 32.0, 16), 0);
    }

    #[test]
    fn zero_beta_is_identity() {
        let a = Var::constant(Tensor::full(&[1, 4, 2, 2], 1.0));
        let b = Var::constant(Tensor::full(&[1, 4, 2, 2], 2.0));
        assert_eq!(tfr_apply(&a, &b, 0.0).unwrap().value(), a.value());
        assert!(matches!(tfr_apply(&a, &b, 0.1), Err(Error::BetaTooSmall { .. })));
    }

    #[test]
    fn empty_buffer_keeps_own_features() {
        let mut buf = TemporalBuffer::new(1, 0.5);
        let a = Var::constant(Tensor::from_vec(&[1, 2, 1, 1], vec![1.0, 2.0]).unwrap());
        let b = Var::constant(Tensor::from_vec(&[1, 2, 1, 1], vec![3.0, 4.0]).unwrap());
        assert_eq!(buf.exchange(0, &a).unwrap().value().data(), &[1.0, 2.0]);
        assert_eq!(buf.exchange(0, &b).unwrap().value().data(), &[3.0, 2.0]);
        let c = Var::constant(Tensor::zeros(&[1, 2, 2, 1]));
        assert!(matches!(buf.exchange(0, &c), Err(Error::BufferShapeMismatch(_))));
    }
}
