//! Complex values on the tape as (re, im) pairs of real nodes.

use std::rc::Rc;

use num_complex::Complex64;

use super::autodiff::{Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct CVar<'t> {
    pub re: Var<'t>,
    pub im: Var<'t>,
}

#[allow(clippy::should_implement_trait)]
impl<'t> CVar<'t> {
    pub fn new(re: Var<'t>, im: Var<'t>) -> Self {
        Self { re, im }
    }

    pub fn constant(tape: &'t Tape, values: &[Complex64]) -> Self {
        Self {
            re: tape.constant(values.iter().map(|c| c.re).collect()),
            im: tape.constant(values.iter().map(|c| c.im).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self) -> Vec<Complex64> {
        self.re
            .value()
            .into_iter()
            .zip(self.im.value())
            .map(|(r, i)| Complex64::new(r, i))
            .collect()
    }

    pub fn add(self, o: CVar<'t>) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }

    pub fn sub(self, o: CVar<'t>) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }

    pub fn mul(self, o: CVar<'t>) -> Self {
        Self::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    /// Multiplies by `cos + j sin` of a real phase node.
    pub fn rotate(self, cos: Var<'t>, sin: Var<'t>) -> Self {
        Self::new(self.re * cos - self.im * sin, self.re * sin + self.im * cos)
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(self.re.scale(c), self.im.scale(c))
    }

    /// Scales by a real node (broadcast allowed).
    pub fn scale_by(self, s: Var<'t>) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    pub fn abs2(self) -> Var<'t> {
        self.re.square() + self.im.square()
    }

    pub fn abs(self) -> Var<'t> {
        self.abs2().sqrt()
    }

    pub fn arg(self) -> Var<'t> {
        self.im.atan2(self.re)
    }

    pub fn sum(self) -> Self {
        Self::new(self.re.sum(), self.im.sum())
    }

    pub fn mean(self) -> Self {
        Self::new(self.re.mean(), self.im.mean())
    }

    /// Linear convolution with a real kernel.
    pub fn conv_real(self, h: Var<'t>) -> Self {
        Self::new(self.re.conv(h), self.im.conv(h))
    }

    pub fn upsample(self, factor: usize) -> Self {
        Self::new(self.re.upsample(factor), self.im.upsample(factor))
    }

    pub fn downsample(self, factor: usize, offset: usize, count: usize) -> Self {
        Self::new(
            self.re.downsample(factor, offset, count),
            self.im.downsample(factor, offset, count),
        )
    }

    pub fn gather(self, idx: Rc<Vec<usize>>) -> Self {
        Self::new(self.re.gather(idx.clone()), self.im.gather(idx))
    }

    pub fn slice(self, start: usize, len: usize) -> Self {
        Self::new(self.re.slice(start, len), self.im.slice(start, len))
    }
}
