//! Observation wrappers: flickering blackouts and frame stacking.

use super::{EnvInfo, EnvStep, Environment};
use crate::dset::ObservationSchema;
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};
use rand::Rng as _;

/// Replace the observation with all zeros with probability `p`.
pub fn flicker(obs: &[f64], p: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("flicker probability {p} outside [0, 1]")));
    }
    if p > 0.0 && rng.gen_bool(p) {
        Ok(vec![0.0; obs.len()])
    } else {
        Ok(obs.to_vec())
    }
}

/// Applies [`flicker`] to every observation the inner environment emits.
pub struct FlickerWrapper<E> {
    inner: E,
    p: f64,
    rng: Rng,
}

impl<E: Environment> FlickerWrapper<E> {
    pub fn new(inner: E, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!("flicker probability {p} outside [0, 1]")));
        }
        Ok(FlickerWrapper { inner, p, rng: rng_from(seed, "flicker") })
    }
}

impl<E: Environment> Environment for FlickerWrapper<E> {
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn schema(&self) -> &ObservationSchema {
        self.inner.schema()
    }

    fn manual_dset_indices(&self) -> Vec<usize> {
        self.inner.manual_dset_indices()
    }

    fn reset(&mut self) -> Vec<f64> {
        let obs = self.inner.reset();
        flicker(&obs, self.p, &mut self.rng).expect("validated probability")
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let mut step = self.inner.step(action)?;
        step.obs = flicker(&step.obs, self.p, &mut self.rng)?;
        Ok(step)
    }

    fn info(&self) -> EnvInfo {
        self.inner.info()
    }
}

/// Newest-first moving window over a stream of observations; positions
/// before episode start are zero.
#[derive(Debug, Clone)]
pub struct FrameStack {
    frames: Vec<Vec<f64>>,
    frame_dim: usize,
    k: usize,
}

impl FrameStack {
    pub fn new(frame_dim: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("frame stack depth must be at least 1"));
        }
        Ok(FrameStack { frames: Vec::new(), frame_dim, k })
    }

    pub fn reset(&mut self) {
        self.frames.clear();
    }

    pub fn push(&mut self, obs: &[f64]) {
        debug_assert_eq!(obs.len(), self.frame_dim);
        self.frames.insert(0, obs.to_vec());
        self.frames.truncate(self.k);
    }

    /// Concatenation of the k most recent frames, newest first.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.k * self.frame_dim);
        for i in 0..self.k {
            match self.frames.get(i) {
                Some(f) => out.extend_from_slice(f),
                None => out.extend(std::iter::repeat(0.0).take(self.frame_dim)),
            }
        }
        out
    }
}

/// Presents the inner environment's observation stream as stacked
/// windows of depth k.
pub struct FrameStackWrapper<E> {
    inner: E,
    stack: FrameStack,
    schema: ObservationSchema,
}

impl<E: Environment> FrameStackWrapper<E> {
    pub fn new(inner: E, k: usize) -> Result<Self> {
        let stack = FrameStack::new(inner.obs_dim(), k)?;
        let segs: Vec<(String, usize)> = (0..k)
            .flat_map(|f| {
                inner
                    .schema()
                    .segments()
                    .iter()
                    .map(move |s| (format!("frame{f}.{}", s.name), s.length))
                    .collect::<Vec<_>>()
            })
            .collect();
        let seg_refs: Vec<(&str, usize)> =
            segs.iter().map(|(n, l)| (n.as_str(), *l)).collect();
        let schema = ObservationSchema::new(&seg_refs);
        Ok(FrameStackWrapper { inner, stack, schema })
    }
}

impl<E: Environment> Environment for FrameStackWrapper<E> {
    fn obs_dim(&self) -> usize {
        self.schema.len()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn schema(&self) -> &ObservationSchema {
        &self.schema
    }

    /// The newest frame occupies the first slots, so the inner mask is
    /// valid unchanged.
    fn manual_dset_indices(&self) -> Vec<usize> {
        self.inner.manual_dset_indices()
    }

    fn reset(&mut self) -> Vec<f64> {
        let obs = self.inner.reset();
        self.stack.reset();
        self.stack.push(&obs);
        self.stack.stacked()
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let mut step = self.inner.step(action)?;
        self.stack.push(&step.obs);
        step.obs = self.stack.stacked();
        Ok(step)
    }

    fn info(&self) -> EnvInfo {
        self.inner.info()
    }
}
