//! Single-intersection traffic control.
//!
//! Two one-way roads cross at a light. Each road shows 15 cells to the
//! agent; cars that cross the intersection drive a hidden 32-cell loop
//! and re-enter the opposite road's first visible cell, so anticipating
//! returning cars requires memory. Switching the light inserts a fixed
//! yellow interval during which nothing crosses.

use super::{EnvInfo, EnvStep, Environment};
use crate::dset::ObservationSchema;
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};
use rand::Rng as _;

pub const VISIBLE: usize = 15;
pub const LOOP: usize = 32;

#[derive(Debug, Clone)]
pub struct TrafficConfig {
    pub horizon: usize,
    pub car_spawn_prob: f64,
    /// Penalty per car that fails to advance during a step.
    pub stop_cost: f64,
    pub yellow_steps: u8,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig { horizon: 100, car_spawn_prob: 0.1, stop_cost: 0.1, yellow_steps: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    GreenA,
    GreenB,
}

pub struct TrafficEnv {
    cfg: TrafficConfig,
    rng: Rng,
    schema: ObservationSchema,
    // cycle order: vis_a -> loop_a -> vis_b -> loop_b -> vis_a
    vis_a: [bool; VISIBLE],
    loop_a: [bool; LOOP],
    vis_b: [bool; VISIBLE],
    loop_b: [bool; LOOP],
    phase: Phase,
    pending: Option<Phase>,
    yellow: u8,
    t: usize,
}

impl TrafficEnv {
    pub fn new(cfg: TrafficConfig, seed: u64) -> Self {
        TrafficEnv {
            cfg,
            rng: rng_from(seed, "traffic"),
            schema: ObservationSchema::new(&[("road_a", VISIBLE), ("road_b", VISIBLE)]),
            vis_a: [false; VISIBLE],
            loop_a: [false; LOOP],
            vis_b: [false; VISIBLE],
            loop_b: [false; LOOP],
            phase: Phase::GreenA,
            pending: None,
            yellow: 0,
            t: 0,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(2 * VISIBLE);
        obs.extend(self.vis_a.iter().map(|b| if *b { 1.0 } else { 0.0 }));
        obs.extend(self.vis_b.iter().map(|b| if *b { 1.0 } else { 0.0 }));
        obs
    }

    pub fn total_cars(&self) -> usize {
        self.vis_a.iter().filter(|b| **b).count()
            + self.loop_a.iter().filter(|b| **b).count()
            + self.vis_b.iter().filter(|b| **b).count()
            + self.loop_b.iter().filter(|b| **b).count()
    }

    pub fn hidden_loop_occupancy(&self) -> (Vec<bool>, Vec<bool>) {
        (self.loop_a.to_vec(), self.loop_b.to_vec())
    }

    #[cfg(test)]
    pub(crate) fn place_car_at_stop_line(&mut self, road_a: bool) {
        if road_a {
            self.vis_a[VISIBLE - 1] = true;
        } else {
            self.vis_b[VISIBLE - 1] = true;
        }
    }

    #[cfg(test)]
    pub(crate) fn visible(&self, road_a: bool) -> [bool; VISIBLE] {
        if road_a {
            self.vis_a
        } else {
            self.vis_b
        }
    }

    /// Advance every car one cell where the cell ahead was free at the
    /// start of the step. Returns how many occupied cells failed to move.
    fn advance_cars(&mut self) -> usize {
        let old_va = self.vis_a;
        let old_la = self.loop_a;
        let old_vb = self.vis_b;
        let old_lb = self.loop_b;
        let crossing_open = self.yellow == 0;
        let a_green = crossing_open && self.phase == Phase::GreenA;
        let b_green = crossing_open && self.phase == Phase::GreenB;

        let mut stopped = 0;
        let mut new_va = old_va;
        let mut new_la = old_la;
        let mut new_vb = old_vb;
        let mut new_lb = old_lb;

        // segment-internal moves
        let mut segment = |old: &[bool], new: &mut [bool], stopped: &mut usize| {
            for i in 0..old.len() - 1 {
                if old[i] {
                    if !old[i + 1] {
                        new[i] = false;
                        new[i + 1] = true;
                    } else {
                        *stopped += 1;
                    }
                }
            }
        };
        segment(&old_va, &mut new_va, &mut stopped);
        segment(&old_la, &mut new_la, &mut stopped);
        segment(&old_vb, &mut new_vb, &mut stopped);
        segment(&old_lb, &mut new_lb, &mut stopped);

        // boundary moves: stop line -> loop entry (gated by the light),
        // loop exit -> opposite road's entry cell
        if old_va[VISIBLE - 1] {
            if a_green && !old_la[0] {
                new_va[VISIBLE - 1] = false;
                new_la[0] = true;
            } else {
                stopped += 1;
            }
        }
        if old_vb[VISIBLE - 1] {
            if b_green && !old_lb[0] {
                new_vb[VISIBLE - 1] = false;
                new_lb[0] = true;
            } else {
                stopped += 1;
            }
        }
        if old_la[LOOP - 1] {
            if !old_vb[0] {
                new_la[LOOP - 1] = false;
                new_vb[0] = true;
            } else {
                stopped += 1;
            }
        }
        if old_lb[LOOP - 1] {
            if !old_va[0] {
                new_lb[LOOP - 1] = false;
                new_va[0] = true;
            } else {
                stopped += 1;
            }
        }

        self.vis_a = new_va;
        self.loop_a = new_la;
        self.vis_b = new_vb;
        self.loop_b = new_lb;
        stopped
    }
}

impl Environment for TrafficEnv {
    fn obs_dim(&self) -> usize {
        2 * VISIBLE
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn schema(&self) -> &ObservationSchema {
        &self.schema
    }

    /// The last two cells of each road segment: the cars about to leave
    /// the visible box.
    fn manual_dset_indices(&self) -> Vec<usize> {
        vec![VISIBLE - 2, VISIBLE - 1, 2 * VISIBLE - 2, 2 * VISIBLE - 1]
    }

    fn reset(&mut self) -> Vec<f64> {
        self.vis_a = [false; VISIBLE];
        self.loop_a = [false; LOOP];
        self.vis_b = [false; VISIBLE];
        self.loop_b = [false; LOOP];
        self.phase = Phase::GreenA;
        self.pending = None;
        self.yellow = 0;
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let requested = match action {
            0 => Phase::GreenA,
            1 => Phase::GreenB,
            a => return Err(Error::contract(format!("invalid traffic action {a}"))),
        };
        if requested != self.phase && self.yellow == 0 && self.pending.is_none() {
            self.pending = Some(requested);
            self.yellow = self.cfg.yellow_steps;
        }

        let stopped = self.advance_cars();

        if self.yellow > 0 {
            self.yellow -= 1;
            if self.yellow == 0 {
                if let Some(next) = self.pending.take() {
                    self.phase = next;
                }
            }
        }

        // spawns fill entry cells left free after movement
        if !self.vis_a[0] && self.rng.gen_bool(self.cfg.car_spawn_prob) {
            self.vis_a[0] = true;
        }
        if !self.vis_b[0] && self.rng.gen_bool(self.cfg.car_spawn_prob) {
            self.vis_b[0] = true;
        }

        self.t += 1;
        let done = self.t >= self.cfg.horizon;
        Ok(EnvStep {
            obs: self.observation(),
            reward: -self.cfg.stop_cost * stopped as f64,
            done,
            info: self.info(),
        })
    }

    fn info(&self) -> EnvInfo {
        let mut occupancy = Vec::with_capacity(2 * (VISIBLE + LOOP));
        occupancy.extend_from_slice(&self.vis_a);
        occupancy.extend_from_slice(&self.loop_a);
        occupancy.extend_from_slice(&self.vis_b);
        occupancy.extend_from_slice(&self.loop_b);
        EnvInfo::Traffic {
            occupancy,
            green_a: self.phase == Phase::GreenA,
            yellow: self.yellow,
        }
    }
}
