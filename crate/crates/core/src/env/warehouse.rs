//! Warehouse commissioning gridworld.
//!
//! A robot on a 7×7 grid collects items that appear on the 24 boundary
//! cells. Each item carries a hidden timer: orders cancel once they have
//! been active for the full cancel window. The observation is the
//! agent's one-hot position plus the 24 item bits; the timers are never
//! observed, which is exactly what makes the item bits' history a
//! d-separating set.

use super::{EnvInfo, EnvStep, Environment};
use crate::dset::ObservationSchema;
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};
use rand::Rng as _;

pub const GRID: usize = 7;
pub const NUM_ITEM_CELLS: usize = 24;

#[derive(Debug, Clone)]
pub struct WarehouseConfig {
    pub horizon: usize,
    pub item_spawn_prob: f64,
    /// Steps an item stays active before the order cancels.
    pub cancel_window: u8,
}

impl Default for WarehouseConfig {
    fn default() -> Self {
        WarehouseConfig { horizon: 100, item_spawn_prob: 0.05, cancel_window: 8 }
    }
}

pub struct WarehouseEnv {
    cfg: WarehouseConfig,
    rng: Rng,
    schema: ObservationSchema,
    item_cells: Vec<(usize, usize)>,
    pub(crate) agent: (usize, usize),
    pub(crate) item_active: [bool; NUM_ITEM_CELLS],
    pub(crate) counters: [u8; NUM_ITEM_CELLS],
    last_pickups: [bool; NUM_ITEM_CELLS],
    t: usize,
}

/// Boundary cells of the grid in row-major order.
fn boundary_cells() -> Vec<(usize, usize)> {
    let mut cells = Vec::with_capacity(NUM_ITEM_CELLS);
    for r in 0..GRID {
        for c in 0..GRID {
            if r == 0 || r == GRID - 1 || c == 0 || c == GRID - 1 {
                cells.push((r, c));
            }
        }
    }
    cells
}

impl WarehouseEnv {
    pub fn new(cfg: WarehouseConfig, seed: u64) -> Self {
        let item_cells = boundary_cells();
        debug_assert_eq!(item_cells.len(), NUM_ITEM_CELLS);
        WarehouseEnv {
            cfg,
            rng: rng_from(seed, "warehouse"),
            schema: ObservationSchema::new(&[
                ("position", GRID * GRID),
                ("items", NUM_ITEM_CELLS),
            ]),
            item_cells,
            agent: (GRID / 2, GRID / 2),
            item_active: [false; NUM_ITEM_CELLS],
            counters: [0; NUM_ITEM_CELLS],
            last_pickups: [false; NUM_ITEM_CELLS],
            t: 0,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = vec![0.0; GRID * GRID + NUM_ITEM_CELLS];
        obs[self.agent.0 * GRID + self.agent.1] = 1.0;
        for (i, active) in self.item_active.iter().enumerate() {
            if *active {
                obs[GRID * GRID + i] = 1.0;
            }
        }
        obs
    }

    pub fn item_cell(&self, i: usize) -> (usize, usize) {
        self.item_cells[i]
    }

    pub fn hidden_counters(&self) -> [u8; NUM_ITEM_CELLS] {
        self.counters
    }

    /// Test hook: force an item active with a given timer value.
    #[cfg(test)]
    pub(crate) fn force_item(&mut self, i: usize, counter: u8) {
        self.item_active[i] = counter > 0;
        self.counters[i] = counter;
    }
}

impl Environment for WarehouseEnv {
    fn obs_dim(&self) -> usize {
        GRID * GRID + NUM_ITEM_CELLS
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn schema(&self) -> &ObservationSchema {
        &self.schema
    }

    fn manual_dset_indices(&self) -> Vec<usize> {
        (GRID * GRID..GRID * GRID + NUM_ITEM_CELLS).collect()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.agent = (GRID / 2, GRID / 2);
        self.item_active = [false; NUM_ITEM_CELLS];
        self.counters = [0; NUM_ITEM_CELLS];
        self.last_pickups = [false; NUM_ITEM_CELLS];
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<EnvStep> {
        let (r, c) = self.agent;
        self.agent = match action {
            0 => (r.saturating_sub(1), c),
            1 => ((r + 1).min(GRID - 1), c),
            2 => (r, c.saturating_sub(1)),
            3 => (r, (c + 1).min(GRID - 1)),
            a => return Err(Error::contract(format!("invalid warehouse action {a}"))),
        };

        // New items first, so a cell that cancels below cannot respawn in
        // the same step; this keeps the observable activation run length
        // equal to the hidden timer.
        let mut fresh = [false; NUM_ITEM_CELLS];
        for i in 0..NUM_ITEM_CELLS {
            if !self.item_active[i] && self.rng.gen_bool(self.cfg.item_spawn_prob) {
                self.item_active[i] = true;
                self.counters[i] = 1;
                fresh[i] = true;
            }
        }
        for i in 0..NUM_ITEM_CELLS {
            if self.item_active[i] && !fresh[i] {
                self.counters[i] += 1;
                if self.counters[i] > self.cfg.cancel_window {
                    self.item_active[i] = false;
                    self.counters[i] = 0;
                }
            }
        }

        let mut reward = 0.0;
        self.last_pickups = [false; NUM_ITEM_CELLS];
        if let Some(i) = self.item_cells.iter().position(|cell| *cell == self.agent) {
            if self.item_active[i] {
                reward += 1.0;
                self.item_active[i] = false;
                self.counters[i] = 0;
                self.last_pickups[i] = true;
            }
        }

        self.t += 1;
        let done = self.t >= self.cfg.horizon;
        Ok(EnvStep { obs: self.observation(), reward, done, info: self.info() })
    }

    fn info(&self) -> EnvInfo {
        EnvInfo::Warehouse {
            counters: self.counters.to_vec(),
            item_active: self.item_active.to_vec(),
            pickups: self.last_pickups.to_vec(),
            agent: self.agent,
        }
    }
}

/// One step of d-set history: the observable activation bits and the
/// pickup indicators derived from (agent position, item bit).
#[derive(Debug, Clone)]
pub struct DsetRecord {
    pub item_bits: [bool; NUM_ITEM_CELLS],
    pub pickups: [bool; NUM_ITEM_CELLS],
}

/// Incremental reconstruction of the hidden timers from d-set variables
/// alone. The timer of an active item equals the length of its current
/// consecutive activation run, so the oracle never needs the simulator's
/// hidden state.
#[derive(Debug, Clone, Default)]
pub struct DsetCounterOracle {
    run: [u8; NUM_ITEM_CELLS],
    window: u8,
}

impl DsetCounterOracle {
    pub fn new(cancel_window: u8) -> Self {
        DsetCounterOracle { run: [0; NUM_ITEM_CELLS], window: cancel_window }
    }

    pub fn observe(&mut self, rec: &DsetRecord) -> Result<[u8; NUM_ITEM_CELLS]> {
        for i in 0..NUM_ITEM_CELLS {
            if rec.item_bits[i] {
                if rec.pickups[i] {
                    return Err(Error::contract(format!(
                        "item {i}: pickup recorded while the bit is still set"
                    )));
                }
                self.run[i] += 1;
                if self.run[i] > self.window {
                    return Err(Error::contract(format!(
                        "item {i}: activation run exceeds the cancel window"
                    )));
                }
            } else {
                self.run[i] = 0;
            }
        }
        Ok(self.run)
    }
}

/// Replay a full history (starting at reset) and return the
/// reconstructed counters at every step.
pub fn dset_counter_oracle(
    history: &[DsetRecord],
    cancel_window: u8,
) -> Result<Vec<[u8; NUM_ITEM_CELLS]>> {
    let mut oracle = DsetCounterOracle::new(cancel_window);
    history.iter().map(|rec| oracle.observe(rec)).collect()
}

/// Best memoryless guess of the timers from the current observation
/// alone: an active bit could carry any timer value, so guess 1.
pub fn memoryless_counter_guess(item_bits: &[bool; NUM_ITEM_CELLS]) -> [u8; NUM_ITEM_CELLS] {
    let mut out = [0; NUM_ITEM_CELLS];
    for i in 0..NUM_ITEM_CELLS {
        if item_bits[i] {
            out[i] = 1;
        }
    }
    out
}
