//! Shooter: a gun in the first column fires one bullet at a target that
//! bounces up and down the last column, with a fixed obstacle in between.
//!
//! Each step applies, in order: firing, target motion, bullet motion, then
//! the obstacle, target and horizon checks. Both movers reflect off the top
//! and bottom walls before moving.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mdp::{ActionIndex, Environment, MdpError, RngStream, StepOutcome};

pub const NOOP: ActionIndex = 0;
pub const SHOOT_UP: ActionIndex = 1;
pub const SHOOT_FLAT: ActionIndex = 2;
pub const SHOOT_DOWN: ActionIndex = 3;
pub const ACTION_COUNT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShooterConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub obstacle_col: usize,
    pub obstacle_rows: Vec<usize>,
    /// Step budget; an episode still running after this many steps ends with -1.
    pub horizon: u32,
}

impl Default for ShooterConfig {
    fn default() -> Self {
        Self {
            n_rows: 10,
            n_cols: 20,
            obstacle_col: 7,
            obstacle_rows: vec![4, 5, 6],
            horizon: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid shooter config: {0}")]
pub struct ShooterConfigError(String);

impl ShooterConfig {
    pub fn validate(&self) -> Result<(), ShooterConfigError> {
        let fail = |m: String| Err(ShooterConfigError(m));
        if self.n_rows < 2 || self.n_rows > u8::MAX as usize {
            return fail(format!("n_rows must be in [2, 255], got {}", self.n_rows));
        }
        if self.n_cols < 3 || self.n_cols > u8::MAX as usize {
            return fail(format!("n_cols must be in [3, 255], got {}", self.n_cols));
        }
        if self.obstacle_col == 0 || self.obstacle_col >= self.n_cols - 1 {
            return fail(format!(
                "obstacle_col must lie strictly between 0 and {}, got {}",
                self.n_cols - 1,
                self.obstacle_col
            ));
        }
        if let Some(r) = self.obstacle_rows.iter().find(|r| **r >= self.n_rows) {
            return fail(format!("obstacle row {r} outside [0, {})", self.n_rows));
        }
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ShooterConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ShooterConfigError(format!("{}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| ShooterConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bullet {
    NotFired,
    Fired { col: u8, row: u8, vdir: i8 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShooterState {
    pub gun_row: u8,
    pub bullet: Bullet,
    pub target_row: u8,
    pub target_dir: i8,
    pub steps_elapsed: u32,
    pub finished: bool,
}

/// Tabular key: the full state minus the step counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShooterKey {
    pub gun_row: u8,
    pub bullet: Bullet,
    pub target_row: u8,
    pub target_dir: i8,
    pub finished: bool,
}

impl ShooterKey {
    pub fn has_fired(&self) -> bool {
        matches!(self.bullet, Bullet::Fired { .. })
    }
}

/// 1 until the shot is taken, 0 afterwards.
pub fn shooter_criticality(state: &ShooterState) -> f64 {
    match state.bullet {
        Bullet::NotFired => 1.0,
        Bullet::Fired { .. } => 0.0,
    }
}

#[derive(Debug, Clone, Default)]
pub struct Shooter {
    config: ShooterConfig,
}

impl Shooter {
    pub fn new(config: ShooterConfig) -> Result<Self, ShooterConfigError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ShooterConfig {
        &self.config
    }

    fn on_obstacle(&self, col: u8, row: u8) -> bool {
        col as usize == self.config.obstacle_col && self.config.obstacle_rows.contains(&(row as usize))
    }
}

/// Moves one cell along `dir`, flipping `dir` first if the move would leave
/// `[0, n)`.
fn bounce(pos: u8, dir: i8, n: usize) -> (u8, i8) {
    let next = pos as i32 + dir as i32;
    let dir = if next < 0 || next >= n as i32 { -dir } else { dir };
    ((pos as i32 + dir as i32) as u8, dir)
}

impl Environment for Shooter {
    type State = ShooterState;
    type Key = ShooterKey;

    /// Draws gun row, target row and target direction, in that order.
    fn reset(&self, rng: &mut RngStream) -> ShooterState {
        let gun_row = rng.below(self.config.n_rows) as u8;
        let target_row = rng.below(self.config.n_rows) as u8;
        let target_dir = if rng.below(2) == 0 { -1 } else { 1 };
        ShooterState {
            gun_row,
            bullet: Bullet::NotFired,
            target_row,
            target_dir,
            steps_elapsed: 0,
            finished: false,
        }
    }

    fn step(
        &self,
        state: &ShooterState,
        action: ActionIndex,
    ) -> Result<StepOutcome<ShooterState>, MdpError> {
        if state.finished {
            return Err(MdpError::TerminalStep);
        }
        if action >= ACTION_COUNT {
            return Err(MdpError::InvalidAction {
                action,
                count: ACTION_COUNT,
            });
        }
        let cfg = &self.config;
        let mut next = state.clone();
        next.steps_elapsed += 1;

        if next.bullet == Bullet::NotFired && action != NOOP {
            let vdir = match action {
                SHOOT_UP => -1,
                SHOOT_FLAT => 0,
                _ => 1,
            };
            next.bullet = Bullet::Fired {
                col: 0,
                row: state.gun_row,
                vdir,
            };
        }

        (next.target_row, next.target_dir) = bounce(next.target_row, next.target_dir, cfg.n_rows);

        let mut reward = 0.0;
        if let Bullet::Fired { col, row, vdir } = next.bullet {
            let (row, vdir) = bounce(row, vdir, cfg.n_rows);
            let col = col + 1;
            next.bullet = Bullet::Fired { col, row, vdir };
            if self.on_obstacle(col, row) {
                next.finished = true;
                reward = -1.0;
            } else if col as usize == cfg.n_cols - 1 {
                next.finished = true;
                reward = if row == next.target_row { 1.0 } else { -1.0 };
            }
        }
        if !next.finished && next.steps_elapsed >= cfg.horizon {
            next.finished = true;
            reward = -1.0;
        }

        Ok(StepOutcome {
            terminal: next.finished,
            next_state: next,
            reward,
        })
    }

    fn action_count(&self, state: &ShooterState) -> usize {
        if state.finished {
            0
        } else {
            ACTION_COUNT
        }
    }

    fn key(&self, state: &ShooterState) -> ShooterKey {
        ShooterKey {
            gun_row: state.gun_row,
            bullet: state.bullet,
            target_row: state.target_row,
            target_dir: state.target_dir,
            finished: state.finished,
        }
    }
}
