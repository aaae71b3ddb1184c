//! Resource Gathering gridworld: one agent per tile of a 5x5 grid.
//!
//! A character starts at a fixed tile and walks the grid; every tile it
//! enters is collected for the agent owning that tile. The episode ends when
//! the character is back on the start tile (after at least two steps) or when
//! the time limit runs out. At termination every *visited* agent receives
//! `100 - T` where `T` is the episode length, so short tours that cover an
//! agent's tile are worth the most.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::rmdp::{Action, ActionSpec, Env, StepOutcome};

#[derive(Debug, Clone)]
pub struct ResourceGatheringConfig {
    pub grid_side: usize,
    pub start_cell: (usize, usize),
    pub time_limit: usize,
}

impl Default for ResourceGatheringConfig {
    fn default() -> Self {
        Self { grid_side: 5, start_cell: (2, 0), time_limit: 100 }
    }
}

impl ResourceGatheringConfig {
    /// One agent per tile.
    pub fn n(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn cell_index(&self, row: usize, col: usize) -> usize {
        row * self.grid_side + col
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub fn from_index(idx: usize) -> Result<Move> {
        match idx {
            0 => Ok(Move::Up),
            1 => Ok(Move::Down),
            2 => Ok(Move::Left),
            3 => Ok(Move::Right),
            other => Err(Error::invalid(format!("action index {other} out of range"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridState {
    pub position: (usize, usize),
    pub visited: Vec<bool>,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct ResourceGathering {
    config: ResourceGatheringConfig,
    state: GridState,
    done: bool,
}

impl ResourceGathering {
    pub fn new(config: ResourceGatheringConfig) -> Self {
        let state = Self::initial_state(&config);
        Self { config, state, done: true }
    }

    fn initial_state(config: &ResourceGatheringConfig) -> GridState {
        let mut visited = vec![false; config.n()];
        visited[config.cell_index(config.start_cell.0, config.start_cell.1)] = true;
        GridState { position: config.start_cell, visited, t: 0 }
    }

    pub fn config(&self) -> &ResourceGatheringConfig {
        &self.config
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    /// Advances one move. Moves off the grid are no-ops that still consume a
    /// time step. Returns the per-agent rewards (all zero except at
    /// termination) and the done flag.
    pub fn apply(&mut self, mv: Move) -> Result<(Vec<f64>, bool)> {
        if self.done {
            return Err(Error::ContractViolation(
                "step called on a finished episode".into(),
            ));
        }
        let side = self.config.grid_side as isize;
        let (r, c) = (self.state.position.0 as isize, self.state.position.1 as isize);
        let (nr, nc) = match mv {
            Move::Up => (r - 1, c),
            Move::Down => (r + 1, c),
            Move::Left => (r, c - 1),
            Move::Right => (r, c + 1),
        };
        if (0..side).contains(&nr) && (0..side).contains(&nc) {
            self.state.position = (nr as usize, nc as usize);
            let idx = self.config.cell_index(nr as usize, nc as usize);
            self.state.visited[idx] = true;
        }
        self.state.t += 1;

        let at_start = self.state.position == self.config.start_cell;
        let done = (at_start && self.state.t >= 2) || self.state.t >= self.config.time_limit;
        let mut rewards = vec![0.0; self.config.n()];
        if done {
            self.done = true;
            let value = 100.0 - self.state.t as f64;
            for (i, &v) in self.state.visited.iter().enumerate() {
                if v {
                    rewards[i] = value;
                }
            }
        }
        Ok((rewards, done))
    }

    fn observation(&self) -> Vec<f32> {
        let n = self.config.n();
        let mut obs = vec![0.0f32; n + 1];
        obs[self.config.cell_index(self.state.position.0, self.state.position.1)] = 1.0;
        obs[n] = self.state.t as f32 / self.config.time_limit as f32;
        obs
    }
}

impl Env for ResourceGathering {
    fn n_agents(&self) -> usize {
        self.config.n()
    }

    fn obs_dim(&self) -> usize {
        self.config.n() + 1
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Discrete { n: 4 }
    }

    fn horizon(&self) -> usize {
        self.config.time_limit
    }

    fn reset(&mut self) -> Vec<f32> {
        self.state = Self::initial_state(&self.config);
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        let mv = match action {
            Action::Discrete(idx) => Move::from_index(*idx)?,
            Action::Continuous(_) => {
                return Err(Error::invalid("gridworld takes discrete actions"))
            }
        };
        let (rewards, done) = self.apply(mv)?;
        Ok(StepOutcome { obs: self.observation(), rewards, done })
    }
}

/// BFS distances from the start cell over the 4-connected grid.
fn bfs_distances(config: &ResourceGatheringConfig) -> Vec<usize> {
    let side = config.grid_side;
    let mut dist = vec![usize::MAX; side * side];
    let start = config.cell_index(config.start_cell.0, config.start_cell.1);
    dist[start] = 0;
    let mut queue = VecDeque::from([config.start_cell]);
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[config.cell_index(r, c)];
        let mut push = |nr: usize, nc: usize, queue: &mut VecDeque<(usize, usize)>| {
            let idx = config.cell_index(nr, nc);
            if dist[idx] == usize::MAX {
                dist[idx] = d + 1;
                queue.push_back((nr, nc));
            }
        };
        if r > 0 {
            push(r - 1, c, &mut queue);
        }
        if r + 1 < side {
            push(r + 1, c, &mut queue);
        }
        if c > 0 {
            push(r, c - 1, &mut queue);
        }
        if c + 1 < side {
            push(r, c + 1, &mut queue);
        }
    }
    dist
}

/// Per-agent optimum under a dedicated policy, and its mean.
///
/// A dedicated policy walks the shortest path to the agent's tile and
/// straight back, so the agent collects `100 - 2 * d`. The start-cell agent
/// still needs the minimal two-step round trip, hence the `max(d, 1)`.
pub fn rg_optimal_oracle(config: &ResourceGatheringConfig) -> (Vec<f64>, f64) {
    let dist = bfs_distances(config);
    let per_agent: Vec<f64> = dist
        .iter()
        .map(|&d| 100.0 - 2.0 * (d.max(1)) as f64)
        .collect();
    let mean = per_agent.iter().sum::<f64>() / per_agent.len() as f64;
    (per_agent, mean)
}
