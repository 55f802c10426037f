//! A small box-pushing puzzle with masked observations.
//!
//! The agent pushes boxes onto targets. Pushing a box onto a target gives +1,
//! pushing one off gives −1, and placing the last box gives a further +10.
//! A solved level is absorbing. Each observation shows the cells in a window
//! around the agent exactly; every other cell is shown as empty with
//! probability `p_mask`, independently per cell and step.
//!
//! Level text uses one character per cell:
//!
//! ```text
//! #####
//! #A..#
//! #.B.#
//! #..T#
//! #####
//! ```
//!
//! `.` empty, `#` wall, `B` box, `T` target, `A` agent, `*` box on target,
//! `+` agent on target.

mod adapter;
mod expert;
mod generate;

pub use adapter::{degenerate_variant, GridObs, GridPushPomdp, ObjectMemory, CATALOGUE_DRAWS};
pub use expert::DpExpert;
pub use generate::{generate_level, solvable_check, DEFAULT_SOLVER_CAP};

use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMPTY: u8 = 0;
pub const WALL: u8 = 1;
pub const BOX: u8 = 2;
pub const TARGET: u8 = 3;
pub const AGENT: u8 = 4;
pub const BOX_ON_TARGET: u8 = 5;
pub const AGENT_ON_TARGET: u8 = 6;

const CHARS: [char; 7] = ['.', '#', 'B', 'T', 'A', '*', '+'];

pub const ACTIONS: [&str; 5] = ["up", "down", "left", "right", "noop"];
pub const NOOP: usize = 4;

pub fn cell_char(c: u8) -> char {
    CHARS[c as usize]
}

pub fn is_box(c: u8) -> bool {
    c == BOX || c == BOX_ON_TARGET
}

pub fn is_target(c: u8) -> bool {
    c == TARGET || c == BOX_ON_TARGET || c == AGENT_ON_TARGET
}

pub fn is_agent(c: u8) -> bool {
    c == AGENT || c == AGENT_ON_TARGET
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPushConfig {
    pub width: usize,
    pub height: usize,
    pub n_boxes: usize,
    pub horizon: usize,
    pub p_mask: f64,
    /// Cells within this Chebyshev distance of the agent are always shown.
    pub window_radius: usize,
    pub reward_on: f64,
    pub reward_off: f64,
    pub reward_solve: f64,
}

impl GridPushConfig {
    pub fn desk() -> Self {
        Self {
            width: 5,
            height: 5,
            n_boxes: 1,
            horizon: 12,
            p_mask: 0.7,
            window_radius: 1,
            reward_on: 1.0,
            reward_off: -1.0,
            reward_solve: 10.0,
        }
    }

    /// 10×10, three boxes, 50 steps.
    pub fn full() -> Self {
        Self { width: 10, height: 10, n_boxes: 3, horizon: 50, p_mask: 0.9, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::Input("grid needs at least 3×3 cells".into()));
        }
        if self.width * self.height > 128 {
            return Err(Error::Input("grids are limited to 128 cells".into()));
        }
        if !(0.0..=1.0).contains(&self.p_mask) {
            return Err(Error::Input(format!("p_mask {} is not a probability", self.p_mask)));
        }
        if self.horizon == 0 {
            return Err(Error::Input("horizon must be at least 1".into()));
        }
        let interior = (self.width - 2) * (self.height - 2);
        if 2 * self.n_boxes + 1 > interior {
            return Err(Error::Input(format!("{} boxes do not fit in a {}×{} grid", self.n_boxes, self.width, self.height)));
        }
        Ok(())
    }
}

/// A level state: the grid plus the number of steps taken so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Level {
    pub width: u8,
    pub height: u8,
    pub cells: Vec<u8>,
    pub step: u16,
}

impl Level {
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0);
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Parse { line: i + 1, msg: "rows have different lengths".into() });
            }
            for ch in row.chars() {
                let c = CHARS
                    .iter()
                    .position(|x| *x == ch)
                    .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("unknown cell `{ch}`") })?;
                cells.push(c as u8);
            }
        }
        if width > u8::MAX as usize || height > u8::MAX as usize {
            return Err(Error::Input("level too large".into()));
        }
        let level = Level { width: width as u8, height: height as u8, cells, step: 0 };
        level.validate()?;
        Ok(level)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width as usize, self.height as usize);
        if w < 3 || h < 3 || self.cells.len() != w * h {
            return Err(Error::Input("level must be at least 3×3".into()));
        }
        if self.cells.iter().filter(|c| is_agent(**c)).count() != 1 {
            return Err(Error::Input("level needs exactly one agent".into()));
        }
        if self.n_boxes() != self.cells.iter().filter(|c| is_target(**c)).count() {
            return Err(Error::Input("box and target counts differ".into()));
        }
        for y in 0..h {
            for x in 0..w {
                if (x == 0 || y == 0 || x == w - 1 || y == h - 1) && self.cells[y * w + x] != WALL {
                    return Err(Error::Input("border cells must be walls".into()));
                }
            }
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn agent(&self) -> usize {
        self.cells.iter().position(|c| is_agent(*c)).expect("level has an agent")
    }

    pub fn n_boxes(&self) -> usize {
        self.cells.iter().filter(|c| is_box(**c)).count()
    }

    pub fn boxes_off_target(&self) -> usize {
        self.cells.iter().filter(|c| **c == BOX).count()
    }

    /// No box is off its target. Levels without boxes count as pre-solved.
    pub fn is_solved(&self) -> bool {
        self.boxes_off_target() == 0
    }

    pub fn xy(&self, i: usize) -> (usize, usize) {
        (i % self.width as usize, i / self.width as usize)
    }

    /// `true` if cell `i` lies within `radius` of the agent.
    pub fn in_window(&self, agent: usize, i: usize, radius: usize) -> bool {
        let (ax, ay) = self.xy(agent);
        let (x, y) = self.xy(i);
        ax.abs_diff(x) <= radius && ay.abs_diff(y) <= radius
    }

    /// One move. Returns the next level and the reward.
    pub fn step(&self, action: usize, cfg: &GridPushConfig) -> (Level, f64) {
        let (cells, r) = step_cells(&self.cells, self.width as usize, action, cfg);
        (Level { width: self.width, height: self.height, cells, step: self.step.saturating_add(1) }, r)
    }

    pub fn observe(&self, mask: u128, cfg: &GridPushConfig) -> GridObs {
        let agent = self.agent();
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| if mask >> i & 1 == 1 && !self.in_window(agent, i, cfg.window_radius) { EMPTY } else { *c })
            .collect();
        GridObs(cells)
    }

    pub fn sample_mask<R: RngCore + ?Sized>(&self, cfg: &GridPushConfig, rng: &mut R) -> u128 {
        sample_mask(self.n_cells(), cfg.p_mask, rng)
    }
}

pub(crate) fn sample_mask<R: RngCore + ?Sized>(n: usize, p: f64, rng: &mut R) -> u128 {
    let mut m = 0u128;
    for i in 0..n {
        if rng.gen::<f64>() < p {
            m |= 1 << i;
        }
    }
    m
}

fn offset(i: usize, width: usize, action: usize) -> Option<usize> {
    match action {
        0 => i.checked_sub(width),
        1 => Some(i + width),
        2 => i.checked_sub(1),
        3 => Some(i + 1),
        _ => None,
    }
}

/// Grid dynamics without the step counter.
pub(crate) fn step_cells(cells: &[u8], width: usize, action: usize, cfg: &GridPushConfig) -> (Vec<u8>, f64) {
    let mut out = cells.to_vec();
    if !cells.contains(&BOX) {
        return (out, 0.0);
    }
    let agent = cells.iter().position(|c| is_agent(*c)).expect("level has an agent");
    let Some(dest) = offset(agent, width, action).filter(|d| *d < cells.len()) else {
        return (out, 0.0);
    };
    let lift = |c: u8| if is_target(c) { TARGET } else { EMPTY };
    let place_agent = |c: u8| if is_target(c) { AGENT_ON_TARGET } else { AGENT };
    let place_box = |c: u8| if is_target(c) { BOX_ON_TARGET } else { BOX };
    let mut reward = 0.0;
    match cells[dest] {
        WALL => return (out, 0.0),
        c if is_box(c) => {
            let Some(beyond) = offset(dest, width, action).filter(|b| *b < cells.len()) else {
                return (out, 0.0);
            };
            let b = cells[beyond];
            if b == WALL || is_box(b) {
                return (out, 0.0);
            }
            match (is_target(c), is_target(b)) {
                (false, true) => reward += cfg.reward_on,
                (true, false) => reward += cfg.reward_off,
                _ => {}
            }
            out[beyond] = place_box(b);
            out[dest] = place_agent(lift(c));
            out[agent] = lift(cells[agent]);
            if !out.contains(&BOX) {
                reward += cfg.reward_solve;
            }
        }
        c => {
            out[dest] = place_agent(c);
            out[agent] = lift(cells[agent]);
        }
    }
    (out, reward)
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.cells.chunks(self.width as usize).enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            for c in row {
                write!(f, "{}", cell_char(*c))?;
            }
        }
        Ok(())
    }
}
