//! Finite-horizon dynamic programming on the fully observed grid.

use std::collections::HashMap;

use super::{step_cells, GridObs, GridPushConfig, Level, ACTIONS};
use crate::pomdp::{ActionModel, History};

/// Optimal planner for the true state: at each state and
/// number of remaining actions it picks the action with the highest optimal
/// return, breaking ties by the lowest action index.
#[derive(Debug, Clone)]
pub struct DpExpert {
    cfg: GridPushConfig,
    index: HashMap<Vec<u8>, usize>,
    /// `best[r][state]` for `r` remaining actions (`best[0]` unused).
    best: Vec<Vec<u8>>,
    /// `value[r][state]`
    value: Vec<Vec<f64>>,
}

impl DpExpert {
    /// Solves every state reachable from `starts` within the horizon.
    pub fn new<'a>(cfg: &GridPushConfig, starts: impl IntoIterator<Item = &'a Level>) -> Self {
        let n_act = ACTIONS.len();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut states: Vec<Vec<u8>> = Vec::new();
        let mut width = cfg.width;
        for l in starts {
            width = l.width as usize;
            if !index.contains_key(&l.cells) {
                index.insert(l.cells.clone(), states.len());
                states.push(l.cells.clone());
            }
        }
        let mut next: Vec<[usize; 5]> = Vec::new();
        let mut reward: Vec<[f64; 5]> = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let mut nx = [0usize; 5];
            let mut rw = [0.0; 5];
            for a in 0..n_act {
                let (c, r) = step_cells(&states[i], width, a, cfg);
                let j = match index.get(&c) {
                    Some(j) => *j,
                    None => {
                        index.insert(c.clone(), states.len());
                        states.push(c);
                        states.len() - 1
                    }
                };
                nx[a] = j;
                rw[a] = r;
            }
            next.push(nx);
            reward.push(rw);
            i += 1;
        }
        let n = states.len();
        let steps = cfg.horizon.saturating_sub(1);
        let mut value = vec![vec![0.0; n]];
        let mut best = vec![vec![0u8; n]];
        for r in 1..=steps {
            let prev = &value[r - 1];
            let mut v = vec![0.0; n];
            let mut b = vec![0u8; n];
            for s in 0..n {
                let mut top = f64::NEG_INFINITY;
                for a in 0..n_act {
                    let q = reward[s][a] + prev[next[s][a]];
                    if q > top + 1e-12 {
                        top = q;
                        b[s] = a as u8;
                    }
                }
                v[s] = top;
            }
            value.push(v);
            best.push(b);
        }
        Self { cfg: *cfg, index, best, value }
    }

    pub fn n_states(&self) -> usize {
        self.index.len()
    }

    fn remaining(&self, level: &Level) -> usize {
        self.cfg.horizon.saturating_sub(1).saturating_sub(level.step as usize)
    }

    /// Optimal return from `level` until the horizon, if the state was solved.
    pub fn value(&self, level: &Level) -> Option<f64> {
        let s = *self.index.get(&level.cells)?;
        Some(self.value[self.remaining(level)][s])
    }

    pub fn action(&self, level: &Level) -> Option<usize> {
        let s = *self.index.get(&level.cells)?;
        let r = self.remaining(level);
        (r > 0).then(|| self.best[r][s] as usize)
    }
}

impl ActionModel<GridObs, Level> for DpExpert {
    fn action_probs(&self, _: &History<GridObs>, s: &Level) -> Vec<f64> {
        let mut p = vec![0.0; ACTIONS.len()];
        match self.action(s) {
            Some(a) => p[a] = 1.0,
            None => p.iter_mut().for_each(|x| *x = 1.0 / ACTIONS.len() as f64),
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_straight_push() {
        let cfg = GridPushConfig::desk();
        let l = Level::parse("#####\n#A..#\n#.B.#\n#..T#\n#####").unwrap();
        let e = DpExpert::new(&cfg, [&l]);
        assert_eq!(e.value(&l), Some(11.0));
        let mut s = l.clone();
        let mut total = 0.0;
        while let Some(a) = e.action(&s) {
            let (n, r) = s.step(a, &cfg);
            total += r;
            s = n;
        }
        assert_eq!(total, 11.0);
        assert!(s.is_solved());
    }

    #[test]
    fn deadlocked_level_is_worth_zero() {
        let cfg = GridPushConfig::desk();
        let l = Level::parse("#####\n#B..#\n#.A.#\n#..T#\n#####").unwrap();
        let e = DpExpert::new(&cfg, [&l]);
        assert_eq!(e.value(&l), Some(0.0));
    }
}
