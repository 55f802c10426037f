//! Level generation by reverse play, and an exhaustive solvability check.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use super::{is_box, is_target, GridPushConfig, Level, AGENT, AGENT_ON_TARGET, BOX, BOX_ON_TARGET, EMPTY, TARGET, WALL};
use crate::error::{Error, Result};

pub const DEFAULT_SOLVER_CAP: usize = 2_000_000;
const MAX_ATTEMPTS: usize = 1000;

fn interior(cfg: &GridPushConfig) -> Vec<usize> {
    let mut v = Vec::new();
    for y in 1..cfg.height - 1 {
        for x in 1..cfg.width - 1 {
            v.push(y * cfg.width + x);
        }
    }
    v
}

fn free(c: u8) -> bool {
    c != WALL && !is_box(c)
}

/// Places every box on its target, then walks the agent backwards `k` random
/// steps, pulling a box along with some moves. Reversing the walk solves the
/// level, so the result is always solvable. Already-solved results are redrawn.
pub fn generate_level<R: RngCore + ?Sized>(cfg: &GridPushConfig, rng: &mut R) -> Result<Level> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let inner = interior(cfg);
    for _ in 0..MAX_ATTEMPTS {
        let mut cells = vec![EMPTY; w * h];
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    cells[y * w + x] = WALL;
                }
            }
        }
        let picks: Vec<usize> = inner.choose_multiple(rng, cfg.n_boxes + 1).copied().collect();
        for &t in &picks[..cfg.n_boxes] {
            cells[t] = BOX_ON_TARGET;
        }
        let mut agent = picks[cfg.n_boxes];
        cells[agent] = AGENT;

        let k = rng.gen_range(3..=3 * w);
        for _ in 0..k {
            // (destination, pulled box position)
            let mut moves: Vec<(usize, Option<usize>)> = Vec::new();
            for d in [-(w as isize), w as isize, -1, 1] {
                let dest = (agent as isize + d) as usize;
                if !free(cells[dest]) {
                    continue;
                }
                moves.push((dest, None));
                let behind = (agent as isize - d) as usize;
                if is_box(cells[behind]) {
                    moves.push((dest, Some(behind)));
                }
            }
            let Some(&(dest, pulled)) = moves.choose(rng) else { break };
            let lift = |c: u8| if is_target(c) { TARGET } else { EMPTY };
            let old = cells[agent];
            if let Some(b) = pulled {
                cells[b] = lift(cells[b]);
                cells[agent] = if is_target(old) { BOX_ON_TARGET } else { BOX };
            } else {
                cells[agent] = lift(old);
            }
            cells[dest] = if is_target(cells[dest]) { AGENT_ON_TARGET } else { AGENT };
            agent = dest;
        }
        let level = Level { width: w as u8, height: h as u8, cells, step: 0 };
        if cfg.n_boxes > 0 && level.is_solved() {
            continue;
        }
        return Ok(level);
    }
    Err(Error::Generation { attempts: MAX_ATTEMPTS })
}

/// Breadth-first search over (agent, boxes) configurations for a sequence of
/// pushes that puts every box on a target. Errors above `cap` visited states.
pub fn solvable_check(level: &Level, cap: usize) -> Result<bool> {
    let w = level.width as usize;
    let targets: Vec<usize> = (0..level.n_cells()).filter(|i| is_target(level.cells[*i])).collect();
    let walls: Vec<bool> = level.cells.iter().map(|c| *c == WALL).collect();
    let mut boxes: Vec<usize> = (0..level.n_cells()).filter(|i| is_box(level.cells[*i])).collect();
    boxes.sort_unstable();
    let done = |b: &[usize]| b.iter().all(|x| targets.contains(x));
    if done(&boxes) {
        return Ok(true);
    }
    let start = (level.agent(), boxes);
    let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some((agent, boxes)) = queue.pop_front() {
        for d in [-(w as isize), w as isize, -1, 1] {
            let dest = (agent as isize + d) as usize;
            if walls[dest] {
                continue;
            }
            let mut nb = boxes.clone();
            if let Some(k) = boxes.iter().position(|b| *b == dest) {
                let beyond = (dest as isize + d) as usize;
                if walls[beyond] || boxes.contains(&beyond) {
                    continue;
                }
                nb[k] = beyond;
                nb.sort_unstable();
                if done(&nb) {
                    return Ok(true);
                }
            }
            let state = (dest, nb);
            if seen.insert(state.clone()) {
                if seen.len() > cap {
                    return Err(Error::Capacity { size: seen.len() as u128, cap: cap as u128 });
                }
                queue.push_back(state);
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generated_levels_are_valid_solvable_and_varied() {
        let cfg = GridPushConfig::desk();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut distinct = HashSet::new();
        for _ in 0..200 {
            let l = generate_level(&cfg, &mut rng).unwrap();
            l.validate().unwrap();
            assert!(!l.is_solved());
            assert!(solvable_check(&l, DEFAULT_SOLVER_CAP).unwrap());
            distinct.insert(l);
        }
        assert!(distinct.len() >= 2);
    }

    #[test]
    fn corner_deadlock_and_solved_levels() {
        let stuck = Level::parse("#####\n#B..#\n#.A.#\n#..T#\n#####").unwrap();
        assert!(!solvable_check(&stuck, DEFAULT_SOLVER_CAP).unwrap());
        let solved = Level::parse("#####\n#*..#\n#.A.#\n#...#\n#####").unwrap();
        assert!(solvable_check(&solved, DEFAULT_SOLVER_CAP).unwrap());
    }

    #[test]
    fn zero_boxes_is_pre_solved() {
        let cfg = GridPushConfig { n_boxes: 0, ..GridPushConfig::desk() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let l = generate_level(&cfg, &mut rng).unwrap();
        assert_eq!(l.n_boxes(), 0);
        assert!(l.is_solved());
    }

    #[test]
    fn tight_config_is_rejected() {
        let cfg = GridPushConfig { width: 3, height: 3, ..GridPushConfig::desk() };
        assert!(generate_level(&cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
