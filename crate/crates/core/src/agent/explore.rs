use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canvas::Point;
use crate::env::{is_stuck, POSITIONS};
use crate::nn::loss::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exploration {
    /// Greedy unless the pen is stuck, then one random action.
    Rare,
    /// ε-greedy with ε annealed linearly from `start` to `end` over
    /// `anneal_frames`, then held.
    Naive { start: f64, end: f64, anneal_frames: u64 },
    /// Always greedy.
    Greedy,
}

impl Exploration {
    pub fn naive() -> Self {
        Exploration::Naive {
            start: 1.0,
            end: 0.1,
            anneal_frames: 50_000,
        }
    }

    pub fn epsilon(&self, frame: u64) -> f64 {
        match *self {
            Exploration::Naive {
                start,
                end,
                anneal_frames,
            } => {
                if anneal_frames == 0 || frame >= anneal_frames {
                    end
                } else {
                    start + (end - start) * frame as f64 / anneal_frames as f64
                }
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub index: usize,
    /// The action was drawn at random rather than taken greedily.
    pub random: bool,
    /// The pen was stuck when choosing.
    pub stuck: bool,
}

/// Picks an action index from Q-values. `history` holds recent pen
/// positions, oldest first.
pub fn choose_action<R: Rng + ?Sized>(
    q: &[f64],
    history: &[Point],
    exploration: &Exploration,
    frame: u64,
    rng: &mut R,
) -> Choice {
    let stuck = is_stuck(history);
    match exploration {
        Exploration::Rare if stuck => Choice {
            index: unstuck_action(q.len(), history, rng),
            random: true,
            stuck,
        },
        Exploration::Naive { .. } if rng.random::<f64>() < exploration.epsilon(frame) => Choice {
            index: rng.random_range(0..q.len()),
            random: true,
            stuck,
        },
        _ => Choice {
            index: argmax(q),
            random: false,
            stuck,
        },
    }
}

/// Uniform over actions whose displacement differs from the move that
/// would close the detected cycle (back to the previous position, or stay
/// put when stationary).
pub fn unstuck_action<R: Rng + ?Sized>(actions: usize, history: &[Point], rng: &mut R) -> usize {
    let n = history.len();
    let offset = match n {
        0 | 1 => None,
        _ => {
            let (prev, cur) = (history[n - 2], history[n - 1]);
            let (dx, dy) = (prev.x - cur.x, prev.y - cur.y);
            (dx.abs() <= 5 && dy.abs() <= 5).then(|| ((dy + 5) * 11 + (dx + 5)) as usize)
        }
    };
    match offset {
        None => rng.random_range(0..actions),
        Some(banned) => {
            // `actions / POSITIONS` indices share the banned displacement
            let pick = rng.random_range(0..actions - actions / POSITIONS);
            let (mode, pos) = (pick / (POSITIONS - 1), pick % (POSITIONS - 1));
            mode * POSITIONS + if pos >= banned { pos + 1 } else { pos }
        }
    }
}
