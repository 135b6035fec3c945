use std::collections::VecDeque;

use rand::seq::index::sample;

use crate::rng::Rng;

/// One environment step. Recurrent utilities restart from a zero hidden
/// state at the beginning of every stored episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_observations: Vec<Vec<f64>>,
    /// True terminal; the bootstrap term is dropped.
    pub terminal: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn team_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// FIFO buffer of whole episodes.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Episode>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), episodes: VecDeque::new() }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn push(&mut self, episode: Episode) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    /// Uniform sample of `batch` distinct episodes (all of them if fewer).
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Vec<&Episode> {
        let n = batch.min(self.episodes.len());
        sample(rng, self.episodes.len(), n).into_iter().map(|i| &self.episodes[i]).collect()
    }
}
