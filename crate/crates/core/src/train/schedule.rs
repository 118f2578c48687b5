use serde::{Deserialize, Serialize};

/// Linear interpolation from `start` to `end` over `episodes`, clamped at
/// `end` afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub episodes: usize,
}

impl LinearSchedule {
    pub fn new(start: f64, end: f64, episodes: usize) -> Self {
        LinearSchedule { start, end, episodes }
    }

    pub fn value(&self, episode: usize) -> f64 {
        if self.episodes == 0 || episode >= self.episodes {
            return self.end;
        }
        let frac = episode as f64 / self.episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}
