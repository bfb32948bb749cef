use crate::scalar::Scalar;

/// Linear decay from `initial` to `floor` over `[0, decay_end]`, held at
/// `floor`, then step drops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: Scalar,
    pub floor: Scalar,
    pub decay_end: u64,
    /// Iteration where the floor is known to still hold.
    pub plateau_end: u64,
    pub drops: [(u64, Scalar); 2],
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            initial: 1e-3,
            floor: 1e-4,
            decay_end: 120_000,
            plateau_end: 200_000,
            drops: [(250_000, 5e-5), (300_000, 1e-5)],
        }
    }
}

impl LrSchedule {
    /// Every knot multiplied by `factor`, learning rates unchanged.
    pub fn scaled(&self, factor: f64) -> Self {
        let k = |i: u64| libm::round((i as f64) * factor).max(1.0) as u64;
        LrSchedule {
            decay_end: k(self.decay_end),
            plateau_end: k(self.plateau_end),
            drops: [
                (k(self.drops[0].0), self.drops[0].1),
                (k(self.drops[1].0), self.drops[1].1),
            ],
            ..*self
        }
    }

    /// The default schedule compressed so its last drop lands on `total`.
    pub fn fitted(total: u64) -> Self {
        let d = Self::default();
        d.scaled(total as f64 / d.drops[1].0 as f64)
    }

    pub fn lr_at(&self, iteration: u64) -> Scalar {
        if iteration < self.decay_end {
            let f = iteration as Scalar / self.decay_end as Scalar;
            return self.initial + (self.floor - self.initial) * f;
        }
        let mut lr = self.floor;
        for (at, value) in self.drops {
            if iteration >= at && iteration >= self.plateau_end {
                lr = value;
            }
        }
        lr
    }
}

pub fn lr_at(iteration: u64, schedule: &LrSchedule) -> Scalar {
    schedule.lr_at(iteration)
}
