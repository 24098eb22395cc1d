use super::config::SchedulerConfig;

/// Multiplies the learning rate by `factor` once the monitored loss has
/// failed to improve on its best value for more than `patience` consecutive
/// epochs, never going below `min_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauScheduler {
    pub config: SchedulerConfig,
    pub learning_rate: f32,
    pub best: f64,
    pub bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(config: SchedulerConfig, learning_rate: f32) -> Self {
        PlateauScheduler {
            config,
            learning_rate: learning_rate.max(config.min_lr),
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records one epoch's loss. Returns true when the rate was reduced.
    pub fn step(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs <= self.config.patience {
            return false;
        }
        self.bad_epochs = 0;
        let reduced = (self.learning_rate * self.config.factor).max(self.config.min_lr);
        let changed = reduced < self.learning_rate;
        self.learning_rate = reduced;
        changed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn halves_after_patience_is_exceeded() {
        let mut s = PlateauScheduler::new(SchedulerConfig::default(), 1e-3);
        assert!(!s.step(1.0));
        for _ in 0..5 {
            assert!(!s.step(1.0));
        }
        assert!(s.step(1.0));
        assert_eq!(s.learning_rate, 5e-4);
        assert!(!s.step(0.5));
        assert_eq!(s.bad_epochs, 0);
    }

    #[test]
    fn nan_counts_as_no_improvement() {
        let mut s = PlateauScheduler::new(SchedulerConfig { patience: 0, ..SchedulerConfig::default() }, 1.0);
        s.step(1.0);
        assert!(s.step(f64::NAN));
    }

    proptest! {
        #[test]
        fn never_raises_and_respects_floor(losses in prop::collection::vec(0.0f64..10.0, 1..200), patience in 0usize..4) {
            let cfg = SchedulerConfig { patience, min_lr: 1e-3, ..SchedulerConfig::default() };
            let mut s = PlateauScheduler::new(cfg, 0.1);
            let mut prev = s.learning_rate;
            for l in losses {
                s.step(l);
                prop_assert!(s.learning_rate <= prev);
                prop_assert!(s.learning_rate >= cfg.min_lr);
                prev = s.learning_rate;
            }
        }
    }
}
