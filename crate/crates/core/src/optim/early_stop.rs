/// Outcome of feeding one validation loss to an [`EarlyStopper`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Stops training once the validation loss has failed to drop strictly
/// below the best value seen for `patience` consecutive evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopper {
    best: f64,
    since_improvement: usize,
    patience: usize,
    improved: bool,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            best: f64::INFINITY,
            since_improvement: 0,
            patience,
            improved: false,
        }
    }

    pub fn update(&mut self, val_loss: f64) -> StopDecision {
        self.improved = val_loss < self.best;
        if self.improved {
            self.best = val_loss;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        if self.since_improvement >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    /// Whether the most recent update set a new best.
    pub fn improved(&self) -> bool {
        self.improved
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since_improvement
    }

    pub fn patience(&self) -> usize {
        self.patience
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop_index(losses: &[f64], patience: usize) -> Option<usize> {
        let mut s = EarlyStopper::new(patience);
        losses
            .iter()
            .position(|&l| s.update(l) == StopDecision::Stop)
    }

    #[test]
    fn monotone_improvement_never_stops() {
        let losses: Vec<f64> = (0..50).map(|i| 1.0 - 0.01 * i as f64).collect();
        assert_eq!(stop_index(&losses, 5), None);
    }

    #[test]
    fn flat_losses_stop_after_sixth_value() {
        assert_eq!(stop_index(&[1.0; 6], 5), Some(5));
        assert_eq!(stop_index(&[1.0; 5], 5), None);
    }

    #[test]
    fn improvement_is_measured_against_best_not_previous() {
        let losses = [1.0, 0.9, 0.95, 0.94, 0.93, 0.92, 0.91];
        assert_eq!(stop_index(&losses, 5), Some(6));
    }

    #[test]
    fn counter_stays_within_patience() {
        let mut s = EarlyStopper::new(3);
        for l in [1.0, 2.0, 0.5, 0.6, 0.7] {
            s.update(l);
            assert!(s.epochs_since_improvement() <= s.patience());
        }
        assert_eq!(s.best(), 0.5);
        assert!(!s.improved());
    }
}
