use serde::{Deserialize, Serialize};

use super::DetectionError;

pub const DEFAULT_PATIENCE: usize = 50;
pub const DEFAULT_MAX_EPOCHS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EarlyStopDecision {
    Continue,
    /// Validation AP improved; persist this epoch's weights.
    Checkpoint(usize),
    /// Training is over; restore the checkpoint from this epoch.
    Stop(usize),
}

/// Patience-based early stopping on validation AP. Only a strict improvement resets patience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopState {
    pub best_ap: f64,
    pub best_epoch: usize,
    pub epochs_since_best: usize,
    pub patience: usize,
    pub max_epochs: usize,
    last_epoch: usize,
    stopped: bool,
}

impl Default for EarlyStopState {
    fn default() -> Self {
        Self::new(DEFAULT_PATIENCE, DEFAULT_MAX_EPOCHS)
    }
}

impl EarlyStopState {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        Self {
            best_ap: f64::NEG_INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
            patience,
            max_epochs,
            last_epoch: 0,
            stopped: false,
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Feeds epoch `epoch` (1-based, consecutive) with its validation AP.
    pub fn step(&mut self, epoch: usize, val_ap: f64) -> Result<EarlyStopDecision, DetectionError> {
        if self.stopped {
            return Err(DetectionError::AlreadyStopped);
        }
        let expected = self.last_epoch + 1;
        if epoch != expected {
            return Err(DetectionError::EpochOutOfOrder { epoch, expected });
        }
        self.last_epoch = epoch;

        let improved = val_ap > self.best_ap;
        if improved {
            self.best_ap = val_ap;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
        } else {
            self.epochs_since_best += 1;
        }

        if self.epochs_since_best >= self.patience || epoch >= self.max_epochs {
            self.stopped = true;
            return Ok(EarlyStopDecision::Stop(self.best_epoch));
        }
        Ok(if improved { EarlyStopDecision::Checkpoint(epoch) } else { EarlyStopDecision::Continue })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_epoch_checkpoints() {
        let mut s = EarlyStopState::default();
        assert_eq!(s.step(1, 0.0).unwrap(), EarlyStopDecision::Checkpoint(1));
    }

    #[test]
    fn plateau_after_44_stops_at_94() {
        let mut s = EarlyStopState::default();
        let mut last_checkpoint = None;
        let mut stop = None;
        for epoch in 1..=500 {
            let ap = if epoch <= 44 { epoch as f64 / 50.0 } else { 44.0 / 50.0 };
            match s.step(epoch, ap).unwrap() {
                EarlyStopDecision::Checkpoint(e) => last_checkpoint = Some(e),
                EarlyStopDecision::Stop(best) => {
                    stop = Some((epoch, best));
                    break;
                }
                EarlyStopDecision::Continue => {}
            }
        }
        assert_eq!(last_checkpoint, Some(44));
        assert_eq!(stop, Some((94, 44)));
    }

    #[test]
    fn cap_at_max_epochs() {
        let mut s = EarlyStopState::default();
        for epoch in 1..500 {
            assert_eq!(s.step(epoch, epoch as f64).unwrap(), EarlyStopDecision::Checkpoint(epoch));
        }
        assert_eq!(s.step(500, 500.0).unwrap(), EarlyStopDecision::Stop(500));
        assert_eq!(s.step(501, 1.0), Err(DetectionError::AlreadyStopped));
    }

    #[test]
    fn out_of_order_rejected() {
        let mut s = EarlyStopState::default();
        s.step(1, 0.5).unwrap();
        assert!(matches!(s.step(3, 0.5), Err(DetectionError::EpochOutOfOrder { epoch: 3, expected: 2 })));
        assert_eq!(s.step(2, 0.4).unwrap(), EarlyStopDecision::Continue);
    }

    #[test]
    fn equal_ap_does_not_reset_patience() {
        let mut s = EarlyStopState::new(3, 100);
        s.step(1, 0.5).unwrap();
        assert_eq!(s.step(2, 0.5).unwrap(), EarlyStopDecision::Continue);
        assert_eq!(s.step(3, 0.5).unwrap(), EarlyStopDecision::Continue);
        assert_eq!(s.step(4, 0.5).unwrap(), EarlyStopDecision::Stop(1));
    }
}
