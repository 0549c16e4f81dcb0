use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Simulation step, seconds.
    pub step_s: f64,
    /// Aggregation window, seconds; a whole number of steps.
    pub window_s: f64,
    pub warmup_s: f64,
    pub peak_s: f64,
    pub total_s: f64,
    /// veh/s per lane at the stop line.
    pub saturation_flow: f64,
    /// Storage spacing, meters per vehicle.
    pub vehicle_length: f64,
    /// Occupancy fraction at which a link stops receiving.
    pub congestion_threshold: f64,
    /// km/h.
    pub v_min: f64,
    pub turn_update_s: f64,
    /// Weight of the new all-or-nothing split when refreshing turn ratios.
    pub turn_smoothing: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step_s: 5.0,
            window_s: 180.0,
            warmup_s: 900.0,
            peak_s: 6300.0,
            total_s: 21600.0,
            saturation_flow: 0.5,
            vehicle_length: 7.0,
            congestion_threshold: 0.95,
            v_min: 1.0,
            turn_update_s: 180.0,
            turn_smoothing: 0.5,
        }
    }
}

fn whole_multiple(value: f64, unit: f64) -> Option<usize> {
    let n = (value / unit).round();
    ((n * unit - value).abs() <= 1e-9 * value.abs().max(1.0) && n >= 1.0).then_some(n as usize)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.step_s > 0.0) {
            return bad(format!("step_s must be positive, got {}", self.step_s));
        }
        if whole_multiple(self.window_s, self.step_s).is_none() {
            return bad(format!(
                "window_s ({}) must be a whole multiple of step_s ({})",
                self.window_s, self.step_s
            ));
        }
        if whole_multiple(self.total_s, self.window_s).is_none() {
            return bad(format!(
                "total_s ({}) must be a whole number of windows",
                self.total_s
            ));
        }
        if whole_multiple(self.turn_update_s, self.step_s).is_none() {
            return bad("turn_update_s must be a whole multiple of step_s".into());
        }
        if self.warmup_s < 0.0 || self.peak_s < 0.0 || self.total_s < self.warmup_s + self.peak_s {
            return bad("total_s must cover warmup_s + peak_s".into());
        }
        if !(self.congestion_threshold > 0.0 && self.congestion_threshold <= 1.0) {
            return bad("congestion_threshold must be in (0, 1]".into());
        }
        if !(self.saturation_flow > 0.0 && self.vehicle_length > 0.0 && self.v_min > 0.0) {
            return bad("saturation_flow, vehicle_length and v_min must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.turn_smoothing) {
            return bad("turn_smoothing must be in [0, 1]".into());
        }
        Ok(())
    }

    pub fn steps_per_window(&self) -> usize {
        whole_multiple(self.window_s, self.step_s).expect("validated config")
    }

    pub fn num_windows(&self) -> usize {
        whole_multiple(self.total_s, self.window_s).expect("validated config")
    }

    pub fn num_steps(&self) -> usize {
        self.num_windows() * self.steps_per_window()
    }

    pub fn steps_per_turn_update(&self) -> usize {
        whole_multiple(self.turn_update_s, self.step_s).expect("validated config")
    }

    /// Fraction of peak demand active at time `t`: linear ramp over the
    /// warm-up, flat through the peak, zero afterwards.
    pub fn demand_profile(&self, t: f64) -> f64 {
        if t < self.warmup_s {
            t / self.warmup_s
        } else if t < self.warmup_s + self.peak_s {
            1.0
        } else {
            0.0
        }
    }

    /// Number of whole windows inside the warm-up.
    pub fn warmup_windows(&self) -> usize {
        (self.warmup_s / self.window_s).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_has_120_windows() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.num_windows(), 120);
        assert_eq!(cfg.steps_per_window(), 36);
        assert_eq!(cfg.num_steps(), 4320);
    }

    #[test]
    fn rejects_fractional_window() {
        let cfg = SimConfig {
            window_s: 182.0,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig {
            total_s: 1000.0,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn profile_ramps() {
        let cfg = SimConfig::default();
        assert_eq!(cfg.demand_profile(0.0), 0.0);
        assert_eq!(cfg.demand_profile(450.0), 0.5);
        assert_eq!(cfg.demand_profile(900.0), 1.0);
        assert_eq!(cfg.demand_profile(7199.0), 1.0);
        assert_eq!(cfg.demand_profile(7200.0), 0.0);
    }
}
