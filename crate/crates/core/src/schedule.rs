//! Piecewise-linear learning-rate schedules.

/// Constant `base` before `decay_start`, then linear interpolation reaching
/// `floor` exactly at the `total` boundary (the end of training). `epoch` may
/// be queried at `total` itself, where the floor is returned.
pub fn linear_decay(epoch: usize, total: usize, decay_start: usize, base: f64, floor: f64) -> f64 {
    if epoch <= decay_start || total <= decay_start {
        return base;
    }
    let e = epoch.min(total);
    let t = (e - decay_start) as f64 / (total - decay_start) as f64;
    base + (floor - base) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_schedule_constant_then_linear_to_zero() {
        let lr = |e| linear_decay(e, 300, 200, 2e-4, 0.0);
        assert_eq!(lr(0), 2e-4);
        assert_eq!(lr(199), 2e-4);
        assert_eq!(lr(200), 2e-4);
        assert!((lr(250) - 1e-4).abs() < 1e-12);
        assert_eq!(lr(300), 0.0);
    }

    #[test]
    fn light_network_schedule_decays_to_half() {
        let lr = |e| linear_decay(e, 200, 100, 1e-3, 5e-4);
        assert_eq!(lr(0), 1e-3);
        assert!((lr(150) - 7.5e-4).abs() < 1e-12);
        assert_eq!(lr(200), 5e-4);
        // the last epoch index sits one step above the floor
        assert!((lr(199) - 5.05e-4).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_continuous_and_monotone() {
        let mut prev = f64::INFINITY;
        for e in 0..=300 {
            let v = linear_decay(e, 300, 200, 2e-4, 0.0);
            assert!(v <= prev + 1e-15);
            assert!(v >= 0.0);
            if e > 0 {
                let step = (prev - v).abs();
                assert!(step <= 2e-4 / 100.0 + 1e-12, "discontinuity at {e}");
            }
            prev = v;
        }
    }
}
