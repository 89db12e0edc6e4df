use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Optimal-transport conditional path between `N(0, I)` at `t = T` and the
/// data at `t = 0`.
///
/// With `t' = (T - t) / T` the path point is `σ_t ε + t' x₀` where
/// `σ_t = 1 - (1 - σ_min) t'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSchedule {
    pub horizon: f64,
    pub sigma_min: f64,
}

impl Default for FlowSchedule {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            sigma_min: 1e-4,
        }
    }
}

impl FlowSchedule {
    pub fn new(horizon: f64, sigma_min: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if !(sigma_min > 0.0 && sigma_min < 1.0) {
            return Err(Error::Config(format!("sigma_min must lie in (0, 1), got {sigma_min}")));
        }
        Ok(Self { horizon, sigma_min })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `t' = (T - t) / T`: 0 at the noise end, 1 at the data end.
    pub fn progress(&self, t: f64) -> f64 {
        (self.horizon - t) / self.horizon
    }

    pub fn sigma(&self, t: f64) -> f64 {
        1.0 - (1.0 - self.sigma_min) * self.progress(t)
    }

    /// Point on the conditional path: `σ_t ε + t' x₀`.
    pub fn sample_path_point(&self, x0: &Tensor, t: f64, noise: &Tensor) -> Result<Tensor> {
        self.check_time(t)?;
        let (s, tp) = (self.sigma(t), self.progress(t));
        Ok(noise.zip_map(x0, |e, x| s * e + tp * x))
    }

    /// Regression target `x₀ - (1 - σ_min) ε`, constant in `t` along the path.
    pub fn target_field(&self, x0: &Tensor, noise: &Tensor) -> Tensor {
        let c = 1.0 - self.sigma_min;
        x0.zip_map(noise, |x, e| x - c * e)
    }

    /// Conditional field `(x₀ - (1 - σ_min) x) / (1 - (1 - σ_min) t')` at an
    /// arbitrary position `x`.
    pub fn conditional_field(&self, x: &Tensor, x0: &Tensor, t: f64) -> Result<Tensor> {
        self.check_time(t)?;
        let c = 1.0 - self.sigma_min;
        let denom = 1.0 - c * self.progress(t);
        Ok(x0.zip_map(x, |a, b| (a - c * b) / denom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::standard_normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn draws(seed: u64, m: usize) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (standard_normal(&mut rng, &[m, 3]), standard_normal(&mut rng, &[m, 3]))
    }

    #[test]
    fn noise_end_is_pure_noise() {
        let s = FlowSchedule::default();
        let (x0, e) = draws(1, 17);
        assert_eq!(s.sample_path_point(&x0, 1.0, &e).unwrap(), e);
    }

    #[test]
    fn data_end_is_within_sigma_min() {
        let s = FlowSchedule::default();
        let (x0, e) = draws(2, 17);
        let x = s.sample_path_point(&x0, 0.0, &e).unwrap();
        let err = x.zip_map(&x0, |a, b| (a - b).abs()).max_abs();
        assert!(err <= s.sigma_min * e.max_abs() * (1.0 + 1e-12));
    }

    #[test]
    fn midpoint_by_hand() {
        // σ at t' = 1/2 is 1 - 0.9999 / 2 = 0.50005
        let s = FlowSchedule::default();
        let x0 = Tensor::row(vec![2.0, -4.0, 0.0]);
        let e = Tensor::row(vec![1.0, 1.0, -2.0]);
        let x = s.sample_path_point(&x0, 0.5, &e).unwrap();
        let expected = [0.50005 + 1.0, 0.50005 - 2.0, -1.0001];
        for (a, b) in x.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn time_outside_horizon_rejected() {
        let s = FlowSchedule::default();
        let (x0, e) = draws(3, 2);
        assert!(matches!(
            s.sample_path_point(&x0, 1.5, &e),
            Err(Error::TimeOutOfRange { .. })
        ));
        assert!(s.sample_path_point(&x0, -0.1, &e).is_err());
        assert!(FlowSchedule::new(1.0, 1.0).is_err());
        assert!(FlowSchedule::new(0.0, 0.1).is_err());
    }

    #[test]
    fn target_in_limits() {
        let s = FlowSchedule::new(1.0, 1e-12).unwrap();
        let (x0, e) = draws(4, 5);
        let v = s.target_field(&x0, &e);
        let straight = x0.zip_map(&e, |a, b| a - b);
        assert!(v.zip_map(&straight, |a, b| (a - b).abs()).max_abs() < 1e-10);

        let s = FlowSchedule::default();
        let v = s.target_field(&e, &e);
        assert!(v.zip_map(&e, |a, b| (a - s.sigma_min * b).abs()).max_abs() < 1e-15);
    }

    #[test]
    fn conditional_field_on_path_equals_target() {
        let s = FlowSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..200 {
            let (x0, e) = draws(100 + k, 4);
            let t = rng.random_range(0.0..1.0);
            let x = s.sample_path_point(&x0, t, &e).unwrap();
            let a = s.conditional_field(&x, &x0, t).unwrap();
            let b = s.target_field(&x0, &e);
            assert!(a.zip_map(&b, |p, q| (p - q).abs()).max_abs() < 1e-10);
        }
    }
}
