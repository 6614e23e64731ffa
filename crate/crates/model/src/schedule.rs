//! Linear-beta DDPM noise schedule and the forward process `q_sample`.

use crate::error::{Error, Result};
use candle_core::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub t_train: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            t_train: 1000,
            beta_min: 1e-4,
            beta_max: 2e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Schedule {
    config: ScheduleConfig,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl Schedule {
    pub fn linear(config: ScheduleConfig) -> Result<Self> {
        if config.t_train == 0 {
            return Err(Error::Invalid("t_train must be positive".into()));
        }
        if !(config.beta_min > 0.0 && config.beta_max < 1.0 && config.beta_min <= config.beta_max) {
            return Err(Error::Invalid(format!(
                "betas must satisfy 0 < {} <= {} < 1",
                config.beta_min, config.beta_max
            )));
        }
        let t_train = config.t_train;
        let betas: Vec<f64> = (0..t_train)
            .map(|i| {
                if t_train == 1 {
                    config.beta_min
                } else {
                    config.beta_min
                        + (config.beta_max - config.beta_min) * i as f64 / (t_train - 1) as f64
                }
            })
            .collect();
        let mut alpha_bars = Vec::with_capacity(t_train);
        let mut prod = 1.0;
        for &beta in &betas {
            prod *= 1.0 - beta;
            alpha_bars.push(prod);
        }
        // invariants: 0 < beta < 1 holds by the range check; alpha_bar must
        // be strictly decreasing and start near 1
        debug_assert!(alpha_bars.windows(2).all(|w| w[1] < w[0]));
        Ok(Schedule {
            config,
            betas,
            alpha_bars,
        })
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    pub fn t_train(&self) -> usize {
        self.config.t_train
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.config.t_train {
            return Err(Error::TimestepOutOfRange {
                t,
                t_train: self.config.t_train,
            });
        }
        Ok(())
    }

    /// `beta_t` for 1-indexed `t`.
    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.betas[t - 1])
    }

    /// Cumulative product `alpha_bar_t` for 1-indexed `t`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.check(t)?;
        Ok(self.alpha_bars[t - 1])
    }

    /// `z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps`.
    pub fn q_sample(&self, z0: &Tensor, t: usize, eps: &Tensor) -> Result<Tensor> {
        if z0.dims() != eps.dims() {
            return Err(Error::Incompatible(format!(
                "q_sample shapes {:?} vs {:?}",
                z0.dims(),
                eps.dims()
            )));
        }
        let ab = self.alpha_bar(t)?;
        let a = (z0 * ab.sqrt())?;
        let b = (eps * (1.0 - ab).sqrt())?;
        Ok((a + b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_util::randn;
    use candle_core::Device;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_schedule() -> Schedule {
        Schedule::linear(ScheduleConfig::default()).unwrap()
    }

    #[test]
    fn alpha_bar_strictly_decreasing_from_near_one() {
        let s = default_schedule();
        assert!((s.alpha_bar(1).unwrap() - (1.0 - 1e-4)).abs() < 1e-12);
        for t in 2..=1000 {
            assert!(s.alpha_bar(t).unwrap() < s.alpha_bar(t - 1).unwrap());
        }
        // endpoints match config
        assert!((s.beta(1).unwrap() - 1e-4).abs() < 1e-15);
        assert!((s.beta(1000).unwrap() - 2e-2).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_rejected() {
        for (t, lo, hi) in [(0usize, 1e-4, 2e-2), (10, 0.0, 0.5), (10, 0.5, 1.0), (10, 0.5, 0.1)] {
            assert!(Schedule::linear(ScheduleConfig {
                t_train: t,
                beta_min: lo,
                beta_max: hi
            })
            .is_err());
        }
    }

    #[test]
    fn q_sample_early_step_close_to_z0() {
        let s = default_schedule();
        let dev = Device::Cpu;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z0 = randn(&mut rng, &[2, 4, 4], &dev).unwrap();
        let eps = randn(&mut rng, &[2, 4, 4], &dev).unwrap();
        let zt = s.q_sample(&z0, 1, &eps).unwrap();
        let diff = (zt - &z0).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(diff <= 1e-1, "max dev {diff}");
    }

    #[test]
    fn q_sample_zero_noise_is_exact_scaling() {
        let s = default_schedule();
        let dev = Device::Cpu;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z0 = randn(&mut rng, &[3, 5], &dev).unwrap();
        let eps = Tensor::zeros(&[3, 5], candle_core::DType::F32, &dev).unwrap();
        for t in [1usize, 250, 1000] {
            let zt = s.q_sample(&z0, t, &eps).unwrap();
            let expect = (&z0 * s.alpha_bar(t).unwrap().sqrt()).unwrap();
            let diff = (zt - expect).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
            assert_eq!(diff, 0.0);
        }
    }

    #[test]
    fn q_sample_variance_matches_one_minus_alpha_bar() {
        // Monte-Carlo oracle: for z0 = 0, Var(z_t) = 1 - alpha_bar_t
        let s = default_schedule();
        let dev = Device::Cpu;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z0 = Tensor::zeros(&[10_000], candle_core::DType::F32, &dev).unwrap();
        for t in [100usize, 600] {
            let eps = randn(&mut rng, &[10_000], &dev).unwrap();
            let zt = s.q_sample(&z0, t, &eps).unwrap();
            let v = zt.to_vec1::<f32>().unwrap();
            let mean: f64 = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
            let var: f64 =
                v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / v.len() as f64;
            let expect = 1.0 - s.alpha_bar(t).unwrap();
            assert!((var - expect).abs() < 0.05, "t={t}: {var} vs {expect}");
        }
    }

    #[test]
    fn out_of_range_t_rejected() {
        let s = default_schedule();
        let dev = Device::Cpu;
        let z = Tensor::zeros(&[2], candle_core::DType::F32, &dev).unwrap();
        assert!(matches!(
            s.q_sample(&z, 0, &z),
            Err(Error::TimestepOutOfRange { .. })
        ));
        assert!(s.q_sample(&z, 1001, &z).is_err());
    }
}
