use crate::domain::{OrderModel, OrderPair, VesselSpec};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Multiplicative demand noise: normal with mean 1 and standard deviation
/// `cv`, redrawn until non-negative.
fn demand_noise<R: Rng + ?Sized>(cv: f64, rng: &mut R) -> f64 {
    if cv <= 0.0 {
        return 1.0;
    }
    let normal = Normal::new(1.0, cv).expect("finite cv");
    loop {
        let x = normal.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
}

/// Orders for one origin/destination pair on `day`.
pub fn sample_pair<R: Rng + ?Sized>(pair: &OrderPair, day: u32, rng: &mut R) -> i64 {
    let noise = demand_noise(pair.noise_cv, rng);
    (pair.clipped_mean(day) * noise).round() as i64
}

/// Orders for every pair of the model on `day`, in declaration order.
pub fn sample_orders<R: Rng + ?Sized>(
    m: &OrderModel,
    day: u32,
    rng: &mut R,
) -> Vec<(String, String, i64)> {
    m.pairs
        .iter()
        .map(|p| {
            (
                p.origin.clone(),
                p.destination.clone(),
                sample_pair(p, day, rng),
            )
        })
        .collect()
}

/// Whole days for one leg: `max(1, round(leg_days * m))` with the multiplier
/// `m` uniform on `[1 - sigma, 1 + sigma]`.
pub fn travel_days<R: Rng + ?Sized>(sigma: f64, leg_days: f64, rng: &mut R) -> u32 {
    let m = if sigma > 0.0 {
        rng.random_range(1.0 - sigma..=1.0 + sigma)
    } else {
        1.0
    };
    (leg_days * m).round().max(1.0) as u32
}

pub fn sample_travel_time<R: Rng + ?Sized>(v: &VesselSpec, leg_days: f64, rng: &mut R) -> u32 {
    travel_days(v.speed_noise.sigma, leg_days, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Period, SpeedNoise};
    use crate::seed::rng_from;

    fn pair(base: f64, periods: Vec<Period>, cv: f64) -> OrderPair {
        OrderPair {
            origin: "A".into(),
            destination: "B".into(),
            base_volume: base,
            periods,
            noise_cv: cv,
        }
    }

    #[test]
    fn constant_demand_without_noise() {
        let p = pair(10.0, vec![], 0.0);
        let mut rng = rng_from(1);
        for day in 0..50 {
            assert_eq!(sample_pair(&p, day, &mut rng), 10);
        }
    }

    #[test]
    fn sine_peak_at_quarter_period() {
        let p = pair(
            10.0,
            vec![Period {
                amplitude: 1.0,
                period_days: 20.0,
                phase: 0.0,
            }],
            0.0,
        );
        assert_eq!(sample_pair(&p, 5, &mut rng_from(3)), 20);
    }

    #[test]
    fn noisy_mean_matches_clipped_mean() {
        // Monte-Carlo oracle: 1e5 draws against the analytic clipped mean.
        let p = pair(
            10.0,
            vec![
                Period {
                    amplitude: 0.5,
                    period_days: 30.0,
                    phase: 0.3,
                },
                Period {
                    amplitude: 0.8,
                    period_days: 7.0,
                    phase: 1.0,
                },
            ],
            0.2,
        );
        let mut rng = rng_from(11);
        for day in [0u32, 3, 9] {
            let expected = p.clipped_mean(day);
            let n = 100_000;
            let total: i64 = (0..n).map(|_| sample_pair(&p, day, &mut rng)).sum();
            let mean = total as f64 / n as f64;
            assert!(
                (mean - expected).abs() <= 0.01 * expected,
                "day {day}: {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn clipped_days_produce_zero() {
        let p = pair(
            10.0,
            vec![Period {
                amplitude: 2.0,
                period_days: 20.0,
                phase: 0.0,
            }],
            0.0,
        );
        // sin(3pi/2) = -1 -> 10 * (1 - 2) clipped to 0
        assert_eq!(sample_pair(&p, 15, &mut rng_from(0)), 0);
    }

    #[test]
    fn travel_time_examples() {
        let v = VesselSpec {
            id: "v".into(),
            capacity: 1,
            speed_noise: SpeedNoise { sigma: 0.0 },
        };
        let mut rng = rng_from(5);
        assert_eq!(sample_travel_time(&v, 3.0, &mut rng), 3);
        assert_eq!(sample_travel_time(&v, 0.4, &mut rng), 1);
    }

    #[test]
    fn travel_time_distribution() {
        let mut rng = rng_from(8);
        let n = 100_000;
        let mut total = 0u64;
        for _ in 0..n {
            let d = travel_days(0.25, 4.0, &mut rng);
            assert!((3..=5).contains(&d));
            total += u64::from(d);
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() <= 0.02 * 4.0, "{mean}");
    }
}
