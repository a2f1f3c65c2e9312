//! Exact draws from the Polya-Gamma distribution `PG(1, z)` by Devroye-style
//! alternating-series rejection.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::math::log_normal_cdf;

const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / TRUNC;

/// Coefficient `a_n(x)` of the alternating series for the `J*(1, 0)` density.
fn series_coef(n: usize, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        k * (-0.5 * k * k * x).exp()
    } else if x > 0.0 {
        let h = n as f64 + 0.5;
        (-1.5 * ((0.5 * PI).ln() + x.ln()) + k.ln() - 2.0 * h * h / x).exp()
    } else {
        0.0
    }
}

/// Probability that the proposal comes from the exponential piece.
fn mass_texpon(z: f64) -> f64 {
    let t = TRUNC;
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let b = (1.0 / t).sqrt() * (t * z - 1.0);
    let a = -(1.0 / t).sqrt() * (t * z + 1.0);
    let x0 = fz.ln() + fz * t;
    let xb = x0 - z + log_normal_cdf(b);
    let xa = x0 + z + log_normal_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// Inverse-Gaussian draw with mean `1/z`, shape 1, truncated to `(0, TRUNC)`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    let t = TRUNC;
    if z < TRUNC_RECIP {
        // mean above the truncation point: scaled inverse-chi-square proposal
        loop {
            let (mut e1, mut e2): (f64, f64) = (Exp1.sample(rng), Exp1.sample(rng));
            while e1 * e1 > 2.0 * e2 / t {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
            }
            let d = 1.0 + e1 * t;
            let x = t / (d * d);
            if rng.random::<f64>() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let y: f64 = StandardNormal.sample(rng);
            let y = y * y;
            let mu_y = mu * y;
            let mut x = mu + 0.5 * mu * mu_y - 0.5 * mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < t {
                return x;
            }
        }
    }
}

/// One draw of `omega ~ PG(1, z)`.
pub fn sample_pg1<R: Rng + ?Sized>(z: f64, rng: &mut R) -> f64 {
    // PG(1, z) = J*(1, z/2) / 4
    let z = 0.5 * z.abs();
    let fz = 0.125 * PI * PI + 0.5 * z * z;
    let p_exp = mass_texpon(z);
    loop {
        let x = if rng.random::<f64>() < p_exp {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// `E[PG(1, z)] = tanh(z/2) / (2z)`.
pub fn pg1_mean(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        0.25 - z * z / 48.0
    } else {
        (0.5 * z).tanh() / (2.0 * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn moments_match_closed_form() {
        let mut rng = rng_from(21, &[]);
        for &z in &[0.0, 0.5, 1.5, 4.0, 12.0] {
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| sample_pg1(z, &mut rng)).collect();
            let m = crate::math::mean(&draws);
            let sd = crate::math::sample_variance(&draws).sqrt();
            let expected = pg1_mean(z);
            assert!(draws.iter().all(|&w| w > 0.0));
            assert!((m - expected).abs() < 4.0 * sd / (n as f64).sqrt(), "z={z} mean {m} vs {expected}");
        }
    }

    #[test]
    fn variance_at_zero() {
        // Var[PG(1, 0)] = 1/24
        let mut rng = rng_from(22, &[]);
        let draws: Vec<f64> = (0..200_000).map(|_| sample_pg1(0.0, &mut rng)).collect();
        assert!((crate::math::sample_variance(&draws) - 1.0 / 24.0).abs() < 1.5e-3);
    }

    #[test]
    fn symmetric_in_z() {
        let a = sample_pg1(2.0, &mut rng_from(1, &[]));
        let b = sample_pg1(-2.0, &mut rng_from(1, &[]));
        assert_eq!(a, b);
    }
}
