use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

/// Mean and variance of a sample of counts compared with a Poisson law of
/// mean `mu`, each as a z-score.
#[derive(Clone, Debug, Serialize)]
pub struct DispersionTest {
    pub n: usize,
    pub mu: f64,
    pub mean: f64,
    pub variance: f64,
    pub mean_z: f64,
    pub variance_z: f64,
}

impl DispersionTest {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.mean_z.abs() <= sigmas && self.variance_z.abs() <= sigmas
    }
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Uses the exact variance of the sample variance of `n` Poisson(mu) draws.
pub fn poisson_dispersion(counts: &[u64], mu: f64) -> DispersionTest {
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let n = xs.len();
    let (mean, variance) = mean_var(&xs);
    let nf = n as f64;
    let mean_z = (mean - mu) / (mu / nf).sqrt();
    let var_of_var = (mu + 3.0 * mu * mu) / nf - mu * mu * (nf - 3.0) / (nf * (nf - 1.0));
    let variance_z = (variance - mu) / var_of_var.sqrt();
    DispersionTest { n, mu, mean, variance, mean_z, variance_z }
}

/// One-sided sign test: probability of at least `wins` successes among
/// `wins + losses` fair coin flips.
pub fn sign_test(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    if wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    1.0 - b.cdf(wins - 1)
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept, r_squared }
}

/// Empirical `P(X > k)` for `k = 0..=kmax`.
pub fn tail(xs: &[usize], kmax: usize) -> Vec<f64> {
    let n = xs.len() as f64;
    (0..=kmax).map(|k| xs.iter().filter(|&&x| x > k).count() as f64 / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_of_lopsided_counts_is_small() {
        assert!(sign_test(20, 0) < 1e-5);
        assert!((sign_test(5, 5) - 0.623046875).abs() < 1e-9);
        assert_eq!(sign_test(0, 10), 1.0);
    }

    #[test]
    fn perfect_line_has_unit_r_squared() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }
}
