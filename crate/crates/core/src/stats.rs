//! Small descriptive-statistics helpers shared by the estimators and the harness.

/// Mean and standard error of the mean (sample sd / sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// Sample standard deviation.
    pub fn sd(&self) -> f64 {
        self.se * (self.n as f64).sqrt()
    }
}

/// Median of a slice (average of the two middle values for even length).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Ordinary least-squares fit `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_zero_se() {
        let m = MeanSe::of(&[0.25]);
        assert_eq!((m.mean, m.se), (0.25, 0.0));
    }

    #[test]
    fn bernoulli_half() {
        let xs: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let m = MeanSe::of(&xs);
        assert_eq!(m.mean, 0.5);
        // sd = sqrt(25 / 99), se = sd / 10
        assert!((m.se - (25.0f64 / 99.0).sqrt() / 10.0).abs() < 1e-15);
        assert!((m.se - 0.05).abs() < 5e-4);
    }

    #[test]
    fn median_and_fit() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (a, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }
}
