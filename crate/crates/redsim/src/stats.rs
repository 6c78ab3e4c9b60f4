/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials >= 1 && successes <= trials, "need 0 <= successes <= trials and trials >= 1");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Whether `expected` lies inside the Wilson interval at `z`.
pub fn within_wilson(successes: u64, trials: u64, expected: f64, z: f64) -> bool {
    let (lo, hi) = wilson_interval(successes, trials, z);
    expected >= lo && expected <= hi
}

/// Standard score of an observed frequency against an expected probability,
/// or `None` when the expected value is degenerate.
pub fn z_score(successes: u64, trials: u64, expected: f64) -> Option<f64> {
    let n = trials as f64;
    let sigma = (expected * (1.0 - expected) / n).sqrt();
    (sigma > 0.0).then(|| (successes as f64 / n - expected) / sigma)
}

/// Standard score of the difference between two independent frequencies.
pub fn two_sample_z(a: u64, n_a: u64, b: u64, n_b: u64) -> f64 {
    let (pa, pb) = (a as f64 / n_a as f64, b as f64 / n_b as f64);
    let pooled = (a + b) as f64 / (n_a + n_b) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_a as f64 + 1.0 / n_b as f64)).sqrt();
    if se > 0.0 {
        (pa - pb) / se
    } else if pa == pb {
        0.0
    } else {
        f64::INFINITY
    }
}
