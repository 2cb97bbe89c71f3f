use crate::volume::LocalEnvironment;

/// Mean, standard deviation, skewness and excess kurtosis with population
/// normalization. Skewness and kurtosis are 0 for (numerically) constant
/// input.
pub fn moments_of(values: &[f64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let scale = values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let floor = 1e-12 * scale;
    if m2 <= floor * floor {
        return [mean, 0.0, 0.0, 0.0];
    }
    let sd = m2.sqrt();
    [mean, sd, m3 / (m2 * sd), m4 / (m2 * m2) - 3.0]
}

pub fn moments(env: &LocalEnvironment) -> [f64; 4] {
    moments_of(&env.values)
}

pub fn position_feature(center: [usize; 3]) -> [f64; 3] {
    [center[0] as f64, center[1] as f64, center[2] as f64]
}
