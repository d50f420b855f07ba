//! Rejection of identities whose per-probe RSSI varies too much to come
//! from a stationary transmitter.

/// Sample standard deviation (n − 1 denominator); `None` below two values.
pub fn sample_std(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionVerdict {
    Stationary { std: f64 },
    Moving { std: f64 },
    /// Fewer than two probes were heard.
    TooFewProbes,
}

impl MotionVerdict {
    pub fn rejects(self) -> bool {
        !matches!(self, MotionVerdict::Stationary { .. })
    }
}

/// Judges the probes of one transmitter as heard by one observer.
pub fn motion_filter(series: &[Option<f64>], max_std: f64) -> MotionVerdict {
    let heard: Vec<f64> = series.iter().flatten().copied().collect();
    match sample_std(&heard) {
        None => MotionVerdict::TooFewProbes,
        Some(std) if std > max_std => MotionVerdict::Moving { std },
        Some(std) => MotionVerdict::Stationary { std },
    }
}
