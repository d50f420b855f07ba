//! Signalprints, the slope-1-line distance between them, and view generation.
//!
//! A signalprint is the vector of RSSIs that several observers record for
//! one transmission. Changing the transmit power adds the same constant to
//! every entry, so a transmitter location corresponds to a line of slope 1
//! rather than a point. Two signalprints are compared by the perpendicular
//! distance between their lines.

mod observation;
mod union_find;
mod view;

use num_traits::Float;
use serde::{Deserialize, Serialize};

pub use observation::ObservationMatrix;
pub use union_find::UnionFind;
pub use view::{generate_view, generate_view_with_clusters, ReceiverSet, View};

use crate::error::{Error, Result};
use crate::ids::IdentityId;
use crate::scalar::{le, Scalar};

/// RSSI values for one transmitter, one entry per observer.
#[derive(Debug, Clone, PartialEq)]
pub struct Signalprint<S> {
    observers: Vec<IdentityId>,
    values: Vec<Option<S>>,
}

impl<S: Scalar> Signalprint<S> {
    pub fn new(observers: Vec<IdentityId>, values: Vec<Option<S>>) -> Result<Self> {
        if observers.len() != values.len() {
            return Err(Error::ObserverMismatch);
        }
        let mut sorted = observers.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIdentity(w[0]));
        }
        Ok(Self { observers, values })
    }

    /// A signalprint with every entry present.
    pub fn complete(observers: Vec<IdentityId>, values: Vec<S>) -> Result<Self> {
        Self::new(observers, values.into_iter().map(Some).collect())
    }

    pub fn observers(&self) -> &[IdentityId] {
        &self.observers
    }

    pub fn values(&self) -> &[Option<S>] {
        &self.values
    }

    /// Number of observers with a value.
    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    fn check_observers(&self, other: &Self) -> Result<()> {
        if self.observers != other.observers {
            return Err(Error::ObserverMismatch);
        }
        Ok(())
    }
}

/// Distance thresholds per signalprint dimension, plus the motion-filter
/// limit on the per-probe RSSI standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalprintThresholds<S> {
    pub dim2: S,
    pub dim3: S,
    pub dim4: S,
    pub motion_std: S,
}

impl<S: Scalar> Default for SignalprintThresholds<S> {
    fn default() -> Self {
        Self {
            dim2: S::from_f64_lossy(0.85),
            dim3: S::from_f64_lossy(3.6),
            dim4: S::from_f64_lossy(1.2),
            motion_std: S::from_f64_lossy(2.5),
        }
    }
}

impl<S: Scalar> SignalprintThresholds<S> {
    /// The same distance threshold for every dimension.
    pub fn uniform(distance: S) -> Self {
        Self { dim2: distance, dim3: distance, dim4: distance, motion_std: Self::default().motion_std }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dim2", self.dim2), ("dim3", self.dim3), ("dim4", self.dim4), ("motion_std", self.motion_std)] {
            if !(v > S::zero()) {
                return Err(Error::Config(format!("threshold {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Threshold for a comparison over `dim` shared observers. Dimensions
    /// above 4 reuse the dimension-4 value.
    pub fn for_dimension(&self, dim: usize) -> Result<S> {
        match dim {
            0 | 1 => Err(Error::DimensionTooSmall(dim)),
            2 => Ok(self.dim2),
            3 => Ok(self.dim3),
            _ => Ok(self.dim4),
        }
    }

    /// Distance thresholds multiplied by `factor`; the motion limit is kept.
    pub fn scaled(&self, factor: S) -> Self {
        Self {
            dim2: self.dim2 * factor,
            dim3: self.dim3 * factor,
            dim4: self.dim4 * factor,
            motion_std: self.motion_std,
        }
    }
}

/// Squared line distance over entries present in both slices, and the
/// number of such entries.
///
/// Uses Σ_{i<j} (w_i − w_j)² / k, which equals the squared norm of `w`
/// minus its projection on the all-ones vector. This form is exactly zero
/// when every `w_i` is equal and exactly symmetric in its arguments.
pub(crate) fn squared_distance_raw<S: Scalar>(a: &[Option<S>], b: &[Option<S>]) -> Result<(S, usize)> {
    let mut w: [S; 8] = [S::zero(); 8];
    let mut spill = Vec::new();
    let mut k = 0usize;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x, y) {
            let d = *x - *y;
            if k < w.len() {
                w[k] = d;
            } else {
                if k == w.len() {
                    spill.extend_from_slice(&w);
                }
                spill.push(d);
            }
            k += 1;
        }
    }
    if k < 2 {
        return Err(Error::DimensionTooSmall(k));
    }
    let w = if k <= 8 { &w[..k] } else { &spill[..] };
    let mut sum = S::zero();
    for i in 0..k {
        for j in i + 1..k {
            let d = w[i] - w[j];
            sum = sum + d * d;
        }
    }
    Ok((sum / S::from_count(k), k))
}

/// Squared distance between the slope-1 lines through `a` and `b`.
pub fn squared_distance<S: Scalar>(a: &Signalprint<S>, b: &Signalprint<S>) -> Result<S> {
    a.check_observers(b)?;
    squared_distance_raw(&a.values, &b.values).map(|(d, _)| d)
}

/// Distance in dBm between the slope-1 lines through `a` and `b`.
pub fn signalprint_distance<S: Scalar + Float>(a: &Signalprint<S>, b: &Signalprint<S>) -> Result<S> {
    squared_distance(a, b).map(Float::sqrt)
}

/// Whether two signalprints are close enough to come from one transmitter.
pub fn is_sybil_pair<S: Scalar>(a: &Signalprint<S>, b: &Signalprint<S>, t: &SignalprintThresholds<S>) -> Result<bool> {
    a.check_observers(b)?;
    pair_within(&a.values, &b.values, t)
}

pub(crate) fn pair_within<S: Scalar>(a: &[Option<S>], b: &[Option<S>], t: &SignalprintThresholds<S>) -> Result<bool> {
    let (d2, k) = squared_distance_raw(a, b)?;
    let limit = t.for_dimension(k)?;
    Ok(le(d2, limit * limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use num_rational::Ratio;

    fn obs(n: u32) -> Vec<IdentityId> {
        (0..n).map(IdentityId).collect()
    }

    fn sp(v: &[f64]) -> Signalprint<f64> {
        Signalprint::complete(obs(v.len() as u32), v.to_vec()).unwrap()
    }

    #[test]
    fn distance_of_offset_points_in_two_dimensions() {
        let d = signalprint_distance(&sp(&[2.0, 0.0]), &sp(&[0.0, 0.0])).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn power_shift_is_free() {
        let a = sp(&[-40.0, -55.0, -61.0, -70.0]);
        let b = sp(&[-33.0, -48.0, -54.0, -63.0]);
        assert_eq!(squared_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn missing_entries_are_dropped_from_both_sides() {
        let a = Signalprint::new(obs(3), vec![Some(1.0), None, Some(3.0)]).unwrap();
        let b = Signalprint::new(obs(3), vec![Some(0.0), Some(100.0), Some(0.0)]).unwrap();
        // w = (1, 3) → d² = (1-3)²/2 = 2
        assert_eq!(squared_distance(&a, &b).unwrap(), 2.0);
        let c = Signalprint::new(obs(3), vec![None, Some(1.0), None]).unwrap();
        assert_eq!(squared_distance(&a, &c), Err(Error::DimensionTooSmall(0)));
    }

    #[test]
    fn observer_lists_must_agree() {
        let a = sp(&[1.0, 2.0]);
        let b = Signalprint::complete(vec![IdentityId(5), IdentityId(6)], vec![1.0, 2.0]).unwrap();
        assert_eq!(squared_distance(&a, &b), Err(Error::ObserverMismatch));
        assert!(Signalprint::complete(vec![IdentityId(1), IdentityId(1)], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn threshold_boundaries() {
        let t = SignalprintThresholds::<Exact>::default();
        let r = |n: i64, d: i64| Some(Ratio::new(n, d));
        // dim 4, w = (0.6, 0.6, -0.6, -0.6): d² = 1.44, exactly the threshold.
        let a = vec![r(3, 5), r(3, 5), r(-3, 5), r(-3, 5)];
        let z = vec![r(0, 1); 4];
        assert!(pair_within(&a, &z, &t).unwrap());
        let a2 = vec![r(3, 5), r(3, 5), r(-3, 5), r(-61, 100)];
        assert!(!pair_within(&a2, &z, &t).unwrap());

        let tf = SignalprintThresholds::<f64>::default();
        // dim 2 at distance 0.9: w = (0.9/√2)·(1, −1)
        let h = 0.9 / std::f64::consts::SQRT_2;
        assert!(!is_sybil_pair(&sp(&[h, -h]), &sp(&[0.0, 0.0]), &tf).unwrap());
        assert!(is_sybil_pair(&sp(&[0.0; 4]), &sp(&[0.0; 4]), &tf).unwrap());
    }

    #[test]
    fn dimensions_above_four_reuse_dim4() {
        let t = SignalprintThresholds::<f64>::default();
        assert_eq!(t.for_dimension(7).unwrap(), 1.2);
        assert_eq!(t.for_dimension(1), Err(Error::DimensionTooSmall(1)));
        let a: Vec<f64> = (0..12).map(|i| i as f64 * 0.01).collect();
        let z = vec![0.0; 12];
        assert!(is_sybil_pair(&sp(&a), &sp(&z), &t).unwrap());
    }

    #[test]
    fn scaled_keeps_motion_limit() {
        let t = SignalprintThresholds::<f64>::default().scaled(2.0);
        assert_eq!(t.dim3, 7.2);
        assert_eq!(t.motion_std, 2.5);
        assert!(SignalprintThresholds::<f64>::uniform(0.0).validate().is_err());
    }
}
