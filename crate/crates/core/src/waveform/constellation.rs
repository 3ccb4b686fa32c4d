//! Labeled constellations. Point index is the binary label, first bit is the MSB.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    bits: usize,
    points: Vec<Complex64>,
}

/// Bit `k` (0 = most significant) of `label` in a `bits`-wide word.
#[inline]
pub fn label_bit(label: usize, k: usize, bits: usize) -> u8 {
    ((label >> (bits - 1 - k)) & 1) as u8
}

/// Labels whose bit `k` equals `value`.
pub fn label_subset(bits: usize, k: usize, value: u8) -> Vec<usize> {
    (0..1usize << bits)
        .filter(|&i| label_bit(i, k, bits) == value)
        .collect()
}

fn bits_for(n: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return invalid(format!(
            "constellation size {n} is not a power of two >= 2"
        ));
    }
    Ok(n.trailing_zeros() as usize)
}

/// Centers the raw points and scales them to unit mean power.
pub fn normalize_constellation(raw: &[Complex64]) -> Result<Constellation> {
    let bits = bits_for(raw.len())?;
    if raw.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
        return invalid("constellation contains non-finite points");
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<Complex64>() / n;
    let power = raw.iter().map(|p| (p - mean).norm_sqr()).sum::<f64>() / n;
    if !(power > 0.0) {
        return Err(Error::Degenerate(
            "all constellation points coincide (zero RMS)".into(),
        ));
    }
    let scale = 1.0 / power.sqrt();
    Ok(Constellation {
        bits,
        points: raw.iter().map(|p| (p - mean) * scale).collect(),
    })
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Square Gray-labeled QAM, in-phase bits first.
pub fn init_qam(bits: usize) -> Result<Constellation> {
    if !matches!(bits, 2 | 4 | 6) {
        return invalid(format!("QAM supports K in {{2, 4, 6}}, got {bits}"));
    }
    let half = bits / 2;
    let side = 1usize << half;
    let level = |code: usize| 2.0 * gray_inverse(code) as f64 - (side - 1) as f64;
    let raw: Vec<Complex64> = (0..1usize << bits)
        .map(|label| {
            let i_code = label >> half;
            let q_code = label & (side - 1);
            Complex64::new(level(i_code), level(q_code))
        })
        .collect();
    normalize_constellation(&raw)
}

/// Ring point counts of the 64-APSK initializer.
pub const APSK64_RINGS: [usize; 4] = [8, 16, 20, 20];
/// Outer-to-inner radius ratios (inner ring radius 1).
pub const APSK64_RADII: [f64; 4] = [1.0, 2.2, 3.6, 5.2];

/// 8+16+20+20 APSK with quasi-Gray labels.
///
/// Ring `r` owns a contiguous label block; inside a ring, angular neighbours follow the
/// order in which the ring's labels appear in the 6-bit reflected Gray sequence, so most
/// adjacent points differ in one bit.
pub fn init_apsk64() -> Result<Constellation> {
    let mut raw = vec![Complex64::new(0.0, 0.0); 64];
    let mut base = 0;
    for (&count, &radius) in APSK64_RINGS.iter().zip(&APSK64_RADII) {
        let order: Vec<usize> = (0..64)
            .map(gray)
            .filter(|&l| l >= base && l < base + count)
            .collect();
        let offset = PI / count as f64;
        for (slot, &label) in order.iter().enumerate() {
            let theta = offset + 2.0 * PI * slot as f64 / count as f64;
            raw[label] = Complex64::from_polar(radius, theta);
        }
        base += count;
    }
    normalize_constellation(&raw)
}

impl Constellation {
    /// Wraps already-normalized points (checked).
    pub fn from_normalized(points: Vec<Complex64>) -> Result<Self> {
        let bits = bits_for(points.len())?;
        let n = points.len() as f64;
        let mean = points.iter().sum::<Complex64>() / n;
        let power = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
        if mean.norm() > 1e-9 || (power - 1.0).abs() > 1e-9 {
            return invalid("points are not zero-mean / unit-power");
        }
        Ok(Self { bits, points })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Nearest-point label (hard decision).
    pub fn slice(&self, r: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (r - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Packs `bits` (symbol-major, `k` bits per symbol, MSB first) into labels.
pub fn bits_to_labels(bits: &[u8], k: usize) -> Result<Vec<usize>> {
    if k == 0 || !bits.len().is_multiple_of(k) {
        return invalid(format!(
            "bit matrix of {} entries is not a multiple of K = {k}",
            bits.len()
        ));
    }
    Ok(bits
        .chunks(k)
        .map(|c| c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize))
        .collect())
}

/// Unpacks labels into symbol-major bits.
pub fn labels_to_bits(labels: &[usize], k: usize) -> Vec<u8> {
    labels
        .iter()
        .flat_map(|&l| (0..k).map(move |j| label_bit(l, j, k)))
        .collect()
}

/// Maps a K x N_D bit matrix (stored symbol-major) onto constellation points.
pub fn map_bits(bits: &[u8], c: &Constellation) -> Result<Vec<Complex64>> {
    let labels = bits_to_labels(bits, c.bits_per_symbol())?;
    Ok(labels.into_iter().map(|l| c.point(l)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_invariants(c: &Constellation) {
        let n = c.len() as f64;
        let mean = c.points().iter().sum::<Complex64>() / n;
        let power = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
        assert!(mean.norm() < 1e-9);
        assert!((power - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qpsk_is_gray_and_unit_power() {
        let c = init_qam(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.point(0) - Complex64::new(-s, -s)).norm() < 1e-12);
        assert!((c.point(1) - Complex64::new(-s, s)).norm() < 1e-12);
        assert!((c.point(2) - Complex64::new(s, -s)).norm() < 1e-12);
        assert!((c.point(3) - Complex64::new(s, s)).norm() < 1e-12);
        // normalizing an already-normalized set is the identity
        let again = normalize_constellation(c.points()).unwrap();
        for (a, b) in again.points().iter().zip(c.points()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn binary_example() {
        let c = normalize_constellation(&[Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)])
            .unwrap();
        assert_eq!(c.bits_per_symbol(), 1);
        assert!((c.point(0).re + 1.0).abs() < 1e-15);
        assert!((c.point(1).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let raw = vec![Complex64::new(0.3, 0.1); 4];
        assert!(matches!(
            normalize_constellation(&raw),
            Err(Error::Degenerate(_))
        ));
        assert!(normalize_constellation(&raw[..3]).is_err());
    }

    #[test]
    fn qam_neighbours_differ_in_one_bit() {
        for k in [2, 4, 6] {
            let c = init_qam(k).unwrap();
            check_invariants(&c);
            let dmin = (c.point(0) - c.point(1)).norm();
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    if ((c.point(a) - c.point(b)).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "K={k} labels {a} {b}");
                    }
                }
            }
        }
        assert!(init_qam(3).is_err());
        assert!(init_qam(8).is_err());
    }

    #[test]
    fn apsk64_rings() {
        let c = init_apsk64().unwrap();
        check_invariants(&c);
        let mut radii: Vec<f64> = c.points().iter().map(|p| p.norm()).collect();
        radii.sort_by(f64::total_cmp);
        let mut counts = vec![];
        let mut run = 1;
        for w in radii.windows(2) {
            if (w[1] - w[0]).abs() < 1e-9 {
                run += 1;
            } else {
                counts.push(run);
                run = 1;
            }
        }
        counts.push(run);
        assert_eq!(counts, vec![8, 16, 20, 20]);
        let inner = radii[0];
        assert!((radii[63] / inner - 5.2).abs() < 1e-9);
        // ring membership follows the contiguous label blocks
        for l in 0..8 {
            assert!((c.point(l).norm() - inner).abs() < 1e-9);
        }
    }

    #[test]
    fn label_subsets_partition() {
        for k in 1..=6 {
            for j in 0..k {
                let zero = label_subset(k, j, 0);
                let one = label_subset(k, j, 1);
                assert_eq!(zero.len() + one.len(), 1 << k);
                assert!(zero.iter().all(|z| !one.contains(z)));
            }
        }
    }

    #[test]
    fn mapping_and_hard_decision_loopback() {
        let c = init_qam(4).unwrap();
        let labels: Vec<usize> = (0..16).collect();
        let bits = labels_to_bits(&labels, 4);
        let syms = map_bits(&bits, &c).unwrap();
        // every label emitted exactly once
        for (l, s) in syms.iter().enumerate() {
            assert_eq!(*s, c.point(l));
        }
        let back: Vec<usize> = syms.iter().map(|&s| c.slice(s)).collect();
        assert_eq!(labels_to_bits(&back, 4), bits);
        assert_eq!(map_bits(&[0, 0], &init_qam(2).unwrap()).unwrap()[0], init_qam(2).unwrap().point(0));
        assert!(map_bits(&[0, 1, 1], &c).is_err());
    }

    proptest! {
        #[test]
        fn normalize_random_sets(vals in proptest::collection::vec(-5.0f64..5.0, 128)) {
            let raw: Vec<Complex64> = vals.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            let c = normalize_constellation(&raw).unwrap();
            let n = c.len() as f64;
            let mean = c.points().iter().sum::<Complex64>() / n;
            let power = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
            prop_assert!(mean.norm() < 1e-12);
            prop_assert!((power - 1.0).abs() < 1e-12);
        }
    }
}
