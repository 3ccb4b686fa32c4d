//! Symbol-rate block layout: cyclic prefix, PTRS/RPN pilot groups and data.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::signal::ComplexBuffer;

/// Symbol counts of one block. `n_total()` includes the cyclic prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Bits per symbol.
    pub k: usize,
    pub n_data: usize,
    /// Number of pilot groups.
    pub groups: usize,
    /// PTRS symbols per group.
    pub n_ptrs: usize,
    /// RPN pilots appended to each group.
    pub n_rpn: usize,
    pub n_cp: usize,
    /// Oversampling factor.
    pub m: usize,
    pub zc_root: usize,
}

impl FrameConfig {
    /// Builds the config from the total block length, deriving the data count.
    pub fn from_total(
        k: usize,
        n_total: usize,
        n_cp: usize,
        groups: usize,
        n_ptrs: usize,
        n_rpn: usize,
        m: usize,
    ) -> Result<Self> {
        let pilots = groups * (n_ptrs + n_rpn);
        if n_cp + pilots > n_total {
            return Err(Error::Layout(format!(
                "CP ({n_cp}) plus pilots ({pilots}) exceed the block length {n_total}"
            )));
        }
        let cfg = Self {
            k,
            n_data: n_total - n_cp - pilots,
            groups,
            n_ptrs,
            n_rpn,
            n_cp,
            m,
            zc_root: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 4096-symbol block: 288 CP, 32 groups of 4 PTRS plus `n_rpn` RPN pilots.
    pub fn full_scale(k: usize, n_rpn: usize) -> Self {
        Self::from_total(k, 4096, 288, 32, 4, n_rpn, 4).expect("full-scale layout")
    }

    /// 512-symbol block used for desk-scale training.
    pub fn desk(k: usize) -> Self {
        Self::from_total(k, 512, 36, 4, 4, 1, 4).expect("desk layout")
    }

    pub fn pilots_per_group(&self) -> usize {
        self.n_ptrs + self.n_rpn
    }

    pub fn n_pilots(&self) -> usize {
        self.groups * self.pilots_per_group()
    }

    /// Block length without the CP.
    pub fn n_body(&self) -> usize {
        self.n_data + self.n_pilots()
    }

    pub fn n_total(&self) -> usize {
        self.n_body() + self.n_cp
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return invalid("frame: K and M must be positive");
        }
        if self.n_body() == 0 {
            return Err(Error::Layout("empty block body".into()));
        }
        if self.n_cp > self.n_body() {
            return Err(Error::Layout(format!(
                "CP length {} exceeds the block body {}",
                self.n_cp,
                self.n_body()
            )));
        }
        if let Some(spacing) = self.n_body().checked_div(self.groups) {
            if spacing < self.pilots_per_group() {
                return Err(Error::Layout(format!(
                    "{} groups of {} pilots do not fit in a body of {}",
                    self.groups,
                    self.pilots_per_group(),
                    self.n_body()
                )));
            }
        }
        Ok(())
    }
}

/// Index ranges of one block; frame coordinates, CP first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLayout {
    pub cfg: FrameConfig,
    pub cp: Range<usize>,
    pub ptrs: Vec<Range<usize>>,
    pub rpn: Vec<Range<usize>>,
    pub data: Vec<Range<usize>>,
}

fn flatten(ranges: &[Range<usize>]) -> Vec<usize> {
    ranges.iter().flat_map(|r| r.clone()).collect()
}

impl FrameLayout {
    /// Group `q` starts at body offset `floor(q * B / Q)`.
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        cfg.validate()?;
        let body = cfg.n_body();
        let off = cfg.n_cp;
        let mut ptrs = Vec::with_capacity(cfg.groups);
        let mut rpn = Vec::with_capacity(cfg.groups);
        let mut data = Vec::new();
        let mut cursor = 0;
        for q in 0..cfg.groups {
            let start = q * body / cfg.groups;
            if start > cursor {
                data.push(off + cursor..off + start);
            }
            let p_end = start + cfg.n_ptrs;
            let r_end = p_end + cfg.n_rpn;
            ptrs.push(off + start..off + p_end);
            rpn.push(off + p_end..off + r_end);
            cursor = r_end;
        }
        if cursor < body {
            data.push(off + cursor..off + body);
        }
        let layout = Self {
            cfg: *cfg,
            cp: 0..cfg.n_cp,
            ptrs,
            rpn,
            data,
        };
        if layout.data_indices().len() != cfg.n_data {
            return Err(Error::Layout("pilot groups overlap".into()));
        }
        Ok(layout)
    }

    pub fn n_total(&self) -> usize {
        self.cfg.n_total()
    }

    pub fn data_indices(&self) -> Vec<usize> {
        flatten(&self.data)
    }

    pub fn ptrs_indices(&self) -> Vec<usize> {
        flatten(&self.ptrs)
    }

    pub fn rpn_indices(&self) -> Vec<usize> {
        flatten(&self.rpn)
    }

    /// Frame position of the center of each PTRS group.
    pub fn group_centers(&self) -> Vec<f64> {
        self.ptrs
            .iter()
            .map(|r| (r.start as f64 + r.end as f64 - 1.0) / 2.0)
            .collect()
    }

    /// For every frame position, the index into `concat(data, pilots)` that fills it.
    /// Pilots are ordered group by group, PTRS before RPN; CP positions repeat the tail.
    pub fn source_map(&self) -> Vec<usize> {
        let n = self.n_total();
        let nd = self.cfg.n_data;
        let mut map = vec![usize::MAX; n];
        for (i, pos) in self.data_indices().into_iter().enumerate() {
            map[pos] = i;
        }
        let mut p = 0;
        for (pr, rr) in self.ptrs.iter().zip(&self.rpn) {
            for pos in pr.clone().chain(rr.clone()) {
                map[pos] = nd + p;
                p += 1;
            }
        }
        let body = self.cfg.n_body();
        for c in self.cp.clone() {
            // CP symbol c copies body symbol (body - n_cp + c)
            map[c] = map[body + c];
        }
        map
    }

    /// Pilot symbols split into per-group PTRS and RPN parts.
    pub fn split_pilots<'a>(
        &self,
        pilots: &'a [Complex64],
    ) -> (Vec<&'a [Complex64]>, Vec<&'a [Complex64]>) {
        let g = self.cfg.pilots_per_group();
        let np = self.cfg.n_ptrs;
        (0..self.cfg.groups)
            .map(|q| {
                let block = &pilots[q * g..(q + 1) * g];
                (&block[..np], &block[np..])
            })
            .unzip()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zadoff-Chu sequence of the given length and root.
pub fn zadoff_chu(length: usize, root: usize) -> Result<ComplexBuffer> {
    if length == 0 {
        return Ok(Vec::new());
    }
    if root == 0 || root >= length.max(2) || gcd(root, length) != 1 {
        return invalid(format!(
            "Zadoff-Chu root {root} is not coprime with length {length}"
        ));
    }
    let l = length as f64;
    let u = root as f64;
    Ok((0..length)
        .map(|n| {
            let n = n as f64;
            let e = if length % 2 == 1 { n * (n + 1.0) } else { n * n };
            Complex64::from_polar(1.0, -std::f64::consts::PI * u * e / l)
        })
        .collect())
}

/// Pilot symbols of a config: one ZC sequence spanning all groups.
pub fn frame_pilots(cfg: &FrameConfig) -> Result<ComplexBuffer> {
    zadoff_chu(cfg.n_pilots(), cfg.zc_root)
}

/// Builds the symbol-rate block around `data`.
pub fn assemble_frame(data: &[Complex64], cfg: &FrameConfig) -> Result<(ComplexBuffer, FrameLayout)> {
    if data.len() != cfg.n_data {
        return invalid(format!(
            "assemble_frame: {} data symbols, layout expects {}",
            data.len(),
            cfg.n_data
        ));
    }
    let layout = FrameLayout::new(cfg)?;
    let pilots = frame_pilots(cfg)?;
    Ok((assemble_with(data, &pilots, &layout), layout))
}

/// Same as [`assemble_frame`] for a prepared layout and pilot set.
pub fn assemble_with(data: &[Complex64], pilots: &[Complex64], layout: &FrameLayout) -> ComplexBuffer {
    let nd = data.len();
    layout
        .source_map()
        .into_iter()
        .map(|s| if s < nd { data[s] } else { pilots[s - nd] })
        .collect()
}

/// Picks positions out of a frame-coordinate buffer.
pub fn extract(frame: &[Complex64], idx: &[usize]) -> ComplexBuffer {
    idx.iter().map(|&i| frame[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn canonical_sizes() {
        let f = FrameConfig::full_scale(6, 1);
        assert_eq!(f.n_total(), 4096);
        assert_eq!(f.n_data, 3648);
        assert_eq!(FrameConfig::full_scale(6, 4).n_data, 3552);
        let d = FrameConfig::desk(4);
        assert_eq!((d.n_total(), d.n_data), (512, 456));
        assert!(FrameConfig::from_total(2, 16, 4, 4, 4, 1, 4).is_err());
    }

    #[test]
    fn plain_data_frame() {
        let cfg = FrameConfig::from_total(2, 5, 0, 0, 0, 0, 1).unwrap();
        let data: Vec<Complex64> = (0..5).map(|i| c(i as f64)).collect();
        let (frame, layout) = assemble_frame(&data, &cfg).unwrap();
        assert_eq!(frame, data);
        assert_eq!(layout.data, vec![0..5]);
    }

    #[test]
    fn hand_built_layout() {
        let cfg = FrameConfig::from_total(2, 12, 2, 2, 1, 0, 1).unwrap();
        assert_eq!(cfg.n_data, 8);
        let data: Vec<Complex64> = (1..=8).map(|i| c(i as f64)).collect();
        let (frame, layout) = assemble_frame(&data, &cfg).unwrap();
        // body: P d1 d2 d3 d4 P d5 d6 d7 d8, CP = d7 d8
        assert_eq!(layout.ptrs, vec![2..3, 7..8]);
        assert_eq!(layout.data, vec![3..7, 8..12]);
        assert_eq!(frame[0], c(7.0));
        assert_eq!(frame[1], c(8.0));
        assert_eq!(&frame[3..7], &data[..4]);
        assert_eq!(&frame[8..12], &data[4..]);
        let pilots = frame_pilots(&cfg).unwrap();
        assert_eq!(frame[2], pilots[0]);
        assert_eq!(frame[7], pilots[1]);
    }

    #[test]
    fn zc_properties() {
        let z = zadoff_chu(7, 1).unwrap();
        for (n, v) in z.iter().enumerate() {
            let n = n as f64;
            let want = Complex64::from_polar(1.0, -std::f64::consts::PI * n * (n + 1.0) / 7.0);
            assert!((v - want).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        for len in [7usize, 20, 160] {
            let z = zadoff_chu(len, 1).unwrap();
            for lag in 1..len {
                let r: Complex64 = (0..len).map(|n| z[n] * z[(n + lag) % len].conj()).sum();
                assert!(r.norm() < 1e-9, "len {len} lag {lag}: {}", r.norm());
            }
        }
        assert!(zadoff_chu(8, 2).is_err());
        assert!(zadoff_chu(7, 0).is_err());
    }

    proptest! {
        #[test]
        fn layout_partitions_and_roundtrips(
            groups in 0usize..6, n_ptrs in 1usize..5, n_rpn in 0usize..4,
            extra in 0usize..40, n_cp in 0usize..8,
        ) {
            let total = n_cp + groups * (n_ptrs + n_rpn) * 2 + extra + 8;
            let cfg = FrameConfig::from_total(2, total, n_cp, groups, n_ptrs, n_rpn, 2).unwrap();
            let layout = FrameLayout::new(&cfg).unwrap();
            let mut seen = vec![0u8; total];
            for i in layout.cp.clone().chain(layout.ptrs_indices()).chain(layout.rpn_indices()).chain(layout.data_indices()) {
                seen[i] += 1;
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            let data: Vec<Complex64> = (0..cfg.n_data).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
            let (frame, layout) = assemble_frame(&data, &cfg).unwrap();
            prop_assert_eq!(extract(&frame, &layout.data_indices()), data);
            // CP equals the body tail
            let n = frame.len();
            for i in 0..n_cp {
                prop_assert_eq!(frame[i], frame[n - n_cp + i]);
            }
        }
    }
}
