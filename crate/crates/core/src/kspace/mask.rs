use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Fully sampled low-frequency block, in percent of `W`, per acceleration.
pub fn center_percent(acceleration: u32) -> Result<u32> {
    match acceleration {
        1 => Ok(100),
        2 => Ok(16),
        4 => Ok(8),
        8 => Ok(4),
        a => config_err(format!("unsupported acceleration {} (expected 1, 2, 4 or 8)", a)),
    }
}

/// `round(percent / 100 * w)` with halves rounded up, in exact integer arithmetic.
pub fn center_count(w: usize, percent: u32) -> usize {
    (2 * percent as usize * w + 100) / 200
}

/// Total sampled columns, `round(w / acceleration)` with halves rounded up.
pub fn target_count(w: usize, acceleration: u32) -> usize {
    let a = acceleration as usize;
    (2 * w + a) / (2 * a)
}

/// Column mask over the phase-encoding axis of DC-centred k-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMask {
    pub columns: Vec<bool>,
    pub acceleration: u32,
    pub center_fraction: f64,
}

impl SamplingMask {
    pub fn full(w: usize) -> Self {
        Self {
            columns: vec![true; w],
            acceleration: 1,
            center_fraction: 1.0,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn num_sampled(&self) -> usize {
        self.columns.iter().filter(|&&c| c).count()
    }

    pub fn sampled_fraction(&self) -> f64 {
        self.num_sampled() as f64 / self.width().max(1) as f64
    }

    /// Half-open column range of the centre block.
    pub fn center_range(&self) -> std::ops::Range<usize> {
        let w = self.width();
        let pct = (self.center_fraction * 100.0).round() as u32;
        center_block(w, center_count(w, pct).min(w))
    }

    /// One `0`/`1` character per column.
    pub fn to_text(&self) -> String {
        let mut s: String = self.columns.iter().map(|&c| if c { '1' } else { '0' }).collect();
        s.push('\n');
        s
    }

    pub fn from_text(text: &str, acceleration: u32) -> Result<Self> {
        let columns = text
            .trim()
            .chars()
            .map(|ch| match ch {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Format(format!("unexpected mask character {:?}", other))),
            })
            .collect::<Result<Vec<_>>>()?;
        let center_fraction = center_percent(acceleration)? as f64 / 100.0;
        Ok(Self {
            columns,
            acceleration,
            center_fraction,
        })
    }
}

/// Contiguous block of `c` columns containing the DC column `w / 2`.
fn center_block(w: usize, c: usize) -> std::ops::Range<usize> {
    let start = (w / 2).saturating_sub(c / 2);
    start..(start + c).min(w)
}

/// Centre block plus equispaced outer columns.
///
/// The outer columns are spread at a constant fractional spacing over the
/// columns outside the centre block (leaving one guard column on each side,
/// so the contiguous run around DC is exactly the centre block) so that the total count is exactly
/// `round(W / acceleration)`; the seed picks the phase of the pattern.
pub fn equispaced_mask(w: usize, acceleration: u32, seed: u64) -> Result<SamplingMask> {
    let pct = center_percent(acceleration)?;
    if acceleration == 1 {
        return Ok(SamplingMask::full(w));
    }
    let c = center_count(w, pct);
    let block = center_block(w, c);
    let mut columns = vec![false; w];
    columns[block.clone()].iter_mut().for_each(|v| *v = true);
    let guarded = block.start.saturating_sub(1)..(block.end + 1).min(w);
    let outer: Vec<usize> = (0..w).filter(|i| !guarded.contains(i)).collect();
    let n_outer = target_count(w, acceleration).saturating_sub(c).min(outer.len());
    if n_outer > 0 {
        let offset: f64 = ChaCha8Rng::seed_from_u64(seed).gen();
        let spacing = outer.len() as f64 / n_outer as f64;
        for j in 0..n_outer {
            let idx = ((j as f64 + offset) * spacing).floor() as usize;
            columns[outer[idx.min(outer.len() - 1)]] = true;
        }
    }
    Ok(SamplingMask {
        columns,
        acceleration,
        center_fraction: pct as f64 / 100.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_examples() {
        let m = equispaced_mask(320, 4, 0).unwrap();
        assert_eq!(center_count(320, 8), 26);
        assert_eq!(m.num_sampled(), 80);
        let m = equispaced_mask(320, 8, 0).unwrap();
        assert_eq!(center_count(320, 4), 13);
        assert_eq!(m.num_sampled(), 40);
        assert_eq!(equispaced_mask(320, 1, 0).unwrap().num_sampled(), 320);
        assert!(equispaced_mask(320, 3, 0).is_err());
    }

    #[test]
    fn centre_block_contains_dc() {
        let m = equispaced_mask(64, 4, 3).unwrap();
        let r = m.center_range();
        assert!(r.contains(&32));
        assert!(m.columns[r].iter().all(|&c| c));
    }

    #[test]
    fn seed_moves_outer_columns() {
        let a = equispaced_mask(320, 4, 1).unwrap();
        let b = equispaced_mask(320, 4, 2).unwrap();
        assert_eq!(a, equispaced_mask(320, 4, 1).unwrap());
        assert_ne!(a.columns, b.columns);
    }

    #[test]
    fn text_round_trip() {
        let m = equispaced_mask(40, 2, 9).unwrap();
        assert_eq!(SamplingMask::from_text(&m.to_text(), 2).unwrap(), m);
    }

    proptest! {
        #[test]
        fn accounting(w in 16usize..600, ai in 0usize..3, seed in any::<u64>()) {
            let acc = [2u32, 4, 8][ai];
            let m = equispaced_mask(w, acc, seed).unwrap();
            let pct = center_percent(acc).unwrap();
            let c = center_count(w, pct);
            prop_assert!(m.columns[center_block(w, c)].iter().all(|&v| v));
            prop_assert!((m.num_sampled() as f64 - w as f64 / acc as f64).abs() <= 1.0);
            prop_assert_eq!(m.center_range().len(), c);
            let r = m.center_range();
            prop_assert!(r.start == 0 || !m.columns[r.start - 1]);
            prop_assert!(r.end == w || !m.columns[r.end]);
        }
    }
}
