//! Frame-pair sampling. Every frame that has a full window ahead of it
//! anchors exactly one pair; the partner offset is drawn uniformly from
//! `1..=m`. A sequence of `L` frames therefore yields exactly `L − m` pairs,
//! and the draw depends only on `(seed, scene_id)`, never on other scenes.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SamplingError {
    #[error("sequence has {len} frames but m = {m} needs at least {} to form one pair", *m as usize + 1)]
    SequenceTooShort { len: usize, m: u32 },
}

/// One sampled frame pair: positions into `Sequence::frames`. The anchor is
/// the earlier frame; its partner sits `offset` frames later and is the frame
/// the anchor gets aligned into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSample {
    pub anchor: usize,
    pub offset: usize,
}

impl PairSample {
    pub fn partner(&self) -> usize {
        self.anchor + self.offset
    }
}

pub fn sample_pairs(
    scene_id: &str,
    frame_count: usize,
    m: u32,
    seed: u64,
) -> Result<Vec<PairSample>, SamplingError> {
    let m_usize = m as usize;
    if m < 1 || frame_count < m_usize + 1 {
        return Err(SamplingError::SequenceTooShort {
            len: frame_count,
            m,
        });
    }
    let mut rng = rng::stream(seed, scene_id, "pair-sampling");
    Ok((0..frame_count - m_usize)
        .map(|anchor| PairSample {
            anchor,
            offset: rng.gen_range(1..=m_usize),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_count_is_frames_minus_m() {
        for (len, m) in [(3usize, 1u32), (10, 2), (50, 5), (11, 10)] {
            let pairs = sample_pairs("s", len, m, 0).unwrap();
            assert_eq!(pairs.len(), len - m as usize);
        }
    }

    #[test]
    fn offsets_stay_in_window_and_partners_in_bounds() {
        let pairs = sample_pairs("s", 40, 5, 123).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            assert_eq!(p.anchor, i);
            assert!((1..=5).contains(&p.offset));
            assert!(p.partner() < 40);
        }
    }

    #[test]
    fn short_sequences_are_rejected() {
        assert_eq!(
            sample_pairs("s", 2, 2, 0),
            Err(SamplingError::SequenceTooShort { len: 2, m: 2 })
        );
        assert!(sample_pairs("s", 3, 2, 0).is_ok());
        assert!(sample_pairs("s", 5, 0, 0).is_err());
    }

    #[test]
    fn deterministic_per_scene_and_independent_across_scenes() {
        let a1 = sample_pairs("scene-a", 30, 3, 9).unwrap();
        let a2 = sample_pairs("scene-a", 30, 3, 9).unwrap();
        assert_eq!(a1, a2);
        let b = sample_pairs("scene-b", 30, 3, 9).unwrap();
        assert_ne!(a1, b, "distinct scenes should not share offset draws");
    }

    #[test]
    fn offsets_are_roughly_uniform() {
        // 3-sigma binomial band per offset value over a large draw.
        let m = 5u32;
        let n = 20_000usize;
        let pairs = sample_pairs("uniformity", n + m as usize, m, 42).unwrap();
        let mut counts = [0usize; 5];
        for p in &pairs {
            counts[p.offset - 1] += 1;
        }
        let expected = n as f64 / m as f64;
        let sigma = (n as f64 * (1.0 / m as f64) * (1.0 - 1.0 / m as f64)).sqrt();
        for (k, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 3.0 * sigma,
                "offset {} drawn {} times, expected {:.0} ± {:.0}",
                k + 1,
                c,
                expected,
                3.0 * sigma
            );
        }
    }
}
