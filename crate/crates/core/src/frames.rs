//! Grouping of intervals into solution-quality frames.
//!
//! The activity profile (Σ `n_iters` per interval) is scanned left to right
//! against a threshold `avg · (1 + r)` with `avg = ΣA / n_frames`. Intervals
//! at or above the threshold form singleton frames, others are packed
//! greedily while the running sum stays under the threshold. Too few frames
//! lowers `r` by 0.01 and rescans; too many merges adjacent pairs from the
//! front.
//!
//! All threshold comparisons are done in integer arithmetic
//! (`A·n_frames·100` against `ΣA·(100 + r%)`), so the result is exact and
//! invariant under scaling of the profile.

use alloc::vec::Vec;

/// Default number of frames.
pub const DEFAULT_FRAMES: usize = 5;

/// Starting value of `r`, in hundredths.
const R_START_PCT: i64 = 5;
/// Floor of `r`, in hundredths.
const R_FLOOR_PCT: i64 = -95;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("activity profile is all zero")]
    AllZero,
    #[error("requested {n_frames} frames for {n_intervals} intervals")]
    TooManyFrames { n_frames: usize, n_intervals: usize },
    #[error("frame count must be at least 1")]
    NoFrames,
    #[error("profile must end with a nonzero entry (trim the tail first)")]
    Untrimmed,
    #[error("could not form {n_frames} frames before r reached its floor")]
    RFloorReached { n_frames: usize },
    #[error("frame ends must be strictly increasing and start above 0")]
    NotIncreasing,
    #[error("interval {index} outside 1..={n_intervals}")]
    OutOfRange { index: usize, n_intervals: usize },
}

/// Drops trailing zero entries.
pub fn trim_empty_tail(profile: &[u64]) -> Result<&[u64], FrameError> {
    let last = profile.iter().rposition(|&a| a > 0).ok_or(FrameError::AllZero)?;
    Ok(&profile[..=last])
}

/// Last interval (1-based) of every frame, strictly increasing, ending at
/// the profile length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSpec {
    ends: Vec<usize>,
}

impl FrameSpec {
    pub fn from_ends(ends: Vec<usize>) -> Result<Self, FrameError> {
        if ends.is_empty() {
            return Err(FrameError::NoFrames);
        }
        if ends[0] == 0 || ends.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FrameError::NotIncreasing);
        }
        Ok(Self { ends })
    }

    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    pub fn n_frames(&self) -> usize {
        self.ends.len()
    }

    pub fn n_intervals(&self) -> usize {
        *self.ends.last().unwrap()
    }

    /// Intervals (1-based, inclusive) covered by frame `f` (1-based).
    pub fn intervals(&self, f: usize) -> core::ops::RangeInclusive<usize> {
        let start = if f == 1 { 1 } else { self.ends[f - 2] + 1 };
        start..=self.ends[f - 1]
    }

    /// Smallest frame `f` with `index <= E[f]`.
    pub fn frame_of(&self, index: usize) -> Result<usize, FrameError> {
        if index == 0 || index > self.n_intervals() {
            return Err(FrameError::OutOfRange {
                index,
                n_intervals: self.n_intervals(),
            });
        }
        Ok(self.ends.partition_point(|&e| e < index) + 1)
    }
}

/// Single scan at threshold `avg · (1 + r_pct/100)`.
fn scan(profile: &[u64], n_frames: usize, r_pct: i64) -> Vec<usize> {
    let total: u128 = profile.iter().map(|&a| u128::from(a)).sum();
    // a >= l  <=>  a * n_frames * 100 >= total * (100 + r_pct)
    let scale = n_frames as u128 * 100;
    let limit = total * (100 + r_pct) as u128;
    let mut ends = Vec::new();
    let mut i = 0;
    while i < profile.len() {
        if u128::from(profile[i]) * scale >= limit {
            ends.push(i + 1);
            i += 1;
        } else {
            let mut sum = u128::from(profile[i]);
            let mut k = i;
            while k + 1 < profile.len() && (sum + u128::from(profile[k + 1])) * scale <= limit {
                k += 1;
                sum += u128::from(profile[k]);
            }
            ends.push(k + 1);
            i = k + 1;
        }
    }
    ends
}

/// Merges frame pairs (1,2), (3,4), ... repeatedly from the front until
/// exactly `n_frames` remain.
fn merge_pairs(mut ends: Vec<usize>, n_frames: usize) -> Vec<usize> {
    while ends.len() > n_frames {
        let mut excess = ends.len() - n_frames;
        let mut merged = Vec::with_capacity(ends.len());
        let mut idx = 0;
        while idx < ends.len() {
            if excess > 0 && idx + 1 < ends.len() {
                // frames idx and idx+1 become one, ending where idx+1 ended
                merged.push(ends[idx + 1]);
                excess -= 1;
                idx += 2;
            } else {
                merged.push(ends[idx]);
                idx += 1;
            }
        }
        ends = merged;
    }
    ends
}

/// Groups a trimmed activity profile into exactly `n_frames` frames.
pub fn group_frames(profile: &[u64], n_frames: usize) -> Result<FrameSpec, FrameError> {
    if n_frames == 0 {
        return Err(FrameError::NoFrames);
    }
    match profile.last() {
        None => return Err(FrameError::AllZero),
        Some(0) => return Err(FrameError::Untrimmed),
        _ => {}
    }
    if n_frames > profile.len() {
        return Err(FrameError::TooManyFrames {
            n_frames,
            n_intervals: profile.len(),
        });
    }
    let mut r_pct = R_START_PCT;
    loop {
        let ends = scan(profile, n_frames, r_pct);
        if ends.len() >= n_frames {
            return Ok(FrameSpec {
                ends: merge_pairs(ends, n_frames),
            });
        }
        if r_pct <= R_FLOOR_PCT {
            return Err(FrameError::RFloorReached { n_frames });
        }
        r_pct -= 1;
    }
}
