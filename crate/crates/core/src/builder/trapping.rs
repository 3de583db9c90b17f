//! Trapping clips: the start of an ordinary clip followed by a recorded
//! instruction that dictates the answer.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;

/// Uncompressed interleaved PCM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pcm {
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub channels: u16,
    pub samples: Vec<i32>,
}

impl Pcm {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    fn same_format(&self, other: &Pcm) -> bool {
        self.sample_rate == other.sample_rate
            && self.bits_per_sample == other.bits_per_sample
            && self.channels == other.channels
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrappingClip {
    pub pcm: Pcm,
    pub expected_answer: i32,
    pub prefix_frames: usize,
}

pub fn create_trapping_clip(
    source: &Pcm,
    message: &Pcm,
    prefix_seconds: f64,
    expected_answer: i32,
) -> Result<TrappingClip, PlanError> {
    if !source.same_format(message) || source.channels == 0 || source.sample_rate == 0 {
        return Err(PlanError::FormatMismatch);
    }
    let prefix_frames = libm::round(prefix_seconds * source.sample_rate as f64) as usize;
    if prefix_frames > source.frames() || prefix_seconds.is_nan() || prefix_seconds < 0.0 {
        return Err(PlanError::PrefixTooLong {
            prefix: prefix_frames,
            source_len: source.frames(),
        });
    }
    let prefix_samples = prefix_frames * source.channels as usize;
    let mut samples = Vec::with_capacity(prefix_samples + message.samples.len());
    samples.extend_from_slice(&source.samples[..prefix_samples]);
    samples.extend_from_slice(&message.samples);
    Ok(TrappingClip {
        pcm: Pcm {
            samples,
            ..source.clone()
        },
        expected_answer,
        prefix_frames,
    })
}
