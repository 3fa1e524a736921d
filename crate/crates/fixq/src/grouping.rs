//! Scaling-group partitions: one group per layer (LW) or one per
//! output channel (CW).

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::{ModelManifest, WeightTensor};

/// How weights share a scaling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Layer-wise: the whole 4-D tensor is one group.
    Lw,
    /// Channel-wise: each output channel's 3-D slice is one group.
    Cw,
}

impl Grouping {
    pub fn tag(self) -> u8 {
        match self {
            Grouping::Lw => 0,
            Grouping::Cw => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Grouping::Lw),
            1 => Ok(Grouping::Cw),
            t => Err(Error::Format(format!("unknown grouping tag {}", t))),
        }
    }
}

impl std::fmt::Display for Grouping {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Grouping::Lw => "lw",
            Grouping::Cw => "cw",
        })
    }
}

/// One scaling group: a contiguous flat-index range of the tensor.
///
/// Row-major `[o][i][h][w]` layout makes every CW group contiguous,
/// so a range suffices for both schemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantGroup {
    pub index: usize,
    pub range: Range<usize>,
}

impl QuantGroup {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Split a tensor into its scaling groups, ordered by output channel.
pub fn partition(tensor: &WeightTensor, scheme: Grouping) -> Vec<QuantGroup> {
    match scheme {
        Grouping::Lw => vec![QuantGroup {
            index: 0,
            range: 0..tensor.len(),
        }],
        Grouping::Cw => {
            let per_channel = tensor.in_channels() * tensor.kernel_h() * tensor.kernel_w();
            (0..tensor.out_channels())
                .map(|o| QuantGroup {
                    index: o,
                    range: o * per_channel..(o + 1) * per_channel,
                })
                .collect()
        }
    }
}

/// Total group count across all layers of a manifest.
pub fn group_count(manifest: &ModelManifest, scheme: Grouping) -> u64 {
    match scheme {
        Grouping::Lw => manifest.layer_count() as u64,
        Grouping::Cw => manifest.layers().iter().map(|d| d.out_channels as u64).sum(),
    }
}
