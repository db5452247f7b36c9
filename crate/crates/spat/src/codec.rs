//! NTCIP SPaT datagram codec for a regular 8-phase intersection.
//!
//! A datagram is 241 bytes, or 245 when the intersection has pedestrian
//! call buttons. Three bytes carry one bit per phase:
//!
//! | offset | meaning      |
//! |--------|--------------|
//! | 211    | red mask     |
//! | 213    | yellow mask  |
//! | 215    | green mask   |
//!
//! Offsets are zero-based and bit 0 (LSB) of each mask is phase 1. Both are
//! calibration points against real controller firmware; change the
//! constants below if hardware disagrees.
//!
//! Colors are derived from the yellow and green masks only: a phase with
//! neither bit set is red. The red mask is compared against that rule by
//! [`consistency_check`] rather than trusted.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RED_OFFSET: usize = 211;
pub const YELLOW_OFFSET: usize = 213;
pub const GREEN_OFFSET: usize = 215;
pub const BASE_LEN: usize = 241;
pub const PEDESTRIAN_LEN: usize = 245;
pub const PHASES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpatError {
    #[error("bad SPaT datagram length {0} (expected {BASE_LEN} or {PEDESTRIAN_LEN})")]
    BadLength(usize),
    #[error("phases {0:?} have both green and yellow set")]
    ConflictingBits(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseColor {
    Red,
    Yellow,
    Green,
}

impl PhaseColor {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseColor::Red => "red",
            PhaseColor::Yellow => "yellow",
            PhaseColor::Green => "green",
        }
    }
}

/// Color of phases 1 through 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntersectionState([PhaseColor; PHASES]);

impl IntersectionState {
    pub const ALL_RED: IntersectionState = IntersectionState([PhaseColor::Red; PHASES]);

    pub fn new(phases: [PhaseColor; PHASES]) -> Self {
        Self(phases)
    }

    /// Sets the listed 1-based phases to `color`, the rest red.
    pub fn with(color: PhaseColor, phases: &[u8]) -> Self {
        let mut s = Self::ALL_RED;
        for &p in phases {
            s.0[usize::from(p) - 1] = color;
        }
        s
    }

    pub fn phases(&self) -> &[PhaseColor; PHASES] {
        &self.0
    }

    /// Color of a 1-based phase number.
    pub fn phase(&self, phase: u8) -> PhaseColor {
        self.0[usize::from(phase) - 1]
    }

    fn mask(&self, color: PhaseColor) -> u8 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == color)
            .fold(0, |m, (i, _)| m | 1 << i)
    }
}

impl fmt::Display for IntersectionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            f.write_str(match c {
                PhaseColor::Red => "R",
                PhaseColor::Yellow => "Y",
                PhaseColor::Green => "G",
            })?;
        }
        Ok(())
    }
}

/// Read access to a datagram. [`parse_spat_packet`] only ever calls `len`
/// and `byte` at the three mask offsets.
pub trait PacketBytes {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn byte(&self, offset: usize) -> u8;
}

impl PacketBytes for [u8] {
    fn len(&self) -> usize {
        <[u8]>::len(self)
    }

    fn byte(&self, offset: usize) -> u8 {
        self[offset]
    }
}

/// Red, yellow, and green masks plus the pedestrian flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Masks {
    pub red: u8,
    pub yellow: u8,
    pub green: u8,
    pub has_pedestrian_bytes: bool,
}

pub fn decode_masks<P: PacketBytes + ?Sized>(packet: &P) -> Result<Masks, SpatError> {
    let has_pedestrian_bytes = match packet.len() {
        BASE_LEN => false,
        PEDESTRIAN_LEN => true,
        other => return Err(SpatError::BadLength(other)),
    };
    Ok(Masks {
        red: packet.byte(RED_OFFSET),
        yellow: packet.byte(YELLOW_OFFSET),
        green: packet.byte(GREEN_OFFSET),
        has_pedestrian_bytes,
    })
}

/// A decoded datagram. Every byte is kept in `raw`, including those this
/// codec does not interpret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatFrame {
    raw: Vec<u8>,
    masks: Masks,
}

impl SpatFrame {
    pub fn raw(&self) -> &[u8] {
        &self.raw
    }

    pub fn red_bits(&self) -> u8 {
        self.masks.red
    }

    pub fn yellow_bits(&self) -> u8 {
        self.masks.yellow
    }

    pub fn green_bits(&self) -> u8 {
        self.masks.green
    }

    pub fn has_pedestrian_bytes(&self) -> bool {
        self.masks.has_pedestrian_bytes
    }
}

pub fn parse_spat_packet(bytes: &[u8]) -> Result<SpatFrame, SpatError> {
    let masks = decode_masks(bytes)?;
    Ok(SpatFrame {
        raw: bytes.to_vec(),
        masks,
    })
}

fn bit_phases(mask: u8) -> Vec<u8> {
    (0..PHASES as u8)
        .filter(|b| mask >> b & 1 == 1)
        .map(|b| b + 1)
        .collect()
}

/// Green bit wins, then yellow, otherwise red. A phase with both green and
/// yellow set is an error.
pub fn interpret_state(frame: &SpatFrame) -> Result<IntersectionState, SpatError> {
    let Masks { yellow, green, .. } = frame.masks;
    if green & yellow != 0 {
        return Err(SpatError::ConflictingBits(bit_phases(green & yellow)));
    }
    let mut phases = [PhaseColor::Red; PHASES];
    for (i, color) in phases.iter_mut().enumerate() {
        if green >> i & 1 == 1 {
            *color = PhaseColor::Green;
        } else if yellow >> i & 1 == 1 {
            *color = PhaseColor::Yellow;
        }
    }
    Ok(IntersectionState(phases))
}

/// 1-based phases whose red bit disagrees with the derived color.
pub fn consistency_check(frame: &SpatFrame) -> BTreeSet<u8> {
    let lit = frame.masks.green | frame.masks.yellow;
    bit_phases(frame.masks.red ^ !lit).into_iter().collect()
}

/// Builds a datagram for `state`. The red mask is the complement of the
/// green and yellow masks; every byte outside the three masks is zero.
pub fn encode_spat_packet(state: &IntersectionState, pedestrian: bool) -> Vec<u8> {
    let len = if pedestrian { PEDESTRIAN_LEN } else { BASE_LEN };
    let mut out = vec![0u8; len];
    let green = state.mask(PhaseColor::Green);
    let yellow = state.mask(PhaseColor::Yellow);
    out[RED_OFFSET] = !(green | yellow);
    out[YELLOW_OFFSET] = yellow;
    out[GREEN_OFFSET] = green;
    out
}
