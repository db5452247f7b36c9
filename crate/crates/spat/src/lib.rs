//! Signal Phase and Timing (SPaT) pipeline: datagram codec, a
//! change-detecting UDP to HTTP gateway, a controller emulator, and a
//! latency-measuring watch client.

pub mod codec;
pub mod cycle;
pub mod emulator;
pub mod gateway;
pub mod server;
pub mod watch;

pub use codec::{IntersectionState, PhaseColor, SpatError, SpatFrame};
pub use cycle::CycleSpec;
pub use gateway::{GatewaySnapshot, IngestOutcome, SpatGateway};
