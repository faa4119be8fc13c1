//! Network boundary: operator frames in, state snapshots out.
//!
//! Operator frames arrive as one JSON document per datagram, or as
//! newline-delimited JSON on the cockpit stream. Both decode to the same
//! [`wire::InputFrameMsg`] and feed the same session queue. Every tick the
//! session publishes a [`wire::StateMsg`] line to all cockpit subscribers.

pub mod server;
pub mod wire;

pub use server::{Gateway, GatewayError, GatewayHandle, IngestStats};
pub use wire::{
    decode_frame, decode_input, encode_frame, encode_input, read_frames, InputFrameMsg, StateMsg, WireError,
};
