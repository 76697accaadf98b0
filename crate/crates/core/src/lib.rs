//! Triangular network coding over GF(2).
//!
//! Coded packets are XORs of shift-padded originals, identified by a
//! deterministic, unbounded sequence of padding vectors, and decoded by
//! bit-level back substitution. Alongside the codec the crate carries
//! integer and GF(2) decodability oracles, an RLNC baseline, closed-form
//! transmission bounds and header-overhead formulas, a frame format and an
//! erasure-channel multicast simulator.

pub mod analysis;
pub mod codec;
pub mod format;
pub mod gf;
pub mod ids;
pub mod oracle;
pub mod rlnc;
pub mod sim;
pub mod wire;

pub use codec::{decode_all, encode, Bits, CodedPacket, DecodeError, Decoder, Packet};
pub use ids::{id_at, ids_needed, seq_of, SeqNumber, TriId};
