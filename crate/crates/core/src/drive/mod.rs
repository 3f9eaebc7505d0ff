//! Drive link: waveform synthesis, the UDP sample-stream protocol and a
//! virtual board that turns received samples back into an energy image.

pub mod board;
pub mod link;
pub mod packet;
pub mod phasor;
pub mod wave;

pub use board::board_sim;
pub use link::{receive, stream, ReceiveConfig, ReceiveReport, Reassembler, SendStats, StreamConfig};
pub use packet::{decode_packet, encode_packet, DrivePacket};
pub use phasor::{estimate_phasor, extract_channel_phasor};
pub use wave::{synth_wave, WaveSamples, Waveform};
