//! From-scratch recurrent classifier over sliding-window features.

mod io;
mod lstm;
mod network;
mod train;

pub use io::{read_model, write_model, FORMAT_VERSION};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams, GATE_NAMES};
pub use network::{
    backward, bce_loss, bce_loss_values, forward_trace, network_forward, offset_from_probs, predict_offset,
    ForwardCache, RnnNetwork,
};
pub use train::{label_accuracy, train, TrainConfig, TrainReport};
