"""EEG classification through EEG videos, optical flow and a CNN-RNN."""
from .eegio import ElectrodeLayout, Recording, Trial, read_recording, synth_recording, write_recording
from .pipeline import (BandpassFilter, DaeDenoiser, EegVideoEncoder, EegVideoNet, make_cnn_rnn,
                       make_csp_lda)

__version__ = "0.1.0"

__all__ = [
    "BandpassFilter", "DaeDenoiser", "EegVideoEncoder", "EegVideoNet", "ElectrodeLayout", "Recording",
    "Trial", "make_cnn_rnn", "make_csp_lda", "read_recording", "synth_recording", "write_recording",
]
