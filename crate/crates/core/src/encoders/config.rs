use crate::error::{Error, Result};

/// Layer sizes of the transcription and prediction networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_filters: usize,
    pub char_width: usize,
    /// Hidden units per direction of the bi-LSTM.
    pub f_hidden: usize,
    pub f_layers: usize,
    pub g_hidden: usize,
    pub label_dim: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            word_dim: 100,
            char_dim: 30,
            char_filters: 30,
            char_width: 3,
            f_hidden: 200,
            f_layers: 1,
            g_hidden: 50,
            label_dim: 10,
            dropout: 0.5,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("char_dim", self.char_dim),
            ("char_filters", self.char_filters),
            ("char_width", self.char_width),
            ("f_hidden", self.f_hidden),
            ("f_layers", self.f_layers),
            ("g_hidden", self.g_hidden),
            ("label_dim", self.label_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{} must be positive", name)));
            }
        }
        if self.char_width % 2 == 0 {
            return Err(Error::Config(format!(
                "char_width must be odd, got {}",
                self.char_width
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Width of a token representation: word embedding plus char-CNN features.
    pub fn token_dim(&self) -> usize {
        self.word_dim + self.char_filters
    }

    pub fn char_pad(&self) -> usize {
        (self.char_width - 1) / 2
    }
}
