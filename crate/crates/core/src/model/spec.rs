use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{conv2d_param_count, dense_param_count, KERNEL_SIZE};

/// Layer graph of the classifier: conv blocks, one LSTM over the flattened
/// spatial grid, a fully connected layer and the softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    /// Height and width of the square input.
    pub input_size: usize,
    pub channels: usize,
    /// Filter count of every convolution in each block.
    pub block_filters: Vec<usize>,
    pub convs_per_block: Vec<usize>,
    pub dropout_rate: f64,
    pub lstm_units: usize,
    pub fc_units: usize,
    pub classes: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            input_size: 256,
            channels: 3,
            block_filters: vec![32, 64, 128, 256, 512, 512],
            convs_per_block: vec![2, 2, 2, 2, 3, 3],
            dropout_rate: 0.2,
            lstm_units: 512,
            fc_units: 64,
            classes: 4,
        }
    }
}

impl ModelSpec {
    /// Same block layout with narrower layers, for desk-scale runs.
    pub fn reduced(input_size: usize, block_filters: [usize; 6], lstm_units: usize) -> Self {
        Self {
            input_size,
            block_filters: block_filters.to_vec(),
            lstm_units,
            ..Self::default()
        }
    }

    pub fn blocks(&self) -> usize {
        self.block_filters.len()
    }

    pub fn conv_count(&self) -> usize {
        self.convs_per_block.iter().sum()
    }

    /// Side length of the feature map after the last pooling layer.
    pub fn final_grid(&self) -> usize {
        self.input_size >> self.blocks()
    }

    /// LSTM sequence length: one step per cell of the final grid.
    pub fn timesteps(&self) -> usize {
        self.final_grid() * self.final_grid()
    }

    pub fn lstm_input(&self) -> usize {
        *self.block_filters.last().unwrap()
    }

    pub fn flat_width(&self) -> usize {
        self.timesteps() * self.lstm_units
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.block_filters.is_empty() || self.block_filters.len() != self.convs_per_block.len() {
            return bad(format!(
                "block_filters ({}) and convs_per_block ({}) must be non-empty and equal length",
                self.block_filters.len(),
                self.convs_per_block.len()
            ));
        }
        if self.block_filters.contains(&0) || self.convs_per_block.contains(&0) {
            return bad("block filter and conv counts must be positive".into());
        }
        let divisor = 1usize << self.blocks();
        if self.input_size == 0 || !self.input_size.is_multiple_of(divisor) {
            return bad(format!(
                "input_size {} must be a positive multiple of {divisor}",
                self.input_size
            ));
        }
        if self.channels == 0 || self.lstm_units == 0 || self.fc_units == 0 || self.classes < 2 {
            return bad("channels, lstm_units and fc_units must be positive, classes >= 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        Ok(())
    }

    /// Per-layer shapes and parameter counts, one row per counted layer.
    /// Batch norm and dropout are folded into their blocks and not counted.
    pub fn shape_trace(&self) -> Result<ShapeTrace> {
        self.validate()?;
        let mut rows = Vec::new();
        let mut side = self.input_size;
        let mut channels = self.channels;
        for (&filters, &convs) in self.block_filters.iter().zip(&self.convs_per_block) {
            for _ in 0..convs {
                rows.push(TraceRow {
                    layer: rows.len() + 1,
                    kind: LayerKind::Conv2d,
                    kernel: Some(KERNEL_SIZE),
                    units: Some(filters),
                    input_shape: vec![side, side, channels],
                    output_shape: vec![side, side, filters],
                    params: conv2d_param_count(channels, filters),
                });
                channels = filters;
            }
            rows.push(TraceRow {
                layer: rows.len() + 1,
                kind: LayerKind::MaxPool2d,
                kernel: Some(2),
                units: None,
                input_shape: vec![side, side, channels],
                output_shape: vec![side / 2, side / 2, channels],
                params: 0,
            });
            side /= 2;
        }
        let (t, d, u) = (self.timesteps(), self.lstm_input(), self.lstm_units);
        rows.push(TraceRow {
            layer: rows.len() + 1,
            kind: LayerKind::Lstm,
            kernel: None,
            units: Some(u),
            input_shape: vec![t, d],
            output_shape: vec![t, u],
            params: 4 * ((d + u) * u + u),
        });
        rows.push(TraceRow {
            layer: rows.len() + 1,
            kind: LayerKind::FullyConnected,
            kernel: None,
            units: Some(self.fc_units),
            input_shape: vec![self.flat_width()],
            output_shape: vec![self.fc_units],
            params: dense_param_count(self.flat_width(), self.fc_units),
        });
        rows.push(TraceRow {
            layer: rows.len() + 1,
            kind: LayerKind::Output,
            kernel: None,
            units: Some(self.classes),
            input_shape: vec![self.fc_units],
            output_shape: vec![self.classes],
            params: dense_param_count(self.fc_units, self.classes),
        });
        Ok(ShapeTrace { rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    MaxPool2d,
    Lstm,
    FullyConnected,
    Output,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Conv2d => "Convolution2D",
            LayerKind::MaxPool2d => "Maxpooling2D",
            LayerKind::Lstm => "LSTM",
            LayerKind::FullyConnected => "FC",
            LayerKind::Output => "Output",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based layer number.
    pub layer: usize,
    pub kind: LayerKind,
    pub kernel: Option<usize>,
    /// Filters for convolutions, units for LSTM and dense layers.
    pub units: Option<usize>,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

impl TraceRow {
    /// The architecture table's "Input Size" cell: the input shape as
    /// `H X W X C` for feature layers, the parameter count for the dense head.
    pub fn table_cell(&self) -> String {
        match self.kind {
            LayerKind::FullyConnected | LayerKind::Output => self.params.to_string(),
            _ => self
                .input_shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(" X "),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTrace {
    pub rows: Vec<TraceRow>,
}

impl ShapeTrace {
    pub fn total_params(&self) -> usize {
        self.rows.iter().map(|r| r.params).sum()
    }

    pub fn row(&self, kind: LayerKind) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }
}

impl fmt::Display for ShapeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5}  {:<14} {:<8} {:>6}  {:<18} {:>10}",
            "Layer", "Type", "Kernel", "Units", "Input Size", "Params"
        )?;
        for r in &self.rows {
            let kernel = r.kernel.map_or("-".to_string(), |k| format!("{k} X {k}"));
            let units = r.units.map_or("-".to_string(), |u| u.to_string());
            writeln!(
                f,
                "{:>5}  {:<14} {:<8} {:>6}  {:<18} {:>10}",
                r.layer,
                r.kind.to_string(),
                kernel,
                units,
                r.table_cell(),
                r.params
            )?;
        }
        write!(f, "total parameters: {}", self.total_params())
    }
}
