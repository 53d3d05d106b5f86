//! Reader and writer for the NNet text format used by the ACAS Xu networks.
//!
//! After any `//` comment lines the file holds, in order: the counts line
//! (`numLayers, inputSize, outputSize, maxLayerSize`), the layer sizes, an
//! ignored flag line, input minimums, input maximums, means, ranges, and then
//! for each layer its weight rows followed by its biases, one per line.
//! Hidden layers are ReLU, the output layer is identity.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, Layer, Matrix, Network, Normalization};
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut inner = text.lines().enumerate().peekable();
        while let Some((_, line)) = inner.peek() {
            let t = line.trim();
            if t.starts_with("//") || t.is_empty() {
                inner.next();
            } else {
                break;
            }
        }
        Self {
            inner,
            last_line: 0,
        }
    }

    fn next_values(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        loop {
            let Some((idx, line)) = self.inner.next() else {
                return Err(Error::Parse {
                    line: self.last_line + 1,
                    reason: format!("unexpected end of file while reading {what}"),
                });
            };
            self.last_line = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            return Ok((idx + 1, values));
        }
    }

    fn reals(&mut self, what: &str, expected: usize) -> Result<Vec<f64>> {
        let (line, values) = self.next_values(what)?;
        if values.len() != expected {
            return Err(Error::Parse {
                line,
                reason: format!("{what}: expected {expected} values, found {}", values.len()),
            });
        }
        values
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    reason: format!("{what}: invalid number {v:?}"),
                })
            })
            .collect()
    }

    fn integers(&mut self, what: &str) -> Result<(usize, Vec<usize>)> {
        let (line, values) = self.next_values(what)?;
        let parsed = values
            .iter()
            .map(|v| {
                v.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    reason: format!("{what}: invalid count {v:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((line, parsed))
    }
}

pub fn parse_nnet(text: &str) -> Result<Network> {
    let mut lines = Lines::new(text);
    let (line, counts) = lines.integers("counts line")?;
    if counts.len() != 4 {
        return Err(Error::Parse {
            line,
            reason: format!("counts line needs 4 values, found {}", counts.len()),
        });
    }
    let (num_layers, input_size, output_size) = (counts[0], counts[1], counts[2]);
    if num_layers == 0 {
        return Err(Error::Parse {
            line,
            reason: "network must have at least one layer".into(),
        });
    }
    let (line, sizes) = lines.integers("layer sizes")?;
    if sizes.len() != num_layers + 1 {
        return Err(Error::Parse {
            line,
            reason: format!(
                "expected {} layer sizes, found {}",
                num_layers + 1,
                sizes.len()
            ),
        });
    }
    if sizes[0] != input_size || sizes[num_layers] != output_size {
        return Err(Error::Parse {
            line,
            reason: format!(
                "layer sizes {sizes:?} disagree with input size {input_size} / output size {output_size}"
            ),
        });
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::Parse {
            line,
            reason: "layer sizes must be positive".into(),
        });
    }
    lines.next_values("flag line")?;
    let input_min = lines.reals("input minimums", input_size)?;
    let input_max = lines.reals("input maximums", input_size)?;
    let means = lines.reals("means", input_size + 1)?;
    let ranges = lines.reals("ranges", input_size + 1)?;

    let mut layers = Vec::with_capacity(num_layers);
    for k in 0..num_layers {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let mut weights = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let row = lines.reals(&format!("layer {k} weight row {i}"), cols)?;
            for (j, w) in row.into_iter().enumerate() {
                weights[(i, j)] = w;
            }
        }
        let mut biases = Vec::with_capacity(rows);
        for i in 0..rows {
            biases.push(lines.reals(&format!("layer {k} bias {i}"), 1)?[0]);
        }
        let activation = if k + 1 == num_layers {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(Layer::new(weights, biases, activation)?);
    }

    let normalization = Normalization {
        input_min,
        input_max,
        input_mean: means[..input_size].to_vec(),
        input_range: ranges[..input_size].to_vec(),
        output_mean: means[input_size],
        output_range: ranges[input_size],
    };
    let net = Network::new(layers)?;
    if is_identity_normalization(&normalization) {
        Ok(net)
    } else {
        net.with_normalization(normalization)
    }
}

pub fn load_nnet(path: impl AsRef<Path>) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    parse_nnet(&text)
}

fn identity_normalization(n: usize) -> Normalization {
    Normalization {
        input_min: vec![f64::MIN; n],
        input_max: vec![f64::MAX; n],
        input_mean: vec![0.0; n],
        input_range: vec![1.0; n],
        output_mean: 0.0,
        output_range: 1.0,
    }
}

fn is_identity_normalization(norm: &Normalization) -> bool {
    *norm == identity_normalization(norm.input_min.len())
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        // Debug formatting is the shortest representation that round-trips.
        let _ = write!(out, "{v:?},");
    }
    out.push('\n');
}

/// Serializes a network whose hidden layers are all ReLU. Networks without
/// normalization metadata are written with the identity normalization.
pub fn write_nnet(net: &Network) -> Result<String> {
    let layers = net.layers();
    if layers[..layers.len() - 1]
        .iter()
        .any(|l| l.activation != Activation::Relu)
    {
        return Err(Error::Unsupported(
            "NNet requires every hidden layer to be ReLU".into(),
        ));
    }
    let mut sizes = vec![net.input_dim()];
    sizes.extend(layers.iter().map(Layer::output_dim));
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    let norm = net
        .normalization()
        .cloned()
        .unwrap_or_else(|| identity_normalization(net.input_dim()));

    let mut out = String::new();
    out.push_str("// NNet file written by reluopt\n");
    let _ = writeln!(
        out,
        "{},{},{},{},",
        layers.len(),
        net.input_dim(),
        net.output_dim(),
        max_size
    );
    for s in &sizes {
        let _ = write!(out, "{s},");
    }
    out.push('\n');
    out.push_str("0,\n");
    push_row(&mut out, norm.input_min.iter().copied());
    push_row(&mut out, norm.input_max.iter().copied());
    push_row(
        &mut out,
        norm.input_mean.iter().copied().chain([norm.output_mean]),
    );
    push_row(
        &mut out,
        norm.input_range.iter().copied().chain([norm.output_range]),
    );
    for layer in layers {
        for row in layer.weights.row_iter() {
            push_row(&mut out, row.iter().copied());
        }
        for &b in &layer.biases {
            push_row(&mut out, [b]);
        }
    }
    Ok(out)
}

pub fn write_nnet_file(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_nnet(net)?)?;
    Ok(())
}
