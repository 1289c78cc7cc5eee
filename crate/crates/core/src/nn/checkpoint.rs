//! Plain-text checkpoints.
//!
//! ```text
//! lanehrl-checkpoint 1
//! layers 7 150 1
//! hidden relu
//! output negated_softplus
//! array layer0.weight 150 7
//! array layer0.bias 150
//! array layer1.weight 1 150
//! array layer1.bias 1
//! data
//! <one line per row, space-separated decimals>
//! ```
//!
//! Values are written in shortest round-trip form, so loading reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use super::mlp::{Activation, Dense, Mlp, MlpParams, MlpSpec, OutputTransform};
use crate::error::{Error, Result};

const MAGIC: &str = "lanehrl-checkpoint 1";

fn bad(detail: impl Into<String>) -> Error {
    Error::Parse {
        what: "checkpoint",
        detail: detail.into(),
    }
}

pub fn encode_checkpoint(net: &Mlp) -> String {
    let mut s = String::new();
    let sizes: Vec<String> = net.spec.layer_sizes.iter().map(|n| n.to_string()).collect();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "layers {}", sizes.join(" ")).unwrap();
    writeln!(s, "hidden {}", net.spec.hidden_activation.name()).unwrap();
    writeln!(s, "output {}", net.spec.output_transform.name()).unwrap();
    for (i, l) in net.params.layers().iter().enumerate() {
        writeln!(s, "array layer{i}.weight {} {}", l.outputs, l.inputs).unwrap();
        writeln!(s, "array layer{i}.bias {}", l.outputs).unwrap();
    }
    writeln!(s, "data").unwrap();
    let row = |s: &mut String, values: &[f64]| {
        let text: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", text.join(" ")).unwrap();
    };
    for l in net.params.layers() {
        for r in l.weights.chunks(l.inputs) {
            row(&mut s, r);
        }
        row(&mut s, &l.biases);
    }
    s
}

fn parse_row(line: Option<&str>, expected: usize, name: &str) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| bad(format!("{name}: unexpected end of data")))?;
    let values = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{name}: {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(bad(format!("{name}: expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}

pub fn decode_checkpoint(text: &str) -> Result<Mlp> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(bad("missing header line"));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected {key:?}, found {line:?}")))
    };
    let sizes = field("layers")?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| bad(format!("layer size {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let hidden = field("hidden")?;
    let hidden = Activation::from_name(&hidden).ok_or_else(|| bad(format!("unknown activation {hidden:?}")))?;
    let output = field("output")?;
    let output = OutputTransform::from_name(&output).ok_or_else(|| bad(format!("unknown output transform {output:?}")))?;
    let spec = MlpSpec::new(sizes, hidden, output).map_err(|e| bad(e.to_string()))?;

    // array declarations must agree with the network shape
    for (i, w) in spec.layer_sizes.windows(2).enumerate() {
        let decl = field("array")?;
        if decl != format!("layer{i}.weight {} {}", w[1], w[0]) {
            return Err(bad(format!("unexpected array declaration {decl:?}")));
        }
        let decl = field("array")?;
        if decl != format!("layer{i}.bias {}", w[1]) {
            return Err(bad(format!("unexpected array declaration {decl:?}")));
        }
    }
    if lines.next().map(str::trim) != Some("data") {
        return Err(bad("missing data marker"));
    }
    let mut layers = Vec::with_capacity(spec.n_layers());
    for (i, w) in spec.layer_sizes.windows(2).enumerate() {
        let (inputs, outputs) = (w[0], w[1]);
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            weights.extend(parse_row(lines.next(), inputs, &format!("layer{i}.weight"))?);
        }
        let biases = parse_row(lines.next(), outputs, &format!("layer{i}.bias"))?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            biases,
        });
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing data"));
    }
    Ok(Mlp {
        spec,
        params: MlpParams::from_layers(layers),
    })
}

pub fn save_checkpoint(net: &Mlp, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&text)
}
