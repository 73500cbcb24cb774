//! Plain-text checkpoints.
//!
//! ```text
//! expertnet-checkpoint 1
//! scalar f64
//! classes 4
//! network amateur 16
//! dense 16 128
//! weight <out·in values>
//! bias <out values>
//! relu
//! ...
//! end
//! network expert 8
//! ...
//! end
//! ```
//!
//! Values use the shortest decimal form that parses back to the same bits.
//! Optimizer state is not stored; a loaded model is ready for inference and
//! restarts momentum from zero if trained further.

use std::fmt::Write as _;
use std::path::Path;

use super::model::ExpertNetModel;
use crate::error::{Error, Result};
use crate::nn::{Activation, Dense, Layer, Network, SgdConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &str = "expertnet-checkpoint 1";

fn write_values<T: Scalar>(out: &mut String, key: &str, values: &[T]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

fn write_network<T: Scalar>(out: &mut String, name: &str, net: &Network<T>) {
    let _ = writeln!(out, "network {name} {}", net.input_dim());
    for layer in net.layers() {
        match layer {
            Layer::Dense(d) => {
                let _ = writeln!(out, "dense {} {}", d.input_dim(), d.output_dim());
                write_values(out, "weight", d.weight().data());
                write_values(out, "bias", d.bias().data());
            }
            Layer::Activation(Activation::LeakyRelu(a)) => {
                let _ = writeln!(out, "leaky-relu {a}");
            }
            Layer::Activation(a) => {
                let _ = writeln!(out, "{}", a.name());
            }
        }
    }
    out.push_str("end\n");
}

pub fn save_checkpoint<T: Scalar>(model: &ExpertNetModel<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "scalar {}", T::NAME);
    let _ = writeln!(out, "classes {}", model.num_classes());
    write_network(&mut out, "amateur", &model.amateur);
    write_network(&mut out, "expert", &model.expert);
    out
}

pub fn write_checkpoint<T: Scalar>(model: &ExpertNetModel<T>, path: &Path) -> Result<()> {
    std::fs::write(path, save_checkpoint(model))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: u64,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            let (i, l) = self
                .inner
                .next()
                .ok_or_else(|| Error::Input { line: self.line + 1, message: "unexpected end of checkpoint".into() })?;
            self.line = i as u64 + 1;
            if !l.trim().is_empty() {
                return Ok(l.trim());
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Input { line: self.line, message: message.into() }
    }

    fn keyed<'b>(&self, line: &'b str, key: &str) -> Result<Vec<&'b str>> {
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected '{key}'")));
        }
        Ok(parts.collect())
    }

    fn number<N: std::str::FromStr>(&self, s: &str) -> Result<N> {
        s.parse().map_err(|_| self.err(format!("bad number '{s}'")))
    }
}

fn read_network<T: Scalar>(lines: &mut Lines<'_>, name: &str) -> Result<Network<T>> {
    let header = lines.next()?;
    let parts = lines.keyed(header, "network")?;
    if parts.len() != 2 || parts[0] != name {
        return Err(lines.err(format!("expected 'network {name} <input>'")));
    }
    let input: usize = lines.number(parts[1])?;
    let mut layers = Vec::new();
    loop {
        let line = lines.next()?;
        let mut parts = line.split_whitespace();
        let kind = parts.next().unwrap_or("");
        let args: Vec<&str> = parts.collect();
        let layer = match kind {
            "end" => break,
            "dense" if args.len() == 2 => {
                let (i, o): (usize, usize) = (lines.number(args[0])?, lines.number(args[1])?);
                let wl = lines.next()?;
                let w = lines.keyed(wl, "weight")?.iter().map(|s| lines.number(s)).collect::<Result<Vec<T>>>()?;
                let bl = lines.next()?;
                let b = lines.keyed(bl, "bias")?.iter().map(|s| lines.number(s)).collect::<Result<Vec<T>>>()?;
                Layer::Dense(Dense::new(Tensor::new(vec![o, i], w)?, Tensor::new(vec![o], b)?)?)
            }
            "relu" => Layer::Activation(Activation::Relu),
            "leaky-relu" if args.len() == 1 => Layer::Activation(Activation::leaky_relu(lines.number(args[0])?)?),
            "sigmoid" => Layer::Activation(Activation::Sigmoid),
            "softmax" => Layer::Activation(Activation::Softmax),
            "normalize" => Layer::Activation(Activation::Normalize),
            other => return Err(lines.err(format!("unknown layer '{other}'"))),
        };
        layers.push(layer);
    }
    Network::new(input, layers)
}

/// Parses a checkpoint; optimizers are re-created from the given configs.
pub fn load_checkpoint<T: Scalar>(
    text: &str,
    amateur_opt: SgdConfig<T>,
    expert_opt: SgdConfig<T>,
) -> Result<ExpertNetModel<T>> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()? != MAGIC {
        return Err(lines.err("not an expertnet checkpoint"));
    }
    let l = lines.next()?;
    let scalar = lines.keyed(l, "scalar")?;
    if scalar != [T::NAME] {
        return Err(lines.err(format!("checkpoint scalar {scalar:?} does not match {}", T::NAME)));
    }
    let l = lines.next()?;
    let classes = lines.keyed(l, "classes")?;
    let k: usize = match classes.as_slice() {
        [c] => lines.number(c)?,
        _ => return Err(lines.err("expected 'classes <K>'")),
    };
    let amateur = read_network(&mut lines, "amateur")?;
    let expert = read_network(&mut lines, "expert")?;
    if amateur.output_dim() != k {
        return Err(Error::dim(format!("amateur emits {} classes, header says {k}", amateur.output_dim())));
    }
    ExpertNetModel::from_networks(amateur, expert, amateur_opt, expert_opt)
}

pub fn read_checkpoint<T: Scalar>(
    path: &Path,
    amateur_opt: SgdConfig<T>,
    expert_opt: SgdConfig<T>,
) -> Result<ExpertNetModel<T>> {
    load_checkpoint(&std::fs::read_to_string(path)?, amateur_opt, expert_opt)
}
