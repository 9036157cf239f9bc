//! Plain-text model files.
//!
//! ```text
//! paddy-ann-model 1
//! kind moisture
//! topology 4 8 1
//! lag 1
//! gain 1
//! norm et0 0 10
//! ...
//! provenance seed 7 epochs 1000 digest 3fa2...
//! hidden 0.12 -0.4 ...
//! output ...
//! end
//! ```
//!
//! One `hidden` line per hidden node and one `output` line per output node,
//! bias first. Floats are written in Rust's shortest round-trip form so a
//! reload reproduces every weight bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::ann::{Mlp, MlpTopology};
use crate::error::{Error, Result};
use crate::evapo::{Et0Model, Et0Normalizers};
use crate::moisture::{MoistureModel, MoistureNormalizers};
use crate::norm::Normalizer;

pub const FORMAT_NAME: &str = "paddy-ann-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    /// SHA-256 of the training data, hex encoded.
    pub data_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Et0(Et0Model),
    Moisture(MoistureModel),
}

impl TrainedModel {
    pub fn net(&self) -> &Mlp {
        match self {
            TrainedModel::Et0(m) => m.net(),
            TrainedModel::Moisture(m) => m.net(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Et0(_) => "et0",
            TrainedModel::Moisture(_) => "moisture",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub version: u32,
    pub model: TrainedModel,
    pub provenance: Provenance,
}

impl ModelArtifact {
    pub fn new(model: TrainedModel, provenance: Provenance) -> Self {
        Self {
            version: FORMAT_VERSION,
            model,
            provenance,
        }
    }
}

/// Digest of a numeric series, over the little-endian bit patterns.
pub fn digest_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn push_norm(out: &mut String, name: &str, n: &Normalizer) {
    writeln!(out, "norm {name} {} {}", n.lo(), n.hi()).expect("write to String");
}

fn push_rows(out: &mut String, tag: &str, weights: &[f64], width: usize) {
    for row in weights.chunks_exact(width) {
        out.push_str(tag);
        for w in row {
            write!(out, " {w}").expect("write to String");
        }
        out.push('\n');
    }
}

pub fn to_text(a: &ModelArtifact) -> String {
    let net = a.model.net();
    let t = net.topology();
    let mut out = String::new();
    writeln!(out, "{FORMAT_NAME} {}", a.version).unwrap();
    writeln!(out, "kind {}", a.model.kind()).unwrap();
    writeln!(
        out,
        "topology {} {} {}",
        t.n_inputs, t.n_hidden, t.n_outputs
    )
    .unwrap();
    match &a.model {
        TrainedModel::Et0(m) => {
            let nz = m.normalizers();
            push_norm(&mut out, "tmax", &nz.tmax);
            push_norm(&mut out, "tavg", &nz.tavg);
            push_norm(&mut out, "tmin", &nz.tmin);
            push_norm(&mut out, "et0", &nz.et0);
        }
        TrainedModel::Moisture(m) => {
            writeln!(out, "lag {}", m.lag()).unwrap();
            let nz = m.normalizers();
            push_norm(&mut out, "et0", &nz.et0);
            push_norm(&mut out, "precip", &nz.precip);
            push_norm(&mut out, "kc", &nz.kc);
            push_norm(&mut out, "theta", &nz.theta);
        }
    }
    writeln!(out, "gain {}", net.gain()).unwrap();
    let p = &a.provenance;
    writeln!(
        out,
        "provenance seed {} epochs {} digest {}",
        p.seed, p.epochs, p.data_digest
    )
    .unwrap();
    push_rows(&mut out, "hidden", net.hidden_weights(), t.n_inputs + 1);
    push_rows(&mut out, "output", net.output_weights(), t.n_hidden + 1);
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line as (1-based line number, whitespace-split tokens).
    fn next_line(&mut self, expect: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok((i + 1, toks));
            }
        }
        Err(Error::Parse {
            line: 0,
            field: expect.to_string(),
            message: "unexpected end of file".to_string(),
        })
    }

    fn keyed(&mut self, key: &str, arity: usize) -> Result<(usize, Vec<&'a str>)> {
        let (line, toks) = self.next_line(key)?;
        if toks[0] != key || toks.len() != arity + 1 {
            return Err(Error::Parse {
                line,
                field: key.to_string(),
                message: format!(
                    "expected `{key}` with {arity} value(s), found `{}`",
                    toks.join(" ")
                ),
            });
        }
        Ok((line, toks[1..].to_vec()))
    }
}

fn num<T: std::str::FromStr>(raw: &str, line: usize, field: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| Error::Parse {
        line,
        field: field.to_string(),
        message: format!("`{raw}`: {e}"),
    })
}

fn read_norm(lines: &mut Lines<'_>, name: &str) -> Result<Normalizer> {
    let (line, toks) = lines.keyed("norm", 3)?;
    if toks[0] != name {
        return Err(Error::Parse {
            line,
            field: "norm".to_string(),
            message: format!("expected bounds for `{name}`, found `{}`", toks[0]),
        });
    }
    let lo = num(toks[1], line, name)?;
    let hi = num(toks[2], line, name)?;
    Normalizer::new(lo, hi).map_err(|e| Error::Parse {
        line,
        field: name.to_string(),
        message: e.to_string(),
    })
}

fn read_rows(lines: &mut Lines<'_>, tag: &str, rows: usize, width: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        let (line, vals) = lines.keyed(tag, width)?;
        for v in vals {
            out.push(num(v, line, tag)?);
        }
    }
    Ok(out)
}

pub fn from_text(text: &str) -> Result<ModelArtifact> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, head) = lines.next_line("header")?;
    if head.len() != 2 || head[0] != FORMAT_NAME {
        return Err(Error::Parse {
            line,
            field: "header".to_string(),
            message: format!("expected `{FORMAT_NAME} <version>`"),
        });
    }
    if head[1] != FORMAT_VERSION.to_string() {
        return Err(Error::Version(head[1].to_string()));
    }

    let (kind_line, kind) = lines.keyed("kind", 1)?;
    let (line, topo) = lines.keyed("topology", 3)?;
    let topology = MlpTopology::new(
        num(topo[0], line, "topology")?,
        num(topo[1], line, "topology")?,
        num(topo[2], line, "topology")?,
    )
    .map_err(|e| Error::Parse {
        line,
        field: "topology".to_string(),
        message: e.to_string(),
    })?;

    enum Pending {
        Et0(Et0Normalizers),
        Moisture(usize, MoistureNormalizers),
    }
    let pending = match kind[0] {
        "et0" => Pending::Et0(Et0Normalizers {
            tmax: read_norm(&mut lines, "tmax")?,
            tavg: read_norm(&mut lines, "tavg")?,
            tmin: read_norm(&mut lines, "tmin")?,
            et0: read_norm(&mut lines, "et0")?,
        }),
        "moisture" => {
            let (line, lag) = lines.keyed("lag", 1)?;
            let lag = num(lag[0], line, "lag")?;
            Pending::Moisture(
                lag,
                MoistureNormalizers {
                    et0: read_norm(&mut lines, "et0")?,
                    precip: read_norm(&mut lines, "precip")?,
                    kc: read_norm(&mut lines, "kc")?,
                    theta: read_norm(&mut lines, "theta")?,
                },
            )
        }
        other => {
            return Err(Error::Parse {
                line: kind_line,
                field: "kind".to_string(),
                message: format!("unknown model kind `{other}`"),
            })
        }
    };

    let (line, gain) = lines.keyed("gain", 1)?;
    let gain: f64 = num(gain[0], line, "gain")?;

    let (line, prov) = lines.keyed("provenance", 6)?;
    if prov[0] != "seed" || prov[2] != "epochs" || prov[4] != "digest" {
        return Err(Error::Parse {
            line,
            field: "provenance".to_string(),
            message: "expected `seed <n> epochs <n> digest <hex>`".to_string(),
        });
    }
    let provenance = Provenance {
        seed: num(prov[1], line, "seed")?,
        epochs: num(prov[3], line, "epochs")?,
        data_digest: prov[5].to_string(),
    };

    let hidden = read_rows(
        &mut lines,
        "hidden",
        topology.n_hidden,
        topology.n_inputs + 1,
    )?;
    let output = read_rows(
        &mut lines,
        "output",
        topology.n_outputs,
        topology.n_hidden + 1,
    )?;
    let (line, end) = lines.next_line("end")?;
    if end != ["end"] {
        return Err(Error::Parse {
            line,
            field: "end".to_string(),
            message: format!("expected `end`, found `{}`", end.join(" ")),
        });
    }

    let invalid = |e: Error| Error::Parse {
        line: kind_line,
        field: "model".to_string(),
        message: e.to_string(),
    };
    let net = Mlp::from_weights(topology, hidden, output, gain).map_err(invalid)?;
    let model = match pending {
        Pending::Et0(nz) => TrainedModel::Et0(Et0Model::new(net, nz).map_err(invalid)?),
        Pending::Moisture(lag, nz) => {
            TrainedModel::Moisture(MoistureModel::new(net, lag, nz).map_err(invalid)?)
        }
    };
    Ok(ModelArtifact {
        version: FORMAT_VERSION,
        model,
        provenance,
    })
}

pub fn save_model(m: &ModelArtifact, path: &Path) -> Result<()> {
    fs::write(path, to_text(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
