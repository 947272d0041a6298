//! Plain-text parameter checkpoints.
//!
//! ```text
//! NFSIP-CKPT v1
//! q.layer0.weight
//! 32 94
//! 1.23456789e-2
//! ...
//! ```
//!
//! Each tensor is a name line, a shape line and one value per line with nine
//! significant digits. Several networks share a file by prefixing tensor names
//! with `<network>.`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::network::{Architecture, ParameterSet};

pub const HEADER: &str = "NFSIP-CKPT v1";

/// A set of named networks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    networks: Vec<(String, ParameterSet)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, params: ParameterSet) {
        let name = name.into();
        self.networks.retain(|(n, _)| *n != name);
        self.networks.push((name, params));
    }

    pub fn get(&self, name: &str) -> Option<&ParameterSet> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.networks.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        for (net, params) in &self.networks {
            for (name, shape, values) in params.tensors() {
                writeln!(w, "{net}.{name}")?;
                let shape: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
                writeln!(w, "{}", shape.join(" "))?;
                for v in values {
                    writeln!(w, "{v:.8e}")?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next_line = |what: &str| -> Result<Option<String>> {
            match lines.next() {
                Some(line) => Ok(Some(line?)),
                None if what == "name" => Ok(None),
                None => Err(Error::Checkpoint(format!("unexpected end of file, expected {what}"))),
            }
        };
        match next_line("header")? {
            Some(h) if h.trim_end() == HEADER => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "bad header {:?}, expected {HEADER:?}",
                    other.unwrap_or_default()
                )))
            }
        }

        // network -> layer -> tensor kind -> (shape, values)
        let mut raw: BTreeMap<String, BTreeMap<usize, BTreeMap<String, (Vec<usize>, Vec<f64>)>>> =
            BTreeMap::new();
        let mut order: Vec<String> = Vec::new();
        while let Some(name) = next_line("name")? {
            let name = name.trim().to_string();
            if name.is_empty() {
                continue;
            }
            let shape_line = next_line("shape")?.unwrap_or_default();
            let shape = shape_line
                .split_whitespace()
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Checkpoint(format!("tensor {name}: bad shape {shape_line:?}: {e}")))?;
            let count: usize = shape.iter().product();
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                let line = next_line("value")?.unwrap_or_default();
                let v = line
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Checkpoint(format!("tensor {name}: bad value {line:?}: {e}")))?;
                values.push(v);
            }
            let (net, layer, kind) = split_tensor_name(&name)?;
            if !order.contains(&net) {
                order.push(net.clone());
            }
            raw.entry(net)
                .or_default()
                .entry(layer)
                .or_default()
                .insert(kind, (shape, values));
        }

        let mut ckpt = Checkpoint::new();
        for net in order {
            let layers = &raw[&net];
            ckpt.insert(net.clone(), assemble(&net, layers)?);
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}

fn split_tensor_name(name: &str) -> Result<(String, usize, String)> {
    let bad = || Error::Checkpoint(format!("malformed tensor name {name:?}"));
    let mut parts = name.rsplitn(3, '.');
    let kind = parts.next().ok_or_else(bad)?;
    let layer = parts.next().ok_or_else(bad)?;
    let net = parts.next().ok_or_else(bad)?;
    let layer = layer
        .strip_prefix("layer")
        .and_then(|l| l.parse::<usize>().ok())
        .ok_or_else(bad)?;
    Ok((net.to_string(), layer, kind.to_string()))
}

fn assemble(net: &str, layers: &BTreeMap<usize, BTreeMap<String, (Vec<usize>, Vec<f64>)>>) -> Result<ParameterSet> {
    let err = |m: String| Error::Checkpoint(format!("network {net}: {m}"));
    let n = layers.len();
    if n == 0 || layers.keys().copied().ne(0..n) {
        return Err(err("layer indices are not contiguous from 0".into()));
    }
    let mut input = 0;
    let mut hidden = Vec::new();
    let mut output = 0;
    for (l, tensors) in layers {
        let (shape, _) = tensors
            .get("weight")
            .ok_or_else(|| err(format!("layer {l} has no weight")))?;
        if shape.len() != 2 {
            return Err(err(format!("layer {l} weight shape {shape:?} is not 2-d")));
        }
        if *l == 0 {
            input = shape[1];
        }
        if l + 1 < n {
            hidden.push(shape[0]);
        } else {
            output = shape[0];
        }
    }
    let arch = Architecture::new(input, hidden, output).map_err(|e| err(e.to_string()))?;
    let mut params = ParameterSet::zeroed(arch);
    for (l, tensors) in layers {
        let mut view = params.layer_mut(*l);
        let fill = |kind: &str, dst: Option<&mut [f64]>| -> Result<()> {
            match (tensors.get(kind), dst) {
                (Some((_, values)), Some(dst)) if values.len() == dst.len() => {
                    dst.copy_from_slice(values);
                    Ok(())
                }
                (Some((shape, _)), Some(dst)) => Err(err(format!(
                    "layer {l} {kind} has shape {shape:?}, expected {} values",
                    dst.len()
                ))),
                (None, None) => Ok(()),
                (None, Some(_)) => Err(err(format!("layer {l} is missing {kind}"))),
                (Some(_), None) => Err(err(format!("layer {l} has unexpected {kind}"))),
            }
        };
        fill("weight", Some(&mut *view.weight))?;
        fill("bias", Some(&mut *view.bias))?;
        fill("ln_gain", view.gain.as_deref_mut())?;
        fill("ln_offset", view.offset.as_deref_mut())?;
        let known = ["weight", "bias", "ln_gain", "ln_offset"];
        if let Some(k) = tensors.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(err(format!("layer {l} has unknown tensor {k}")));
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::network::predict;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_reproduces_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let q = ParameterSet::init(Architecture::standard(12, 6).unwrap(), &mut rng);
        let pi = ParameterSet::init(Architecture::new(12, vec![16], 6).unwrap(), &mut rng);
        let mut ckpt = Checkpoint::new();
        ckpt.insert("q", q.clone());
        ckpt.insert("policy", pi.clone());
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("NFSIP-CKPT v1\nq.layer0.weight\n32 12\n"));

        let loaded = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(loaded.names().collect::<Vec<_>>(), vec!["q", "policy"]);
        for (name, orig) in [("q", &q), ("policy", &pi)] {
            let back = loaded.get(name).unwrap();
            assert_eq!(back.architecture(), orig.architecture());
            for _ in 0..10 {
                let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a = predict(orig, &x).unwrap();
                let b = predict(back, &x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_header_and_truncation() {
        assert!(Checkpoint::read_from(&b"NOT-A-CKPT\n"[..]).is_err());
        let truncated = b"NFSIP-CKPT v1\nq.layer0.weight\n2 2\n1.0\n";
        let err = Checkpoint::read_from(&truncated[..]).unwrap_err();
        assert!(err.to_string().contains("unexpected end"), "{err}");
    }

    #[test]
    fn values_use_nine_significant_digits() {
        let p = ParameterSet::from_values(Architecture::new(1, vec![], 1).unwrap(), vec![1.0 / 3.0, -2.5e-7])
            .unwrap();
        let mut ckpt = Checkpoint::new();
        ckpt.insert("n", p);
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\n3.33333333e-1\n"), "{text}");
        assert!(text.contains("\n-2.50000000e-7\n"), "{text}");
    }
}
