use std::fmt::Write as _;
use std::path::Path;

use super::arch::{ArchConfig, OutputType, Variant};
use super::model::{LcfModel, Normalization};
use crate::error::{Error, Result};
use crate::network::MinMax;
use crate::nn::Tensor;
use crate::scalar::Scalar;

const MAGIC: &str = "lcf-checkpoint 1";

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

/// Text header followed by every parameter in declaration order. Floats
/// use the shortest representation that parses back to the same value.
pub fn checkpoint_text<S: Scalar>(model: &LcfModel<S>) -> String {
    let a = &model.arch;
    let n = &model.norm;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "scalar {}", S::NAME);
    let _ = writeln!(out, "variant {}", a.variant);
    let _ = writeln!(out, "output {}", a.output);
    let _ = writeln!(out, "features {}", a.features);
    let _ = writeln!(out, "hidden {}", a.hidden);
    let _ = writeln!(out, "heads {}", a.heads);
    let _ = writeln!(out, "history {}", a.history);
    let _ = writeln!(out, "fc {}", join(&a.fc));
    let _ = writeln!(out, "attention_slope {:?}", a.attention_slope);
    let _ = writeln!(out, "padding {:?}", a.padding);
    let _ = writeln!(out, "seed {}", model.seed);
    let _ = writeln!(out, "feature_min {}", join(&n.features.min));
    let _ = writeln!(out, "feature_max {}", join(&n.features.max));
    let _ = writeln!(out, "v_mean_range {:?} {:?}", n.v_mean.0, n.v_mean.1);
    let _ = writeln!(out, "target_range {:?} {:?}", n.target.0, n.target.1);
    let _ = writeln!(out, "params {}", model.store.len());
    for id in model.store.ids() {
        let t = model.store.get(id);
        let _ = writeln!(out, "param {} {} {}", model.store.name(id), t.rows(), t.cols());
        let _ = writeln!(out, "{}", join(t.data()));
    }
    out
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    src: &'a str,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let (n, l) = self
            .iter
            .next()
            .ok_or_else(|| Error::parse(self.src, self.line + 1, "unexpected end of file"))?;
        self.line = n + 1;
        Ok(l)
    }

    fn err(&self, msg: impl ToString) -> Error {
        Error::parse(self.src, self.line, msg)
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ if l == key => Ok(""),
            _ => Err(self.err(format!("expected '{key}'"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for '{key}'")))
    }

    fn list<T: std::str::FromStr>(&self, v: &str) -> Result<Vec<T>> {
        v.split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err(format!("bad number '{t}'"))))
            .collect()
    }

    fn pair(&mut self, key: &str) -> Result<(f64, f64)> {
        let v = self.field(key)?;
        match self.list::<f64>(v)?.as_slice() {
            &[a, b] => Ok((a, b)),
            _ => Err(self.err(format!("'{key}' needs two values"))),
        }
    }
}

pub fn parse_checkpoint<S: Scalar>(text: &str, src: &str) -> Result<LcfModel<S>> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        src,
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(lines.err("not a model checkpoint"));
    }
    let scalar = lines.field("scalar")?;
    if scalar != S::NAME {
        return Err(lines.err(format!("checkpoint holds {scalar}, expected {}", S::NAME)));
    }
    let variant: Variant = lines.parsed("variant")?;
    let output: OutputType = lines.parsed("output")?;
    let features = lines.parsed("features")?;
    let hidden = lines.parsed("hidden")?;
    let heads = lines.parsed("heads")?;
    let history = lines.parsed("history")?;
    let fc_text = lines.field("fc")?;
    let fc = lines.list(fc_text)?;
    let attention_slope = lines.parsed("attention_slope")?;
    let padding = lines.parsed("padding")?;
    let seed = lines.parsed("seed")?;
    let arch = ArchConfig {
        variant,
        output,
        features,
        hidden,
        heads,
        history,
        fc,
        attention_slope,
        padding,
    };
    let min_text = lines.field("feature_min")?;
    let min = lines.list(min_text)?;
    let max_text = lines.field("feature_max")?;
    let max = lines.list(max_text)?;
    if min.len() != features || max.len() != features {
        return Err(lines.err("feature statistics do not match the feature count"));
    }
    let v_mean = lines.pair("v_mean_range")?;
    let target = lines.pair("target_range")?;

    let mut model = LcfModel::<S>::new(arch, seed)?;
    model.norm = Normalization {
        features: MinMax { min, max },
        v_mean,
        target,
    };
    let count: usize = lines.parsed("params")?;
    if count != model.store.len() {
        return Err(lines.err(format!(
            "{count} parameters, the architecture declares {}",
            model.store.len()
        )));
    }
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let head = lines.field("param")?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        let expected = model.store.get(id).shape();
        let shape = match toks.as_slice() {
            [name, r, c] if *name == model.store.name(id) => (r.parse().ok(), c.parse().ok()),
            _ => return Err(lines.err(format!("expected parameter '{}'", model.store.name(id)))),
        };
        if shape != (Some(expected.0), Some(expected.1)) {
            return Err(lines.err(format!("shape of '{}' differs", model.store.name(id))));
        }
        let values = lines.next()?;
        let data: Vec<S> = lines.list(values)?;
        *model.store.get_mut(id) = Tensor::from_vec(expected.0, expected.1, data)
            .map_err(|_| lines.err("wrong number of values"))?;
    }
    Ok(model)
}

pub fn save_checkpoint<S: Scalar>(model: &LcfModel<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> Result<LcfModel<S>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, &path.display().to_string())
}
