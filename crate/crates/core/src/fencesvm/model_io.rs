//! Plain-text model files:
//!
//! ```text
//! DEFENCE-SVM v1
//! gamma <float>
//! bias <float>
//! window <w> <h>
//! nsv <count>
//! <coef> <v_1> ... <v_n>      (one line per support vector)
//! ```
//!
//! Floats use the shortest representation that parses back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fencesvm::hog::HogConfig;
use crate::fencesvm::svm::SvmModel;
use crate::imgcore::io::write_bytes_atomic;

pub const MODEL_MAGIC: &str = "DEFENCE-SVM v1";

pub fn encode_model(model: &SvmModel) -> String {
    let mut s = String::new();
    writeln!(s, "{MODEL_MAGIC}").unwrap();
    writeln!(s, "gamma {}", model.gamma).unwrap();
    writeln!(s, "bias {}", model.bias).unwrap();
    writeln!(s, "window {} {}", model.window.0, model.window.1).unwrap();
    writeln!(s, "nsv {}", model.support_vectors.len()).unwrap();
    for (sv, c) in model.support_vectors.iter().zip(&model.dual_coefs) {
        write!(s, "{c}").unwrap();
        for v in sv {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn decode_model(text: &str, path: &Path) -> Result<SvmModel> {
    let bad = |msg: String| Error::format(path, msg);
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| bad(format!("missing {what} line")))
    };
    let (_, magic) = next("header")?;
    if magic.trim() != MODEL_MAGIC {
        return Err(bad(format!("expected header `{MODEL_MAGIC}`, found `{}`", magic.trim())));
    }
    let mut keyed = |key: &str, arity: usize| -> Result<Vec<String>> {
        let (n, line) = next(key)?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(format!("line {}: expected `{key}`", n + 1)));
        }
        let rest: Vec<String> = parts.map(str::to_owned).collect();
        if rest.len() != arity {
            return Err(bad(format!("line {}: `{key}` takes {arity} value(s)", n + 1)));
        }
        Ok(rest)
    };
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("bad number `{s}`")))
    };
    let int = |s: &str| -> Result<usize> { s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`"))) };

    let gamma = num(&keyed("gamma", 1)?[0])?;
    let bias = num(&keyed("bias", 1)?[0])?;
    let win = keyed("window", 2)?;
    let window = (int(&win[0])?, int(&win[1])?);
    let nsv = int(&keyed("nsv", 1)?[0])?;
    if !(gamma > 0.0) {
        return Err(bad("gamma must be positive".into()));
    }
    let dim = HogConfig::with_window(window.0, window.1)
        .map_err(|e| bad(e.to_string()))?
        .descriptor_len();

    let mut support_vectors = Vec::with_capacity(nsv);
    let mut dual_coefs = Vec::with_capacity(nsv);
    for (n, line) in lines.by_ref().take(nsv) {
        let vals: Vec<f64> = line.split_whitespace().map(num).collect::<Result<_>>()?;
        if vals.len() != dim + 1 {
            return Err(bad(format!(
                "line {}: expected {} values, found {}",
                n + 1,
                dim + 1,
                vals.len()
            )));
        }
        dual_coefs.push(vals[0]);
        support_vectors.push(vals[1..].to_vec());
    }
    if support_vectors.len() != nsv {
        return Err(bad(format!("expected {nsv} support vectors, found {}", support_vectors.len())));
    }
    if nsv == 0 {
        return Err(bad("model has no support vectors".into()));
    }
    if lines.any(|(_, l)| !l.trim().is_empty()) {
        return Err(bad("trailing data after support vectors".into()));
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias,
        gamma,
        window,
    })
}

pub fn write_model(path: impl AsRef<Path>, model: &SvmModel) -> Result<()> {
    write_bytes_atomic(path, encode_model(model).as_bytes())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_model(&text, path)
}
