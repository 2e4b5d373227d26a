//! Versioned, field-tagged textual checkpoint format.
//!
//! Layout: a magic/version line, header fields (core kind, window size,
//! routing threshold, skip period, layer dimensions), then named parameter
//! blocks as flat row-major number arrays, then an `end` sentinel. Numbers
//! are written in shortest round-trip decimal form, so save -> load -> save
//! produces byte-identical files and bit-identical model outputs.
//!
//! Field names are part of the format; loaders reject unknown fields.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{CheckpointError, Error, Result};
use crate::model::{Core, CoreKind, SendalModel};
use crate::nn::lstm::RecurrentGate;
use crate::nn::matrix::Matrix;
use crate::scalar::Scalar;

const MAGIC: &str = "sendal-checkpoint";
const VERSION: &str = "v1";

fn write_block<T: Scalar, W: Write>(w: &mut W, name: &str, rows: usize, cols: usize, data: &[T]) -> Result<()> {
    debug_assert_eq!(data.len(), rows * cols);
    if cols == 1 && rows != 1 {
        writeln!(w, "param {name} {rows}")?;
    } else {
        writeln!(w, "param {name} {rows} {cols}")?;
    }
    let mut line = String::new();
    for (i, v) in data.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        line.push_str(&format!("{v}"));
    }
    writeln!(w, "{line}")?;
    Ok(())
}

fn write_gate<T: Scalar, W: Write>(w: &mut W, prefix: &str, gate: &RecurrentGate<T>) -> Result<()> {
    write_block(w, &format!("{prefix}.w"), gate.w.rows, gate.w.cols, &gate.w.data)?;
    write_block(w, &format!("{prefix}.u"), gate.u.rows, gate.u.cols, &gate.u.data)?;
    write_block(w, &format!("{prefix}.b"), gate.b.len(), 1, &gate.b)?;
    Ok(())
}

pub fn save_checkpoint<T: Scalar>(model: &SendalModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "core_kind {}", model.core_kind())?;
    writeln!(w, "window_n {}", model.window_n)?;
    writeln!(w, "theta {}", model.theta)?;
    writeln!(w, "skip_period {}", model.skip_period)?;
    writeln!(w, "h_lin {}", model.linear.fc_in.out_dim())?;
    match &model.component.core {
        Core::Lstm(p) => {
            writeln!(w, "core_in {}", p.input_size)?;
            writeln!(w, "core_hidden {}", p.hidden_size)?;
        }
        Core::Gru(p) => {
            writeln!(w, "core_in {}", p.input_size)?;
            writeln!(w, "core_hidden {}", p.hidden_size)?;
        }
        Core::Attention(p) => {
            writeln!(w, "attn_model {}", p.model_size)?;
        }
    }

    let e = &model.embedding.linear;
    write_block(&mut w, "embedding.weight", e.weight.rows, e.weight.cols, &e.weight.data)?;
    write_block(&mut w, "embedding.bias", e.bias.len(), 1, &e.bias)?;
    let li = &model.linear.fc_in;
    write_block(&mut w, "linear.fc_in.weight", li.weight.rows, li.weight.cols, &li.weight.data)?;
    write_block(&mut w, "linear.fc_in.bias", li.bias.len(), 1, &li.bias)?;
    let lo = &model.linear.fc_out;
    write_block(&mut w, "linear.fc_out.weight", lo.weight.rows, lo.weight.cols, &lo.weight.data)?;
    write_block(&mut w, "linear.fc_out.bias", lo.bias.len(), 1, &lo.bias)?;
    let ci = &model.component.fc_in;
    write_block(&mut w, "component.fc_in.weight", ci.weight.rows, ci.weight.cols, &ci.weight.data)?;
    write_block(&mut w, "component.fc_in.bias", ci.bias.len(), 1, &ci.bias)?;
    match &model.component.core {
        Core::Lstm(p) => {
            write_gate(&mut w, "component.core.input_gate", &p.input_gate)?;
            write_gate(&mut w, "component.core.forget_gate", &p.forget_gate)?;
            write_gate(&mut w, "component.core.cell_gate", &p.cell_gate)?;
            write_gate(&mut w, "component.core.output_gate", &p.output_gate)?;
        }
        Core::Gru(p) => {
            write_gate(&mut w, "component.core.reset_gate", &p.reset_gate)?;
            write_gate(&mut w, "component.core.update_gate", &p.update_gate)?;
            write_gate(&mut w, "component.core.candidate", &p.candidate)?;
        }
        Core::Attention(p) => {
            write_block(&mut w, "component.core.wq", p.wq.rows, p.wq.cols, &p.wq.data)?;
            write_block(&mut w, "component.core.wk", p.wk.rows, p.wk.cols, &p.wk.data)?;
            write_block(&mut w, "component.core.wv", p.wv.rows, p.wv.cols, &p.wv.data)?;
            write_block(&mut w, "component.core.wo", p.wo.rows, p.wo.cols, &p.wo.data)?;
            write_block(
                &mut w,
                "component.core.positional",
                p.positional.rows,
                p.positional.cols,
                &p.positional.data,
            )?;
        }
    }
    let co = &model.component.fc_out;
    write_block(&mut w, "component.fc_out.weight", co.weight.rows, co.weight.cols, &co.weight.data)?;
    write_block(&mut w, "component.fc_out.bias", co.bias.len(), 1, &co.bias)?;
    writeln!(w, "end")?;
    w.flush()?;
    Ok(())
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
}

impl<'a> Reader<'a> {
    fn next_line(&mut self, expected: &str) -> Result<&'a str> {
        self.lines
            .next()
            .ok_or_else(|| CheckpointError::Truncated(expected.to_string()).into())
    }
}

fn ckpt_err(e: CheckpointError) -> Error {
    e.into()
}

fn parse_block<T: Scalar>(
    reader: &mut Reader<'_>,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Vec<T>> {
    let header = reader.next_line(&format!("param {name}"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("param") {
        return Err(ckpt_err(CheckpointError::Malformed(format!(
            "expected `param {name}`, got `{header}`"
        ))));
    }
    let got_name = parts
        .next()
        .ok_or_else(|| ckpt_err(CheckpointError::Malformed("param line missing name".into())))?;
    if got_name != name {
        return Err(ckpt_err(CheckpointError::UnknownField(got_name.to_string())));
    }
    let dims: Vec<usize> = parts
        .map(|p| {
            p.parse()
                .map_err(|_| ckpt_err(CheckpointError::Malformed(format!("bad dims for {name}"))))
        })
        .collect::<Result<_>>()?;
    let expect_dims: Vec<usize> = if cols == 1 && rows != 1 {
        vec![rows]
    } else {
        vec![rows, cols]
    };
    if dims != expect_dims {
        return Err(ckpt_err(CheckpointError::Malformed(format!(
            "{name}: dims {dims:?} do not match expected {expect_dims:?}"
        ))));
    }
    let data_line = reader.next_line(&format!("values for {name}"))?;
    let values: Vec<T> = data_line
        .split_whitespace()
        .map(|tok| {
            T::parse_str(tok).ok_or_else(|| {
                ckpt_err(CheckpointError::Malformed(format!("{name}: bad number `{tok}`")))
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(ckpt_err(CheckpointError::Truncated(format!(
            "{name}: {} values, expected {}",
            values.len(),
            rows * cols
        ))));
    }
    Ok(values)
}

fn parse_dense<T: Scalar>(
    reader: &mut Reader<'_>,
    prefix: &str,
    rows: usize,
    cols: usize,
) -> Result<crate::nn::dense::Dense<T>> {
    let weight = parse_block(reader, &format!("{prefix}.weight"), rows, cols)?;
    let bias = parse_block(reader, &format!("{prefix}.bias"), rows, 1)?;
    Ok(crate::nn::dense::Dense {
        weight: Matrix::from_vec(rows, cols, weight),
        bias,
    })
}

fn parse_gate<T: Scalar>(
    reader: &mut Reader<'_>,
    prefix: &str,
    hidden: usize,
    input: usize,
) -> Result<RecurrentGate<T>> {
    let w = parse_block(reader, &format!("{prefix}.w"), hidden, input)?;
    let u = parse_block(reader, &format!("{prefix}.u"), hidden, hidden)?;
    let b = parse_block(reader, &format!("{prefix}.b"), hidden, 1)?;
    Ok(RecurrentGate {
        w: Matrix::from_vec(hidden, input, w),
        u: Matrix::from_vec(hidden, hidden, u),
        b,
    })
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<SendalModel<T>> {
    let text = fs::read_to_string(path)?;
    let mut reader = Reader { lines: text.lines() };

    let first = reader.next_line("magic line")?;
    match first.split_once(' ') {
        Some((magic, version)) if magic == MAGIC => {
            if version != VERSION {
                return Err(ckpt_err(CheckpointError::VersionMismatch(version.to_string())));
            }
        }
        _ => {
            return Err(ckpt_err(CheckpointError::Malformed(
                "not a checkpoint file".into(),
            )))
        }
    }

    let mut core_kind: Option<CoreKind> = None;
    let mut window_n: Option<usize> = None;
    let mut theta: Option<f64> = None;
    let mut skip_period: Option<usize> = None;
    let mut h_lin: Option<usize> = None;
    let mut core_in: Option<usize> = None;
    let mut core_hidden: Option<usize> = None;
    let mut attn_model: Option<usize> = None;

    // Header fields run until the first `param` line. The param section is
    // order-fixed, so remember how many header lines we consumed and rebuild
    // the reader from there.
    let mut header_lines = 1usize;
    for line in text.lines().skip(1) {
        if line.starts_with("param ") {
            break;
        }
        header_lines += 1;
        let (key, value) = line.split_once(' ').ok_or_else(|| {
            ckpt_err(CheckpointError::Malformed(format!("bad header line `{line}`")))
        })?;
        let bad = |what: &str| ckpt_err(CheckpointError::Malformed(format!("bad {what}: `{value}`")));
        match key {
            "core_kind" => {
                core_kind = Some(value.parse().map_err(|_| {
                    ckpt_err(CheckpointError::UnknownCoreKind(value.to_string()))
                })?)
            }
            "window_n" => window_n = Some(value.parse().map_err(|_| bad("window_n"))?),
            "theta" => theta = Some(value.parse().map_err(|_| bad("theta"))?),
            "skip_period" => skip_period = Some(value.parse().map_err(|_| bad("skip_period"))?),
            "h_lin" => h_lin = Some(value.parse().map_err(|_| bad("h_lin"))?),
            "core_in" => core_in = Some(value.parse().map_err(|_| bad("core_in"))?),
            "core_hidden" => core_hidden = Some(value.parse().map_err(|_| bad("core_hidden"))?),
            "attn_model" => attn_model = Some(value.parse().map_err(|_| bad("attn_model"))?),
            other => return Err(ckpt_err(CheckpointError::UnknownField(other.to_string()))),
        }
    }

    let core_kind =
        core_kind.ok_or_else(|| ckpt_err(CheckpointError::Truncated("core_kind".into())))?;
    let window_n =
        window_n.ok_or_else(|| ckpt_err(CheckpointError::Truncated("window_n".into())))?;
    let theta = theta.ok_or_else(|| ckpt_err(CheckpointError::Truncated("theta".into())))?;
    let skip_period =
        skip_period.ok_or_else(|| ckpt_err(CheckpointError::Truncated("skip_period".into())))?;
    let h_lin = h_lin.ok_or_else(|| ckpt_err(CheckpointError::Truncated("h_lin".into())))?;

    let mut reader = Reader { lines: text.lines() };
    for _ in 0..header_lines {
        reader.next_line("header")?;
    }

    let embedding = crate::model::EmbeddingLayer {
        linear: parse_dense(&mut reader, "embedding", 1, window_n)?,
    };
    let linear = crate::model::LinearBranch {
        fc_in: parse_dense(&mut reader, "linear.fc_in", h_lin, window_n)?,
        fc_out: parse_dense(&mut reader, "linear.fc_out", 1, h_lin)?,
    };
    let (fc_in_dim, core) = match core_kind {
        CoreKind::Lstm | CoreKind::Gru => {
            let cin =
                core_in.ok_or_else(|| ckpt_err(CheckpointError::Truncated("core_in".into())))?;
            let ch = core_hidden
                .ok_or_else(|| ckpt_err(CheckpointError::Truncated("core_hidden".into())))?;
            let fc_in = parse_dense(&mut reader, "component.fc_in", cin, 1)?;
            let core = if core_kind == CoreKind::Lstm {
                Core::Lstm(crate::nn::lstm::LstmParams {
                    input_size: cin,
                    hidden_size: ch,
                    input_gate: parse_gate(&mut reader, "component.core.input_gate", ch, cin)?,
                    forget_gate: parse_gate(&mut reader, "component.core.forget_gate", ch, cin)?,
                    cell_gate: parse_gate(&mut reader, "component.core.cell_gate", ch, cin)?,
                    output_gate: parse_gate(&mut reader, "component.core.output_gate", ch, cin)?,
                })
            } else {
                Core::Gru(crate::nn::gru::GruParams {
                    input_size: cin,
                    hidden_size: ch,
                    reset_gate: parse_gate(&mut reader, "component.core.reset_gate", ch, cin)?,
                    update_gate: parse_gate(&mut reader, "component.core.update_gate", ch, cin)?,
                    candidate: parse_gate(&mut reader, "component.core.candidate", ch, cin)?,
                })
            };
            (fc_in, core)
        }
        CoreKind::Attention => {
            let d = attn_model
                .ok_or_else(|| ckpt_err(CheckpointError::Truncated("attn_model".into())))?;
            let fc_in = parse_dense(&mut reader, "component.fc_in", d, 1)?;
            let wq = parse_block(&mut reader, "component.core.wq", d, d)?;
            let wk = parse_block(&mut reader, "component.core.wk", d, d)?;
            let wv = parse_block(&mut reader, "component.core.wv", d, d)?;
            let wo = parse_block(&mut reader, "component.core.wo", d, d)?;
            let pos = parse_block(&mut reader, "component.core.positional", window_n, d)?;
            (
                fc_in,
                Core::Attention(crate::nn::attention::AttentionParams {
                    model_size: d,
                    wq: Matrix::from_vec(d, d, wq),
                    wk: Matrix::from_vec(d, d, wk),
                    wv: Matrix::from_vec(d, d, wv),
                    wo: Matrix::from_vec(d, d, wo),
                    positional: Matrix::from_vec(window_n, d, pos),
                }),
            )
        }
    };
    let core_out = core.output_size();
    let component = crate::model::ComponentBranch {
        fc_in: fc_in_dim,
        core,
        fc_out: parse_dense(&mut reader, "component.fc_out", 1, core_out)?,
    };
    let end = reader.next_line("end sentinel")?;
    if end != "end" {
        return Err(ckpt_err(CheckpointError::Malformed(format!(
            "expected `end`, got `{end}`"
        ))));
    }
    SendalModel::from_parts(embedding, linear, component, window_n, theta, skip_period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoreKind, ModelDims, SendalModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn windows(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..4.0)).collect())
            .collect()
    }

    #[test]
    fn round_trip_preserves_outputs_for_every_core() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [CoreKind::Lstm, CoreKind::Gru, CoreKind::Attention] {
            let model =
                SendalModel::<f64>::init(kind, &ModelDims::default(), 0.5, 1, 99).unwrap();
            let path = dir.path().join(format!("{kind}.ckpt"));
            save_checkpoint(&model, &path).unwrap();
            let loaded: SendalModel<f64> = load_checkpoint(&path).unwrap();
            for w in windows(20, 100, 7) {
                let (a, da) = model.top_down_infer(&w).unwrap();
                let (b, db) = loaded.top_down_infer(&w).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "{kind}");
                assert_eq!(da, db);
            }
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let model = SendalModel::<f64>::init(CoreKind::Gru, &ModelDims::default(), 0.5, 2, 4).unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        save_checkpoint(&model, &p1).unwrap();
        let loaded: SendalModel<f64> = load_checkpoint(&p1).unwrap();
        save_checkpoint(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn bumped_version_is_a_version_error() {
        let dir = tempfile::tempdir().unwrap();
        let model = SendalModel::<f64>::init(CoreKind::Lstm, &ModelDims::default(), 0.5, 1, 4).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("sendal-checkpoint v1", "sendal-checkpoint v2");
        std::fs::write(&path, text).unwrap();
        match load_checkpoint::<f64>(&path) {
            Err(crate::Error::Checkpoint(CheckpointError::VersionMismatch(v))) => {
                assert_eq!(v, "v2")
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn unknown_core_kind_is_its_own_error() {
        let dir = tempfile::tempdir().unwrap();
        let model = SendalModel::<f64>::init(CoreKind::Lstm, &ModelDims::default(), 0.5, 1, 4).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("core_kind lstm", "core_kind reformer");
        std::fs::write(&path, text).unwrap();
        match load_checkpoint::<f64>(&path) {
            Err(crate::Error::Checkpoint(CheckpointError::UnknownCoreKind(k))) => {
                assert_eq!(k, "reformer")
            }
            other => panic!("expected unknown core kind, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_a_truncation_error() {
        let dir = tempfile::tempdir().unwrap();
        let model = SendalModel::<f64>::init(CoreKind::Lstm, &ModelDims::default(), 0.5, 1, 4).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines.len() / 2;
        std::fs::write(&path, lines[..cut].join("\n")).unwrap();
        match load_checkpoint::<f64>(&path) {
            Err(crate::Error::Checkpoint(CheckpointError::Truncated(_))) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = SendalModel::<f64>::init(CoreKind::Lstm, &ModelDims::default(), 0.5, 1, 4).unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("h_lin 8", "h_lin 8\nmystery 42");
        std::fs::write(&path, text).unwrap();
        match load_checkpoint::<f64>(&path) {
            Err(crate::Error::Checkpoint(CheckpointError::UnknownField(f))) => {
                assert_eq!(f, "mystery")
            }
            other => panic!("expected unknown field, got {other:?}"),
        }
    }
}
