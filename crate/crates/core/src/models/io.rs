//! The `MGTM` model container: magic, format version, kind tag, an opaque
//! config block, the parameter blocks, and a trailing CRC32.
//!
//! Linear and ensemble models share the container and are distinguished by
//! the kind tag. Round-tripping a model reproduces its predictions
//! bit-exactly; corrupt or truncated files are rejected without yielding a
//! partial model.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::{LinearModel, Model, Tree, TreeEnsemble, TreeNode};
use crate::binio::{BinReader, BinWriter};
use crate::corpus::TaskLabel;
use crate::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"MGTM";
pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const KIND_LINEAR: u8 = 1;
pub const KIND_ENSEMBLE: u8 = 2;

fn label_tag(label: TaskLabel) -> u8 {
    match label {
        TaskLabel::Generated => 0,
        TaskLabel::Human => 1,
        TaskLabel::A => 2,
        TaskLabel::B => 3,
        TaskLabel::C => 4,
        TaskLabel::D => 5,
        TaskLabel::E => 6,
        TaskLabel::F => 7,
    }
}

fn label_from_tag(tag: u8) -> Result<TaskLabel> {
    Ok(match tag {
        0 => TaskLabel::Generated,
        1 => TaskLabel::Human,
        2 => TaskLabel::A,
        3 => TaskLabel::B,
        4 => TaskLabel::C,
        5 => TaskLabel::D,
        6 => TaskLabel::E,
        7 => TaskLabel::F,
        other => return Err(Error::Format(format!("unknown label tag {other}"))),
    })
}

fn write_classes<W: std::io::Write>(w: &mut BinWriter<W>, classes: &[TaskLabel]) -> Result<()> {
    w.u32(classes.len() as u32)?;
    for c in classes {
        w.u8(label_tag(*c))?;
    }
    Ok(())
}

fn read_classes<R: std::io::Read>(r: &mut BinReader<R>) -> Result<Vec<TaskLabel>> {
    let k = r.u32()? as usize;
    if k == 0 || k > 64 {
        return Err(Error::Format(format!("implausible class count {k}")));
    }
    (0..k).map(|_| label_from_tag(r.u8()?)).collect()
}

/// Saves a model with an empty config block.
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    save_model_with_meta(model, &[], path)
}

/// Saves a model, embedding `meta` as the container's config block. The
/// whole container is buffered and written in one call, so a failed save
/// never leaves a syntactically valid prefix behind.
pub fn save_model_with_meta(model: &Model, meta: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BinWriter::with_crc(Vec::new());
    w.raw(&MODEL_MAGIC)?;
    w.u32(MODEL_FORMAT_VERSION)?;
    match model {
        Model::Linear(_) => w.u8(KIND_LINEAR)?,
        Model::Ensemble(_) => w.u8(KIND_ENSEMBLE)?,
    }
    w.bytes(meta)?;
    match model {
        Model::Linear(m) => write_linear(&mut w, m)?,
        Model::Ensemble(m) => write_ensemble(&mut w, m)?,
    }
    let buf = w.finish_crc()?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Loads a model, discarding the config block.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    load_model_with_meta(path).map(|(model, _)| model)
}

/// Loads a model together with the container's config block.
pub fn load_model_with_meta(path: impl AsRef<Path>) -> Result<(Model, Vec<u8>)> {
    let file = File::open(path)?;
    let mut r = BinReader::with_crc(BufReader::new(file));
    let magic = r.raw(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format("bad magic bytes (not an MGTM model file)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {version} (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let kind = r.u8()?;
    let meta = r.bytes()?;
    let model = match kind {
        KIND_LINEAR => Model::Linear(read_linear(&mut r)?),
        KIND_ENSEMBLE => Model::Ensemble(read_ensemble(&mut r)?),
        other => return Err(Error::Format(format!("unknown model kind tag {other}"))),
    };
    r.verify_crc()?;
    r.expect_eof()?;
    Ok((model, meta))
}

fn write_linear<W: std::io::Write>(w: &mut BinWriter<W>, m: &LinearModel) -> Result<()> {
    write_classes(w, &m.classes)?;
    w.u32(m.dim as u32)?;
    w.f64(m.l2_lambda)?;
    w.f64_seq(&m.train_log)?;
    w.f64_seq(&m.weights)?;
    w.f64_seq(&m.bias)?;
    Ok(())
}

fn read_linear<R: std::io::Read>(r: &mut BinReader<R>) -> Result<LinearModel> {
    let classes = read_classes(r)?;
    let dim = r.u32()? as usize;
    let l2_lambda = r.f64()?;
    let train_log = r.f64_seq()?;
    let weights = r.f64_seq()?;
    let bias = r.f64_seq()?;
    if weights.len() != classes.len() * dim || bias.len() != classes.len() {
        return Err(Error::Format("linear parameter block has wrong shape".into()));
    }
    Ok(LinearModel {
        classes,
        weights,
        bias,
        dim,
        l2_lambda,
        train_log,
    })
}

fn write_ensemble<W: std::io::Write>(w: &mut BinWriter<W>, m: &TreeEnsemble) -> Result<()> {
    write_classes(w, &m.classes)?;
    w.u32(m.dim as u32)?;
    w.f64(m.learning_rate)?;
    w.f64(m.l2_lambda)?;
    w.f64(m.gamma)?;
    w.u32(m.max_depth as u32)?;
    w.f64(m.min_child_weight)?;
    w.f64(m.base_score)?;
    w.f64_seq(&m.train_log)?;
    w.u32(m.rounds.len() as u32)?;
    for round in &m.rounds {
        for tree in round {
            w.u32(tree.nodes.len() as u32)?;
            for node in &tree.nodes {
                match node {
                    TreeNode::Leaf { value } => {
                        w.u8(0)?;
                        w.f64(*value)?;
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        w.u8(1)?;
                        w.u32(*feature as u32)?;
                        w.f64(*threshold)?;
                        w.u32(*left)?;
                        w.u32(*right)?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn read_ensemble<R: std::io::Read>(r: &mut BinReader<R>) -> Result<TreeEnsemble> {
    let classes = read_classes(r)?;
    let dim = r.u32()? as usize;
    let learning_rate = r.f64()?;
    let l2_lambda = r.f64()?;
    let gamma = r.f64()?;
    let max_depth = r.u32()? as usize;
    let min_child_weight = r.f64()?;
    let base_score = r.f64()?;
    let train_log = r.f64_seq()?;
    let n_rounds = r.u32()? as usize;
    if n_rounds > (1 << 24) {
        return Err(Error::Format(format!("implausible round count {n_rounds}")));
    }
    let mut rounds = Vec::with_capacity(n_rounds);
    for _ in 0..n_rounds {
        let mut round = Vec::with_capacity(classes.len());
        for _ in 0..classes.len() {
            round.push(read_tree(r, dim)?);
        }
        rounds.push(round);
    }
    Ok(TreeEnsemble {
        classes,
        rounds,
        learning_rate,
        l2_lambda,
        gamma,
        max_depth,
        min_child_weight,
        base_score,
        dim,
        train_log,
    })
}

fn read_tree<R: std::io::Read>(r: &mut BinReader<R>, dim: usize) -> Result<Tree> {
    let count = r.u32()? as usize;
    if count == 0 || count > (1 << 26) {
        return Err(Error::Format(format!("implausible tree node count {count}")));
    }
    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let node = match r.u8()? {
            0 => TreeNode::Leaf { value: r.f64()? },
            1 => {
                let feature = r.u32()? as usize;
                let threshold = r.f64()?;
                let left = r.u32()?;
                let right = r.u32()?;
                if feature >= dim || left as usize >= count || right as usize >= count {
                    return Err(Error::Format("tree node references out of range".into()));
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                }
            }
            other => return Err(Error::Format(format!("unknown tree node tag {other}"))),
        };
        nodes.push(node);
    }
    Ok(Tree { nodes })
}
