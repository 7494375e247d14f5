//! Files written next to a checkpoint: `CKPT.vocab` (entity and relation
//! names in id order), `CKPT.meta` (the resolved config plus the training
//! file) and `CKPT.trace.tsv`.

use std::fs;
use std::path::{Path, PathBuf};

use logicenn::{KnowledgeGraph, TrainingConfig};

use crate::Failure;

fn with_suffix(ckpt: &Path, suffix: &str) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn vocab_path(ckpt: &Path) -> PathBuf {
    with_suffix(ckpt, ".vocab")
}

pub fn meta_path(ckpt: &Path) -> PathBuf {
    with_suffix(ckpt, ".meta")
}

pub fn trace_path(ckpt: &Path) -> PathBuf {
    with_suffix(ckpt, ".trace.tsv")
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| crate::io_failure(path, e))
}

pub fn write_vocab(path: &Path, kg: &KnowledgeGraph) -> Result<(), Failure> {
    let mut text = String::new();
    for name in kg.entities().names() {
        text.push_str("entity\t");
        text.push_str(name);
        text.push('\n');
    }
    for name in kg.relations().names() {
        text.push_str("relation\t");
        text.push_str(name);
        text.push('\n');
    }
    write(path, &text)
}

/// A graph with the checkpoint's vocabulary interned in id order and no triples.
pub fn read_vocab(path: &Path) -> Result<KnowledgeGraph, Failure> {
    let mut kg = KnowledgeGraph::new();
    for (i, line) in read(path)?.lines().enumerate() {
        let bad = || Failure::Data(format!("{}:{}: expected `entity|relation<TAB>name`", path.display(), i + 1));
        let (tag, name) = line.split_once('\t').ok_or_else(bad)?;
        match tag {
            "entity" => {
                kg.intern_entity(name);
            }
            "relation" => {
                kg.intern_relation(name);
            }
            _ => return Err(bad()),
        }
    }
    Ok(kg)
}

const TRAIN_KEY: &str = "# train = ";

pub fn write_meta(path: &Path, config: &TrainingConfig, train: &Path) -> Result<(), Failure> {
    let train = fs::canonicalize(train).unwrap_or_else(|_| train.to_path_buf());
    let text = format!("{TRAIN_KEY}{}\n{}", train.display(), config.to_text());
    write(path, &text)
}

/// The config used for training and, when recorded, the training file.
pub fn read_meta(path: &Path) -> Result<(TrainingConfig, Option<PathBuf>), Failure> {
    let text = read(path)?;
    let train = text.lines().find_map(|l| l.strip_prefix(TRAIN_KEY)).map(PathBuf::from);
    let config = TrainingConfig::from_text(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok((config, train))
}
