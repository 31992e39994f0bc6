mod correct;
mod eval;
mod prep;
mod synth;
mod train;

pub use correct::correct;
pub use eval::{ari_report, eval_retrieval, eval_seg};
pub use prep::prep;
pub use synth::synth;
pub use train::{finetune, train};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use segtool::corpus::Instance;
use segtool::{Result, SegError};

pub(crate) fn open_reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| SegError::data(format!("cannot open {}: {e}", path.display())))
}

pub(crate) fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| SegError::data(format!("cannot create {}: {e}", path.display())))
}

pub(crate) fn load_instances(path: &Path) -> Result<Vec<Instance>> {
    segtool::corpus::read_instances(open_reader(path)?)
}

pub(crate) fn store_instances(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut writer = create_writer(path)?;
    segtool::corpus::write_instances(&mut writer, instances)?;
    writer.flush()?;
    Ok(())
}

pub(crate) fn write_json_report<T: serde::Serialize>(path: &Path, report: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| SegError::data(format!("serialize report: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}
