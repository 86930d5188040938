pub mod gen;
pub mod recon;
pub mod report;
pub mod train;
pub mod verify;

use crate::config::RunConfig;
use crate::Common;
use aftnet::Result;

/// File settings first, then explicit flags, then `--set` overrides.
pub fn load(common: &Common, keys: &'static [&'static str], flags: impl FnOnce(&mut RunConfig) -> Result<()>) -> Result<RunConfig> {
    let mut c = RunConfig::new(keys);
    if let Some(p) = &common.config {
        c.load_file(p)?;
    }
    flags(&mut c)?;
    c.apply_overrides(&common.overrides)?;
    Ok(c)
}
