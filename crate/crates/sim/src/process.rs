use std::fs::File;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::SimError;

pub(crate) struct Finished {
    pub success: bool,
    pub output: String,
}

/// Run `cmd` in `dir` with stdout and stderr captured to `log`, killing it
/// once `timeout` elapses.
pub(crate) fn run_logged(
    mut cmd: Command,
    dir: &Path,
    log: &Path,
    timeout: Duration,
    stage: &str,
) -> Result<Finished, SimError> {
    let out = File::create(log).map_err(|e| SimError::workdir(log, e))?;
    let err = out.try_clone().map_err(|e| SimError::workdir(log, e))?;
    cmd.current_dir(dir)
        .stdin(Stdio::null())
        .stdout(Stdio::from(out))
        .stderr(Stdio::from(err));
    log::debug!("{stage}: {cmd:?}");
    let mut child = cmd
        .spawn()
        .map_err(|e| SimError::ToolUnavailable(format!("cannot start {:?}: {e}", cmd.get_program())))?;
    let status = match child.wait_timeout(timeout).map_err(|e| SimError::workdir(dir, e))? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SimError::Timeout {
                stage: stage.to_string(),
                seconds: timeout.as_secs_f64(),
            });
        }
    };
    let bytes = std::fs::read(log).map_err(|e| SimError::workdir(log, e))?;
    Ok(Finished {
        success: status.success(),
        output: String::from_utf8_lossy(&bytes).into_owned(),
    })
}
