//! Shell command spawning shared by the codec plug point and the detector
//! adapter.

use std::process::Command;

/// Builds a command that runs `line` through the platform shell.
pub fn shell_command(line: &str) -> Command {
    #[cfg(windows)]
    {
        let mut cmd = Command::new("cmd");
        cmd.arg("/C").arg(line);
        cmd
    }
    #[cfg(not(windows))]
    {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(line);
        cmd
    }
}
