//! Shell command execution with a hard timeout and merged, bounded logs.

use std::io::{Read, Seek, SeekFrom};
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// Upper bound on how much of a log is read back for parsing.
pub const PARSE_LIMIT: u64 = 64 << 20;

#[derive(Debug, Clone)]
pub struct CommandOutput {
    /// Exit code; `None` when killed by a signal (including our timeout).
    pub code: Option<i32>,
    pub timed_out: bool,
    /// Merged stdout+stderr, possibly head/tail-trimmed at [`PARSE_LIMIT`].
    pub log: String,
    pub duration: Duration,
}

impl CommandOutput {
    pub fn success(&self) -> bool {
        self.code == Some(0) && !self.timed_out
    }
}

/// Run `cmd` through `sh -c` in `cwd`, in its own process group so a timeout
/// kills the whole tree.
pub fn run_shell(
    cmd: &str,
    cwd: &Path,
    env: &[(String, String)],
    timeout: Option<Duration>,
) -> std::io::Result<CommandOutput> {
    let mut log_file = tempfile::tempfile()?;
    let mut command = Command::new("sh");
    command
        .arg("-c")
        .arg(cmd)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(log_file.try_clone()?)
        .stderr(log_file.try_clone()?)
        .process_group(0);
    for (k, v) in env {
        command.env(k, v);
    }
    let started = Instant::now();
    let mut child = command.spawn()?;
    let pgid = child.id() as libc::pid_t;

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if timeout.is_some_and(|t| started.elapsed() >= t) {
            timed_out = true;
            kill_group(pgid);
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    // Stray background processes left by the command would keep writing.
    kill_group(pgid);
    let duration = started.elapsed();

    log_file.seek(SeekFrom::Start(0))?;
    let len = log_file.metadata()?.len();
    let log = if len <= PARSE_LIMIT {
        let mut buf = Vec::with_capacity(len as usize);
        log_file.read_to_end(&mut buf)?;
        String::from_utf8_lossy(&buf).into_owned()
    } else {
        let half = PARSE_LIMIT / 2;
        let mut head = vec![0; half as usize];
        log_file.read_exact(&mut head)?;
        log_file.seek(SeekFrom::Start(len - half))?;
        let mut tail = vec![0; half as usize];
        log_file.read_exact(&mut tail)?;
        format!(
            "{}\n[... {} bytes omitted ...]\n{}",
            String::from_utf8_lossy(&head),
            len - 2 * half,
            String::from_utf8_lossy(&tail)
        )
    };
    Ok(CommandOutput { code: status.code(), timed_out, log, duration })
}

fn kill_group(pgid: libc::pid_t) {
    // SAFETY: plain syscall; a stale group id just yields ESRCH.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

/// Keep at most `limit` bytes of `log`: the head and the tail, with a marker
/// in between. Cuts land on char boundaries.
pub fn bounded_excerpt(log: &str, limit: usize) -> String {
    if log.len() <= limit {
        return log.to_string();
    }
    let marker = format!("\n[... {} bytes omitted ...]\n", log.len() - limit);
    let keep = limit.saturating_sub(marker.len());
    let mut head_end = keep / 2;
    while !log.is_char_boundary(head_end) {
        head_end -= 1;
    }
    let mut tail_start = log.len() - (keep - keep / 2);
    while !log.is_char_boundary(tail_start) {
        tail_start += 1;
    }
    format!("{}{}{}", &log[..head_end], marker, &log[tail_start..])
}

/// Parse `KEY=VALUE` pairs.
pub fn parse_env_pairs(pairs: &[String]) -> Result<Vec<(String, String)>, String> {
    pairs
        .iter()
        .map(|p| match p.split_once('=') {
            Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
            _ => Err(format!("expected KEY=VALUE, got `{p}`")),
        })
        .collect()
}
