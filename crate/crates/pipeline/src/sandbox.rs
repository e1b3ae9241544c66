//! Runs student code in a resource-limited subprocess.

use std::io;
use std::process::Stdio;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncRead, AsyncReadExt};
use tokio::process::Command;

use crate::trace::{Call, CallLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    Error,
    Timeout,
    SandboxFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub stdout: String,
    pub stderr: String,
    pub exit_status: ExitStatus,
    pub wall_time: Duration,
}

impl ExecutionResult {
    pub fn sandbox_failure(reason: impl Into<String>, wall_time: Duration) -> Self {
        Self {
            stdout: String::new(),
            stderr: reason.into(),
            exit_status: ExitStatus::SandboxFailure,
            wall_time,
        }
    }

    /// Text handed to the fix prompt. `None` when the run told us nothing.
    pub fn describe(&self) -> Option<String> {
        let mut text = String::new();
        match self.exit_status {
            ExitStatus::SandboxFailure => return None,
            ExitStatus::Ok | ExitStatus::Error => {}
            ExitStatus::Timeout => text.push_str(&format!(
                "[stopped after {:.0} s without finishing]\n",
                self.wall_time.as_secs_f64()
            )),
        }
        if !self.stdout.is_empty() {
            text.push_str(&self.stdout);
            if !self.stdout.ends_with('\n') {
                text.push('\n');
            }
        }
        if !self.stderr.is_empty() {
            text.push_str(&self.stderr);
        }
        if text.is_empty() {
            text.push_str("[no output]");
        }
        Some(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    #[serde(rename = "wall_time_ms", with = "millis")]
    pub wall_time: Duration,
    pub memory_bytes: u64,
    pub network: bool,
    /// Per stream; anything beyond is dropped.
    pub output_bytes: usize,
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            wall_time: Duration::from_secs(5),
            memory_bytes: 256 * 1024 * 1024,
            network: false,
            output_bytes: 64 * 1024,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Runs code. Never fails: problems are reported through `exit_status`.
#[async_trait]
pub trait CodeExecutor: Send + Sync {
    async fn execute(&self, code: &str, limits: &ExecLimits) -> ExecutionResult;
}

const SANDBOX_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

/// Spawns an interpreter on a temp file with a cleared environment, rlimits,
/// its own process group and (unless allowed) an empty network namespace.
#[derive(Debug, Clone)]
pub struct ProcessSandbox {
    program: String,
    args: Vec<String>,
    file_name: String,
}

impl Default for ProcessSandbox {
    fn default() -> Self {
        Self::new(vec!["python3".into()])
    }
}

impl ProcessSandbox {
    /// `command` is the interpreter and its leading arguments; the script
    /// path is appended.
    pub fn new(command: Vec<String>) -> Self {
        let mut parts = command.into_iter();
        let program = parts.next().unwrap_or_else(|| "python3".into());
        Self {
            program,
            args: parts.collect(),
            file_name: "main.py".into(),
        }
    }

    pub fn with_file_name(mut self, name: impl Into<String>) -> Self {
        self.file_name = name.into();
        self
    }

    async fn run(
        &self,
        code: &str,
        limits: &ExecLimits,
        started: Instant,
    ) -> io::Result<ExecutionResult> {
        let dir = tempfile::tempdir()?;
        let script = dir.path().join(&self.file_name);
        tokio::fs::write(&script, code).await?;

        let mut command = Command::new(&self.program);
        command
            .args(&self.args)
            .arg(&script)
            .current_dir(dir.path())
            .env_clear()
            .env("PATH", SANDBOX_PATH)
            .env("HOME", dir.path())
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0)
            .kill_on_drop(true);
        let memory = limits.memory_bytes;
        let cpu_secs = limits.wall_time.as_secs() + 1;
        let isolate = !limits.network;
        // SAFETY: the closure runs between fork and exec and only makes
        // async-signal-safe libc calls.
        unsafe {
            command.pre_exec(move || confine(memory, cpu_secs, isolate));
        }

        let mut child = command.spawn()?;
        let pid = child.id();
        let stdout = tokio::spawn(read_capped(child.stdout.take(), limits.output_bytes));
        let stderr = tokio::spawn(read_capped(child.stderr.take(), limits.output_bytes));

        let status = match tokio::time::timeout(limits.wall_time, child.wait()).await {
            Ok(status) => Some(status?),
            Err(_) => {
                if let Some(pid) = pid {
                    // SAFETY: plain syscall; the group id is our child's pid.
                    unsafe {
                        libc::kill(-(pid as i32), libc::SIGKILL);
                    }
                }
                child.wait().await?;
                None
            }
        };
        let wall_time = started.elapsed().min(limits.wall_time);

        // A grandchild that left the group could hold the pipes open.
        let grace = Duration::from_millis(500);
        let collect = |handle: tokio::task::JoinHandle<Vec<u8>>| async move {
            match tokio::time::timeout(grace, handle).await {
                Ok(Ok(bytes)) => String::from_utf8_lossy(&bytes).into_owned(),
                _ => String::new(),
            }
        };
        let stdout = collect(stdout).await;
        let stderr = collect(stderr).await;

        let exit_status = match status {
            None => ExitStatus::Timeout,
            Some(s) if s.success() => ExitStatus::Ok,
            Some(_) => ExitStatus::Error,
        };
        Ok(ExecutionResult {
            stdout,
            stderr,
            exit_status,
            wall_time,
        })
    }
}

fn confine(memory: u64, cpu_secs: u64, isolate_network: bool) -> io::Result<()> {
    let limit = |resource, value: u64| {
        let lim = libc::rlimit {
            rlim_cur: value as libc::rlim_t,
            rlim_max: value as libc::rlim_t,
        };
        // SAFETY: valid pointer to a stack value.
        if unsafe { libc::setrlimit(resource, &lim) } != 0 {
            return Err(io::Error::last_os_error());
        }
        Ok(())
    };
    limit(libc::RLIMIT_AS, memory)?;
    limit(libc::RLIMIT_CPU, cpu_secs)?;
    limit(libc::RLIMIT_CORE, 0)?;
    limit(libc::RLIMIT_FSIZE, 16 * 1024 * 1024)?;
    if isolate_network {
        // SAFETY: unshare only affects the calling (child) process.
        let ok = unsafe { libc::unshare(libc::CLONE_NEWNET) } == 0
            || unsafe { libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) } == 0;
        if !ok {
            return Err(io::Error::last_os_error());
        }
    }
    Ok(())
}

async fn read_capped<R: AsyncRead + Unpin>(stream: Option<R>, cap: usize) -> Vec<u8> {
    let Some(mut stream) = stream else {
        return Vec::new();
    };
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match stream.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
    }
    kept
}

#[async_trait]
impl CodeExecutor for ProcessSandbox {
    async fn execute(&self, code: &str, limits: &ExecLimits) -> ExecutionResult {
        let started = Instant::now();
        match self.run(code, limits, started).await {
            Ok(result) => result,
            Err(e) => ExecutionResult::sandbox_failure(
                format!("sandbox could not run the code: {e}"),
                started.elapsed(),
            ),
        }
    }
}

/// Wraps an executor and records each call.
#[derive(Debug, Clone)]
pub struct RecordingExecutor<E> {
    inner: E,
    log: CallLog,
}

impl<E> RecordingExecutor<E> {
    pub fn new(inner: E, log: CallLog) -> Self {
        Self { inner, log }
    }
}

#[async_trait]
impl<E: CodeExecutor> CodeExecutor for RecordingExecutor<E> {
    async fn execute(&self, code: &str, limits: &ExecLimits) -> ExecutionResult {
        self.log.push(Call::Execute);
        self.inner.execute(code, limits).await
    }
}

/// Returns a fixed result without running anything.
#[derive(Debug, Clone)]
pub struct CannedExecutor(pub ExecutionResult);

#[async_trait]
impl CodeExecutor for CannedExecutor {
    async fn execute(&self, _code: &str, _limits: &ExecLimits) -> ExecutionResult {
        self.0.clone()
    }
}
